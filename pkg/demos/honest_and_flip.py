"""
Honest unveil versus a flipped bit
==================================

Run the full commit, hold and unveil protocol twice with the same seed.
"""

from timebin_qbc.protocol import ProtocolParams, run_protocol

params = ProtocolParams.build(1000, 16, epsilon=0.05, seed=3)

# Alice commits 0 and unveils 0
honest = run_protocol(params, 0, 0, tau_hold=500)
print(honest.verdict.value, honest.n_correct, "correct of", params.s)

# Alice commits 0 but claims 1: D_1 never fires at t'_j except by detector error
flip = run_protocol(params, 0, 1, tau_hold=500)
print(flip.verdict.value, flip.n_correct, "correct of", params.s)

# the lost and flipped rounds of the honest run
lost = (honest.times == -1).sum()
print("lost:", lost, "flipped:", params.s - lost - honest.n_correct)
