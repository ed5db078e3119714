"""
Concealment and binding at finite n
===================================

Bob's best guess of the bit improves on 1/2 by ``1/(2 sqrt(n-1))``.
Alice's best two-way unveil success, found by optimization and certified
by a semidefinite program, grows as ``1 - 1/(2(n-1))`` at small n.
"""

from timebin_qbc.adversary import (
    OptimizerConfig,
    binding_upper_bound,
    bob_discrimination_attack,
    omega_attack,
    optimal_cheat_probability,
)

for n in (2, 5, 17, 65, 257):
    td, guess = bob_discrimination_attack(n)
    print(f"n={n:4d}  trace distance {td:.4f}  Bob guesses right with {guess:.4f}")

# the purification attack steers only into the bit-0 ensemble
print("omega attack (p0, p1, avg) at n=6:", omega_attack(6))

cfg = OptimizerConfig(restarts=16)
for n in (2, 3, 4, 5):
    res = optimal_cheat_probability(n, cfg)
    print(f"n={n}  optimized p_avg {res.p_avg:.6f}  SDP bound {binding_upper_bound(n):.6f}")
