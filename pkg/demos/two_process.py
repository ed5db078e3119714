"""
A session over TCP
==================

Bob runs in his own process; Alice connects over localhost. The result is
byte-identical to the in-process run with the same seed.
"""

from timebin_qbc.protocol import ProtocolParams
from timebin_qbc.transport import AliceConfig, BobConfig, Channel, run_session

if __name__ == "__main__":
    params = ProtocolParams.build(100, 32, epsilon=0.02, seed=11)
    alice_cfg, bob_cfg = AliceConfig(params, bit=1), BobConfig(params, tau_hold=250)

    channel = Channel(mode="socket")
    alice_tr, bob_tr = run_session(alice_cfg, bob_cfg, channel)
    print("socket verdict:", bob_tr.verdict.value)

    local = run_session(alice_cfg, bob_cfg, Channel(latency_ticks=5))
    print("identical to in-process:", local[1].to_text() == bob_tr.to_text())
