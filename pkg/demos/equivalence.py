"""
Time-bin photons and the abstract commitment states
===================================================

Follow one photon through the interferometer and check that the state
leaving Alice is the abstract state ``psi_i^b``.
"""

from timebin_qbc.theory import make_psi
from timebin_qbc.timebin import Path, SlotTable, apply_delay, detect, emit_initial, to_theoretical

# eight-dimensional protocol: seven delay slots two ticks apart
table = SlotTable.uniform(8, spacing=2)
t_j, b, i = 100, 1, 3

# Alice fires source S_1 and delays path Y by slot T_3
sent = apply_delay(emit_initial(b, t_j), Path.Y, table.slot(i))
print("sent:", sent.to_records())
print("abstract:", to_theoretical(sent, t_j, table).amplitudes.real)
print("equals psi_3^1:", to_theoretical(sent, t_j, table) == make_psi(b, i, 8))

# Bob holds both paths for 40 ticks, then delays X by the announced slot
stored = apply_delay(sent, (Path.X, Path.Y), 40)
final = apply_delay(stored, Path.X, table.slot(i))
print("detector distribution, right slot:", detect(final))

# announcing the wrong slot splits the photon over four events
wrong = apply_delay(stored, Path.X, table.slot(5))
print("detector distribution, wrong slot:", detect(wrong))
