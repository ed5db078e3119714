"""
Holding times
=============

Compare the holding time a fiber storage ring gives with the one a
relativistic scheme gets from separating its agents.
"""

from timebin_qbc.analysis import comparison_table, format_seconds

for scheme, distance, seconds in comparison_table():
    where = "any distance" if distance is None else f"{distance:g} km"
    print(f"{scheme:42s} {where:>14s} {format_seconds(seconds):>10s}")
