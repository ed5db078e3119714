import math

import pytest

from timebin_qbc.adversary import OptimizerConfig
from timebin_qbc.analysis import (
    ACCEPTANCE_HEADER,
    BINDING_HEADER,
    CONCEALMENT_HEADER,
    SPEED_OF_LIGHT_KM_S,
    SweepSpec,
    acceptance_sweep,
    binding_rows,
    comparison_table,
    concealment_sweep,
    fiber_holding_time,
    format_seconds,
    read_csv,
    relativistic_holding_time,
    write_csv,
)
from timebin_qbc.protocol import ProtocolParams


def test_relativistic_holding_times():
    assert relativistic_holding_time(9354) == pytest.approx(15.6e-3, rel=1e-3)
    assert relativistic_holding_time(10) == pytest.approx(16.7e-6, rel=1e-2)
    assert relativistic_holding_time(SPEED_OF_LIGHT_KM_S) == 0.5


def test_fiber_holding_times():
    assert fiber_holding_time(150) == pytest.approx(500.3e-6, abs=0.1e-6)
    assert fiber_holding_time(150, 2e5) == pytest.approx(750e-6)


@pytest.mark.parametrize("call", [lambda: relativistic_holding_time(0), lambda: fiber_holding_time(-1), lambda: fiber_holding_time(1, 4e5)])
def test_holding_time_domain(call):
    with pytest.raises(ValueError):
        call()


def test_comparison_table_rows():
    rows = {name: (dist, t) for name, dist, t in comparison_table()}
    assert rows["this work: commercial delay line"] == (None, 1e-3)
    assert rows["qbc82"] == (None, 30e-6)
    assert rows["qbc83 @ 9354 km"][1] == pytest.approx(15.6e-3, rel=1e-3)
    # the commercial delay exceeds the short-distance relativistic time
    assert rows["this work: commercial delay line"][1] > rows["qbc83 @ 10 km"][1]
    assert format_seconds(rows["qbc83 @ 9354 km"][1]) == "15.6 ms"
    assert format_seconds(rows["qbc83 @ 10 km"][1]) == "16.7 us"


def test_concealment_sweep_matches_closed_form():
    rows = concealment_sweep(SweepSpec("n", [2, 5, 17, 101]))
    for n, td, hel in rows:
        assert td == pytest.approx(1 / math.sqrt(n - 1), abs=1e-12)
        assert hel == pytest.approx(0.5 + 0.5 * td, abs=1e-12)
    with pytest.raises(ValueError):
        concealment_sweep(SweepSpec("s", [10]))


def test_binding_rows():
    rows = binding_rows(3, OptimizerConfig(restarts=4))
    assert [r[-1] for r in rows] == ["omega", "optimized"]
    assert rows[0][3] == pytest.approx(0.5, abs=1e-12)
    assert rows[1][3] == pytest.approx(0.75, abs=1e-4)
    assert binding_rows(4, optimize=False)[0][1] == pytest.approx(1, abs=1e-12)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("tau", [1])
    with pytest.raises(ValueError):
        SweepSpec("n", [])
    with pytest.raises(ValueError):
        SweepSpec("n", [2], trials=0)


def test_acceptance_sweep_honest_and_flipped():
    spec = SweepSpec("epsilon", [0.0, 0.05], fixed=ProtocolParams.build(400, 8), trials=5, seed=3)
    honest = acceptance_sweep(spec)
    assert [r[3] for r in honest] == [5, 5]
    flipped = acceptance_sweep(spec, alice_b=0, unveil_b=1)
    assert [r[3] for r in flipped] == [0, 0]
    assert acceptance_sweep(spec) == honest


def test_acceptance_sweep_small_s_at_high_noise_can_fail():
    spec = SweepSpec("s", [5], fixed=ProtocolParams.build(5, 4, epsilon=0.5, accept_z=0.0), trials=40, seed=1)
    (row,) = acceptance_sweep(spec)
    assert 0 < row[3] < 40


def test_csv_and_jsonl_round_trip(tmp_path):
    rows = [(2, 1.0, 1.0), (5, 0.5, 0.75)]
    path = write_csv(tmp_path / "c.csv", CONCEALMENT_HEADER, rows)
    back = read_csv(path)
    assert [tuple(float(r[h]) for h in CONCEALMENT_HEADER) for r in back] == [tuple(map(float, r)) for r in rows]
    assert (tmp_path / "c.jsonl").read_text().splitlines()[1] == '{"helstrom": 0.75, "n": 5, "trace_distance": 0.5}'
    write_csv(tmp_path / "b.csv", BINDING_HEADER, [(3, 1.0, 0.0, 0.5, "omega")], records=False)
    assert not (tmp_path / "b.jsonl").exists()
    assert read_csv(tmp_path / "b.csv")[0]["strategy"] == "omega"
    write_csv(tmp_path / "a.csv", ACCEPTANCE_HEADER, [("n", 4, 1, 1, 1.0)])
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == ",".join(ACCEPTANCE_HEADER)
