"""Parameter sweeps, holding-time arithmetic and CSV/record emission."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .adversary import OptimizerConfig, bob_discrimination_attack, omega_attack, optimal_cheat_probability
from .protocol import ProtocolParams, Verdict, run_protocol

SPEED_OF_LIGHT_KM_S = 299_792.458
FIBER_GROUP_VELOCITY_KM_S = 2.04e5  # group index ~1.47

# Fixed reference figures for the comparison table.
COMMERCIAL_DELAY_S = 1000e-6  # off-the-shelf optical delay line, no derivable parameters
FIBER_LENGTH_KM = 150.0
QBC82_HOLDING_S = 30e-6
QBC83_DISTANCE_KM = 9354.0
SHORT_DISTANCE_KM = 10.0

CONCEALMENT_HEADER = ("n", "trace_distance", "helstrom")
BINDING_HEADER = ("n", "p0", "p1", "p_avg", "strategy")
HOLDING_HEADER = ("scheme", "distance_km", "holding_s")
ACCEPTANCE_HEADER = ("variable", "value", "trials", "accepted", "rate")


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: Sequence
    fixed: ProtocolParams = field(default_factory=lambda: ProtocolParams.build(100, 16))
    trials: int = 1
    seed: int = 0
    tau_hold: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if self.variable not in ("n", "s", "epsilon"):
            raise ValueError(f"sweep variable must be n, s or epsilon, got {self.variable!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def concealment_sweep(spec: SweepSpec) -> list[tuple[int, float, float]]:
    """``(n, trace_distance, helstrom)`` per swept dimension."""
    if spec.variable != "n":
        raise ValueError("concealment sweeps vary n")
    return [(int(n), *bob_discrimination_attack(int(n))) for n in spec.values]


def binding_rows(n: int, optimizer: OptimizerConfig | None = None, *, optimize: bool = True) -> list[tuple]:
    """Omega-attack baseline and, optionally, the optimized attack for one ``n``."""
    rows = [(n, *omega_attack(n), "omega")]
    if optimize:
        res = optimal_cheat_probability(n, optimizer)
        rows.append((n, res.p0, res.p1, res.p_avg, "optimized"))
    return rows


def _point_params(spec: SweepSpec, value) -> ProtocolParams:
    base = spec.fixed
    s, n, eps = base.s, base.n, base.epsilon
    if spec.variable == "n":
        n = int(value)
    elif spec.variable == "s":
        s = int(value)
    else:
        eps = float(value)
    return ProtocolParams.build(
        s, n, epsilon=eps, accept_z=base.accept_z, slot_spacing=base.slot_spacing, loss_fraction=base.loss_fraction
    )


def acceptance_sweep(spec: SweepSpec, *, alice_b: int = 0, unveil_b: int | None = None) -> list[tuple]:
    """Monte Carlo acceptance rate of Bob's test at each sweep point.

    Trial ``k`` at point ``p`` uses seed ``SeedSequence([spec.seed, p, k])``
    reduced to 64 bits, so points can be evaluated in any order.
    """
    unveil_b = alice_b if unveil_b is None else unveil_b
    rows = []
    for p, value in enumerate(spec.values):
        params = _point_params(spec, value)
        accepted = 0
        for k in range(spec.trials):
            seed = int(np.random.SeedSequence([spec.seed, p, k]).generate_state(1, np.uint64)[0])
            tr = run_protocol(replace(params, seed=seed), alice_b, unveil_b, spec.tau_hold)
            accepted += tr.verdict is Verdict.ACCEPTED
        rows.append((spec.variable, value, spec.trials, accepted, accepted / spec.trials))
    return rows


def relativistic_holding_time(d: float) -> float:
    """Holding time ``d / 2c`` (seconds) of a relativistic scheme with agents ``d`` km apart."""
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d!r}")
    return d / (2.0 * SPEED_OF_LIGHT_KM_S)


def fiber_holding_time(length: float, velocity: float = SPEED_OF_LIGHT_KM_S) -> float:
    """Delay (seconds) of a fiber storage ring of ``length`` km at ``velocity`` km/s."""
    if not length > 0:
        raise ValueError(f"fiber length must be positive, got {length!r}")
    if not 0 < velocity <= SPEED_OF_LIGHT_KM_S:
        raise ValueError(f"velocity must lie in (0, c], got {velocity!r}")
    return length / velocity


def comparison_table() -> list[tuple[str, float | None, float]]:
    """Holding-time comparison rows ``(scheme, distance_km, holding_s)``.

    ``distance_km`` is ``None`` for schemes whose holding time does not
    depend on how far apart the parties are.
    """
    return [
        ("this work: 150 km fiber (vacuum c)", None, fiber_holding_time(FIBER_LENGTH_KM)),
        (
            "this work: 150 km fiber (group velocity)",
            None,
            fiber_holding_time(FIBER_LENGTH_KM, FIBER_GROUP_VELOCITY_KM_S),
        ),
        ("this work: commercial delay line", None, COMMERCIAL_DELAY_S),
        ("qbc82", None, QBC82_HOLDING_S),
        (f"qbc83 @ {QBC83_DISTANCE_KM:g} km", QBC83_DISTANCE_KM, relativistic_holding_time(QBC83_DISTANCE_KM)),
        (f"qbc83 @ {SHORT_DISTANCE_KM:g} km", SHORT_DISTANCE_KM, relativistic_holding_time(SHORT_DISTANCE_KM)),
    ]


def write_csv(path, header: Sequence[str], rows, *, records: bool = True) -> Path:
    """Write ``rows`` under ``header``; also mirror them to ``<stem>.jsonl``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    if records:
        with path.with_suffix(".jsonl").open("w") as fh:
            for row in rows:
                fh.write(json.dumps(dict(zip(header, row)), sort_keys=True) + "\n")
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def format_seconds(t: float) -> str:
    if t >= 1e-3:
        return f"{t * 1e3:.1f} ms"
    return f"{t * 1e6:.1f} us"

