"""Single-photon time-bin states and the optical elements of the apparatus.

A photon in the interferometer is described by which path it is on (``X`` or
``Y``) and the integer time tick at which it is there. ``(X, t)`` stands for
``|t>_X |0>_Y`` and ``(Y, t)`` for ``|0>_X |t>_Y``. Time is discretized to a
global resolution so distinct ticks are exactly orthogonal.

Beam-splitter convention: source ``S_b`` leaves ``BS_A`` as
``(|X,t> + (-1)^b |Y,t>)/sqrt(2)``; at ``BS_B`` an ``X`` ket feeds both
detectors with ``+1/sqrt(2)`` and a ``Y`` ket feeds ``D0`` with ``+1/sqrt(2)``
and ``D1`` with ``-1/sqrt(2)``. Passive elements other than the storage rings
take zero time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .theory import INV_SQRT2, TheoreticalState, make_psi

_NORM_TOL = 1e-12
_PRUNE_TOL = 1e-15


class Path(enum.IntEnum):
    X = 0
    Y = 1


class Detector(enum.IntEnum):
    D0 = 0
    D1 = 1


class BasisKet(NamedTuple):
    """``(path, tick)``; tuple ordering gives the canonical ket order."""

    path: Path
    time: int


def _tick(value) -> int:
    if isinstance(value, (bool, float)) or not isinstance(value, (int, np.integer)):
        raise TypeError(f"time ticks must be integers, got {value!r}")
    if value < 0:
        raise ValueError(f"time ticks must be non-negative, got {value}")
    return int(value)


class MappingError(ValueError):
    """Raised when a ket has no image in the slot table."""

    def __init__(self, ket: BasisKet, reason: str):
        super().__init__(f"ket ({ket.path.name}, {ket.time}) {reason}")
        self.ket = ket


class TimeBinState:
    """Immutable superposition of ``BasisKet`` terms.

    Terms with magnitude below 1e-15 are dropped. The state must be
    normalized unless ``normalize_check=False`` is passed, which only
    internal intermediate results do.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[BasisKet, complex], *, normalize_check: bool = True):
        clean = {}
        for ket, amp in terms.items():
            amp = complex(amp)
            if abs(amp) < _PRUNE_TOL:
                continue
            ket = BasisKet(Path(ket[0]), _tick(ket[1]))
            clean[ket] = amp
        if normalize_check:
            norm = sum(abs(a) ** 2 for a in clean.values())
            if abs(norm - 1.0) > _NORM_TOL:
                raise ValueError(f"time-bin state is not normalized (norm^2 = {norm!r})")
        self._terms = dict(sorted(clean.items()))

    @property
    def terms(self) -> Mapping[BasisKet, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __getitem__(self, ket) -> complex:
        return self._terms.get(BasisKet(Path(ket[0]), int(ket[1])), 0j)

    def norm_squared(self) -> float:
        return sum(abs(a) ** 2 for a in self._terms.values())

    def inner(self, other: "TimeBinState") -> complex:
        """Return ``<self|other>``; distinct kets are orthogonal."""
        return sum((a.conjugate() * other[k] for k, a in self._terms.items()), 0j)

    def to_records(self) -> list[tuple[str, int, float, float]]:
        """Canonical serialization: sorted ``(path, tick, re, im)`` records."""
        return [(k.path.name, k.time, a.real, a.imag) for k, a in self._terms.items()]

    @classmethod
    def from_records(cls, records: Iterable) -> "TimeBinState":
        terms = {}
        for path, tick, re, im in records:
            ket = BasisKet(Path[path], _tick(tick))
            if ket in terms:
                raise ValueError(f"duplicate ket {path},{tick} in records")
            terms[ket] = complex(float(re), float(im))
        return cls(terms)

    def __eq__(self, other):
        if not isinstance(other, TimeBinState):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def __repr__(self):
        body = ", ".join(f"({k.path.name},{k.time}): {a:.6g}" for k, a in self._terms.items())
        return f"TimeBinState({{{body}}})"


@dataclass(frozen=True)
class SlotTable:
    """Strictly increasing delay slots ``T_1 < ... < T_{n-1}`` in ``[0, tau_max]``."""

    slots: tuple[int, ...]
    tau_max: int

    def __post_init__(self):
        slots = tuple(_tick(t) for t in self.slots)
        object.__setattr__(self, "slots", slots)
        object.__setattr__(self, "tau_max", _tick(self.tau_max))
        if not slots:
            raise ValueError("slot table must hold at least one slot")
        if any(b <= a for a, b in zip(slots, slots[1:])):
            raise ValueError("slots must be strictly increasing")
        if slots[-1] > self.tau_max:
            raise ValueError(f"slot {slots[-1]} exceeds tau_max={self.tau_max}")

    @classmethod
    def uniform(cls, n: int, spacing: int = 1, tau_max: int | None = None) -> "SlotTable":
        """Default table ``T_i = i * spacing`` for ``i = 1..n-1``."""
        if n < 2:
            raise ValueError(f"dimension must be at least 2, got {n}")
        if spacing < 1:
            raise ValueError("slot spacing must be a positive number of ticks")
        slots = tuple(i * spacing for i in range(1, n))
        return cls(slots, slots[-1] if tau_max is None else tau_max)

    @property
    def n(self) -> int:
        return len(self.slots) + 1

    def slot(self, i: int) -> int:
        """Return ``T_i`` (1-based)."""
        if not 1 <= i <= len(self.slots):
            raise IndexError(f"slot index {i} out of range 1..{len(self.slots)}")
        return self.slots[i - 1]

    def index_of(self, tau: int) -> int | None:
        """1-based index of ``tau`` in the table, or ``None``."""
        pos = int(np.searchsorted(self.slots, tau))
        if pos < len(self.slots) and self.slots[pos] == tau:
            return pos + 1
        return None


def emit_initial(b: int, t_j: int, *, bs_sign: int = 1) -> TimeBinState:
    """State of a photon from source ``S_b`` just after ``BS_A`` at tick ``t_j``.

    ``bs_sign=-1`` flips the ``Y`` output sign of ``BS_A``; it exists only as a
    negative control for the equivalence checker.
    """
    if b not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {b!r}")
    t_j = _tick(t_j)
    sign = (1.0 if b == 0 else -1.0) * bs_sign
    return TimeBinState({BasisKet(Path.X, t_j): INV_SQRT2, BasisKet(Path.Y, t_j): sign * INV_SQRT2})


def apply_delay(state: TimeBinState, path, tau: int) -> TimeBinState:
    """Storage ring: advance every ket on ``path`` by ``tau`` ticks.

    ``path`` may be a single ``Path`` or an iterable of paths (both rings of a
    matched pair).
    """
    tau = _tick(tau)
    paths = {Path(path)} if isinstance(path, (Path, int, np.integer)) else {Path(p) for p in path}
    if tau == 0:
        return state
    return TimeBinState(
        {BasisKet(k.path, k.time + tau if k.path in paths else k.time): a for k, a in state.items()},
        normalize_check=False,
    )


def output_amplitudes(state: TimeBinState) -> dict[tuple[Detector, int], complex]:
    """Amplitudes at the two detectors behind ``BS_B``, per time tick."""
    out: dict[tuple[Detector, int], complex] = {}
    for ket, amp in state.items():
        d1_sign = 1.0 if ket.path is Path.X else -1.0
        a = amp * INV_SQRT2
        out[(Detector.D0, ket.time)] = out.get((Detector.D0, ket.time), 0j) + a
        out[(Detector.D1, ket.time)] = out.get((Detector.D1, ket.time), 0j) + d1_sign * a
    return out


def detect(state: TimeBinState) -> dict[tuple[Detector, int], float]:
    """Time-resolved click distribution at ``D0``/``D1``.

    Returns a mapping ``(detector, tick) -> probability`` holding only
    nonzero events, ordered by ``(tick, detector)``.

    Raises:
        ValueError: if ``state`` is not normalized.
    """
    norm = state.norm_squared()
    if abs(norm - 1.0) > _NORM_TOL:
        raise ValueError(f"cannot detect a non-normalized state (norm^2 = {norm!r})")
    probs = {}
    amps = output_amplitudes(state)
    for key in sorted(amps, key=lambda k: (k[1], k[0])):
        p = abs(amps[key]) ** 2
        if p > _PRUNE_TOL:
            probs[key] = p
    return probs


def detector_state(detector: Detector, t_b: int) -> TimeBinState:
    """The state ``|psi>_d`` at measurement tick ``t_b`` that detector ``d`` projects onto."""
    sign = 1.0 if Detector(detector) is Detector.D0 else -1.0
    t_b = _tick(t_b)
    return TimeBinState({BasisKet(Path.X, t_b): INV_SQRT2, BasisKet(Path.Y, t_b): sign * INV_SQRT2})


def projector_expectation(state: TimeBinState, detector: Detector, t_b: int) -> float:
    """``<state| P_d |state>`` with ``P_d = |psi>_d <psi|_d`` at tick ``t_b``."""
    return abs(detector_state(detector, t_b).inner(state)) ** 2


def to_theoretical(state: TimeBinState, t_j: int, table: SlotTable) -> TheoreticalState:
    """Relabel a time-bin state as a vector of ``C^n``.

    ``(X, t_j)`` becomes ``|0>`` and ``(Y, t_j + T_i)`` becomes ``|i>``.

    Raises:
        MappingError: naming the first ket with no image.
    """
    t_j = _tick(t_j)
    amps = np.zeros(table.n, dtype=complex)
    for ket, amp in state.items():
        if ket.path is Path.X:
            if ket.time != t_j:
                raise MappingError(ket, f"is on path X but not at the reference tick {t_j}")
            amps[0] = amp
        else:
            i = table.index_of(ket.time - t_j)
            if i is None:
                raise MappingError(ket, f"has delay {ket.time - t_j} not in the slot table")
            amps[i] = amp
    return TheoreticalState(amps)


def from_theoretical(state: TheoreticalState, t_j: int, table: SlotTable) -> TimeBinState:
    """Inverse of ``to_theoretical``."""
    if state.dim != table.n:
        raise ValueError(f"dimension mismatch: state has {state.dim}, table implies {table.n}")
    t_j = _tick(t_j)
    terms = {BasisKet(Path.X, t_j): state.amplitudes[0]}
    for i, T in enumerate(table.slots, start=1):
        terms[BasisKet(Path.Y, t_j + T)] = state.amplitudes[i]
    return TimeBinState(terms)


@dataclass(frozen=True)
class EquivalenceMismatch:
    b: int
    i: int
    t_j: int
    tau_hold: int
    stage: str
    detail: str


def check_equivalence(
    b: int, i: int, table: SlotTable, t_j: int, tau_hold: int, *, bs_sign: int = 1
) -> list[EquivalenceMismatch]:
    """Run one photon through the apparatus and compare with ``make_psi(b, i, n)``.

    The photon is emitted at ``t_j``, delayed by ``T_i`` on ``Y`` (Alice),
    held for ``tau_hold`` on both paths and finally delayed by ``T_i`` on
    ``X`` (Bob). Three stages are compared exactly:

    * the state leaving Alice, relabelled with reference ``t_j``;
    * the stored state, relabelled with reference ``t_j + tau_hold``;
    * the state at ``BS_B``, whose ``X`` ket sits at ``t'_j`` and which must
      equal the detector state of ``D_b`` at ``t'_j`` and click ``D_b`` with
      certainty.

    Returns an empty list when everything matches.
    """
    target = make_psi(b, i, table.n)
    tau = table.slot(i)
    t_prime = t_j + tau_hold + tau
    bad = []

    def compare(stage, got):
        if got != target:
            bad.append(EquivalenceMismatch(b, i, t_j, tau_hold, stage, f"{got!r} != {target!r}"))

    sent = apply_delay(emit_initial(b, t_j, bs_sign=bs_sign), Path.Y, tau)
    try:
        compare("sent", to_theoretical(sent, t_j, table))
    except MappingError as exc:
        bad.append(EquivalenceMismatch(b, i, t_j, tau_hold, "sent", str(exc)))

    stored = apply_delay(sent, (Path.X, Path.Y), tau_hold)
    try:
        compare("stored", to_theoretical(stored, t_j + tau_hold, table))
    except MappingError as exc:
        bad.append(EquivalenceMismatch(b, i, t_j, tau_hold, "stored", str(exc)))

    final = apply_delay(stored, Path.X, tau)
    expected_final = detector_state(Detector(b), t_prime)
    if final != expected_final:
        bad.append(
            EquivalenceMismatch(b, i, t_j, tau_hold, "final", f"{final!r} != {expected_final!r}")
        )
    dist = detect(final)
    hit = dist.get((Detector(b), t_prime), 0.0)
    if len(dist) != 1 or not math.isclose(hit, 1.0, rel_tol=0, abs_tol=1e-12):
        bad.append(EquivalenceMismatch(b, i, t_j, tau_hold, "detect", f"distribution {dist!r}"))
    return bad


def equivalence_sweep(
    n: int, samples: int = 100, seed: int = 0, *, bs_sign: int = 1, max_tick: int = 10**6, max_spacing: int = 1000
) -> list[EquivalenceMismatch]:
    """Exhaustive ``check_equivalence`` over all ``(b, i)`` for random settings.

    Each sample draws a send tick ``t_j``, a holding time and a slot spacing
    ``dt`` (slots ``T_i = i * dt``) from PCG64 seeded with ``seed``.
    """
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    bad = []
    for _ in range(samples):
        t_j, tau_hold = (int(v) for v in rng.integers(0, max_tick, size=2))
        spacing = int(rng.integers(1, max_spacing + 1))
        table = SlotTable.uniform(n, spacing)
        for b in (0, 1):
            for i in range(1, n):
                bad.extend(check_equivalence(b, i, table, t_j, tau_hold, bs_sign=bs_sign))
    return bad
