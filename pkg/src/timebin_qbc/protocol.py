"""Alice and Bob running the optical commitment protocol.

Randomness is PCG64 (numpy's ``Generator``) keyed by
``SeedSequence([seed, role])`` with ``role`` 0 for Alice and 1 for Bob.
Alice draws all ``s`` slot indices with one ``integers(1, n, size=s)`` call;
Bob draws an ``(s, 2)`` block of uniforms with ``random``, row ``j`` feeding
round ``j`` (column 0 picks the ideal click, column 1 drives the error
channel). Row ``j`` depends only on ``(seed, j)``, so any round can be
recomputed in isolation by advancing the stream.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .timebin import (
    Path,
    SlotTable,
    TimeBinState,
    apply_delay,
    detect,
    emit_initial,
)

ALICE_STREAM = 0
BOB_STREAM = 1
DEFAULT_ACCEPT_Z = 3.0


class Outcome(enum.IntEnum):
    D0 = 0
    D1 = 1
    LOST = 2


class Verdict(enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"
    ABORTED = "Aborted"


@dataclass(frozen=True)
class DetectionEvent:
    outcome: Outcome
    time: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "outcome", Outcome(self.outcome))
        if self.outcome is Outcome.LOST:
            if self.time is not None:
                raise ValueError("a lost photon carries no detection time")
        elif self.time is None:
            raise ValueError("a click needs a detection time")
        else:
            object.__setattr__(self, "time", int(self.time))


@dataclass(frozen=True)
class ProtocolParams:
    """Public parameters both parties agree on before committing.

    ``loss_fraction`` splits ``epsilon`` into a loss part
    (``epsilon * loss_fraction``) and a detector-flip part (the rest).
    Slots default to ``T_i = i * slot_spacing``.
    """

    s: int
    n: int
    tau_max: int
    send_times: tuple[int, ...]
    epsilon: float = 0.0
    accept_z: float = DEFAULT_ACCEPT_Z
    seed: int = 0
    loss_fraction: float = 0.5
    slot_spacing: int = 1

    def __post_init__(self):
        object.__setattr__(self, "send_times", tuple(self.send_times))

    @classmethod
    def build(
        cls,
        s: int,
        n: int,
        *,
        epsilon: float = 0.0,
        accept_z: float = DEFAULT_ACCEPT_Z,
        seed: int = 0,
        slot_spacing: int = 1,
        loss_fraction: float = 0.5,
        start: int = 0,
    ) -> "ProtocolParams":
        """Params with ``tau_max = (n-1) * slot_spacing`` and the tightest legal send schedule."""
        tau_max = max(n - 1, 1) * slot_spacing
        send_times = tuple(start + j * (tau_max + 1) for j in range(max(s, 0)))
        return cls(s, n, tau_max, send_times, epsilon, accept_z, seed, loss_fraction, slot_spacing)

    def problems(self) -> list[str]:
        """Every violated constraint, as human-readable strings."""
        out = []
        if not isinstance(self.s, int) or self.s < 1:
            out.append(f"s must be >= 1 (got {self.s!r})")
        if not isinstance(self.n, int) or self.n < 2:
            out.append(f"n must be >= 2 (got {self.n!r})")
        if not 0.0 <= self.epsilon < 1.0:
            out.append(f"epsilon must lie in [0, 1) (got {self.epsilon!r})")
        if not (self.accept_z >= 0.0 and math.isfinite(self.accept_z)):
            out.append(f"accept_z must be a finite value >= 0 (got {self.accept_z!r})")
        if not 0.0 <= self.loss_fraction <= 1.0:
            out.append(f"loss_fraction must lie in [0, 1] (got {self.loss_fraction!r})")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            out.append(f"seed must be a 64-bit unsigned integer (got {self.seed!r})")
        if not isinstance(self.slot_spacing, int) or self.slot_spacing < 1:
            out.append(f"slot_spacing must be >= 1 (got {self.slot_spacing!r})")
        if not isinstance(self.tau_max, int) or self.tau_max < 0:
            out.append(f"tau_max must be a non-negative tick count (got {self.tau_max!r})")
        if isinstance(self.s, int) and len(self.send_times) != self.s:
            out.append(f"expected {self.s} send times, got {len(self.send_times)}")
        if any(not isinstance(t, int) or t < 0 for t in self.send_times):
            out.append("send times must be non-negative integer ticks")
        elif isinstance(self.tau_max, int):
            for j in range(1, len(self.send_times)):
                if self.send_times[j] - self.send_times[j - 1] <= self.tau_max:
                    out.append(f"t_{j + 1} - t_{j} must exceed tau_max={self.tau_max}")
                    break
        if not out and (self.n - 1) * self.slot_spacing > self.tau_max:
            out.append(f"slot T_{self.n - 1} = {(self.n - 1) * self.slot_spacing} exceeds tau_max")
        return out

    def validate(self) -> "ProtocolParams":
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def slot_table(self) -> SlotTable:
        return SlotTable.uniform(self.n, self.slot_spacing, self.tau_max)

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "n": self.n,
            "tau_max": self.tau_max,
            "send_times": list(self.send_times),
            "epsilon": self.epsilon,
            "accept_z": self.accept_z,
            "seed": self.seed,
            "loss_fraction": self.loss_fraction,
            "slot_spacing": self.slot_spacing,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolParams":
        return cls(
            s=data["s"],
            n=data["n"],
            tau_max=data["tau_max"],
            send_times=tuple(data["send_times"]),
            epsilon=data["epsilon"],
            accept_z=data["accept_z"],
            seed=data["seed"],
            loss_fraction=data["loss_fraction"],
            slot_spacing=data["slot_spacing"],
        )

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class RoundSecret:
    j: int
    tau_j: int
    b: int


def party_rng(seed: int, role: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, role])))


def alice_secrets(params: ProtocolParams, b: int) -> list[RoundSecret]:
    """Alice's per-round delay choices, uniform over the slot table."""
    if b not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {b!r}")
    table = params.slot_table()
    idx = party_rng(params.seed, ALICE_STREAM).integers(1, params.n, size=params.s)
    return [RoundSecret(j, table.slot(int(i)), b) for j, i in enumerate(idx, start=1)]


def alice_commit_round(secret: RoundSecret, params: ProtocolParams) -> TimeBinState:
    """The photon leaving Alice in round ``secret.j``: emit from ``S_b`` then delay ``Y``."""
    if not 0 <= secret.tau_j <= params.tau_max:
        raise ValueError(f"tau_j={secret.tau_j} outside [0, {params.tau_max}]")
    t_j = params.send_times[secret.j - 1]
    return apply_delay(emit_initial(secret.b, t_j), Path.Y, secret.tau_j)


def bob_store(state: TimeBinState, tau_hold: int) -> TimeBinState:
    """Hold the photon in the matched rings ``SR_x`` and ``SR_y``."""
    return apply_delay(state, (Path.X, Path.Y), tau_hold)


def _flip(outcome: Outcome) -> Outcome:
    return Outcome.D1 if outcome is Outcome.D0 else Outcome.D0


def _cumulative(dist: dict) -> tuple[list, np.ndarray]:
    keys = list(dist)
    return keys, np.cumsum([dist[k] for k in keys])


def _pick(cum: np.ndarray, u) -> np.ndarray:
    return np.minimum(np.searchsorted(cum, u, side="right"), cum.size - 1)


def bob_verify_round(
    stored: TimeBinState,
    announced_b: int,
    announced_tau: int,
    epsilon: float,
    rng: np.random.Generator,
    *,
    loss_fraction: float = 0.5,
) -> DetectionEvent:
    """Set ``SR_B`` to the announced delay, release the photon and sample one click.

    ``announced_b`` does not change the optics (both detectors are always
    live); it is validated here and judged later by ``acceptance_test``.
    Consumes exactly two uniforms from ``rng``.
    """
    if announced_b not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {announced_b!r}")
    u_click, u_noise = rng.random(2)
    final = apply_delay(stored, Path.X, announced_tau)
    keys, cum = _cumulative(detect(final))
    detector, tick = keys[int(_pick(cum, u_click))]
    eps_loss = epsilon * loss_fraction
    if u_noise < eps_loss:
        return DetectionEvent(Outcome.LOST)
    outcome = Outcome(int(detector))
    if u_noise < epsilon:
        outcome = _flip(outcome)
    return DetectionEvent(outcome, tick)


def acceptance_threshold(s: int, epsilon: float, accept_z: float) -> float:
    """Minimum number of correct rounds: ``s(1-eps) - z*sqrt(s*eps*(1-eps))``."""
    return s * (1.0 - epsilon) - accept_z * math.sqrt(s * epsilon * (1.0 - epsilon))


def count_correct(outcomes, times, expected_b: int, expected_times) -> int:
    """Rounds whose click is ``D_{expected_b}`` at exactly the expected tick."""
    outcomes = np.asarray(outcomes)
    times = np.asarray(times)
    return int(np.count_nonzero((outcomes == expected_b) & (times == np.asarray(expected_times))))


def acceptance_test(
    events: Sequence[DetectionEvent],
    expected_b: int,
    expected_times: Sequence[int],
    s: int,
    epsilon: float,
    accept_z: float = DEFAULT_ACCEPT_Z,
) -> Verdict:
    """Bob's final decision over all ``s`` rounds.

    Lost photons and clicks at any tick other than ``t'_j`` count as failed
    rounds.

    Raises:
        ValueError: if the number of events or expected times is not ``s``.
    """
    if len(events) != s or len(expected_times) != s:
        raise ValueError(f"expected {s} events and times, got {len(events)} and {len(expected_times)}")
    outcomes, times = _event_arrays(events)
    return _verdict(count_correct(outcomes, times, expected_b, expected_times), s, epsilon, accept_z)


def _verdict(correct: int, s: int, epsilon: float, accept_z: float) -> Verdict:
    ok = correct >= acceptance_threshold(s, epsilon, accept_z)
    return Verdict.ACCEPTED if ok else Verdict.REJECTED


def _event_arrays(events: Iterable[DetectionEvent]) -> tuple[np.ndarray, np.ndarray]:
    events = list(events)
    outcomes = np.fromiter((int(e.outcome) for e in events), dtype=np.int8, count=len(events))
    times = np.fromiter((-1 if e.time is None else e.time for e in events), dtype=np.int64, count=len(events))
    return outcomes, times


class CommitLog(Sequence):
    """Lazily rebuilt sequence of the states Alice sent, one per round."""

    def __init__(self, params: ProtocolParams, b: int, taus: Sequence[int]):
        self._params = params
        self._b = b
        self._taus = tuple(int(t) for t in taus)

    def __len__(self):
        return len(self._taus)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        if k < 0:
            k += len(self)
        return alice_commit_round(RoundSecret(k + 1, self._taus[k], self._b), self._params)


@dataclass(eq=False)
class Transcript:
    """Complete record of one protocol run.

    ``outcomes`` and ``times`` are parallel arrays: outcome codes are
    ``Outcome`` values and lost photons have time ``-1``.
    """

    params: ProtocolParams
    tau_hold: int
    verdict: Verdict
    reason: str = ""
    commits: Sequence[TimeBinState] = ()
    unveil_b: int | None = None
    unveil_taus: tuple[int, ...] = ()
    outcomes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    times: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def events(self) -> list[DetectionEvent]:
        return [
            DetectionEvent(Outcome(int(o)), None if o == Outcome.LOST else int(t))
            for o, t in zip(self.outcomes, self.times)
        ]

    def expected_times(self) -> np.ndarray:
        return np.asarray(self.params.send_times, dtype=np.int64) + self.tau_hold + np.asarray(
            self.unveil_taus, dtype=np.int64
        )

    @property
    def n_correct(self) -> int:
        if self.unveil_b is None or not len(self.outcomes):
            return 0
        return count_correct(self.outcomes, self.times, self.unveil_b, self.expected_times())

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "tau_hold": self.tau_hold,
            "commits": [
                {"j": j, "t_j": self.params.send_times[j - 1], "state": [list(r) for r in st.to_records()]}
                for j, st in enumerate(self.commits, start=1)
            ],
            "unveil": None
            if self.unveil_b is None
            else {"b": self.unveil_b, "taus": [int(t) for t in self.unveil_taus]},
            "events": [
                [Outcome(int(o)).name, None if o == Outcome.LOST else int(t)]
                for o, t in zip(self.outcomes, self.times)
            ],
            "verdict": self.verdict.value,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Transcript":
        unveil = data["unveil"]
        events = data["events"]
        return cls(
            params=ProtocolParams.from_dict(data["params"]),
            tau_hold=data["tau_hold"],
            verdict=Verdict(data["verdict"]),
            reason=data["reason"],
            commits=[TimeBinState.from_records(c["state"]) for c in data["commits"]],
            unveil_b=None if unveil is None else unveil["b"],
            unveil_taus=() if unveil is None else tuple(unveil["taus"]),
            outcomes=np.array([Outcome[o] for o, _ in events], dtype=np.int8),
            times=np.array([-1 if t is None else t for _, t in events], dtype=np.int64),
        )

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        """Canonical text form: JSON with sorted keys, one-space indent, trailing newline."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def __eq__(self, other):
        if not isinstance(other, Transcript):
            return NotImplemented
        return self.to_text() == other.to_text()


def aborted(params: ProtocolParams, tau_hold: int, reason: str, **kw) -> Transcript:
    return Transcript(params=params, tau_hold=tau_hold, verdict=Verdict.ABORTED, reason=reason, **kw)


def round_distribution(b: int, tau: int, announced_tau: int, tau_hold: int):
    """Click distribution of a round sent at tick 0, as ``(detectors, ticks, cumulative)``.

    The apparatus is time-translation invariant, so a round sent at ``t_j``
    has the same distribution shifted by ``t_j``.
    """
    sent = apply_delay(emit_initial(b, 0), Path.Y, tau)
    final = apply_delay(bob_store(sent, tau_hold), Path.X, announced_tau)
    keys, cum = _cumulative(detect(final))
    detectors = np.array([int(d) for d, _ in keys], dtype=np.int8)
    ticks = np.array([t for _, t in keys], dtype=np.int64)
    return detectors, ticks, cum


def sample_events(params, b, taus, announced_taus, tau_hold, noise) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized equivalent of calling ``bob_verify_round`` for every round.

    ``noise`` is Bob's ``(s, 2)`` uniform block.
    """
    taus = np.asarray(taus, dtype=np.int64)
    announced = np.asarray(announced_taus, dtype=np.int64)
    send = np.asarray(params.send_times, dtype=np.int64)
    outcomes = np.empty(params.s, dtype=np.int8)
    times = np.empty(params.s, dtype=np.int64)
    pairs = np.stack([taus, announced], axis=1)
    uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for g, (tau, ann) in enumerate(uniq):
        rows = np.flatnonzero(inverse == g)
        detectors, ticks, cum = round_distribution(b, int(tau), int(ann), tau_hold)
        pick = _pick(cum, noise[rows, 0])
        outcomes[rows] = detectors[pick]
        times[rows] = ticks[pick] + send[rows]
    eps = params.epsilon
    eps_loss = eps * params.loss_fraction
    u = noise[:, 1]
    flip = (u >= eps_loss) & (u < eps)
    outcomes[flip] = 1 - outcomes[flip]
    lost = u < eps_loss
    outcomes[lost] = Outcome.LOST
    times[lost] = -1
    return outcomes, times


def run_protocol(params: ProtocolParams, alice_b: int, unveil_b: int, tau_hold: int = 0) -> Transcript:
    """Execute commit, hold and unveil for all ``s`` rounds.

    Alice commits ``alice_b`` and at unveil announces ``unveil_b`` together
    with her true delays. Invalid parameters give an ``ABORTED`` transcript
    rather than an exception. The result depends only on the arguments and
    ``params.seed``.
    """
    problems = params.problems()
    if alice_b not in (0, 1) or unveil_b not in (0, 1):
        problems.append("bits must be 0 or 1")
    if not isinstance(tau_hold, int) or tau_hold < 0:
        problems.append(f"tau_hold must be a non-negative tick count (got {tau_hold!r})")
    if problems:
        return aborted(params, tau_hold, "invalid params: " + "; ".join(problems))

    taus = np.array([sec.tau_j for sec in alice_secrets(params, alice_b)], dtype=np.int64)
    noise = party_rng(params.seed, BOB_STREAM).random((params.s, 2))
    outcomes, times = sample_events(params, alice_b, taus, taus, tau_hold, noise)
    transcript = Transcript(
        params=params,
        tau_hold=tau_hold,
        verdict=Verdict.REJECTED,
        commits=CommitLog(params, alice_b, taus),
        unveil_b=unveil_b,
        unveil_taus=tuple(int(t) for t in taus),
        outcomes=outcomes,
        times=times,
    )
    transcript.verdict = _verdict(transcript.n_correct, params.s, params.epsilon, params.accept_z)
    return transcript


def with_seed(params: ProtocolParams, seed: int) -> ProtocolParams:
    return replace(params, seed=seed)
