"""Cheating models against the commitment: Bob peeking and Alice steering.

Alice's attacks keep a purification of what she sends. She holds system
``alpha`` and Bob holds ``beta``, and she measures ``alpha`` only at unveil
time, choosing the announced slot index from the outcome. Success is the
probability that Bob's projection onto ``psi_i^b`` succeeds for one round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm_frechet
from scipy.optimize import minimize

from .theory import (
    DensityMatrix,
    TheoreticalState,
    concealment_closed_form,
    ensemble_density,
    helstrom_probability,
    make_psi,
    trace_distance,
)

MAX_OPTIMIZER_DIM = 12
DENSE_LIMIT = 2048


@dataclass(frozen=True, eq=False)
class EntangledState:
    """Pure state ``sum_{a,j} C[a, j] |a>_alpha |j>_beta``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.amplitudes, dtype=complex)
        if c.ndim != 2:
            raise ValueError("amplitudes must be a dim_alpha x dim_beta matrix")
        norm = np.linalg.norm(c)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"entangled state is not normalized (norm = {norm!r})")
        c.setflags(write=False)
        object.__setattr__(self, "amplitudes", c)

    @property
    def dim_alpha(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def dim_beta(self) -> int:
        return self.amplitudes.shape[1]

    def reduced_beta(self) -> DensityMatrix:
        """Partial trace over ``alpha``."""
        c = self.amplitudes
        return DensityMatrix(c.T @ c.conj())


@dataclass(frozen=True, eq=False)
class SteeringMeasurement:
    """Projective measurement of ``alpha`` plus the index Alice announces per outcome.

    ``basis`` rows are orthonormal vectors of ``alpha``. If they do not span
    it, the leftover projector is one more outcome for which Alice has no
    valid announcement; that outcome counts as a failed unveil.
    """

    basis: np.ndarray
    announce: tuple[int, ...]

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=complex))
        announce = tuple(int(i) for i in self.announce)
        if len(announce) != basis.shape[0]:
            raise ValueError("need one announced index per basis vector")
        gram = basis.conj() @ basis.T
        if np.max(np.abs(gram - np.eye(basis.shape[0]))) > 1e-10:
            raise ValueError("measurement vectors are not orthonormal")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "announce", announce)

    def negated(self) -> "SteeringMeasurement":
        return SteeringMeasurement(-self.basis, self.announce)


def omega_state(n: int) -> EntangledState:
    """``(n-1)^{-1/2} sum_{i=1}^{n-1} |alpha_i>|psi_i^0>`` with ``alpha`` of dimension ``n``."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    c = np.zeros((n, n), dtype=complex)
    w = 1.0 / math.sqrt(n - 1)
    for i in range(1, n):
        c[i] = w * make_psi(0, i, n).amplitudes
    return EntangledState(c)


def canonical_measurement(n: int) -> SteeringMeasurement:
    """Measure ``alpha`` in ``{|alpha_1>, ..., |alpha_{n-1}>}`` and announce the outcome index."""
    return SteeringMeasurement(np.eye(n, dtype=complex)[1:], tuple(range(1, n)))


def steering_outcomes(state: EntangledState, meas: SteeringMeasurement) -> list[tuple[float, np.ndarray]]:
    """Probability and normalized ``beta`` state for each measurement outcome.

    Outcomes with zero probability get a zero vector.
    """
    if meas.basis.shape[1] != state.dim_alpha:
        raise ValueError(f"measurement acts on dimension {meas.basis.shape[1]}, alpha has {state.dim_alpha}")
    unnorm = meas.basis.conj() @ state.amplitudes
    out = []
    for v in unnorm:
        p = float(np.vdot(v, v).real)
        out.append((p, v / math.sqrt(p) if p > 0 else np.zeros_like(v)))
    return out


def steer_and_unveil(
    state: EntangledState,
    meas: SteeringMeasurement,
    target_b: int,
    rng: np.random.Generator | None = None,
    shots: int = 0,
) -> float:
    """Probability that Bob accepts Alice's unveil of ``target_b`` for one round.

    Exact by default. With an ``rng`` and ``shots > 0`` the round is
    simulated ``shots`` times and the empirical acceptance rate is returned.
    """
    n = state.dim_beta
    unnorm = meas.basis.conj() @ state.amplitudes
    if meas.basis.shape[1] != state.dim_alpha:
        raise ValueError(f"measurement acts on dimension {meas.basis.shape[1]}, alpha has {state.dim_alpha}")
    probs = np.einsum("kj,kj->k", unnorm.conj(), unnorm).real
    hits = np.array(
        [abs(np.vdot(make_psi(target_b, i, n).amplitudes, v)) ** 2 for i, v in zip(meas.announce, unnorm)]
    )
    if rng is None or shots <= 0:
        return float(np.sum(hits))
    # Outcome index len(probs) is the unspanned remainder, which always fails.
    pk = np.append(probs, max(0.0, 1.0 - probs.sum()))
    accept = np.append(np.divide(hits, probs, out=np.zeros_like(hits), where=probs > 0), 0.0)
    k = rng.choice(pk.size, size=shots, p=pk / pk.sum())
    return float(np.mean(rng.random(shots) < accept[k]))


def exact_steerability_violation(target_ensemble: Sequence[tuple[float, TheoreticalState]], rho: DensityMatrix) -> float:
    """Frobenius distance between an ensemble's average state and ``rho``.

    Zero exactly when some measurement on a purification of ``rho`` could
    steer the remote system into ``target_ensemble``.
    """
    probs = [p for p, _ in target_ensemble]
    if abs(sum(probs) - 1.0) > 1e-12:
        raise ValueError(f"ensemble probabilities sum to {sum(probs)!r}")
    avg = np.zeros((rho.dim, rho.dim), dtype=complex)
    for p, chi in target_ensemble:
        if chi.dim != rho.dim:
            raise ValueError(f"dimension mismatch: {chi.dim} vs {rho.dim}")
        avg += p * chi.projector()
    return float(np.linalg.norm(avg - rho.entries))


def bob_discrimination_attack(n: int) -> tuple[float, float]:
    """Trace distance and Helstrom success for telling ``rho_0`` from ``rho_1``.

    Up to ``n = 2048`` the difference is diagonalized densely. Beyond that it
    is compressed to ``span{|0>, sum_i |i>}``, which holds its whole support.
    """
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    if n <= DENSE_LIMIT:
        rho0, rho1 = ensemble_density(0, n), ensemble_density(1, n)
        return trace_distance(rho0, rho1), helstrom_probability(rho0, rho1)
    c = math.sqrt(n - 1) / (n - 1)
    eigs = np.linalg.eigvalsh(np.array([[0.0, c], [c, 0.0]]))
    td = float(0.5 * np.sum(np.abs(eigs)))
    return td, 0.5 + 0.5 * td


def omega_attack(n: int) -> tuple[float, float, float]:
    """Unveil success of the canonical steering attack: ``(p0, p1, average)``."""
    state, meas = omega_state(n), canonical_measurement(n)
    p0 = steer_and_unveil(state, meas, 0)
    p1 = steer_and_unveil(state, meas, 1)
    return p0, p1, 0.5 * (p0 + p1)


# -- finite-n binding optimizer ---------------------------------------------


class OptimizerDivergence(RuntimeError):
    """The optimizer produced a non-finite or unphysical value."""

    def __init__(self, message: str, record):
        super().__init__(message)
        self.record = record


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 64
    step_tol: float = 1e-8
    grad_tol: float = 1e-10
    max_iter: int = 5000
    max_map_rounds: int = 8
    seed: int = 0
    alpha_dim: int | None = None


@dataclass(frozen=True)
class RestartRecord:
    index: int
    p_avg: float
    iterations: int
    map_rounds: int
    converged: bool
    message: str


@dataclass
class CheatResult:
    """Best attack found: per-target success, their average and the run log."""

    n: int
    p0: float
    p1: float
    p_avg: float
    restarts: list[RestartRecord] = field(default_factory=list)
    state: EntangledState | None = None
    measurements: tuple[SteeringMeasurement, SteeringMeasurement] | None = None

    def as_tuple(self) -> tuple[float, float, float]:
        return self.p0, self.p1, self.p_avg


def _psi_matrix(b: int, n: int) -> np.ndarray:
    # column i-1 holds psi_i^b
    m = np.zeros((n, n - 1))
    m[0] = 1.0
    m[np.arange(1, n), np.arange(n - 1)] = 1.0 if b == 0 else -1.0
    return m / math.sqrt(2.0)


def _hermitian(x: np.ndarray, d: int) -> np.ndarray:
    p, q = np.triu_indices(d, 1)
    m = p.size
    h = np.diag(x[:d].astype(complex))
    h[p, q] = x[d : d + m] + 1j * x[d + m : d + 2 * m]
    h[q, p] = np.conj(h[p, q])
    return h


def _hermitian_grad(z: np.ndarray, d: int) -> np.ndarray:
    # gradient of 2 Re tr(z dH) with respect to the real coordinates of H
    p, q = np.triu_indices(d, 1)
    return np.concatenate(
        [2 * np.diag(z).real, 2 * (z[q, p] + z[p, q]).real, 2 * (1j * (z[q, p] - z[p, q])).real]
    )


class _Landscape:
    """Average unveil success as a smooth function of real parameters.

    Parameters: Alice's coefficient matrix ``C`` (``d x n``, real then
    imaginary parts, normalized inside), then one Hermitian generator per
    target bit with ``U_b = exp(i H_b)``. Measurement vectors are the
    columns of ``U_b``; outcome ``k`` announces ``maps[b][k]``.
    """

    def __init__(self, n: int, d: int):
        self.n, self.d = n, d
        self.psi = (_psi_matrix(0, n), _psi_matrix(1, n))
        self.size = 2 * d * n + 2 * d * d

    def unpack(self, x):
        d, n = self.d, self.n
        c = (x[: d * n] + 1j * x[d * n : 2 * d * n]).reshape(d, n)
        off = 2 * d * n
        gens = [1j * _hermitian(x[off + b * d * d : off + (b + 1) * d * d], d) for b in (0, 1)]
        return c, gens

    def strategy(self, x):
        c, gens = self.unpack(x)
        c = c / np.linalg.norm(c)
        zero = np.zeros((self.d, self.d), dtype=complex)
        return c, [expm_frechet(k, zero)[0] for k in gens]

    def successes(self, c, unitaries, maps):
        out = []
        for b in (0, 1):
            w = c @ self.psi[b][:, np.asarray(maps[b]) - 1]
            amps = np.einsum("ak,ak->k", unitaries[b].conj(), w)
            out.append(float(np.sum(np.abs(amps) ** 2)))
        return out

    def best_maps(self, c, unitaries):
        maps = []
        for b in (0, 1):
            # |u_k^dag C psi_i|^2 for every outcome k and index i
            scores = np.abs(unitaries[b].conj().T @ c @ self.psi[b]) ** 2
            maps.append(tuple(int(i) + 1 for i in np.argmax(scores, axis=1)))
        return maps

    def value_and_grad(self, x, maps):
        d = self.d
        c_raw, gens = self.unpack(x)
        scale = np.linalg.norm(c_raw)
        c = c_raw / scale
        value = 0.0
        grad_c = np.zeros_like(c)
        grads = []
        for b in (0, 1):
            u, _ = expm_frechet(gens[b], np.zeros((d, d), dtype=complex))
            psi = self.psi[b][:, np.asarray(maps[b]) - 1]
            w = c @ psi
            amps = np.einsum("ak,ak->k", u.conj(), w)
            value += 0.5 * float(np.sum(np.abs(amps) ** 2))
            grad_c += 0.5 * (u * amps) @ psi.T
            grad_u = 0.5 * w * amps.conj()
            _, frechet = expm_frechet(gens[b].conj().T, grad_u)
            grads.append(_hermitian_grad(1j * frechet.conj().T, d))
        grad_c = (grad_c - np.real(np.vdot(c, grad_c)) * c) / scale
        grad = np.concatenate([2 * grad_c.real.ravel(), 2 * grad_c.imag.ravel(), *grads])
        return -value, -grad


def optimal_cheat_probability(n: int, optimizer: OptimizerConfig | None = None) -> CheatResult:
    """Best average two-way unveil success found for a projective steering attack.

    Alice prepares any pure state of ``alpha (x) beta``, sends ``beta`` and,
    for each target bit, measures ``alpha`` projectively and announces an
    index per outcome. Each restart runs L-BFGS with the announcement maps
    fixed, reassigns each outcome to its best index, and repeats until the
    maps settle.

    Raises:
        ValueError: if ``n`` is outside ``2..12``.
        OptimizerDivergence: if any restart ends at a non-finite value or
            above 1.
    """
    cfg = optimizer or OptimizerConfig()
    if not 2 <= n <= MAX_OPTIMIZER_DIM:
        raise ValueError(f"optimizer supports 2 <= n <= {MAX_OPTIMIZER_DIM}, got {n}")
    d = cfg.alpha_dim or n
    land = _Landscape(n, d)
    records = []
    best = None
    for r in range(cfg.restarts):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, r])))
        x = rng.normal(size=land.size)
        maps = [tuple(int(i) for i in rng.integers(1, n, size=d)) for _ in (0, 1)]
        iterations = 0
        converged = False
        message = ""
        for rounds in range(1, cfg.max_map_rounds + 1):
            res = minimize(
                land.value_and_grad,
                x,
                args=(maps,),
                jac=True,
                method="L-BFGS-B",
                options={"ftol": cfg.step_tol, "gtol": cfg.grad_tol, "maxiter": cfg.max_iter},
            )
            x = res.x
            iterations += int(res.nit)
            message = str(res.message)
            converged = bool(res.success)
            new_maps = land.best_maps(*land.strategy(x))
            if new_maps == maps:
                break
            maps = new_maps
        c, unitaries = land.strategy(x)
        p0, p1 = land.successes(c, unitaries, maps)
        p_avg = 0.5 * (p0 + p1)
        records.append(RestartRecord(r, p_avg, iterations, rounds, converged, message))
        if not (math.isfinite(p_avg) and p_avg <= 1.0 + 1e-9):
            raise OptimizerDivergence(f"restart {r} returned p_avg={p_avg!r}", records)
        if best is None or p_avg > best[2]:
            best = (p0, p1, p_avg, c, unitaries, maps)
    p0, p1, p_avg, c, unitaries, maps = best
    meas = tuple(SteeringMeasurement(unitaries[b].T, maps[b]) for b in (0, 1))
    return CheatResult(n, p0, p1, p_avg, records, EntangledState(c), meas)


def binding_upper_bound(n: int) -> float:
    """Largest average unveil success over every attack, via semidefinite duality.

    Allows arbitrary POVMs on Alice's side, so it bounds every projective
    strategy from above. The dual program is
    ``min t`` subject to ``Y_b >= |psi_i^b><psi_i^b|`` for all ``i`` and
    ``(Y_0 + Y_1)/2 <= t I``.
    """
    import cvxpy as cp

    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    ys = [cp.Variable((n, n), symmetric=True) for _ in (0, 1)]
    t = cp.Variable()
    cons = [t * np.eye(n) - (ys[0] + ys[1]) / 2 >> 0]
    for b in (0, 1):
        for i in range(1, n):
            cons.append(ys[b] - make_psi(b, i, n).projector().real >> 0)
    prob = cp.Problem(cp.Minimize(t), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status != cp.OPTIMAL:
        raise RuntimeError(f"SDP solver finished with status {prob.status}")
    return float(prob.value)


def concealment_metrics(n: int) -> dict:
    td, helstrom = bob_discrimination_attack(n)
    return {"n": n, "trace_distance": td, "helstrom": helstrom, "closed_form": concealment_closed_form(n)}
