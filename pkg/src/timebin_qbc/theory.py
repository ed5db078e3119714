"""Finite-dimensional model of the commitment states and their ensembles.

The protocol lives in an infinite-dimensional space spanned by
``|0>, |1>, |2>, ...``. Here it is truncated to dimension ``n``; every
concealment figure is reported as a function of ``n`` so the trend of the
limit stays visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INV_SQRT2 = 1.0 / math.sqrt(2.0)

_NORM_TOL = 1e-12
_HERMITIAN_TOL = 1e-12
_PSD_TOL = 1e-10


def _sign(b: int) -> float:
    if b not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {b!r}")
    return 1.0 if b == 0 else -1.0


@dataclass(frozen=True, eq=False)
class TheoreticalState:
    """A normalized pure state in the truncated space ``C^n``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1:
            raise ValueError("amplitudes must be one-dimensional")
        if amps.size < 2:
            raise ValueError(f"dimension must be at least 2, got {amps.size}")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def inner(self, other: "TheoreticalState") -> complex:
        """Return ``<self|other>``."""
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def __eq__(self, other):
        if not isinstance(other, TheoreticalState):
            return NotImplemented
        return self.dim == other.dim and bool(np.all(self.amplitudes == other.amplitudes))

    def __repr__(self):
        return f"TheoreticalState(dim={self.dim}, amplitudes={self.amplitudes!r})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A density operator on ``C^n``; validated on construction."""

    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > _HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho)
        if abs(tr - 1.0) > _NORM_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        if np.linalg.eigvalsh(rho)[0] < -_PSD_TOL:
            raise ValueError("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_ensemble(cls, ensemble) -> "DensityMatrix":
        """Build ``sum_k p_k |chi_k><chi_k|`` from ``(p_k, state)`` pairs."""
        ensemble = list(ensemble)
        if not ensemble:
            raise ValueError("empty ensemble")
        dim = ensemble[0][1].dim
        rho = np.zeros((dim, dim), dtype=complex)
        for p, state in ensemble:
            if state.dim != dim:
                raise ValueError(f"dimension mismatch in ensemble: {state.dim} vs {dim}")
            rho += p * state.projector()
        return cls(rho)


def basis_state(k: int, n: int) -> TheoreticalState:
    """Return the canonical basis ket ``|k>`` of ``C^n``."""
    if not 0 <= k < n:
        raise ValueError(f"basis index {k} out of range for dimension {n}")
    amps = np.zeros(n, dtype=complex)
    amps[k] = 1.0
    return TheoreticalState(amps)


def make_psi(b: int, i: int, n: int) -> TheoreticalState:
    """Return the commitment state ``(|0> + (-1)^b |i>) / sqrt(2)``.

    Args:
        b: committed bit.
        i: slot index, ``1 <= i <= n - 1``.
        n: truncation dimension, at least 2.

    Raises:
        ValueError: if ``n < 2`` or ``i`` is outside ``1..n-1``.
    """
    sign = _sign(b)
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    if not 1 <= i <= n - 1:
        raise ValueError(f"index i={i} out of range 1..{n - 1}")
    amps = np.zeros(n, dtype=complex)
    amps[0] = INV_SQRT2
    amps[i] = sign * INV_SQRT2
    return TheoreticalState(amps)


def commitment_ensemble(b: int, n: int) -> list[tuple[float, TheoreticalState]]:
    """Uniform ensemble over ``{psi_i^b : i = 1..n-1}``."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    p = 1.0 / (n - 1)
    return [(p, make_psi(b, i, n)) for i in range(1, n)]


def ensemble_density(b: int, n: int) -> DensityMatrix:
    """Density matrix Bob holds for one round when Alice commits ``b``.

    Filled in directly from its closed form: ``1/2`` at ``(0, 0)``,
    ``1/(2(n-1))`` on the rest of the diagonal, ``(-1)^b / (2(n-1))`` on the
    rest of row and column 0, zero elsewhere.
    """
    sign = _sign(b)
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    w = 1.0 / (2 * (n - 1))
    rho = np.diag(np.full(n, w, dtype=complex))
    rho[0, 1:] = sign * w
    rho[1:, 0] = sign * w
    rho[0, 0] = 0.5
    return DensityMatrix(rho)


def _check_pair(rho: DensityMatrix, sigma: DensityMatrix):
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Half the sum of absolute eigenvalues of ``rho - sigma``."""
    _check_pair(rho, sigma)
    eigs = np.linalg.eigvalsh(rho.entries - sigma.entries)
    return float(min(1.0, 0.5 * np.sum(np.abs(eigs))))


def helstrom_probability(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Optimal probability of telling ``rho`` from ``sigma`` with equal priors."""
    return 0.5 + 0.5 * trace_distance(rho, sigma)


def concealment_closed_form(n: int) -> float:
    """Trace distance between the two commitment ensembles, ``1/sqrt(n-1)``."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    return 1.0 / math.sqrt(n - 1)
