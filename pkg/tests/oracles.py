"""Independent reference computations used to freeze expected values.

Nothing here imports the code under test beyond plain data types.
"""

from fractions import Fraction
import itertools
import math

import numpy as np


def dense_detect(kets: dict, horizon: int) -> dict:
    """Brute-force BS_B: lay the photon out as a dense (path, tick) vector.

    ``kets`` maps ``(path_index, tick) -> amplitude`` with path 0 = X, 1 = Y.
    The beam splitter is applied tick by tick as the 2x2 matrix
    ``[[1, 1], [1, -1]] / sqrt(2)`` acting on ``(X, Y)`` amplitudes.
    """
    field = np.zeros((2, horizon), dtype=complex)
    for (path, tick), amp in kets.items():
        field[path, tick] += amp
    bs = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    out = bs @ field
    probs = {}
    for d, t in itertools.product(range(2), range(horizon)):
        p = abs(out[d, t]) ** 2
        if p > 1e-15:
            probs[(d, t)] = p
    return probs


def rational_overlap(b0: int, b1: int, i: int, j: int) -> Fraction:
    """<psi_i^b0|psi_j^b1> computed with exact squared magnitudes (each 1/2)."""
    half = Fraction(1, 2)
    total = half  # <0|0> term
    if i == j:
        total += half * (-1) ** (b0 + b1)
    return total


def grid_binding_n2(points: int = 9) -> float:
    """Max of (P0 + P1)/2 at n = 2 over a grid of attacks.

    Alice's two-qubit state is swept over a real hyperspherical grid (plus a
    relative phase) and her measurement on alpha over a grid of real
    rotations. With one slot only index 1 can be announced.
    """
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    angles = np.linspace(0, math.pi, points)
    phases = np.linspace(0, 2 * math.pi, points, endpoint=False)
    best = 0.0
    for a1, a2, a3, ph in itertools.product(angles, angles, angles, phases):
        c = np.array(
            [
                math.cos(a1),
                math.sin(a1) * math.cos(a2),
                math.sin(a1) * math.sin(a2) * math.cos(a3),
                math.sin(a1) * math.sin(a2) * math.sin(a3) * np.exp(1j * ph),
            ]
        ).reshape(2, 2)
        for th0, th1 in itertools.product(angles, angles):
            total = 0.0
            for th, target in ((th0, plus), (th1, minus)):
                basis = np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
                total += sum(abs(e @ c @ target) ** 2 for e in basis)
            best = max(best, total / 2)
    return best


def binomial_pmf(k: int, s: int, p: float) -> float:
    return math.exp(math.lgamma(s + 1) - math.lgamma(k + 1) - math.lgamma(s - k + 1) + k * math.log(p) + (s - k) * math.log1p(-p))


def binomial_accept_probability(s: int, eps: float, z: float) -> float:
    """Exact P(Binomial(s, 1-eps) >= s(1-eps) - z sqrt(s eps (1-eps)))."""
    threshold = s * (1 - eps) - z * math.sqrt(s * eps * (1 - eps))
    k0 = math.ceil(threshold)
    return sum(binomial_pmf(k, s, 1 - eps) for k in range(k0, s + 1))


def random_search_binding(n: int, samples: int = 4000, seed: int = 0) -> float:
    """Lower bound on the best average unveil success by sampling attacks.

    Each sample draws Alice's joint state from the complex Gaussian ensemble
    and one Haar-random basis of ``alpha`` per target bit; every outcome
    announces whichever index Bob is most likely to accept.
    """
    from scipy.stats import unitary_group

    rng = np.random.default_rng(seed)
    psi = []
    for b in (0, 1):
        cols = []
        for i in range(1, n):
            v = np.zeros(n)
            v[0] = v[i] = 1.0
            v[i] *= (-1) ** b
            cols.append(v / math.sqrt(2))
        psi.append(np.array(cols).T)
    best = 0.0
    for _ in range(samples):
        c = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        c /= np.linalg.norm(c)
        total = 0.0
        for b in (0, 1):
            u = unitary_group.rvs(n, random_state=rng)
            total += (np.abs(u.conj().T @ c @ psi[b]) ** 2).max(axis=1).sum()
        best = max(best, total / 2)
    return float(best)
