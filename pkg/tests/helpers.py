"""Shared random batteries and brute-force oracles for the test suite."""
from itertools import combinations, permutations

import numpy as np

from fieldcouple.spectral import SpectralMeasure


def circle_measure(rng, pairs, uniform=False):
    """Antipodally symmetric probability measure with ``2 * pairs`` atoms on S^1."""
    th = rng.uniform(0.0, 2.0 * np.pi, pairs)
    w = np.full(pairs, 1.0) if uniform else rng.uniform(0.2, 1.0, pairs)
    w = w / (2.0 * w.sum())
    pts = np.stack([np.cos(th), np.sin(th)], axis=1)
    return SpectralMeasure(np.concatenate([pts, -pts]), np.concatenate([w, w]))


def plane_measure(rng, pairs):
    """Symmetric measure with atoms of norm between 0.5 and 1.5 in R^2."""
    th = rng.uniform(0.0, 2.0 * np.pi, pairs)
    rad = rng.uniform(0.5, 1.5, pairs)
    w = rng.uniform(0.2, 1.0, pairs)
    w = w / (2.0 * w.sum())
    pts = rad[:, None] * np.stack([np.cos(th), np.sin(th)], axis=1)
    return SpectralMeasure(np.concatenate([pts, -pts]), np.concatenate([w, w]))


def sandwich_battery(seed=20240607, count=50):
    """Random pairs with at most 8 atoms per side.

    Even instances have general weights and at most 4 atoms per side, odd
    instances have uniform weights and equal atom counts of 6 or 8, so that
    an exhaustive vertex oracle is affordable for each.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        if i % 2 == 0:
            a = circle_measure(rng, int(rng.integers(1, 3)))
            b = circle_measure(rng, int(rng.integers(1, 3)))
        else:
            p = int(rng.choice([3, 4]))
            a = circle_measure(rng, p, uniform=True)
            b = circle_measure(rng, p, uniform=True)
        out.append((a, b))
    return out


def vertex_oracle(a, b, cost):
    """Minimum of ``<cost, P>`` over every basic feasible solution of the transport polytope.

    Enumerates all column subsets of size ``p + q - 1``; only meant for tiny problems.
    """
    p, q = cost.shape
    rows = []
    for i in range(p):
        r = np.zeros(p * q)
        r[i * q:(i + 1) * q] = 1
        rows.append(r)
    for j in range(q):
        r = np.zeros(p * q)
        r[j::q] = 1
        rows.append(r)
    A = np.array(rows)[:-1]
    rhs = np.concatenate([a, b])[:-1]
    best = np.inf
    c = cost.ravel()
    for basis in combinations(range(p * q), p + q - 1):
        B = A[:, basis]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        x = np.linalg.solve(B, rhs)
        if np.all(x >= -1e-12):
            best = min(best, float(c[list(basis)] @ x))
    return best


def assignment_oracle(cost):
    """Minimum over all permutation matrices (the vertices of the Birkhoff polytope) of a square cost."""
    n = cost.shape[0]
    best = np.inf
    cols = np.arange(n)
    for perm in permutations(range(n)):
        best = min(best, float(cost[cols, perm].sum()))
    return best / n


def brute_counts(n, m_max):
    """Histogram of squared norms over the integer cube: r_n(m) for m <= m_max."""
    b = int(np.floor(np.sqrt(m_max)))
    axis = np.arange(-b, b + 1) ** 2
    sq = axis
    for _ in range(n - 1):
        sq = (sq[:, None] + axis[None, :]).ravel()
        sq = sq[sq <= m_max]
    return np.bincount(sq, minlength=m_max + 1)


def jacobi_r4(m):
    """Jacobi's four-square formula: 8 times the sum of divisors of m not divisible by 4."""
    return 8 * sum(d for d in range(1, m + 1) if m % d == 0 and d % 4)
