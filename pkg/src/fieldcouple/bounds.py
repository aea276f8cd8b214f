"""Supremal derivative variances, C^k sup norms and Borell-TIS style tail bounds."""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil, exp, log, sqrt

import numpy as np
from scipy.stats import norm

from .fieldsim import analytic_variance, ball_grid, measure_pairs, monte_carlo, plan_pairs
from .spectral import derivative_variance, multi_indices
from .transport import TransportPlan


@dataclass(frozen=True)
class TailBoundConfig:
    k: int = 0
    R: float = 3.0
    c1: float = 1.0
    cover_count: int = 1

    def __post_init__(self):
        if self.cover_count < 1:
            raise ValueError("cover_count must be >= 1")
        if not self.c1 > 0:
            raise ValueError("c1 must be positive")


def sigma_R(plan: TransportPlan, R: float, k: int = 0, grid_spacing: float = 0.1) -> float:
    """Grid maximum of ``Var d^alpha F(x)`` over ``|x| <= R + 1`` and ``|alpha| <= k + 1``.

    The value is the squared sigma_R; being a grid maximum it is a lower bound
    on the true supremum.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    if grid_spacing > 0.1:
        raise ValueError("grid spacing must be at most 0.1")
    grid = ball_grid(plan.source.n, R + 1.0, grid_spacing)
    best = 0.0
    for alpha in multi_indices(plan.source.n, k + 1):
        best = max(best, float(analytic_variance(plan, grid.points, alpha).max()))
    return best


def ck_norm(sample, field: str, R: float) -> float:
    """``max_{|x| <= R, |alpha| <= k} |d^alpha field(x)|`` over the sample grid."""
    grid = sample.grid
    if R > grid.R + 1e-12:
        raise ValueError(f"R={R} exceeds the sample radius {grid.R}")
    inside = grid.within(R)
    best = float(np.abs(sample.field(field)[inside]).max())
    for alpha, vals in sample.derivatives.items():
        best = max(best, float(np.abs(vals[field][inside]).max()))
    return best


def partial_count(k: int, d: int) -> int:
    """``c_{k,d} = 1 + d + ... + d^k``."""
    return sum(d ** i for i in range(k + 1))


def tail_bound(N: int, A: float, c1: float, k: int = 0, d: int = 2) -> float:
    """``min(1, exp(log(c_{k,d} N) - (A - c1)^2 / (2 c1^2)))``.

    ``A = c1`` is accepted and gives the capped value 1.
    """
    if A < c1:
        raise ValueError(f"tail bound needs A >= c1, got A={A}, c1={c1}")
    expo = log(partial_count(k, d) * N) - (A - c1) ** 2 / (2.0 * c1 * c1)
    return 1.0 if expo >= 0 else exp(expo)


def corollary_bound(R: float, c: float, c1: float, c2: float = 1.0) -> float:
    """``exp(-(c log R)^2 / 16)``, valid when ``c log R > 2 c1`` and ``R > c2``."""
    if not R > c2:
        raise ValueError(f"corollary needs R > c2 (R={R}, c2={c2})")
    if not c * log(R) > 2.0 * c1:
        raise ValueError(f"corollary needs c log R > 2 c1 (c log R={c * log(R)}, 2 c1={2.0 * c1})")
    return exp(-(c * log(R)) ** 2 / 16.0)


def cover_count(R: float, n: int = 2) -> int:
    """Number of unit balls in a cube-grid cover of ``B_R``.

    Cubes of side ``2 / sqrt(n)`` fit inside unit balls; every cube meeting
    the ball is kept.
    """
    side = 2.0 / sqrt(n)
    steps = int(ceil(R / side)) + 1
    axis = side * np.arange(-steps, steps)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    lo = np.stack([m.ravel() for m in mesh], axis=1)
    # distance from the origin to the nearest point of each cube
    near = np.clip(0.0, lo, lo + side)
    return int(np.sum(np.sum(near ** 2, axis=1) <= R * R))


def covering_constant(R: float, n: int = 2) -> float:
    return cover_count(R, n) / R ** n


def wilson_interval(hits: int, total: int, level: float = 0.95):
    z = float(norm.ppf(0.5 + 0.5 * level))
    if total == 0:
        return 0.0, 1.0
    p = hits / total
    den = 1.0 + z * z / total
    mid = (p + z * z / (2 * total)) / den
    half = z * sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / den
    lo = 0.0 if hits == 0 else max(0.0, mid - half)
    hi = 1.0 if hits == total else min(1.0, mid + half)
    return lo, hi


@dataclass(frozen=True)
class TailRow:
    A: float
    frequency: float
    wilson_lo: float
    wilson_hi: float
    bound: float


def ck_norm_samples(source, R: float, k: int, reps: int, seed: int, field: str = "F",
                    spacing: float = 0.1, threads: int = 1) -> np.ndarray:
    """C^k norm on ``B_R`` of ``reps`` independent draws (vectorised over replicates)."""
    if isinstance(source, TransportPlan):
        pairs = plan_pairs(source)
        n = source.source.n
    else:
        pairs = measure_pairs(source)
        n = source.n
        field = "f1"
    grid = ball_grid(n, R, spacing)
    best = np.zeros(reps)
    for alpha in multi_indices(n, k):
        f1, f2 = monte_carlo(pairs, grid.points, reps, seed, alpha, threads)
        vals = {"f1": f1, "f2": f2, "F": f2 - f1}[field]
        best = np.maximum(best, np.abs(vals).max(axis=1))
    return best


def field_sigma(source, R: float, k: int) -> float:
    """sigma (not squared) controlling the C^k norm of the sampled field on ``B_R``."""
    if isinstance(source, TransportPlan):
        return sqrt(sigma_R(source, R, k))
    return sqrt(derivative_variance(source, k))


def empirical_tail(source, R: float, k: int, A_values, reps: int, seed: int, c1: float = 1.0,
                   threads: int = 1, norms=None) -> list[TailRow]:
    """Exceedance frequencies of ``||field||_{C^k(B_R)} > A sigma`` against :func:`tail_bound`.

    ``source`` is a plan (the difference field F is used) or a measure.
    """
    if reps < 1000:
        raise ValueError("empirical_tail needs at least 1000 replicates")
    n = source.source.n if isinstance(source, TransportPlan) else source.n
    sigma = field_sigma(source, R, k)
    if norms is None:
        norms = ck_norm_samples(source, R, k, reps, seed, threads=threads)
    N = cover_count(R, n)
    rows = []
    for A in A_values:
        hits = int(np.sum(norms > A * sigma)) if sigma > 0 else 0
        lo, hi = wilson_interval(hits, reps)
        bound = tail_bound(N, A, c1, k, n) if A > c1 else 1.0
        rows.append(TailRow(float(A), hits / reps, lo, hi, bound))
    return rows


def calibrate_c1(rows_by_case, cover_counts, k=0, d=2, grid=None) -> float:
    """Smallest ``c1`` on a grid for which no Wilson lower limit exceeds its tail bound.

    ``rows_by_case`` is a list of :class:`TailRow` lists, one per battery case.
    """
    grid = np.linspace(0.05, 10.0, 400) if grid is None else np.asarray(grid)
    for c1 in grid:
        ok = True
        for rows, N in zip(rows_by_case, cover_counts):
            for row in rows:
                if row.A <= c1:
                    continue
                if row.wilson_lo > tail_bound(N, row.A, c1, k, d):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return float(c1)
    return float("nan")
