"""Discrepancy between spectral measures on sphere regions and the resulting W2 bounds.

Also holds the partition-radius choices and reference rate curves for the
arithmetic waves, and the per-m rate table pipeline.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields
from math import log, pi

import numpy as np

from .lattice import enumerate_shell
from .partition import Arc, Cap, Partition, ZonalCell, arc_partition, build_partition, zonal_partition
from .spectral import arithmetic_measure

KAPPA = log(pi / 2.0) / 2.0
W2_BOUND_CONSTANT = 4.0

__all__ = [
    "Arc", "Cap", "ZonalCell", "Partition", "arc_partition", "zonal_partition", "build_partition",
    "UniformSphere", "discrepancy", "cell_discrepancies", "w2_bound", "theorem_r_choice",
    "reference_rate", "RateRecord", "rate_table", "KAPPA",
]


@dataclass(frozen=True)
class UniformSphere:
    """Normalized surface measure on S^{n-1}, evaluated through region areas."""

    n: int

    @property
    def total_mass(self):
        return 1.0


def _mass(measure, region) -> float:
    if isinstance(measure, UniformSphere):
        return float(region.area)
    return float(measure.weights[region.contains(measure.points)].sum())


def discrepancy(rho1, rho2, region) -> float:
    """``|rho1(region) - rho2(region)|``; either measure may be :class:`UniformSphere`."""
    return abs(_mass(rho1, region) - _mass(rho2, region))


def _cell_masses(measure, partition: Partition) -> np.ndarray:
    if isinstance(measure, UniformSphere):
        return partition.areas
    idx = partition.assign(measure.points)
    if np.any(idx < 0):
        raise ValueError("partition does not cover every atom")
    return np.bincount(idx, weights=measure.weights, minlength=len(partition))


def cell_discrepancies(rho1, rho2, partition: Partition) -> np.ndarray:
    return np.abs(_cell_masses(rho1, partition) - _cell_masses(rho2, partition))


def w2_bound(rho1, rho2, partition: Partition) -> float:
    """``r^2 + 4 sum_j Delta(cell_j)`` with ``r`` the partition's nominal diameter.

    The nominal diameter bounds every cell diameter, so the bound stays valid.
    """
    r = max(partition.nominal_r, partition.max_diameter)
    return r * r + W2_BOUND_CONSTANT * float(cell_discrepancies(rho1, rho2, partition).sum())


def theorem_r_choice(n: int, m: float) -> float:
    """Partition diameter balancing ``r^2`` against the discrepancy sum for the shell of m."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if n == 2:
        return log(m) ** (-KAPPA / 3.0)
    if n == 3:
        return m ** (-1.0 / 700.0)
    return m ** (-(n - 3) / (4.0 * (3 * n - 2) * (n + 1)))


def reference_rate(n: int, m: float, R: float, eps: float = 0.0) -> float:
    """Unit-constant shape of the sigma_R^2 decay for arithmetic waves."""
    if n == 2:
        return R * R * log(m) ** (-2.0 * KAPPA / 3.0 + eps)
    if n == 3:
        return R * R * m ** (-1.0 / 350.0 + eps)
    return R * R * m ** (-(n - 3) / (2.0 * (3 * n - 2) * (n + 1)) + eps)


@dataclass(frozen=True)
class RateRecord:
    m: int
    r_count: int
    r_choice: float
    sum_delta: float
    w2_bound: float
    sigma_r_bound: float
    reference_rate: float


RATE_HEADER = [f.name for f in fields(RateRecord)]


def _clamped_r(n, m):
    # log m vanishes at m = 1; the diameter never needs to exceed the sphere's
    if m < 2:
        return 2.0
    return min(theorem_r_choice(n, m), 2.0)


def rate_record(n: int, m: int, R: float, k: int = 0, r_rule=None, eps: float = 0.0) -> RateRecord:
    shell = enumerate_shell(n, m)
    rho = arithmetic_measure(shell)
    r = min((r_rule or _clamped_r)(n, m), 2.0)
    part = build_partition(n, r)
    deltas = cell_discrepancies(rho, UniformSphere(n), part)
    diam = max(part.nominal_r, part.max_diameter)
    sum_delta = float(deltas.sum())
    bound = diam * diam + W2_BOUND_CONSTANT * sum_delta
    ref = reference_rate(n, max(m, 2), R, eps)
    return RateRecord(int(m), shell.count, float(r), sum_delta, bound, R * R * bound, ref)


def rate_table(n: int, m_list, R: float, k: int = 0, r_rule=None, eps: float = 0.0,
               threads: int = 1) -> list[RateRecord]:
    """One :class:`RateRecord` per m, ordered by m.

    ``r_rule(n, m)`` picks the partition diameter (default: the
    rate-optimal choice, clamped to 2).  ``k`` is carried for the caller;
    the sigma_R column uses the unit-sphere estimate ``R^2 W2^2`` which does
    not depend on it.
    """
    ms = sorted(int(m) for m in m_list)
    job = lambda m: rate_record(n, m, R, k, r_rule, eps)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(job, ms))
    return [job(m) for m in ms]


def _fmt(v):
    return str(v) if isinstance(v, (int, np.integer)) else format(float(v), ".17g")


def rates_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATE_HEADER)
    for rec in records:
        w.writerow([_fmt(v) for v in astuple(rec)])
    return buf.getvalue()
