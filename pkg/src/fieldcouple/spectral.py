"""Symmetric spectral measures and their covariance kernels.

Two concrete kinds are used: :class:`SpectralMeasure` holds atoms with
weights; :class:`GridDensity` holds a density sampled on a symmetric tensor
grid together with quadrature weights, and exposes the same atomic view
(``weight = density * quadrature weight``) so every routine below works on
both.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .lattice import LatticeShell
from .partition import TWO_PI, zonal_partition


class NotRepresentableError(ValueError):
    def __init__(self, n, m):
        super().__init__(f"m={m} is not a sum of {n} squares; the shell is empty")
        self.n = n
        self.m = m


@dataclass(frozen=True)
class AntipodalPairIndex:
    """Pairs ``(i, j)`` with ``points[j] == -points[i]``; each atom appears once."""

    pairs: np.ndarray

    @property
    def first(self):
        return self.pairs[:, 0]

    @property
    def second(self):
        return self.pairs[:, 1]

    def partner(self):
        size = 2 * len(self.pairs)
        out = np.empty(size, dtype=np.int64)
        out[self.pairs[:, 0]] = self.pairs[:, 1]
        out[self.pairs[:, 1]] = self.pairs[:, 0]
        return out


def _exact_key(row):
    return tuple(float(v) + 0.0 for v in row)  # +0.0 folds -0.0 onto 0.0


def antipodal_pairs(points, weights=None, atol=0.0) -> AntipodalPairIndex:
    """Match every atom with its negation.

    Matching is exact by default; ``atol`` allows rounding to that
    resolution for measures read back from text.
    """
    points = np.asarray(points, dtype=float)
    if atol > 0:
        keyed = np.round(points / atol).astype(np.int64)
        keys = [tuple(r) for r in keyed]
        neg = [tuple(-r) for r in keyed]
    else:
        keys = [_exact_key(r) for r in points]
        neg = [_exact_key(-r) for r in points]
    where = {}
    for i, k in enumerate(keys):
        where.setdefault(k, []).append(i)
    used = np.zeros(len(points), dtype=bool)
    pairs = []
    for i in range(len(points)):
        if used[i]:
            continue
        if not np.any(points[i]):
            raise ValueError("atom at the origin cannot be antipodally paired")
        cands = [j for j in where.get(neg[i], []) if not used[j]]
        if not cands:
            raise ValueError(f"atom {i} at {points[i]} has no antipodal partner")
        j = cands[0]
        if weights is not None and not np.isclose(weights[i], weights[j], rtol=1e-12, atol=1e-15):
            raise ValueError(f"atoms {i} and {j} are antipodal but carry different weights")
        used[i] = used[j] = True
        pairs.append((i, j))
    return AntipodalPairIndex(np.array(pairs, dtype=np.int64).reshape(-1, 2))


@dataclass(frozen=True)
class SpectralMeasure:
    """Atomic symmetric measure ``sum_j w_j delta_{lambda_j}``."""

    points: np.ndarray
    weights: np.ndarray
    _pairs: AntipodalPairIndex | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(pts) != len(w):
            raise ValueError("points and weights differ in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if self._pairs is None:
            object.__setattr__(self, "_pairs", antipodal_pairs(pts, w))

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def kind(self) -> str:
        return "atomic"

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def pairs(self) -> AntipodalPairIndex:
        return self._pairs

    def __len__(self):
        return len(self.weights)

    def is_probability(self, tol=1e-12) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def require_probability(self, tol=1e-12):
        if not self.is_probability(tol):
            raise ValueError(f"expected a probability measure, total mass is {self.total_mass!r}")

    def to_json(self) -> str:
        atoms = ", ".join(
            "[[" + ", ".join(format(float(c), ".17g") for c in p) + "], " + format(float(w), ".17g") + "]"
            for p, w in zip(self.points, self.weights)
        )
        return '{"n": %d, "atoms": [%s]}' % (self.n, atoms)

    @classmethod
    def from_json(cls, text: str) -> "SpectralMeasure":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_dict(cls, doc) -> "SpectralMeasure":
        n = int(doc["n"])
        atoms = doc["atoms"]
        pts = np.array([a[0] for a in atoms], dtype=float).reshape(-1, n)
        w = np.array([a[1] for a in atoms], dtype=float)
        return cls(pts, w)


@dataclass(frozen=True)
class GridDensity(SpectralMeasure):
    """Density on a symmetric tensor grid with midpoint quadrature weights."""

    density: np.ndarray = None
    quad_weights: np.ndarray = None

    @property
    def kind(self) -> str:
        return "grid"

    @classmethod
    def on_box(cls, func, n: int, half_width: float, per_side: int) -> "GridDensity":
        """Sample ``func(nodes) -> density`` on ``(-L, L)^n`` with ``2 * per_side`` cells per axis.

        Nodes are cell midpoints ``h * (i + 1/2)``; the grid is exactly
        symmetric and avoids the origin.
        """
        h = half_width / per_side
        axis = h * (np.arange(-per_side, per_side) + 0.5)
        mesh = np.meshgrid(*([axis] * n), indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        dens = np.asarray(func(nodes), dtype=float).ravel()
        if np.any(dens < 0):
            raise ValueError("density must be non-negative")
        q = np.full(len(nodes), h ** n)
        return cls(nodes, dens * q, density=dens, quad_weights=q)


def arithmetic_measure(shell: LatticeShell) -> SpectralMeasure:
    """Uniform probability measure on the normalized shell points."""
    if shell.count == 0:
        raise NotRepresentableError(shell.n, shell.m)
    pts = shell.normalized
    count = shell.count
    w = np.full(count, 1.0 / count)
    # negation reverses lexicographic order on a symmetric point set
    i = np.arange(count // 2)
    pairs = AntipodalPairIndex(np.stack([i, count - 1 - i], axis=1))
    return SpectralMeasure(pts, w, _pairs=pairs)


def uniform_sphere_discretization(n: int, cells: int) -> SpectralMeasure:
    """Equal-area atomic approximation of the normalized surface measure.

    On the circle atoms sit at the midpoints of ``cells`` equal arcs starting
    at angle 0; on S^2 they sit at the projected centroids of the zonal
    cells.  Antipodal atoms are exact negatives of each other.
    """
    if cells < 2 or cells % 2:
        raise ValueError(f"cell count must be even and >= 2, got {cells}")
    w = np.full(cells, 1.0 / cells)
    if n == 2:
        half = cells // 2
        theta = (np.arange(half) + 0.5) * (TWO_PI / cells)
        north = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        pts = np.concatenate([north, -north])
        return SpectralMeasure(pts, w)
    if n == 3:
        part = zonal_partition(cells)
        pts = np.empty((cells, 3))
        done = np.zeros(cells, dtype=bool)
        for j, cell in enumerate(part.cells):
            if done[j]:
                continue
            a = part.antipode[j]
            pts[j] = cell.centroid()
            pts[a] = -pts[j]
            done[j] = done[a] = True
        return SpectralMeasure(pts, w)
    raise NotImplementedError(f"sphere discretization is implemented for n = 2, 3 only (got n={n})")


def two_atom_measure(x1) -> SpectralMeasure:
    """``(delta_{x1} + delta_{-x1}) / 2``."""
    x1 = np.asarray(x1, dtype=float)
    return SpectralMeasure(np.stack([x1, -x1]), [0.5, 0.5])


def covariance_kernel(measure: SpectralMeasure, x) -> float | np.ndarray:
    """``K(x) = sum_j w_j cos(2 pi x . lambda_j)``; ``x`` may be a batch of rows."""
    x = np.asarray(x, dtype=float)
    phase = TWO_PI * (np.atleast_2d(x) @ measure.points.T)
    vals = np.cos(phase) @ measure.weights
    return float(vals[0]) if x.ndim == 1 else vals


def moment(measure: SpectralMeasure, alpha) -> float:
    """``sum_j w_j lambda_j^alpha``; exactly zero for odd total order."""
    alpha = np.asarray(alpha, dtype=int)
    if alpha.sum() % 2 == 1:
        return 0.0
    mono = np.prod(measure.points ** alpha, axis=1)
    return float(mono @ measure.weights)


def multi_indices(n: int, max_order: int):
    """All multi-indices of ``n`` components with order ``<= max_order``, graded."""
    out = []
    for order in range(max_order + 1):
        out.extend(_compositions(n, order))
    return out


def _compositions(n, order):
    if n == 1:
        return [(order,)]
    res = []
    for first in range(order, -1, -1):
        for rest in _compositions(n - 1, order - first):
            res.append((first,) + rest)
    return res


def derivative_variance(measure: SpectralMeasure, k: int) -> float:
    """``max_{|alpha| <= k+1} E (d^alpha f)^2 = (2 pi)^{2|alpha|} m_{2 alpha}`` for the stationary field."""
    best = 0.0
    for a in multi_indices(measure.n, k + 1):
        a = np.asarray(a)
        best = max(best, (2 * pi) ** (2 * a.sum()) * moment(measure, 2 * a))
    return best
