"""Sampling stationary fields and coupled pairs from atomic spectral data.

Each antipodal pair of atoms ``+-lambda`` with weight ``w`` each carries one
pair of independent standard normals ``(b, c)`` and contributes
``sqrt(2 w) (b cos(2 pi x.lambda) - c sin(2 pi x.lambda))`` to the field.
Coupled fields reuse the same ``(b, c)`` for both members of a coupled pair.

Random numbers come from Philox streams keyed by the seed, with the
replicate index written into the counter.  Replicate ``r`` always sees the
same coefficients, however replicates are split across threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .spectral import SpectralMeasure, multi_indices
from .transport import TransportPlan, common_support

TWO_PI = 2.0 * pi
COEFF_STREAM = 0


@dataclass(frozen=True)
class EvaluationGrid:
    points: np.ndarray
    R: float
    spacing: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if len(pts) and np.linalg.norm(pts, axis=1).max() > self.R + 1 + 1e-12:
            raise ValueError("grid points must lie within |x| <= R + 1")

    @property
    def n(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def within(self, R):
        return np.linalg.norm(self.points, axis=1) <= R + 1e-12


def ball_grid(n: int, R: float, spacing: float = 0.1) -> EvaluationGrid:
    """Points of ``spacing * Z^n`` inside the closed ball of radius R."""
    steps = int(np.floor(R / spacing + 1e-9))
    axis = spacing * np.arange(-steps, steps + 1)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    pts = pts[np.sum(pts ** 2, axis=1) <= R * R * (1 + 1e-12)]
    return EvaluationGrid(pts, float(R), float(spacing))


@dataclass(frozen=True)
class CoefficientDraw:
    b: np.ndarray
    c: np.ndarray
    seed: int
    stream: int


def _generator(seed: int, rep: int, stream: int = COEFF_STREAM) -> np.random.Generator:
    # words 2 and 3 of the 256-bit counter select the replicate and stream;
    # draws inside a replicate only ever advance word 0
    bitgen = np.random.Philox(key=int(seed) % (1 << 64), counter=[0, 0, int(rep), int(stream)])
    return np.random.Generator(bitgen)


def draw_coefficients(seed: int, n_pairs: int, rep: int = 0) -> CoefficientDraw:
    z = _generator(seed, rep).standard_normal(2 * n_pairs)
    return CoefficientDraw(z[0::2].copy(), z[1::2].copy(), int(seed), COEFF_STREAM)


def draw_batch(seed: int, n_pairs: int, reps: int, start: int = 0):
    """Coefficient arrays ``(b, c)`` of shape ``(reps, n_pairs)`` for replicates ``start..start+reps-1``."""
    z = np.empty((reps, 2 * n_pairs))
    for r in range(reps):
        z[r] = _generator(seed, start + r).standard_normal(2 * n_pairs)
    return z[:, 0::2], z[:, 1::2]


@dataclass(frozen=True)
class TrigPairs:
    """Frequencies and amplitudes of two fields sharing one set of coefficients."""

    s: np.ndarray
    t: np.ndarray
    amp1: np.ndarray
    amp2: np.ndarray

    def __len__(self):
        return len(self.amp1)

    def basis(self, points, alpha, which):
        """``(cos, sin)`` basis rows of ``d^alpha`` of field 1 or 2, shape ``(pairs, points)``."""
        freq, amp = (self.s, self.amp1) if which == 1 else (self.t, self.amp2)
        alpha = np.asarray(alpha, dtype=int)
        order = int(alpha.sum())
        phase = TWO_PI * (freq @ np.atleast_2d(points).T) + 0.5 * pi * order
        scale = amp * TWO_PI ** order * np.prod(freq ** alpha, axis=1)
        return scale[:, None] * np.cos(phase), scale[:, None] * np.sin(phase)

    def evaluate(self, b, c, points, alpha, which):
        cs, sn = self.basis(points, alpha, which)
        return b @ cs - c @ sn


def plan_pairs(plan: TransportPlan) -> TrigPairs:
    ep = plan.entry_pairs()
    e = ep[:, 0]
    amp = np.sqrt(plan.mass[e] + plan.mass[ep[:, 1]])
    return TrigPairs(plan.s_points[e], plan.t_points[e], amp, amp)


def measure_pairs(measure: SpectralMeasure) -> TrigPairs:
    if np.any(~np.any(measure.points, axis=1)):
        raise ValueError("atoms at the origin are not supported")
    p = measure.pairs.pairs
    lam = measure.points[p[:, 0]]
    amp = np.sqrt(measure.weights[p[:, 0]] + measure.weights[p[:, 1]])
    return TrigPairs(lam, lam, amp, amp)


def shared_pairs(rho1: SpectralMeasure, rho2: SpectralMeasure) -> TrigPairs:
    """Shared-white-noise coupling over the common support of two measures."""
    nodes, w1, w2 = common_support(rho1, rho2)
    union = SpectralMeasure(nodes, w1 + w2)
    p = union.pairs.pairs
    lam = nodes[p[:, 0]]
    a1 = np.sqrt(w1[p[:, 0]] + w1[p[:, 1]])
    a2 = np.sqrt(w2[p[:, 0]] + w2[p[:, 1]])
    return TrigPairs(lam, lam, a1, a2)


@dataclass(frozen=True)
class CoupledFieldSample:
    grid: EvaluationGrid
    values_f1: np.ndarray
    values_f2: np.ndarray
    values_F: np.ndarray
    derivatives: dict = field(default_factory=dict)
    seed: int = 0
    k: int = 0

    def field(self, name, alpha=None):
        """Values of ``d^alpha`` of ``"f1"``, ``"f2"`` or ``"F"``."""
        if alpha is None or not any(alpha):
            return {"f1": self.values_f1, "f2": self.values_f2, "F": self.values_F}[name]
        return self.derivatives[tuple(alpha)][name]


def _sample(pairs: TrigPairs, grid, k, seed, rep=0):
    draw = draw_coefficients(seed, len(pairs), rep)
    vals = {}
    for alpha in multi_indices(grid.n, k):
        f1 = pairs.evaluate(draw.b, draw.c, grid.points, alpha, 1)
        f2 = pairs.evaluate(draw.b, draw.c, grid.points, alpha, 2)
        vals[alpha] = {"f1": f1, "f2": f2, "F": f2 - f1}
    zero = tuple([0] * grid.n)
    base = vals.pop(zero)
    return CoupledFieldSample(grid, base["f1"], base["f2"], base["F"], vals, int(seed), int(k))


def sample_field(measure: SpectralMeasure, grid: EvaluationGrid, k: int, seed: int, rep: int = 0):
    """One draw of the stationary field with spectral measure ``measure``.

    Returns a :class:`CoupledFieldSample` whose two fields coincide (``F = 0``);
    use ``.field("f1", alpha)`` for values and derivatives.
    """
    measure.require_probability(1e-10)
    return _sample(measure_pairs(measure), grid, k, seed, rep)


def sample_coupled(plan: TransportPlan, grid: EvaluationGrid, k: int, seed: int, rep: int = 0):
    """One draw of ``(f1, f2, F = f2 - f1)`` under the coupling ``plan``."""
    plan.validate(1e-9)
    return _sample(plan_pairs(plan), grid, k, seed, rep)


def sample_shared(rho1, rho2, grid: EvaluationGrid, k: int, seed: int, rep: int = 0):
    """One draw of two fields driven by the same white noise on a common support."""
    return _sample(shared_pairs(rho1, rho2), grid, k, seed, rep)


def monte_carlo(pairs: TrigPairs, points, reps: int, seed: int, alpha=None, threads: int = 1,
                chunk: int = 2048):
    """Values of ``d^alpha f1`` and ``d^alpha f2`` for many replicates: arrays ``(reps, points)``."""
    points = np.atleast_2d(points)
    alpha = tuple([0] * points.shape[1]) if alpha is None else tuple(alpha)
    c1, s1 = pairs.basis(points, alpha, 1)
    c2, s2 = pairs.basis(points, alpha, 2)
    starts = list(range(0, reps, chunk))

    def work(start):
        size = min(chunk, reps - start)
        b, c = draw_batch(seed, len(pairs), size, start)
        return b @ c1 - c @ s1, b @ c2 - c @ s2

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    f1 = np.concatenate([p[0] for p in parts])
    f2 = np.concatenate([p[1] for p in parts])
    return f1, f2


def analytic_variance(plan: TransportPlan, x, alpha, k: int | None = None) -> float | np.ndarray:
    """``Var d^alpha F(x) = (2 pi)^{2|alpha|} sum w |s^alpha e(x.s) - t^alpha e(x.t)|^2``.

    ``x`` may be a single point or a batch of rows.  ``k`` (when given)
    enforces ``|alpha| <= k + 1``.
    """
    alpha = np.asarray(alpha, dtype=int)
    order = int(alpha.sum())
    if k is not None and order > k + 1:
        raise ValueError(f"|alpha| = {order} exceeds k + 1 = {k + 1}")
    x = np.asarray(x, dtype=float)
    s, t = plan.s_points, plan.t_points
    sa = np.prod(s ** alpha, axis=1)
    ta = np.prod(t ** alpha, axis=1)
    phase = TWO_PI * (np.atleast_2d(x) @ (s - t).T)
    integrand = (sa * sa + ta * ta)[None, :] - 2.0 * (sa * ta)[None, :] * np.cos(phase)
    out = TWO_PI ** (2 * order) * (integrand @ plan.mass)
    out = np.maximum(out, 0.0)
    return float(out[0]) if x.ndim == 1 else out


def pairs_variance(pairs: TrigPairs, x, alpha) -> np.ndarray:
    """Analytic ``Var d^alpha (f2 - f1)`` at the rows of ``x`` for any :class:`TrigPairs`."""
    alpha = np.asarray(alpha, dtype=int)
    order = int(alpha.sum())
    x = np.atleast_2d(np.asarray(x, dtype=float))
    sa = pairs.amp1 * np.prod(pairs.s ** alpha, axis=1)
    ta = pairs.amp2 * np.prod(pairs.t ** alpha, axis=1)
    phase = TWO_PI * (x @ (pairs.s - pairs.t).T)
    val = (sa * sa + ta * ta)[None, :] - 2.0 * (sa * ta)[None, :] * np.cos(phase)
    return TWO_PI ** (2 * order) * val.sum(axis=1)
