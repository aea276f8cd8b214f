"""Couplings of spectral measures and their transport costs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import pi, sqrt

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .spectral import GridDensity, SpectralMeasure, multi_indices

DEFAULT_SOLVER_LIMIT = 512


class SolverCapacityError(ValueError):
    pass


@dataclass(frozen=True)
class CouplingCostReport:
    w2_squared: float
    weighted_cost: float
    k: int


@dataclass(frozen=True)
class TransportPlan:
    """Coupling of two atomic measures as sparse ``(source, target, mass)`` entries."""

    source: SpectralMeasure
    target: SpectralMeasure
    src: np.ndarray
    tgt: np.ndarray
    mass: np.ndarray
    _entry_pairs: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("src", "tgt"):
            a = np.asarray(getattr(self, name), dtype=np.int64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        m = np.asarray(self.mass, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    def __len__(self):
        return len(self.mass)

    @property
    def entries(self):
        return list(zip(self.src.tolist(), self.tgt.tolist(), self.mass.tolist()))

    @property
    def s_points(self):
        return self.source.points[self.src]

    @property
    def t_points(self):
        return self.target.points[self.tgt]

    def marginals(self):
        a = np.bincount(self.src, weights=self.mass, minlength=len(self.source))
        b = np.bincount(self.tgt, weights=self.mass, minlength=len(self.target))
        return a, b

    def entry_pairs(self) -> np.ndarray:
        """Rows ``(e, e')`` where entry ``e'`` is the antipodal image of entry ``e``."""
        if self._entry_pairs is not None:
            return self._entry_pairs
        ps = self.source.pairs.partner()
        pt = self.target.pairs.partner()
        nt = len(self.target)
        key = self.src * nt + self.tgt
        order = {int(k): e for e, k in enumerate(key)}
        seen = np.zeros(len(key), dtype=bool)
        rows = []
        for e, (i, j) in enumerate(zip(self.src, self.tgt)):
            if seen[e]:
                continue
            f = order.get(int(ps[i] * nt + pt[j]))
            if f is None or seen[f] or f == e:
                raise ValueError(f"plan entry {e} has no antipodal partner; plan is not symmetric")
            if not np.isclose(self.mass[e], self.mass[f], rtol=1e-9, atol=1e-14):
                raise ValueError(f"plan entries {e} and {f} are antipodal but carry different mass")
            seen[e] = seen[f] = True
            rows.append((e, f))
        out = np.array(rows, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "_entry_pairs", out)
        return out

    def validate(self, tol=1e-10):
        if np.any(self.mass <= 0):
            raise ValueError("plan masses must be positive")
        a, b = self.marginals()
        if np.abs(a - self.source.weights).max() > tol:
            raise ValueError("source marginal does not match source weights")
        if np.abs(b - self.target.weights).max() > tol:
            raise ValueError("target marginal does not match target weights")
        if abs(self.mass.sum() - 1.0) > tol:
            raise ValueError("plan total mass is not 1")
        self.entry_pairs()
        return self

    def to_dict(self, k: int = 0) -> dict:
        cost = plan_cost(self, k)
        return {
            "entries": [[int(i), int(j), float(w)] for i, j, w in self.entries],
            "w2_squared": cost.w2_squared,
            "weighted_cost": cost.weighted_cost,
            "k": int(k),
            "source": json.loads(self.source.to_json()),
            "target": json.loads(self.target.to_json()),
        }

    def to_json(self, k: int = 0) -> str:
        d = self.to_dict(k)
        f = lambda x: format(float(x), ".17g")
        entries = ", ".join("[%d, %d, %s]" % (i, j, f(w)) for i, j, w in d["entries"])
        return (
            '{"entries": [%s], "w2_squared": %s, "weighted_cost": %s, "k": %d, "source": %s, "target": %s}'
            % (entries, f(d["w2_squared"]), f(d["weighted_cost"]), d["k"],
               self.source.to_json(), self.target.to_json())
        )

    @classmethod
    def from_json(cls, text: str, source=None, target=None) -> "TransportPlan":
        doc = json.loads(text)
        source = source if source is not None else SpectralMeasure.from_dict(doc["source"])
        target = target if target is not None else SpectralMeasure.from_dict(doc["target"])
        ent = np.array(doc["entries"], dtype=float).reshape(-1, 3)
        return cls(source, target, ent[:, 0].astype(np.int64), ent[:, 1].astype(np.int64), ent[:, 2])


def _sq_dist(s, t):
    return np.sum((s - t) ** 2, axis=-1)


def weighted_cost_matrix(s_pts, t_pts, k):
    """``(|s|^2 + |t|^2 + 1)^{k+1} |s - t|^2`` for every pair of rows."""
    s2 = np.sum(s_pts ** 2, axis=1)[:, None]
    t2 = np.sum(t_pts ** 2, axis=1)[None, :]
    d2 = np.maximum(s2 + t2 - 2.0 * s_pts @ t_pts.T, 0.0)
    return (s2 + t2 + 1.0) ** (k + 1) * d2


def plan_cost(plan: TransportPlan, k: int = 0) -> CouplingCostReport:
    s, t = plan.s_points, plan.t_points
    d2 = _sq_dist(s, t)
    fac = (np.sum(s ** 2, axis=1) + np.sum(t ** 2, axis=1) + 1.0) ** (k + 1)
    return CouplingCostReport(float(plan.mass @ d2), float(plan.mass @ (fac * d2)), int(k))


def _from_dense(source, target, mat, tol=0.0):
    i, j = np.nonzero(mat > tol)
    return TransportPlan(source, target, i, j, mat[i, j])


def symmetrize(plan: TransportPlan) -> TransportPlan:
    """Average a plan with its image under ``(s, t) -> (-s, -t)``."""
    ps = plan.source.pairs.partner()
    pt = plan.target.pairs.partner()
    nt = len(plan.target)
    keys = np.concatenate([plan.src * nt + plan.tgt, ps[plan.src] * nt + pt[plan.tgt]])
    mass = np.concatenate([plan.mass, plan.mass]) * 0.5
    uniq, inv = np.unique(keys, return_inverse=True)
    tot = np.zeros(len(uniq))
    np.add.at(tot, inv, mass)
    keep = tot > 0
    uniq, tot = uniq[keep], tot[keep]
    return TransportPlan(plan.source, plan.target, uniq // nt, uniq % nt, tot)


def _check_atomic_probability(*measures):
    for m in measures:
        m.require_probability(1e-10)
        if np.any(~np.any(m.points, axis=1)):
            raise ValueError("atoms at the origin are not supported")


def product_plan(rho1: SpectralMeasure, rho2: SpectralMeasure) -> TransportPlan:
    """The independent coupling ``rho1 x rho2``."""
    return _from_dense(rho1, rho2, np.outer(rho1.weights, rho2.weights))


def diagonal_plan(rho: SpectralMeasure) -> TransportPlan:
    idx = np.arange(len(rho))
    return TransportPlan(rho, rho, idx, idx, rho.weights.copy())


def solve_transport(a, b, cost):
    """Minimum-cost transport between weight vectors ``a`` and ``b``; returns the dense plan."""
    p, q = len(a), len(b)
    rows = np.concatenate([np.repeat(np.arange(p), q), p + np.tile(np.arange(q), p)])
    cols = np.concatenate([np.arange(p * q), np.arange(p * q)])
    A = coo_matrix((np.ones(2 * p * q), (rows, cols)), shape=(p + q, p * q)).tocsr()
    # one equality is implied by equal totals; dropping it keeps the system full rank
    rhs = np.concatenate([a, b])
    res = linprog(cost.ravel(), A_eq=A[:-1], b_eq=rhs[:-1], bounds=(0, None), method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return np.maximum(res.x.reshape(p, q), 0.0)


def exact_plan(rho1: SpectralMeasure, rho2: SpectralMeasure, k: int = 0,
               limit: int = DEFAULT_SOLVER_LIMIT) -> TransportPlan:
    """Symmetric coupling minimising the weighted cost ``(|s|^2+|t|^2+1)^{k+1}|s-t|^2``."""
    if len(rho1) > limit or len(rho2) > limit:
        raise SolverCapacityError(
            f"exact solver limit is {limit} atoms per side, got {len(rho1)} x {len(rho2)}")
    _check_atomic_probability(rho1, rho2)
    cost = weighted_cost_matrix(rho1.points, rho2.points, k)
    mat = solve_transport(rho1.weights, rho2.weights, cost)
    # LP round-off: drop dust and restore exact marginals on the support
    mat[mat < 1e-15] = 0.0
    plan = symmetrize(_from_dense(rho1, rho2, mat))
    return _polish(plan)


def _polish(plan, sweeps=3):
    """Rescale masses so both marginals match the measure weights to round-off."""
    mass = plan.mass.copy()
    a_w, b_w = plan.source.weights, plan.target.weights
    for _ in range(sweeps):
        a = np.bincount(plan.src, weights=mass, minlength=len(a_w))
        mass *= a_w[plan.src] / a[plan.src]
        b = np.bincount(plan.tgt, weights=mass, minlength=len(b_w))
        mass *= b_w[plan.tgt] / b[plan.tgt]
    return TransportPlan(plan.source, plan.target, plan.src, plan.tgt, mass)


def _lex_order(points, idx):
    keys = tuple(points[idx, d] for d in range(points.shape[1] - 1, -1, -1))
    return idx[np.lexsort(keys)]


def _northwest(ia, ma, ib, mb, amount, out):
    """Greedy two-pointer transfer of ``amount`` mass along ``ia`` x ``ib``; mutates ``ma``/``mb``."""
    p = q = 0
    left = amount
    while left > 1e-16 and p < len(ia) and q < len(ib):
        x = min(ma[ia[p]], mb[ib[q]], left)
        if x > 0:
            out.append((ia[p], ib[q], x))
            ma[ia[p]] -= x
            mb[ib[q]] -= x
            left -= x
        if ma[ia[p]] <= 1e-16:
            p += 1
        if mb[ib[q]] <= 1e-16:
            q += 1


def partition_plan(rho1: SpectralMeasure, rho2: SpectralMeasure, partition) -> TransportPlan:
    """Coupling that moves mass inside partition cells first.

    Inside every cell ``min(rho1(cell), rho2(cell))`` is matched greedily in
    lexicographic atom order.  The residual masses are antipodally averaged
    and coupled independently, so on the unit sphere the residual part costs
    exactly twice the leftover mass.
    """
    _check_atomic_probability(rho1, rho2)
    ca = partition.assign(rho1.points)
    cb = partition.assign(rho2.points)
    if np.any(ca < 0) or np.any(cb < 0):
        raise ValueError("partition does not cover every atom")
    ma = rho1.weights.copy()
    mb = rho2.weights.copy()
    found = []
    for cell in np.union1d(ca, cb):
        ia = _lex_order(rho1.points, np.nonzero(ca == cell)[0])
        ib = _lex_order(rho2.points, np.nonzero(cb == cell)[0])
        if len(ia) == 0 or len(ib) == 0:
            continue
        amount = min(ma[ia].sum(), mb[ib].sum())
        _northwest(ia, ma, ib, mb, amount, found)
    if found:
        arr = np.array(found)
        inner = TransportPlan(rho1, rho2, arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2])
        inner = symmetrize(inner)
        a, b = inner.marginals()
    else:
        inner = None
        a = np.zeros(len(rho1))
        b = np.zeros(len(rho2))
    ra = np.clip(rho1.weights - a, 0.0, None)
    rb = np.clip(rho2.weights - b, 0.0, None)
    ra[ra < 1e-15] = 0.0
    rb[rb < 1e-15] = 0.0
    left = 0.5 * (ra.sum() + rb.sum())
    parts_src, parts_tgt, parts_mass = [], [], []
    if inner is not None:
        parts_src.append(inner.src)
        parts_tgt.append(inner.tgt)
        parts_mass.append(inner.mass)
    if left > 1e-14:
        i = np.nonzero(ra)[0]
        j = np.nonzero(rb)[0]
        block = np.outer(ra[i], rb[j]) / left
        parts_src.append(np.repeat(i, len(j)))
        parts_tgt.append(np.tile(j, len(i)))
        parts_mass.append(block.ravel())
    src = np.concatenate(parts_src)
    tgt = np.concatenate(parts_tgt)
    mass = np.concatenate(parts_mass)
    nt = len(rho2)
    uniq, inv = np.unique(src * nt + tgt, return_inverse=True)
    tot = np.zeros(len(uniq))
    np.add.at(tot, inv, mass)
    plan = TransportPlan(rho1, rho2, uniq // nt, uniq % nt, tot)
    return _polish(symmetrize(plan))


def perturbation_coupling_sigma(eps1: float, eps2: float) -> float:
    """Variance of ``f_1 - f_2`` when ``f_j = sqrt(1-eps_j) f + sqrt(eps_j) g_j`` with independent ``g_j``."""
    for name, e in (("eps1", eps1), ("eps2", eps2)):
        if not 0.0 <= e <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {e}")
    return (sqrt(1.0 - eps1) - sqrt(1.0 - eps2)) ** 2 + eps1 + eps2


def common_support(rho1: SpectralMeasure, rho2: SpectralMeasure, decimals: int = 12):
    """Express both measures on one node set: ``(nodes, w1, w2)``.

    Grid densities must share their nodes exactly.  Atomic measures are merged
    on the union of their supports, which is the dominating measure
    ``rho1 + rho2`` written in atomic form.
    """
    if isinstance(rho1, GridDensity) or isinstance(rho2, GridDensity):
        if rho1.points.shape != rho2.points.shape or not np.array_equal(rho1.points, rho2.points):
            raise ValueError("grid densities must be given on identical node sets")
        return rho1.points, rho1.weights, rho2.weights
    keys1 = [tuple(r) for r in np.round(rho1.points, decimals) + 0.0]
    keys2 = [tuple(r) for r in np.round(rho2.points, decimals) + 0.0]
    index = {}
    nodes = []
    for key, p in list(zip(keys1, rho1.points)) + list(zip(keys2, rho2.points)):
        if key not in index:
            index[key] = len(nodes)
            nodes.append(p)
    w1 = np.zeros(len(nodes))
    w2 = np.zeros(len(nodes))
    np.add.at(w1, [index[k] for k in keys1], rho1.weights)
    np.add.at(w2, [index[k] for k in keys2], rho2.weights)
    return np.array(nodes), w1, w2


def smooth_coupling_sigma(rho1: SpectralMeasure, rho2: SpectralMeasure, k: int = 0) -> float:
    """``max_{|alpha|<=k+1} (2 pi)^{2|alpha|} int t^{2 alpha} (sqrt(rho2) - sqrt(rho1))^2 d mu``.

    With densities ``rho_j = d rho_j / d mu`` the integrand times ``d mu`` is
    ``(sqrt(w2) - sqrt(w1))^2`` per node, whatever the dominating measure.
    """
    nodes, w1, w2 = common_support(rho1, rho2)
    gap = (np.sqrt(w2) - np.sqrt(w1)) ** 2
    best = 0.0
    for a in multi_indices(nodes.shape[1], k + 1):
        a = np.asarray(a)
        val = (2 * pi) ** (2 * a.sum()) * float(np.prod(nodes ** (2 * a), axis=1) @ gap)
        best = max(best, val)
    return best
