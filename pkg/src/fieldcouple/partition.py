"""Regions and equal-area partitions of S^1 and S^2.

Areas are normalized so the whole sphere has area 1.  Cells are half-open so
every point of the sphere lies in exactly one cell of a partition: arcs
contain their clockwise endpoint, zonal cells contain their lower latitude
edge and their western longitude edge.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, cos, pi, sin, sqrt

import numpy as np
from scipy.special import betainc

TWO_PI = 2.0 * pi


def _angles(points):
    return np.mod(np.arctan2(points[:, 1], points[:, 0]), TWO_PI)


@dataclass(frozen=True)
class Arc:
    """Half-open arc ``[start, start + length)`` on the unit circle."""

    start: float
    length: float
    n: int = 2

    @classmethod
    def centered(cls, center, half_length):
        return cls(center - half_length, 2.0 * half_length)

    @property
    def center(self):
        return self.start + 0.5 * self.length

    @property
    def half_length(self):
        return 0.5 * self.length

    @property
    def area(self):
        return min(self.length, TWO_PI) / TWO_PI

    @property
    def diameter(self):
        if self.length >= pi:
            return 2.0
        return 2.0 * sin(0.5 * self.length)

    def contains(self, points):
        offset = np.mod(_angles(np.atleast_2d(points)) - self.start, TWO_PI)
        return offset < self.length


@dataclass(frozen=True)
class Cap:
    """Closed spherical cap of given angular radius around a unit vector."""

    center: tuple
    radius: float

    @property
    def n(self):
        return len(self.center)

    @property
    def area(self):
        a = min(max(self.radius, 0.0), pi)
        n = self.n
        if n == 2:
            return a / pi
        if n == 3:
            return 0.5 * (1.0 - cos(a))
        half = 0.5 * betainc(0.5 * (n - 1), 0.5, sin(a) ** 2)
        return float(half if a <= 0.5 * pi else 1.0 - half)

    @property
    def diameter(self):
        return 2.0 * sin(self.radius) if self.radius <= 0.5 * pi else 2.0

    def contains(self, points):
        c = np.asarray(self.center, dtype=float)
        c = c / np.linalg.norm(c)
        return np.atleast_2d(points) @ c >= cos(self.radius)


def _zonal_diameter(z_lo, z_hi, width):
    """Chordal diameter of ``{z_lo <= z <= z_hi, 0 <= lon <= width}``."""
    if width >= pi:
        # opposite points on the parallel closest to the equator
        if z_lo <= 0.0 <= z_hi:
            return 2.0
        return 2.0 * sqrt(1.0 - min(z_lo * z_lo, z_hi * z_hi))
    c = cos(width)
    th_a, th_b = float(np.arccos(min(z_hi, 1.0))), float(np.arccos(max(z_lo, -1.0)))
    # chord^2 = 2 - 2 (c sin t1 sin t2 + cos t1 cos t2); for fixed t1 the inner
    # term is a sinusoid in t2, minimised at an endpoint or at its trough
    t1 = np.linspace(th_a, th_b, 1025)
    amp = np.hypot(c * np.sin(t1), np.cos(t1))
    phase = np.arctan2(c * np.sin(t1), np.cos(t1))
    best = np.minimum(
        c * np.sin(t1) * sin(th_a) + np.cos(t1) * cos(th_a),
        c * np.sin(t1) * sin(th_b) + np.cos(t1) * cos(th_b),
    )
    for trough in (phase + pi, phase - pi):
        inside = (trough >= th_a) & (trough <= th_b)
        best = np.where(inside, np.minimum(best, -amp), best)
    d2 = 2.0 - 2.0 * best.min()
    return float(sqrt(max(d2, 0.0)))


@dataclass(frozen=True)
class ZonalCell:
    """Latitude band ``[z_lo, z_hi)`` intersected with longitudes ``[lon_lo, lon_lo + width)``."""

    z_lo: float
    z_hi: float
    lon_lo: float
    width: float
    n: int = 3

    @property
    def area(self):
        return 0.5 * (self.z_hi - self.z_lo) * min(self.width, TWO_PI) / TWO_PI

    @property
    def diameter(self):
        return _zonal_diameter(self.z_lo, self.z_hi, self.width)

    def centroid(self):
        """Area centroid projected back to the sphere."""
        a, b = self.z_lo, self.z_hi
        if self.width >= TWO_PI:
            z = 1.0 if a + b > 0 else -1.0
            return np.array([0.0, 0.0, z])

        def prim(z):
            z = min(max(z, -1.0), 1.0)
            return 0.5 * (z * sqrt(1.0 - z * z) + np.arcsin(z))

        radial = prim(b) - prim(a)
        p0, p1 = self.lon_lo, self.lon_lo + self.width
        v = np.array([
            radial * (sin(p1) - sin(p0)),
            radial * (cos(p0) - cos(p1)),
            0.5 * (b * b - a * a) * self.width,
        ])
        return v / np.linalg.norm(v)

    def contains(self, points):
        p = np.atleast_2d(points)
        z = p[:, 2]
        top = z <= self.z_hi if self.z_hi >= 1.0 else z < self.z_hi
        inband = (z >= self.z_lo) & top
        if self.width >= TWO_PI:
            return inband
        off = np.mod(_angles(p) - self.lon_lo, TWO_PI)
        return inband & (off < self.width)


@dataclass
class Partition:
    """A covering of the sphere by disjoint half-open cells."""

    n: int
    cells: list
    nominal_r: float
    construction_constant: float = float("nan")
    _assign: object = field(default=None, repr=False)
    antipode: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.cells)

    @property
    def areas(self):
        return np.array([c.area for c in self.cells])

    @property
    def diameters(self):
        return np.array([c.diameter for c in self.cells])

    @property
    def max_diameter(self):
        return float(self.diameters.max())

    def assign(self, points):
        """Cell index of each point; -1 where no cell contains it."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self._assign is not None:
            return self._assign(points)
        idx = np.full(len(points), -1, dtype=np.int64)
        for j, cell in enumerate(self.cells):
            hit = cell.contains(points) & (idx < 0)
            idx[hit] = j
        return idx


def arc_partition(count: int, start: float = 0.0) -> Partition:
    """``count`` equal half-open arcs, the first starting at ``start``."""
    if count < 1:
        raise ValueError("arc count must be positive")
    length = TWO_PI / count
    cells = [Arc(start + j * length, length) for j in range(count)]

    def assign(points):
        off = np.mod(_angles(points) - start, TWO_PI)
        return np.minimum((off / length).astype(np.int64), count - 1)

    antipode = None
    if count % 2 == 0:
        antipode = (np.arange(count) + count // 2) % count
    return Partition(2, cells, cells[0].diameter, _assign=assign, antipode=antipode)


def _collar_counts(cells):
    """Symmetric cells-per-zone list, polar caps first and last."""
    if cells == 2:
        return [1, 1]
    cap_theta = 2.0 * np.arcsin(sqrt(1.0 / cells))
    ideal_side = sqrt(4.0 * pi / cells)
    n_collars = max(1, int(round((pi - 2.0 * cap_theta) / ideal_side)))
    if cells == 4:
        n_collars = 1
    fuzzy = (pi - 2.0 * cap_theta) / n_collars
    half = n_collars // 2
    counts = []
    carry = 0.0
    for j in range(half):
        t0 = cap_theta + j * fuzzy
        t1 = t0 + fuzzy
        ideal = cells * 0.5 * (cos(t0) - cos(t1)) + carry
        c = max(1, int(round(ideal)))
        carry = ideal - c
        counts.append(c)
    budget = cells - 2
    if n_collars % 2 == 1:
        middle = budget - 2 * sum(counts)
        while middle < 2:
            i = int(np.argmax(counts))
            counts[i] -= 1
            middle += 2
        north = counts + [middle]
        zones = [1] + north + counts[::-1] + [1]
    else:
        counts[-1] += budget // 2 - sum(counts)
        while counts[-1] < 1:
            i = int(np.argmax(counts[:-1]))
            counts[i] -= 1
            counts[-1] += 1
        zones = [1] + counts + counts[::-1] + [1]
    return zones


def zonal_partition(cells: int) -> Partition:
    """Equal-area zonal partition of S^2 into an even number of cells.

    Zones run north to south: a polar cap, collars split in longitude, and
    the opposite cap.  The construction is antipodally symmetric, and
    ``Partition.antipode[j]`` is the index of the cell ``-cell_j``.
    """
    if cells < 2 or cells % 2:
        raise ValueError(f"zonal partition needs an even cell count >= 2, got {cells}")
    zones = _collar_counts(cells)
    nz = len(zones)
    cum = np.concatenate([[0], np.cumsum(zones)])
    edges = 1.0 - 2.0 * cum / cells
    for i in range(len(edges) // 2):
        edges[len(edges) - 1 - i] = -edges[i]
    if len(edges) % 2:
        edges[len(edges) // 2] = 0.0

    out, info = [], []
    for i, k in enumerate(zones):
        z_hi, z_lo = float(edges[i]), float(edges[i + 1])
        width = TWO_PI / k
        mirror = nz - 1 - i
        if k == 1:
            offset = 0.0
        elif i < mirror:
            offset = 0.0 if i % 2 == 0 else 0.5 * width
        elif i == mirror:
            offset = 0.0
        else:
            # southern zones are the northern ones rotated by pi
            offset = (0.0 if mirror % 2 == 0 else 0.5 * width) + pi
        info.append((z_lo, offset, width, k))
        for j in range(k):
            lon = float(np.mod(offset + j * width, TWO_PI)) if k > 1 else 0.0
            out.append(ZonalCell(z_lo, z_hi, lon, width))

    starts = cum[:-1]
    antipode = np.empty(cells, dtype=np.int64)
    for i, k in enumerate(zones):
        mirror = nz - 1 - i
        for j in range(k):
            jj = (j + k // 2) % k if i == mirror else j
            antipode[starts[i] + j] = starts[mirror] + jj
    lows_asc = np.array([zi[0] for zi in info])[::-1]

    def assign(points):
        z = points[:, 2]
        # zone i holds lows[i] <= z < lows[i - 1]
        zi = nz - np.searchsorted(lows_asc, z, side="right")
        zi = np.clip(zi, 0, nz - 1)
        res = np.empty(len(points), dtype=np.int64)
        ang = _angles(points)
        for i in np.unique(zi):
            sel = zi == i
            _, offset, width, k = info[i]
            if k == 1:
                res[sel] = starts[i]
            else:
                j = (np.mod(ang[sel] - offset, TWO_PI) / width).astype(np.int64)
                res[sel] = starts[i] + np.minimum(j, k - 1)
        return res

    part = Partition(3, out, 0.0, _assign=assign, antipode=antipode)
    part.nominal_r = part.max_diameter
    return part


def build_partition(n: int, r: float) -> Partition:
    """Partition of S^{n-1} into cells of chordal diameter at most ``r``.

    For the circle this is ``ceil(2 pi / r)`` equal arcs starting at angle 0
    (arc length at most r, hence chord at most r).  For S^2 the zonal cell
    count is grown until every cell fits.
    """
    if not r > 0:
        raise ValueError(f"partition diameter r must be positive, got {r}")
    r = float(min(r, 2.0))
    if n == 2:
        count = int(ceil(TWO_PI / r - 1e-12))
        part = arc_partition(max(count, 1))
        part.nominal_r = r
        part.construction_constant = len(part) * r
        return part
    if n == 3:
        cells = 2 * max(1, int(ceil(pi / (r * r))))
        cells = max(2, cells - cells % 2)
        while True:
            part = zonal_partition(cells)
            if part.max_diameter <= r:
                break
            cells += max(2, 2 * int(0.02 * cells))
        part.nominal_r = r
        part.construction_constant = len(part) * r * r
        return part
    raise NotImplementedError(f"partitions are implemented for n = 2, 3 only (got n={n})")
