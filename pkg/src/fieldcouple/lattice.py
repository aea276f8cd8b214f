"""Integer points on spheres of radius sqrt(m).

Shells are built recursively: the points of ``x_1^2 + ... + x_n^2 = m`` are
the union over the first coordinate ``x_1`` of the shells of dimension
``n - 1`` and radius ``m - x_1^2``.  The two dimensional base case loops over
``x_1`` and finishes with a perfect-square test, so the whole enumeration is
exact integer arithmetic.  Lower dimensional shells are cached, which makes
sweeping over many ``m`` cheap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import isqrt

import numpy as np

INT64_MAX = np.iinfo(np.int64).max


class CapacityError(ValueError):
    """Raised when an enumeration would leave 64-bit integer range."""

    def __init__(self, m, n):
        super().__init__(f"capacity exceeded: m={m} (n={n}) does not fit 64-bit enumeration")
        self.m = m
        self.n = n


@dataclass(frozen=True)
class LatticeShell:
    n: int
    m: int
    points: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return len(self.points)

    @property
    def normalized(self) -> np.ndarray:
        return self.points / np.sqrt(float(self.m))

    def __len__(self):
        return len(self.points)


def _check_args(n, m):
    if int(n) != n or n < 2:
        raise ValueError(f"dimension n must be an integer >= 2, got {n}")
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    # n * m bounds every partial sum of squares met during enumeration
    if m > INT64_MAX // max(n, 1):
        raise CapacityError(m, n)


@lru_cache(maxsize=None)
def _shell2(m: int) -> np.ndarray:
    rows = []
    if m == 0:
        return np.zeros((1, 2), dtype=np.int64)
    b = isqrt(m)
    for x in range(-b, b + 1):
        rest = m - x * x
        y = isqrt(rest)
        if y * y == rest:
            if y == 0:
                rows.append((x, 0))
            else:
                rows.append((x, -y))
                rows.append((x, y))
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


@lru_cache(maxsize=None)
def _shell3(m: int) -> np.ndarray:
    return _build(3, m)


def _build(n: int, m: int) -> np.ndarray:
    blocks = []
    b = isqrt(m)
    for x in range(-b, b + 1):
        sub = _shell(n - 1, m - x * x)
        if len(sub):
            block = np.empty((len(sub), n), dtype=np.int64)
            block[:, 0] = x
            block[:, 1:] = sub
            blocks.append(block)
    if not blocks:
        return np.zeros((0, n), dtype=np.int64)
    return np.concatenate(blocks)


def _shell(n: int, m: int) -> np.ndarray:
    # lexicographic order falls out of the ascending loop over x plus
    # lexicographically ordered sub-shells
    if n == 2:
        return _shell2(m)
    if n == 3:
        return _shell3(m)
    return _build(n, m)


def enumerate_shell(n: int, m: int) -> LatticeShell:
    """All integer vectors of squared norm ``m`` in ``Z^n``, lexicographically sorted."""
    _check_args(n, m)
    pts = _shell(int(n), int(m))
    pts.setflags(write=False)
    return LatticeShell(int(n), int(m), pts)


def shell_count(n: int, m: int) -> int:
    """r_n(m), the number of representations of m as a sum of n squares."""
    return enumerate_shell(n, m).count


def _not_sum_of_three_squares(m: int) -> bool:
    # m = 4^a (8b + 7)
    while m % 4 == 0:
        m //= 4
    return m % 8 == 7


def is_representable(n: int, m: int) -> bool:
    """True iff m is a sum of n integer squares (found by enumeration)."""
    found = shell_count(n, m) > 0
    if n == 3 and found == _not_sum_of_three_squares(m):
        raise AssertionError(f"enumeration disagrees with the 4^a(8b+7) criterion at m={m}")
    return found


def representable_sequence(n: int, m_max: int, exclude_mod4_powers: bool = False) -> list[int]:
    """Ascending representable m <= m_max.

    With ``exclude_mod4_powers`` and ``n == 3`` only m with ``m % 8`` outside
    ``{0, 4, 7}`` are kept, since scaling by 4 does not change the shell.
    """
    if m_max < 1:
        return []
    out = []
    for m in range(1, int(m_max) + 1):
        if n == 3 and exclude_mod4_powers and m % 8 in (0, 4, 7):
            continue
        if is_representable(n, m):
            out.append(m)
    return out
