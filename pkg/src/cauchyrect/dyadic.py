"""Axis-aligned squares and the dyadic lattice.

A dyadic square of scale j is [kx 2^j, (kx+1) 2^j) x [ky 2^j, (ky+1) 2^j).
Squares are half-open so that every point lies in exactly one square of
each scale.  General (non-dyadic) squares are just a center and a side.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Square:
    cx: float
    cy: float
    side: float
    index: Optional[tuple] = None  # (j, kx, ky) for lattice squares

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError(f"square side must be positive, got {self.side}")

    @classmethod
    def dyadic(cls, j, kx, ky):
        s = math.ldexp(1.0, j)
        return cls((kx + 0.5) * s, (ky + 0.5) * s, s, (int(j), int(kx), int(ky)))

    @property
    def center(self):
        return (self.cx, self.cy)

    @property
    def zc(self):
        return complex(self.cx, self.cy)

    @property
    def bounds(self):
        """(x0, y0, x1, y1)."""
        if self.index is not None:
            j, kx, ky = self.index
            s = math.ldexp(1.0, j)
            return (kx * s, ky * s, (kx + 1) * s, (ky + 1) * s)
        h = self.side / 2
        return (self.cx - h, self.cy - h, self.cx + h, self.cy + h)

    def contains(self, pts):
        """Half-open membership test for an (n, 2) array (or one point)."""
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        pts = pts.reshape(-1, 2)
        x0, y0, x1, y1 = self.bounds
        inside = (pts[:, 0] >= x0) & (pts[:, 0] < x1) & (pts[:, 1] >= y0) & (pts[:, 1] < y1)
        return bool(inside[0]) if single else inside

    def is_inside(self, other):
        """True when this square is a subset of `other`."""
        a = self.bounds
        b = other.bounds
        return a[0] >= b[0] and a[1] >= b[1] and a[2] <= b[2] and a[3] <= b[3]

    def to_json(self):
        d = {"cx": self.cx, "cy": self.cy, "side": self.side}
        if self.index is not None:
            d["j"], d["kx"], d["ky"] = self.index
        return d

    @classmethod
    def from_json(cls, d):
        if "j" in d:
            return cls.dyadic(d["j"], d["kx"], d["ky"])
        return cls(float(d["cx"]), float(d["cy"]), float(d["side"]))

    def __repr__(self):
        if self.index is not None:
            return "Square(j=%d, kx=%d, ky=%d)" % self.index
        return f"Square(center=({self.cx!r}, {self.cy!r}), side={self.side!r})"


def scale_of(side):
    """Exponent j with 2^j == side, or ValueError for non powers of two."""
    m, e = math.frexp(side)
    if m != 0.5:
        raise ValueError(f"{side} is not a power of two")
    return e - 1


def dilate(Q, lam):
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    return Square(Q.cx, Q.cy, Q.side * lam)


def children(Q):
    if Q.index is None:
        raise ValueError("children() needs a dyadic square")
    j, kx, ky = Q.index
    return [Square.dyadic(j - 1, 2 * kx + a, 2 * ky + b) for b in (0, 1) for a in (0, 1)]


def parent(Q):
    if Q.index is None:
        raise ValueError("parent() needs a dyadic square")
    j, kx, ky = Q.index
    return Square.dyadic(j + 1, kx // 2, ky // 2)


def locate(z, j):
    """The scale-j dyadic square containing z."""
    x, y = float(z[0]), float(z[1])
    s = math.ldexp(1.0, j)
    return Square.dyadic(j, math.floor(x / s), math.floor(y / s))


def cell_keys(pts, j):
    """Integer lattice coordinates (kx, ky) of many points at scale j."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    s = math.ldexp(1.0, j)
    return np.floor(pts / s).astype(np.int64)


def descendants(P, levels):
    """All dyadic squares inside P that are `levels` generations below it."""
    j, kx, ky = P.index
    m = 1 << levels
    return [Square.dyadic(j - levels, kx * m + a, ky * m + b) for b in range(m) for a in range(m)]


def dyadicfact_witness(Q, z1, z2):
    """Scale-l square Q' containing z1 with z1, z2 in 3Q' and 7Q' inside 7Q.

    Q must be dyadic of side 2l; z1, z2 must lie in 4Q with |z1 - z2| < l.
    """
    if Q.index is None:
        raise ValueError("dyadicfact_witness needs a dyadic square")
    ell = Q.side / 2
    Q4 = dilate(Q, 4)
    if not (Q4.contains(z1) and Q4.contains(z2)):
        raise ValueError(f"points {z1}, {z2} are not both in 4Q for {Q!r}")
    if not math.hypot(z1[0] - z2[0], z1[1] - z2[1]) < ell:
        raise ValueError(f"|z1 - z2| must be < {ell}")
    W = locate(z1, Q.index[0] - 1)
    assert dilate(W, 3).contains(z2) and dilate(W, 7).is_inside(dilate(Q, 7))
    return W
