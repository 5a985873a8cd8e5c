"""Exact nearest-neighbour and range queries over a fixed point set."""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class Disc:
    """Closed disc."""
    center: tuple
    radius: float

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        return d <= self.radius


class SpatialIndex:
    """Balanced k-d tree over one point cloud.

    All answers are exact; squares are half-open [x0, x1) x [y0, y1),
    discs are closed.
    """

    def __init__(self, points):
        self.points = np.asarray(points, dtype=float).reshape(-1, 2)
        self._tree = cKDTree(self.points) if len(self.points) else None

    def __len__(self):
        return len(self.points)

    def _check(self):
        if self._tree is None:
            raise ValueError("empty spatial index")

    def nearest(self, z):
        """Return (point, distance) of the nearest indexed point."""
        i, d = self.nearest_index(z)
        return self.points[i].copy(), d

    def nearest_index(self, z):
        self._check()
        d, i = self._tree.query(np.asarray(z, dtype=float).reshape(2))
        return int(i), float(d)

    def distances(self, zs):
        """Nearest-point distance for many query points at once."""
        self._check()
        zs = np.asarray(zs, dtype=float).reshape(-1, 2)
        if len(zs) == 0:
            return np.zeros(0)
        d, _ = self._tree.query(zs)
        return d

    def query(self, zs):
        self._check()
        d, i = self._tree.query(np.asarray(zs, dtype=float).reshape(-1, 2))
        return d, i

    def within_disc(self, center, radius, strict=False):
        """Indices (sorted) of points in the closed disc, or the open one if strict."""
        if self._tree is None or radius < 0:
            return np.zeros(0, dtype=np.int64)
        c = np.asarray(center, dtype=float).reshape(2)
        # pad the tree query, then filter with the exact test used by Disc
        cand = np.asarray(self._tree.query_ball_point(c, radius * (1 + 1e-9) + 1e-300), dtype=np.int64)
        if len(cand) == 0:
            return cand
        p = self.points[cand]
        d = np.hypot(p[:, 0] - c[0], p[:, 1] - c[1])
        keep = d < radius if strict else d <= radius
        return np.sort(cand[keep])

    def within_square(self, sq):
        if self._tree is None:
            return np.zeros(0, dtype=np.int64)
        x0, y0, x1, y1 = sq.bounds
        c = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
        half = (x1 - x0) / 2
        cand = np.asarray(self._tree.query_ball_point(c, half * (1 + 1e-9), p=np.inf), dtype=np.int64)
        if len(cand) == 0:
            return cand
        return np.sort(cand[sq.contains(self.points[cand])])

    def within(self, region):
        """Indices of the points inside a Disc or a Square."""
        if isinstance(region, Disc):
            return self.within_disc(region.center, region.radius)
        return self.within_square(region)
