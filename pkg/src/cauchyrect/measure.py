"""Discrete planar measures: generators, rescaling, regularity probes, I/O.

A point cloud stands for a measure via midpoint quadrature: each point
carries the mass of a cell of diameter about `mesh` around it.
"""
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import _kernels
from .spatial import SpatialIndex


@dataclass(frozen=True, eq=False)
class PointCloudMeasure:
    points: np.ndarray
    weights: np.ndarray
    mesh: float
    label: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if len(pts) != len(w):
            raise ValueError("points and weights differ in length")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite coordinates")
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise ValueError("weights must be positive and finite")
        if not (math.isfinite(self.mesh) and self.mesh > 0):
            raise ValueError("mesh must be positive")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mesh", float(self.mesh))

    def __len__(self):
        return len(self.weights)

    @property
    def n(self):
        return len(self.weights)

    @property
    def mass(self):
        return float(self.weights.sum())

    @property
    def z(self):
        return self.points[:, 0] + 1j * self.points[:, 1]

    @cached_property
    def index(self):
        return SpatialIndex(self.points)

    @cached_property
    def diameter(self):
        return _diameter(self.points)

    def scaled(self, c):
        """The measure c*mu (same points, weights times c)."""
        return PointCloudMeasure(self.points, self.weights * c, self.mesh, self.label)

    def restrict(self, mask):
        mask = np.asarray(mask)
        return PointCloudMeasure(self.points[mask], self.weights[mask], self.mesh, self.label)

    def min_separation(self):
        if self.n < 2:
            return math.inf
        d, _ = self.index._tree.query(self.points, k=2)
        return float(d[:, 1].min())


def _diameter(pts):
    if len(pts) < 2:
        return 0.0
    try:
        ext = pts[ConvexHull(pts).vertices]
    except (QhullError, ValueError):
        # (nearly) collinear: a double sweep is exact on a line
        a = pts[np.argmax(np.hypot(*(pts - pts[0]).T))]
        return float(np.hypot(*(pts - a).T).max())
    best = 0.0
    for p in ext:
        best = max(best, float(np.hypot(*(ext - p).T).max()))
    return best


# ------------------------------------------------------------------ generators

def _as_point(a):
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size != 2:
        raise ValueError(f"expected a planar point, got {a}")
    return a


def _pieces(length, h):
    # number of equal pieces of size <= h; the tolerance absorbs 100/0.01 != 10000
    return max(1, int(math.ceil(length / h - 1e-9)))


def gen_segment(density, a, b, h, label=None):
    """Midpoints of a partition of [a, b] into pieces of length at most h."""
    a = _as_point(a)
    b = _as_point(b)
    length = float(np.hypot(*(b - a)))
    if length == 0:
        raise ValueError("degenerate segment")
    if not density > 0:
        raise ValueError("density must be positive")
    if not 0 < h < length:
        raise ValueError("need 0 < h < |b - a|")
    m = _pieces(length, h)
    t = (np.arange(m) + 0.5) / m
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    w = np.full(m, density * length / m)
    return PointCloudMeasure(pts, w, length / m, label or f"segment(density={density}, a={a.tolist()}, b={b.tolist()}, h={h})")


def gen_circle(density, center, radius, n, label=None):
    if not radius > 0:
        raise ValueError("radius must be positive")
    if n < 8:
        raise ValueError("need n >= 8")
    c = _as_point(center)
    th = 2 * np.pi * np.arange(n) / n
    pts = c[None, :] + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    step = 2 * np.pi * radius / n
    return PointCloudMeasure(pts, np.full(n, density * step), step,
                             label or f"circle(density={density}, center={c.tolist()}, radius={radius}, n={n})")


def gen_cantor(n, label=None):
    """Centers of the 4^n generation-n squares of the four-corner Cantor set."""
    if not 1 <= n <= 8:
        raise ValueError("generation must be in 1..8")
    corners = np.zeros((1, 2))
    side = 1.0
    for _ in range(n):
        side /= 4
        offs = np.array([[0, 0], [3, 0], [0, 3], [3, 3]], dtype=float) * side
        corners = (corners[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    pts = corners + side / 2
    order = np.lexsort((pts[:, 0], pts[:, 1]))
    return PointCloudMeasure(pts[order], np.full(len(pts), side), side, label or f"cantor(n={n})")


def gen_lipschitz_graph(f_samples, density, h=None, label=None):
    """Arclength measure on the polyline through the samples (x increasing).

    Every piece is cut into equal parts of length at most h (default: 1/1000
    of the total arclength) and represented by their midpoints.
    """
    s = np.asarray(f_samples, dtype=float).reshape(-1, 2)
    if len(s) < 2:
        raise ValueError("need at least two samples")
    if not np.all(np.diff(s[:, 0]) > 0):
        raise ValueError("x coordinates must be strictly increasing")
    if not density > 0:
        raise ValueError("density must be positive")
    seg = np.hypot(*np.diff(s, axis=0).T)
    total = float(seg.sum())
    if h is None:
        h = total / 1000
    pts = []
    ws = []
    for k in range(len(seg)):
        m = _pieces(seg[k], h)
        t = (np.arange(m) + 0.5) / m
        pts.append(s[k][None, :] + t[:, None] * (s[k + 1] - s[k])[None, :])
        ws.append(np.full(m, density * seg[k] / m))
    return PointCloudMeasure(np.concatenate(pts), np.concatenate(ws), float(h),
                             label or f"lipschitz_graph(samples={len(s)}, density={density}, h={h})")


def sawtooth_samples(x0, x1, teeth, amplitude):
    """Samples of a zigzag with `teeth` periods; slope 4*amplitude*teeth/(x1-x0)."""
    xs = np.linspace(x0, x1, 2 * teeth + 1)
    ys = np.where(np.arange(2 * teeth + 1) % 2 == 0, 0.0, amplitude)
    return np.stack([xs, ys], axis=1)


def union(*measures, label=None):
    """Superpose clouds with a common mesh (the largest one)."""
    pts = np.concatenate([m.points for m in measures])
    w = np.concatenate([m.weights for m in measures])
    return PointCloudMeasure(pts, w, max(m.mesh for m in measures),
                             label or " + ".join(m.label for m in measures))


# ------------------------------------------------------------------- rescaling

def blowup(mu, z, lam):
    """The lam-blowup at z: points (p - z)/lam, weights w/lam, mesh h/lam."""
    if not lam > 0:
        raise ValueError("blowup factor must be positive")
    z = _as_point(z)
    return PointCloudMeasure((mu.points - z[None, :]) / lam, mu.weights / lam, mu.mesh / lam,
                             f"blowup({mu.label}, z={z.tolist()}, lam={lam})")


def support_distance(mu, z):
    if mu.n == 0:
        raise ValueError("empty measure")
    return mu.index.nearest(z)[1]


# ------------------------------------------------------------------ regularity

@dataclass(frozen=True, eq=False)
class ProbePlan:
    """Disc centers and radii used to estimate the growth constants.

    `on_support` marks centers that are support points; only those enter
    the lower (AD) estimate.
    """
    centers: np.ndarray
    radii: np.ndarray
    on_support: np.ndarray

    def mapped(self, z, lam):
        """The same probes seen through blowup(., z, lam)."""
        z = _as_point(z)
        return ProbePlan((self.centers - z[None, :]) / lam, self.radii / lam, self.on_support)

    @property
    def count(self):
        return len(self.centers) * len(self.radii)


def default_probes(mu, support_centers=256, grid=16):
    """Evenly strided support points, a grid over the bounding box, and the
    dyadic radius ladder 4*mesh*2^k up to the diameter (at least one rung)."""
    n = mu.n
    if n == 0:
        raise ValueError("empty measure")
    step = max(1, int(math.ceil(n / support_centers)))
    sup = mu.points[::step]
    lo = mu.points.min(axis=0)
    hi = mu.points.max(axis=0)
    gx = lo[0] + (np.arange(grid) + 0.5) / grid * (hi[0] - lo[0])
    gy = lo[1] + (np.arange(grid) + 0.5) / grid * (hi[1] - lo[1])
    amb = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    amb = np.unique(amb, axis=0)
    r0 = 4 * mu.mesh
    top = max(mu.diameter, r0)
    k = int(math.floor(math.log2(top / r0) + 1e-12)) + 1
    radii = r0 * 2.0 ** np.arange(k)
    centers = np.concatenate([sup, amb])
    mask = np.zeros(len(centers), dtype=bool)
    mask[: len(sup)] = True
    return ProbePlan(centers, radii, mask)


@dataclass(frozen=True)
class RegularityReport:
    niceness: float
    ad_constant: float
    probe_count: int

    def to_json(self):
        return {"niceness": self.niceness, "ad_constant": self.ad_constant, "probe_count": self.probe_count}


def regularity(mu, probes=None):
    """Probe estimates of the upper and lower linear growth constants.

    Each point stands for a cell of radius mesh/2, so a discrete disc count is
    only known up to a boundary layer of that width.  We read it on the
    side that cannot overstate either constant:

    niceness    = max mu(B(z, r)) / (r + mesh/2) over all probes, the radius
                  of the smallest disc holding every counted cell;
    ad_constant = min mu(B(z, r - mesh/2)) / r over support-centered probes,
                  counting only cells that lie wholly inside B(z, r).

    Discs are open.  Radii below 4*mesh are dropped.
    """
    if mu.n == 0:
        raise ValueError("empty measure")
    if probes is None:
        probes = default_probes(mu)
    radii = np.asarray(probes.radii, dtype=float)
    radii = radii[radii >= 4 * mu.mesh * (1 - 1e-12)]
    if len(radii) == 0:
        radii = np.array([4 * mu.mesh])
    radii = np.sort(radii)
    m_open = _kernels.disc_mass(probes.centers, mu.points, mu.weights, radii)
    nice = float((m_open / (radii[None, :] + mu.mesh / 2)).max())
    sup_c = probes.centers[probes.on_support]
    if len(sup_c):
        m_in = _kernels.disc_mass(sup_c, mu.points, mu.weights, radii - mu.mesh / 2)
        ad = float((m_in / radii[None, :]).min())
    else:
        ad = math.nan
    return RegularityReport(nice, ad, len(probes.centers) * len(radii))


def tail_sum(mu, center, r, eps):
    """sum over |p - center| > r of w / |p - center|^(1 + eps)."""
    d = np.hypot(*(mu.points - _as_point(center)[None, :]).T)
    far = d > r
    return float((mu.weights[far] / d[far] ** (1 + eps)).sum())


def tail_bound(c0, r, eps):
    return c0 * (1 + eps) / eps * r ** (-eps)


def tail_grid(mu, c0, centers=5, seed=0):
    """Rows (x, y, r, eps, tail_sum, tail_bound) over random support centres,
    ten radii from 4 mesh to half the diameter and eps = 0.1, ..., 1."""
    rng = np.random.default_rng(seed)
    cs = mu.points[rng.choice(mu.n, size=min(centers, mu.n), replace=False)]
    rs = np.geomspace(4 * mu.mesh, max(mu.diameter / 2, 8 * mu.mesh), 10)
    es = np.linspace(0.1, 1.0, 10)
    return [(c[0], c[1], r, e, tail_sum(mu, c, r, e), tail_bound(c0, r, e)) for c in cs for r in rs for e in es]


def away_from_support_l1(mu, z):
    """sum |1/(z - p) + 1/p| w, the L1 size of the recentred kernel."""
    p = mu.z
    return float((np.abs(1 / (complex(*z) - p) + 1 / p) * mu.weights).sum())


# ------------------------------------------------------------------------- I/O

def save_csv(mu, path):
    """Write `x,y,w` rows plus a JSON sidecar holding mesh and label."""
    path = str(path)
    with open(path, "w") as fh:
        fh.write("x,y,w\n")
        for (x, y), w in zip(mu.points.tolist(), mu.weights.tolist()):
            fh.write(f"{x!r},{y!r},{w!r}\n")
    with open(_sidecar(path), "w") as fh:
        json.dump({"mesh": mu.mesh, "label": mu.label, "n": mu.n}, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_csv(path):
    path = str(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(_sidecar(path)) as fh:
        meta = json.load(fh)
    return PointCloudMeasure(data[:, :2], data[:, 2], meta["mesh"], meta.get("label", ""))


def _sidecar(path):
    return path[:-4] + ".json" if path.endswith(".csv") else path + ".json"


FIXTURES = ("segment", "circle", "cantor", "lipschitz", "gap")


def make_fixture(kind, **kw):
    """Build one of the named fixtures from keyword parameters (JSON-friendly)."""
    if kind == "segment":
        length = kw.get("len", 100.0)
        return gen_segment(kw.get("density", 1.0), (-length / 2, 0.0), (length / 2, 0.0), kw.get("mesh", 0.01))
    if kind == "circle":
        return gen_circle(kw.get("density", 1.0), (0.0, 0.0), kw.get("radius", 1.0), int(kw.get("n", 10000)))
    if kind == "cantor":
        return gen_cantor(int(kw.get("n", 5)))
    if kind == "lipschitz":
        samples = sawtooth_samples(-kw.get("len", 20.0) / 2, kw.get("len", 20.0) / 2,
                                   int(kw.get("teeth", 10)), kw.get("amplitude", 0.5))
        return gen_lipschitz_graph(samples, kw.get("density", 1.0), kw.get("mesh", 0.01))
    if kind == "gap":
        return gap_fixture(kw.get("gap", 0.6), kw.get("len", 10.0), kw.get("mesh", 0.0025), kw.get("density", 1.0))
    raise ValueError(f"unknown fixture {kind!r}; choose from {FIXTURES}")


def gap_fixture(gap=0.6, length=10.0, h=0.0025, density=1.0):
    """Two collinear segments [-length, 0] and [gap, length] on the x-axis."""
    left = gen_segment(density, (-length, 0.0), (0.0, 0.0), h)
    right = gen_segment(density, (gap, 0.0), (length, 0.0), h)
    return union(left, right, label=f"gap(gap={gap}, len={length}, h={h})")
