"""Bad squares: two far-apart support points near Q whose chord crosses a hole.

Q is bad when some zeta, xi in E n B(z_Q, 10 l) with |zeta - xi| >= l/2 have
a point z on [zeta, xi] at distance >= tau l from E.  On a point cloud the
hole must clear tau l + mesh, so every reported witness survives the
ambiguity of sampling.

The search runs the other way round from the definition: it first finds
hole points inside the convex hull of the nearby support (a quadtree
refined with the 1-Lipschitz bound on the distance function), then looks
for a long chord passing through each hole by sorting support directions
around it.  Chord endpoints come from a tau l/4 cover of the nearby support.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .dyadic import Square, descendants

MAX_HOLES = 64
MAX_CHORDS = 16


@dataclass(frozen=True)
class BadWitness:
    Q: Square
    zeta: tuple
    xi: tuple
    z: tuple
    clearance: float  # distance from z to the support
    margin: float  # tau l(Q) + mesh, the clearance that was required

    def to_json(self):
        return {"Q": self.Q.to_json(), "zeta": list(self.zeta), "xi": list(self.xi), "z": list(self.z),
                "clearance": self.clearance, "margin": self.margin}


def resolution_floor(mu, tau):
    return 8 * mu.mesh / tau


def check_witness(mu, w, tau):
    """Re-verify a witness against the raw cloud; returns a list of failed conditions."""
    Q = w.Q
    bad = []
    zeta, xi, z = (np.asarray(p, dtype=float) for p in (w.zeta, w.xi, w.z))
    for name, p in (("zeta", zeta), ("xi", xi)):
        if mu.index.nearest(p)[1] != 0.0:
            bad.append(f"{name} is not a support point")
        if not math.hypot(p[0] - Q.cx, p[1] - Q.cy) < 10 * Q.side:
            bad.append(f"{name} is outside B(z_Q, 10 l)")
    if not math.hypot(*(zeta - xi)) >= Q.side / 2:
        bad.append("|zeta - xi| < l/2")
    # z on the chord, up to rounding
    u = xi - zeta
    s = float((z - zeta) @ u / (u @ u))
    off = math.hypot(*(zeta + s * u - z))
    if not (-1e-12 <= s <= 1 + 1e-12 and off <= 1e-9 * Q.side):
        bad.append("z is not on [zeta, xi]")
    if not mu.index.nearest(z)[1] >= tau * Q.side + mu.mesh:
        bad.append("clearance below tau l + mesh")
    return bad


def _coarsen(pts, idx, origin, cell):
    """Lowest-index point per grid cell; idx must be sorted."""
    keys = np.floor((pts[idx] - origin) / cell).astype(np.int64)
    keys -= keys.min(axis=0)
    flat = keys[:, 0] * (int(keys[:, 1].max()) + 1) + keys[:, 1]
    _, first = np.unique(flat, return_index=True)
    return idx[np.sort(first)]


def _collinear_witness(mu, Q, idx, r, min_len):
    P = mu.points[idx]
    a = P[0]
    far = int(np.argmax(np.hypot(*(P - a).T)))
    u = P[far] - a
    nu = math.hypot(*u)
    if nu == 0:
        return None
    u = u / nu
    s = (P - a) @ u
    order = np.argsort(s, kind="stable")
    ss = s[order]
    i0, i1 = idx[order[0]], idx[order[-1]]
    zeta, xi = mu.points[i0], mu.points[i1]
    if not math.hypot(*(zeta - xi)) >= min_len:
        return None
    gaps = np.diff(ss)
    k = np.flatnonzero(gaps >= 2 * r)
    if len(k) == 0:
        return None
    span = ss[-1] - ss[0]
    mids = (ss[k] + ss[k + 1]) / 2
    z = zeta[None, :] + ((mids - ss[0]) / span)[:, None] * (xi - zeta)[None, :]
    d = mu.index.distances(z)
    best = int(np.argmax(d))
    if d[best] < r:
        return None
    return _witness(Q, zeta, xi, z[best], d[best], r)


def _witness(Q, zeta, xi, z, d, r):
    return BadWitness(Q, tuple(map(float, zeta)), tuple(map(float, xi)), tuple(map(float, z)), float(d), float(r))


def _holes(mu, hull, box_lo, box_side, r, min_side):
    """Hole candidates (center, tolerance) inside the hull, one batch per level.

    Cells whose every point clears r are reported whole with tolerance equal
    to their circumradius; the rest are split down to min_side and reported
    when their centre clears r.  Deepest holes come first in each batch.
    """
    eq = hull.equations
    c = np.array([box_lo + box_side / 2])
    h = box_side / 2
    while len(c):
        rho = h * math.sqrt(2)
        inside = np.all(c @ eq[:, :2].T + eq[:, 2] <= rho, axis=1)
        c = c[inside]
        d = mu.index.distances(c)
        full = d - rho >= r
        maybe = ~full & (d + rho >= r)
        if 2 * h <= min_side:
            ok = maybe & (d >= r)
            yield _top(c[ok | full], d[ok | full], min_side / 2)
            return
        yield _top(c[full], d[full], rho)
        c = c[maybe]
        h /= 2
        offs = np.array([[-h, -h], [h, -h], [-h, h], [h, h]])
        c = (c[:, None, :] + offs[None]).reshape(-1, 2)


def _top(c, d, t):
    k = np.argsort(-d, kind="stable")[:MAX_HOLES]
    return [(c[i], t) for i in k]


def _chords(c, t, pts, min_len):
    """Pairs (a, b) whose chord passes within t of c and has length >= min_len,
    closest chords first."""
    v = pts - c
    d = np.hypot(v[:, 0], v[:, 1])
    th = np.arctan2(v[:, 1], v[:, 0])
    o = np.argsort(th, kind="stable")
    ths, ds = th[o], d[o]
    m = len(o)
    the = np.concatenate([ths, ths + 2 * np.pi])
    # the antipodal window holds the farthest point; rank encodes argmax
    rank = np.empty(m, dtype=np.int64)
    rank[np.argsort(ds, kind="stable")] = np.arange(m)
    by_rank = np.argsort(ds, kind="stable")
    re = np.concatenate([rank, rank, [-1]])
    eps = np.arcsin(np.minimum(1.0, t / np.maximum(ds, 1e-300)))
    lo = np.searchsorted(the, ths + np.pi - eps, side="left")
    hi = np.searchsorted(the, ths + np.pi + eps, side="right")
    ok = hi > lo
    if not ok.any():
        return []
    red = np.maximum.reduceat(re, np.ravel(np.column_stack([lo, hi])))[0::2]
    a = np.flatnonzero(ok)
    b = by_rank[red[a]]
    pa, pb = pts[o[a]], pts[o[b]]
    ln = np.hypot(*(pa - pb).T)
    keep = ln >= min_len
    a, b, pa, pb, ln = a[keep], b[keep], pa[keep], pb[keep], ln[keep]
    if len(a) == 0:
        return []
    u = (pb - pa) / ln[:, None]
    w = c - pa
    s = np.clip((w * u).sum(1), 0, ln)
    dist = np.hypot(*(pa + s[:, None] * u - c).T)
    order = np.argsort(dist, kind="stable")[:MAX_CHORDS]
    return [(int(o[a[k]]), int(o[b[k]])) for k in order]


def _certify(mu, zeta, xi, c, t, r):
    u = xi - zeta
    L = math.hypot(*u)
    u = u / L
    s0 = min(max(float((c - zeta) @ u), 0.0), L)
    s = np.clip(s0 + np.linspace(-t, t, 9), 0.0, L)
    s = np.unique(np.concatenate([[s0], s]))
    z = zeta[None, :] + s[:, None] * u[None, :]
    d = mu.index.distances(z)
    k = int(np.argmax(d))
    return (z[k], float(d[k])) if d[k] >= r else None


def is_bad(mu, Q, tau):
    """A BadWitness for Q, or None when no hole of radius tau l + mesh is found."""
    ell = Q.side
    if not 0 < tau < 1 / 16:
        raise ValueError("tau must lie in (0, 1/16)")
    if ell < resolution_floor(mu, tau) * (1 - 1e-12):
        raise ValueError(f"l(Q) = {ell} is below the resolution floor 8 mesh / tau = {resolution_floor(mu, tau)}")
    r = tau * ell + mu.mesh
    min_len = ell / 2
    zq = np.array([Q.cx, Q.cy])
    idx = mu.index.within_disc(zq, 10 * ell, strict=True)
    if len(idx) < 2:
        return None
    cell = tau * ell / (4 * math.sqrt(2))
    sub = _coarsen(mu.points, idx, zq, cell)
    pts = mu.points[sub]
    if len(sub) < 3:
        return _collinear_witness(mu, Q, idx, r, min_len)
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return _collinear_witness(mu, Q, idx, r, min_len)
    lo = pts.min(axis=0)
    side = float((pts.max(axis=0) - lo).max())
    tried = 0
    for batch in _holes(mu, hull, lo, side, r, tau * ell / 4):
        for c, t in batch:
            if tried == MAX_HOLES:
                return None
            tried += 1
            t = max(t, tau * ell / 4)
            for a, b in _chords(c, t, pts, min_len):
                hit = _certify(mu, pts[a], pts[b], c, t, r)
                if hit is not None:
                    return _witness(Q, pts[a], pts[b], hit[0], hit[1], r)
    return None


def bad_family(mu, P, tau, depth):
    """Witnesses for the bad dyadic squares inside P, down to `depth` levels."""
    if P.side / 2 ** depth < resolution_floor(mu, tau) * (1 - 1e-12):
        raise ValueError("depth goes below the resolution floor 8 mesh / tau")
    out = []
    for lev in range(depth + 1):
        squares = descendants(P, lev)
        cs = np.array([q.center for q in squares])
        near = mu.index.distances(cs) < 10 * squares[0].side
        for q, ok in zip(squares, near):
            if ok:
                w = is_bad(mu, q, tau)
                if w is not None:
                    out.append(w)
    return out


def carleson_norm(family, P):
    """sum of l(Q) / l(P) over the squares of the family lying in P."""
    sq = [f.Q if isinstance(f, BadWitness) else f for f in family]
    return math.fsum(q.side for q in sq if q.is_inside(P)) / P.side


@dataclass
class InductiveBadReport:
    checked: list
    flagged: list
    missed: list
    excluded: list  # below the resolution floor

    @property
    def fraction(self):
        return len(self.flagged) / len(self.checked) if self.checked else 1.0

    def to_json(self):
        return {"fraction": self.fraction, "checked": len(self.checked), "flagged": len(self.flagged),
                "missed": [q.to_json() for q in self.missed], "excluded": [q.to_json() for q in self.excluded]}


def inductive_implies_bad(mu, ledger, tau):
    """Run is_bad on every square where the inductive step added edges."""
    floor = resolution_floor(mu, tau)
    rep = InductiveBadReport([], [], [], [])
    for Q in ledger.Q_set:
        if Q.side < floor * (1 - 1e-12):
            rep.excluded.append(Q)
            continue
        rep.checked.append(Q)
        (rep.flagged if is_bad(mu, Q, tau) is not None else rep.missed).append(Q)
    return rep
