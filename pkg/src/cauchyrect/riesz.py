"""Mean-zero Lipschitz test functions, their Gram matrices, and the
square-function coefficient Theta of a square.

Every test function is s * (t_a - lam * t_b) for two tents
t(x) = max(0, 1 - |x - c| / r) centred at support points, with lam fixing
the mu-mean to zero and s fixing the Lipschitz constant.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import _kernels
from .cauchy import ConvergenceError
from .dyadic import Square, descendants


class NoSupport(ValueError):
    """Too few support points near the square to build a test function."""


@dataclass(frozen=True, eq=False)
class TestFn:
    __test__ = False  # keep pytest from collecting this class

    centers: np.ndarray
    radii: np.ndarray
    coefs: np.ndarray
    lip_bound: float
    support_disc: tuple
    mean_zero_wrt: str = ""
    name: str = ""

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        out = np.zeros(len(pts))
        for c, r, a in zip(self.centers, self.radii, self.coefs):
            out += a * np.maximum(0.0, 1.0 - np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) / r)
        return out

    @property
    def atoms(self):
        return [(tuple(c), float(r), float(a)) for c, r, a in zip(self.centers, self.radii, self.coefs)]

    def support_indices(self, mu):
        """Indices of support points where some tent is positive."""
        idx = [mu.index.within_disc(c, r, strict=True) for c, r in zip(self.centers, self.radii)]
        return np.unique(np.concatenate(idx)) if idx else np.zeros(0, dtype=np.int64)

    def mapped(self, z, lam, amplitude=1.0):
        """x -> amplitude * psi(lam * x + z), again a two-tent function."""
        z = np.asarray(z, dtype=float)
        (cx, cy), R = self.support_disc
        return TestFn((self.centers - z[None, :]) / lam, self.radii / lam, self.coefs * amplitude,
                      self.lip_bound * amplitude * lam, (((cx - z[0]) / lam, (cy - z[1]) / lam), R / lam),
                      self.mean_zero_wrt, self.name)

    def to_json(self):
        return {"atoms": [[c[0], c[1], r, a] for c, r, a in self.atoms], "lip_bound": self.lip_bound,
                "support_disc": [list(self.support_disc[0]), self.support_disc[1]], "name": self.name}


def tent_lipschitz(ca, cb, r, lam):
    """Exact Lipschitz constant of t_a - lam t_b for tents of common radius r.

    Overlapping tents peak in slope on the segment between the centres,
    where both gradients line up: (1 + lam)/r.  Disjoint ones never add up.
    """
    if math.hypot(ca[0] - cb[0], ca[1] - cb[1]) < 2 * r:
        return (1 + lam) / r
    return max(1.0, lam) / r


def _farthest_order(pts, start, k, tie=0.0):
    """Farthest-point order; distances within `tie` of the maximum count as
    equal and the lowest index wins, so mirror-symmetric configurations
    resolve the same way at every scale instead of by rounding."""
    chosen = [start]
    d = np.hypot(*(pts - pts[start]).T)
    while len(chosen) < min(k, len(pts)):
        top = d.max()
        if top == 0:
            break
        nxt = int(np.flatnonzero(d >= top - tie)[0])
        chosen.append(nxt)
        d = np.minimum(d, np.hypot(*(pts - pts[nxt]).T))
    return chosen


def _pair_order(m):
    return [(a, b) for b in range(1, m) for a in range(b)]


def _two_tent_family(mu, center, R, lip, k, label):
    """k functions supported in B(center, R): tents of radius R/4 at support
    points inside B(center, R/2), spread out by farthest-point order."""
    center = np.asarray(center, dtype=float)
    idx = mu.index.within_disc(center, R / 2, strict=True)
    if len(idx) < 2:
        raise NoSupport(f"{len(idx)} support point(s) within {R / 2} of {tuple(center)}")
    sub = mu.points[idx]
    start = int(np.argmin(np.hypot(*(sub - center).T)))
    m = 2
    while m * (m - 1) // 2 < k:
        m += 1
    order = _farthest_order(sub, start, m, tie=mu.mesh)
    r = R / 4
    out = []
    for a, b in _pair_order(len(order))[:k]:
        ca = sub[order[a]]
        cb = sub[order[b]]
        ta = _tent_mass(mu, ca, r)
        tb = _tent_mass(mu, cb, r)
        lam = ta / tb
        s = lip / tent_lipschitz(ca, cb, r, lam)
        out.append(TestFn(np.array([ca, cb]), np.array([r, r]), np.array([s, -s * lam]), lip,
                          (tuple(center.tolist()), R), label, f"tents({idx[order[a]]},{idx[order[b]]})"))
    return out


def _tent_mass(mu, c, r):
    j = mu.index.within_disc(c, r, strict=True)
    t = np.maximum(0.0, 1.0 - np.hypot(mu.points[j, 0] - c[0], mu.points[j, 1] - c[1]) / r)
    return float((t * mu.weights[j]).sum())


def make_psi_family(mu, Q, A=2.0, k=4):
    """k test functions adapted to Q: support in B(z_Q, A l), Lipschitz l^(-3/2)."""
    if not A > 1:
        raise ValueError("A must exceed 1")
    ell = Q.side
    return _two_tent_family(mu, Q.center, A * ell, ell ** -1.5, k, mu.label)


def make_phi_family(nu, A=2.0, k=4, center=(0.0, 0.0)):
    """k test functions with support in B(center, A) and Lipschitz constant 1."""
    if not A > 1:
        raise ValueError("A must exceed 1")
    return _two_tent_family(nu, center, float(A), 1.0, k, nu.label)


# ------------------------------------------------------------------- Gram

def synthesis_matrix(mu, fns):
    """Sparse (len(fns), n) matrix of psi_k(p_i) * sqrt(w_i)."""
    rows, cols, vals = [], [], []
    sw = np.sqrt(mu.weights)
    for k, fn in enumerate(fns):
        j = fn.support_indices(mu)
        v = fn(mu.points[j])
        keep = v != 0
        rows.append(np.full(int(keep.sum()), k))
        cols.append(j[keep])
        vals.append(v[keep] * sw[j[keep]])
    if not fns:
        return sparse.csr_matrix((0, mu.n))
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(len(fns), mu.n))


def gram(mu, fns):
    """Matrix of <psi_a, psi_b> in L^2(mu)."""
    S = synthesis_matrix(mu, fns)
    return (S @ S.T).toarray()


def gram_norm(G, tol=1e-8, maxiter=200000, seed=0):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    G = np.asarray(G, dtype=float)
    if G.size == 0:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        u = G @ v
        new = float(v @ u)
        nu = np.linalg.norm(u)
        if nu == 0:
            return 0.0
        v = u / nu
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    raise ConvergenceError("gram_norm did not converge", lam, maxiter)


def lattice(mu, P, depth, A=2.0):
    """(Q, psi_Q) for every dyadic Q inside P, `depth` levels deep at most,
    where a test function exists; psi_Q is the first member of the family."""
    out = []
    for lev in range(depth + 1):
        squares = descendants(P, lev)
        cs = np.array([q.center for q in squares])
        near = mu.index.distances(cs) < A * squares[0].side / 2
        for q, ok in zip(squares, near):
            if not ok:
                continue
            try:
                out.append((q, make_psi_family(mu, q, A, 1)[0]))
            except NoSupport:
                pass
    return out


# ------------------------------------------------------------------- Theta

@dataclass(frozen=True)
class ThetaReport:
    Q: Square
    theta_upper: float
    psi_index: int
    F_radius: float
    table: tuple = ()  # table[m][k] = l^(-1/2) |I(chi_F_m, psi_k)|

    def to_json(self):
        return {"Q": self.Q.to_json(), "theta_upper": self.theta_upper, "psi_index": self.psi_index,
                "F_radius": self.F_radius, "table": [list(r) for r in self.table]}


def theta(mu, Q, A=2.0, A_prime=4.0, psi_count=4, F_candidates=3):
    """Finite-dictionary estimate of Theta_{A,A'}(Q).

    min over F = B(z_Q, A' l 2^m), m < F_candidates, of
    max over the psi family of l^(-1/2) |I(chi_F, psi)|, where
    I(chi_F, psi) = sum_i psi_i w_i sum_{j in F, j != i} K(p_i - p_j) w_j.
    """
    if not A_prime >= A > 1:
        raise ValueError("need A' >= A > 1")
    ell = Q.side
    fns = make_psi_family(mu, Q, A, psi_count)
    radii = [A_prime * ell * 2.0 ** m for m in range(F_candidates)]
    c = np.asarray(Q.center)
    d = np.hypot(mu.points[:, 0] - c[0], mu.points[:, 1] - c[1])
    shells = []
    lo = -np.inf
    for R in radii:
        shells.append(np.flatnonzero((d >= lo) & (d < R)))
        lo = R
    table = np.zeros((len(radii), len(fns)))
    for k, fn in enumerate(fns):
        j = fn.support_indices(mu)
        psi = fn(mu.points[j])
        keep = psi != 0
        j, psi = j[keep], psi[keep]
        acc = 0j
        for m, sh in enumerate(shells):
            if len(sh):
                field = _kernels.cauchy_sum(mu.points[j], mu.points[sh], mu.weights[sh] + 0j, 0.0)
                acc += complex((psi * mu.weights[j] * field).sum())
            table[m, k] = abs(acc) / math.sqrt(ell)
    per_f = table.max(axis=1)
    m = int(np.argmin(per_f))
    return ThetaReport(Q, float(per_f[m]), int(np.argmax(table[m])), radii[m],
                       tuple(tuple(float(x) for x in row) for row in table))


def theta_field(mu, P, depth, A=2.0, A_prime=4.0, psi_count=4, F_candidates=3):
    """Theta reports for every dyadic Q inside P down to `depth` levels.

    Squares with no test function (far from the support) are skipped.
    Depth must keep l(Q) >= 8 mesh.
    """
    if P.side / 2 ** depth < 8 * mu.mesh:
        raise ValueError("depth goes below the resolution floor l(Q) >= 8 mesh")
    out = []
    for lev in range(depth + 1):
        squares = descendants(P, lev)
        cs = np.array([q.center for q in squares])
        near = mu.index.distances(cs) < A * squares[0].side / 2
        for q, ok in zip(squares, near):
            if not ok:
                continue
            try:
                out.append(theta(mu, q, A, A_prime, psi_count, F_candidates))
            except NoSupport:
                pass
    return out


def theta_carleson(mu, P, gamma, depth, A=2.0, A_prime=4.0, psi_count=4, F_candidates=3, reports=None):
    """sum of l(Q) / l(P) over the squares Q inside P with Theta estimate > gamma.

    Only squares that carry a test function take part, so gamma = 0 returns
    depth + 1 when the support crosses P as a line.  Pass `reports` from
    theta_field to sweep gamma without recomputation.
    """
    if reports is None:
        reports = theta_field(mu, P, depth, A, A_prime, psi_count, F_candidates)
    tot = sum(r.Q.side for r in reports if r.theta_upper > gamma and r.Q.side >= P.side / 2 ** depth)
    return tot / P.side
