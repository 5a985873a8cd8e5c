"""Cauchy-kernel numerics on point clouds.

K(z) = 1/z and its truncation K_delta(z) = conj(z) / max(delta, |z|)^2.
Self-interaction terms (i = j, or coincident points) are always skipped,
so delta = 0 gives well-defined discrete sums.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .spatial import Disc


class ConvergenceError(RuntimeError):
    """Power iteration hit its cap; `estimate` holds the last iterate."""

    def __init__(self, msg, estimate, iterations):
        super().__init__(msg)
        self.estimate = estimate
        self.iterations = iterations


@dataclass(frozen=True)
class KernelConfig:
    delta: float = 0.0
    exclude_diagonal: bool = True

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


@dataclass(frozen=True, eq=False)
class FieldSample:
    targets: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.targets) != len(self.values):
            raise ValueError("targets and values differ in length")

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("x,y,re,im\n")
            for (x, y), v in zip(self.targets.tolist(), self.values.tolist()):
                fh.write(f"{x!r},{y!r},{v.real!r},{v.imag!r}\n")


@dataclass(frozen=True)
class KappaEstimate:
    value: complex
    spread: float
    base_point: tuple
    unstable: bool
    ratios: tuple = ()

    def to_json(self):
        return {
            "value": [self.value.real, self.value.imag],
            "spread": self.spread,
            "base_point": list(self.base_point),
            "unstable": self.unstable,
            "ratios": [[r.real, r.imag] for r in self.ratios],
        }


def kernel(z):
    z = complex(z)
    if z == 0:
        raise ZeroDivisionError("K(0) is undefined")
    return 1 / z


def kernel_delta(z, delta):
    """Vectorised conj(z) / max(delta, |z|)^2; zero at z = 0."""
    z = np.asarray(z, dtype=complex)
    m = np.maximum(delta, np.abs(z))
    mm = np.where(m == 0, 1, m)
    # real and imaginary parts separately: complex / real overflows to nan for subnormal z
    out = np.empty(z.shape, dtype=complex)
    with np.errstate(over="ignore"):
        out.real = z.real / mm / mm
        out.imag = -(z.imag / mm / mm)
    out[m == 0] = 0
    return out[()] if out.ndim == 0 else out


def _pts(z):
    """Accept complex numbers or (x, y) pairs; return an (m, 2) array."""
    a = np.asarray(z)
    if np.iscomplexobj(a):
        a = a.reshape(-1)
        return np.stack([a.real, a.imag], axis=1)
    return np.asarray(a, dtype=float).reshape(-1, 2)


def _xy(z):
    return tuple(_pts(z)[0])


def l2_norm(mu, f):
    return math.sqrt(float((np.abs(f) ** 2 * mu.weights).sum()))


def transform_delta(mu, f, delta, targets):
    """C_delta(f mu)(t) = sum_i K_delta(t - p_i) f_i w_i at every target."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    t = _pts(targets)
    if delta == 0 and len(t) and np.any(mu.index.distances(t) == 0):
        raise ValueError("delta = 0 with a target on the cloud")
    v = np.asarray(f, dtype=complex) * mu.weights
    return FieldSample(t, _kernels.cauchy_sum(t, mu.points, v, delta))


def pointwise_bound(c0, delta, f_norm):
    return math.sqrt(3 * c0 / delta) * f_norm


def bilinear_I_delta(mu, f, g, delta):
    """1/2 sum_{i != j} K_delta(p_i - p_j) [f_j g_i - f_i g_j] w_i w_j.

    Evaluated in exactly this antisymmetric form, so I(f, f) == 0 and
    I(f, g) == -I(g, f) hold bit for bit.
    """
    f = np.broadcast_to(np.asarray(f, dtype=complex), (mu.n,))
    g = np.broadcast_to(np.asarray(g, dtype=complex), (mu.n,))
    return complex(_kernels.bilinear_rows(mu.points, f, g, mu.weights, delta).sum())


def pairing(mu, f, g, delta=0.0):
    """sum_i g_i w_i C_delta(f mu)(p_i); equals bilinear_I_delta by antisymmetry.

    Only the support of g is visited, which makes this the cheap route for
    localized test functions.
    """
    g = np.asarray(g, dtype=complex)
    f = np.asarray(f, dtype=complex)
    sg = np.flatnonzero(g)
    sf = np.flatnonzero(f)
    if len(sg) == 0 or len(sf) == 0:
        return 0j
    field = _kernels.cauchy_sum(mu.points[sg], mu.points[sf], f[sf] * mu.weights[sf], delta)
    return complex((g[sg] * mu.weights[sg] * field).sum())


# ------------------------------------------------------------- operator norm

class _DenseOp:
    """M[i, j] = K_delta(p_i - p_j) held in memory, imaginary part dropped when zero."""

    def __init__(self, pts, delta):
        self.re, im = _kernels.dense_kernel(pts, delta)
        self.im = im if im.any() else None

    def mul(self, x):
        xr, xi = x.real, x.imag
        if self.im is None:
            # real kernel keeps real vectors real; skip the zero half
            if not xi.any():
                return (self.re @ xr) + 0j
            return (self.re @ xr) + 1j * (self.re @ xi)
        return (self.re @ xr - self.im @ xi) + 1j * (self.re @ xi + self.im @ xr)


class _FreeOp:
    def __init__(self, pts, delta):
        self.pts = pts
        self.delta = delta

    def mul(self, x):
        return _kernels.cauchy_sum(self.pts, self.pts, x, self.delta)


def operator_norm(mu, delta=None, tol=1e-6, maxiter=3000, seed=0, dense_bytes=2 * 1024 ** 3,
                  return_info=False):
    """Largest singular value of f -> (sum_{j != i} K_delta(p_i - p_j) f_j w_j)_i
    on l^2 with weights w.

    Power iteration on T*T, where T* g = -conj(M conj(w g)) because the kernel
    is odd.  Stops when the estimate moves by less than tol (relative);
    raises ConvergenceError after maxiter steps.  The kernel matrix is cached
    when it fits in dense_bytes, otherwise every product is recomputed.
    """
    if delta is None:
        delta = 4 * mu.mesh
    n = mu.n
    if n < 2:
        return (0.0, {"iterations": 0, "dense": False}) if return_info else 0.0
    w = mu.weights
    dense = 16 * n * n <= dense_bytes
    op = _DenseOp(mu.points, delta) if dense else _FreeOp(mu.points, delta)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 0j
    sigma = 0.0
    for it in range(1, maxiter + 1):
        v = v / math.sqrt(float((np.abs(v) ** 2 * w).sum()))
        tv = op.mul(w * v)
        new = math.sqrt(float((np.abs(tv) ** 2 * w).sum()))
        if new == 0.0:
            sigma = 0.0
            break
        v = -np.conj(op.mul(np.conj(w * tv)))
        if abs(new - sigma) <= tol * new:
            sigma = new
            break
        sigma = new
    else:
        raise ConvergenceError(f"power iteration did not converge in {maxiter} steps", sigma, maxiter)
    if return_info:
        return sigma, {"iterations": it, "dense": dense}
    return sigma


# ------------------------------------------------------ recentred transform

def _check_off_support(mu, zs, what):
    d = mu.index.distances(zs)
    bad = d < 2 * mu.mesh
    if np.any(bad):
        raise ValueError(f"{what} within 2*mesh of the support (distance {float(d[bad].min())})")


def tilde_cauchy_one_many(mu, zs, z0):
    """sum_i [K(z - p_i) - K(z0 - p_i)] w_i for many z."""
    zs = _pts(zs)
    z0 = _pts(z0)
    _check_off_support(mu, z0, "base point")
    _check_off_support(mu, zs, "evaluation point")
    return _kernels.tilde_sum(zs, mu.points, mu.weights, z0[0])


def tilde_cauchy_one(mu, z, z0):
    return complex(tilde_cauchy_one_many(mu, z, z0)[0])


def tilde_pairing(mu, psi, z0, U):
    """<C~(1), psi> by the three-term formula with cutoff set U (a Disc):

        <C(chi_U), psi> - C(chi_U)(z0) * int psi
            + sum_i psi_i w_i sum_{j not in U} [K(p_i - p_j) - K(z0 - p_j)] w_j

    The terms rearrange to a sum that does not see U; callers use the
    spread over several U as a consistency diagnostic.
    """
    psi = np.asarray(psi, dtype=float)
    sp = np.flatnonzero(psi)
    if len(sp) == 0:
        return 0j
    inU = U.contains(mu.points)
    iu = np.flatnonzero(inU)
    io = np.flatnonzero(~inU)
    pw = psi[sp] * mu.weights[sp]
    near = _kernels.cauchy_sum(mu.points[sp], mu.points[iu], mu.weights[iu] + 0j, 0.0)
    z0 = np.asarray(_xy(z0))
    c_u_z0 = _kernels.cauchy_sum(z0[None, :], mu.points[iu], mu.weights[iu] + 0j, 0.0)[0]
    term1 = complex((pw * near).sum())
    term2 = c_u_z0 * float(pw.sum())
    if len(io):
        far = _kernels.cauchy_sum(mu.points[sp], mu.points[io], mu.weights[io] + 0j, 0.0)
        far0 = _kernels.cauchy_sum(z0[None, :], mu.points[io], mu.weights[io] + 0j, 0.0)[0]
        term3 = complex((pw * (far - far0)).sum())
    else:
        term3 = 0j
    return term1 - term2 + term3


def _window(window):
    if isinstance(window, Disc):
        return np.asarray(window.center, dtype=float), float(window.radius)
    return np.asarray(window.center, dtype=float), window.side / 2


def _spread_points(pts, start, k):
    """Greedy farthest-point order starting at index `start` (ties: lowest index)."""
    chosen = [start]
    d = np.hypot(*(pts - pts[start]).T)
    while len(chosen) < min(k, len(pts)):
        nxt = int(np.argmax(d))
        if d[nxt] == 0:
            break
        chosen.append(nxt)
        d = np.minimum(d, np.hypot(*(pts - pts[nxt]).T))
    return chosen


def window_bumps(mu, window, count=3):
    """Tents of radius R/2 at support points within R/2 of the window center."""
    c, R = _window(window)
    idx = mu.index.within_disc(c, R / 2, strict=True)
    if len(idx) == 0:
        raise ValueError("window does not meet the support")
    sub = mu.points[idx]
    start = int(np.argmin(np.hypot(*(sub - c).T)))
    out = []
    for k in _spread_points(sub, start, count):
        d = np.hypot(*(mu.points - sub[k]).T)
        out.append(np.maximum(0.0, 1 - d / (R / 2)))
    return out


def kappa_estimate(mu, z0, window, bumps=3, u_factors=(20.0, 40.0), tolerance=0.2):
    """Estimate the constant value of C~(1) on the support near `window`.

    The pairing <C~(1), psi> / int psi is evaluated for `bumps` tents in the
    window and two cutoff discs U of radius 20R and 40R (10 and 20 window
    widths, R the window radius).  value = mean of the ratios; spread =
    largest distance of a ratio from the mean.  The estimate is flagged
    unstable when spread > tolerance * |value|.
    """
    c, R = _window(window)
    ratios = []
    for psi in window_bumps(mu, window, bumps):
        mass = float((psi * mu.weights).sum())
        for f in u_factors:
            U = Disc(tuple(c), f * R)
            ratios.append(tilde_pairing(mu, psi, z0, U) / mass)
    ratios = np.array(ratios)
    value = complex(ratios.mean())
    spread = float(np.abs(ratios - value).max())
    return KappaEstimate(value, spread, _xy(z0), spread > tolerance * abs(value), tuple(complex(r) for r in ratios))


def reflectionless_defect(mu, dictionary, z0=None, cutoff=2.0, return_all=False):
    """max over psi of |<C~(1), psi>| / (||psi||_2 * mu(supp psi)^(1/2)).

    The pairing uses the three-term formula with U the disc concentric with
    the union of supports and `cutoff` times its radius.  Mean-zero psi make
    the result independent of the base point z0; by default z0 sits one
    diameter above the support's bounding box.
    """
    dictionary = list(dictionary)
    if not dictionary:
        raise ValueError("empty dictionary")
    if z0 is None:
        lo = mu.points.min(axis=0)
        hi = mu.points.max(axis=0)
        z0 = ((lo[0] + hi[0]) / 2, hi[1] + max(mu.diameter, 4 * mu.mesh))
    centers = np.array([fn.support_disc[0] for fn in dictionary], dtype=float)
    radii = np.array([fn.support_disc[1] for fn in dictionary], dtype=float)
    mid = centers.mean(axis=0)
    reach = float((np.hypot(*(centers - mid).T) + radii).max())
    U = Disc(tuple(mid), cutoff * reach)
    vals = []
    for fn in dictionary:
        psi = fn(mu.points)
        on = psi != 0
        norm = math.sqrt(float((psi ** 2 * mu.weights).sum()))
        supp_mass = float(mu.weights[on].sum())
        p = tilde_pairing(mu, psi, z0, U)
        vals.append(abs(p) / (norm * math.sqrt(supp_mass)))
    return (max(vals), vals) if return_all else max(vals)


# ---------------------------------------------------------------- resolvent

def resolvent_residual(mu, z, kappa, z0):
    """|v^2 - 2 kappa v| with v = C~(1)(z) recentred at z0."""
    v = tilde_cauchy_one(mu, z, z0)
    return abs(v * v - 2 * kappa * v)


def resolvent_residuals(mu, zs, kappa, z0):
    v = tilde_cauchy_one_many(mu, zs, z0)
    return np.abs(v * v - 2 * kappa * v)


def _resolve_terms(z, xi, om):
    a = 1 / (z - xi) + 1 / xi
    b = 1 / (xi - om) + 1 / om
    c = 1 / (z - om) + 1 / om
    d = 1 / (om - xi) + 1 / xi
    return a * b, c * d, a * c


def resolve_identity_residual(z, xi, om, relative=True):
    """Defect of the three-point resolvent identity

        [1/(z-xi)+1/xi][1/(xi-om)+1/om] + [1/(z-om)+1/om][1/(om-xi)+1/xi]
            = [1/(z-xi)+1/xi][1/(z-om)+1/om].

    With relative=True the difference is divided by max(1, |each product|),
    which keeps near-coincident triples meaningful.
    """
    z, xi, om = complex(z), complex(xi), complex(om)
    if 0 in (xi, om) or z == xi or z == om or xi == om:
        raise ValueError("points must be pairwise distinct and xi, om nonzero")
    t1, t2, rhs = _resolve_terms(z, xi, om)
    r = abs(t1 + t2 - rhs)
    if relative:
        r /= max(1.0, abs(t1), abs(t2), abs(rhs))
    return r


def resolve_identity_residuals(z, xi, om, relative=True):
    """Vectorised resolve_identity_residual over arrays of triples."""
    z, xi, om = (np.asarray(a, dtype=complex) for a in (z, xi, om))
    if np.any((xi == 0) | (om == 0) | (z == xi) | (z == om) | (xi == om)):
        raise ValueError("points must be pairwise distinct and xi, om nonzero")
    t1, t2, rhs = _resolve_terms(z, xi, om)
    r = np.abs(t1 + t2 - rhs)
    if relative:
        r = r / np.maximum.reduce([np.ones_like(r), np.abs(t1), np.abs(t2), np.abs(rhs)])
    return r
