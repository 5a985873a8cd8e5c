"""Hot O(n*m) loops: Cauchy sums, the bilinear form, disc masses.

Each kernel exists twice: a numba version and a chunked numpy version with
the same signature.  The numba path is used unless numba is missing or
CAUCHYRECT_DISABLE_NUMBA is set to a truthy value.
"""
import os

import numpy as np

try:
    import numba
    from numba import njit, prange
except ImportError:  # pragma: no cover
    numba = None


def _flag(name):
    return os.environ.get(name, "").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = numba is not None and not _flag("CAUCHYRECT_DISABLE_NUMBA")

# rows per block in the numpy fallbacks; keeps temporaries near 32 MB
_CHUNK_ELEMS = 1 << 22


def _chunks(m, n):
    step = max(1, _CHUNK_ELEMS // max(n, 1))
    for s in range(0, m, step):
        yield s, min(m, s + step)


# ---------------------------------------------------------------- numpy path

def _np_cauchy_sum(tx, ty, sx, sy, v, delta):
    out = np.zeros(tx.shape[0], dtype=np.complex128)
    d2 = delta * delta
    for a, b in _chunks(tx.shape[0], sx.shape[0]):
        dx = tx[a:b, None] - sx[None, :]
        dy = ty[a:b, None] - sy[None, :]
        r2 = dx * dx + dy * dy
        s = np.where(r2 == 0.0, 0.0, 1.0 / np.where(r2 > d2, r2, max(d2, 1e-300)))
        out[a:b] = ((dx - 1j * dy) * s) @ v
    return out


def _np_tilde_sum(tx, ty, sx, sy, w, z0x, z0y):
    ex = z0x - sx
    ey = z0y - sy
    k0 = (ex - 1j * ey) / (ex * ex + ey * ey)
    out = np.zeros(tx.shape[0], dtype=np.complex128)
    for a, b in _chunks(tx.shape[0], sx.shape[0]):
        dx = tx[a:b, None] - sx[None, :]
        dy = ty[a:b, None] - sy[None, :]
        k = (dx - 1j * dy) / (dx * dx + dy * dy)
        out[a:b] = ((k - k0[None, :]) * w[None, :]).sum(axis=1)
    return out


def _np_bilinear_rows(x, y, f, g, w, delta):
    n = x.shape[0]
    rows = np.zeros(n, dtype=np.complex128)
    d2 = delta * delta
    for a, b in _chunks(n, n):
        dx = x[a:b, None] - x[None, :]
        dy = y[a:b, None] - y[None, :]
        r2 = dx * dx + dy * dy
        s = np.where(r2 == 0.0, 0.0, 1.0 / np.where(r2 > d2, r2, max(d2, 1e-300)))
        h = 0.5 * (f[None, :] * g[a:b, None] - f[a:b, None] * g[None, :])
        rows[a:b] = (((dx - 1j * dy) * s) * h * (w[a:b, None] * w[None, :])).sum(axis=1)
    return rows


def _np_disc_mass(cx, cy, px, py, w, radii):
    out = np.zeros((cx.shape[0], radii.shape[0]))
    for a, b in _chunks(cx.shape[0], px.shape[0]):
        d = np.hypot(cx[a:b, None] - px[None, :], cy[a:b, None] - py[None, :])
        # bucket k holds points with radii[k-1] <= d < radii[k]
        k = np.searchsorted(radii, d, side="right")
        for row in range(b - a):
            out[a + row] = np.cumsum(np.bincount(k[row], weights=w, minlength=radii.shape[0] + 1))[:-1]
    return out


def _np_dense_kernel(x, y, delta):
    n = x.shape[0]
    re = np.empty((n, n))
    im = np.empty((n, n))
    d2 = delta * delta
    for a, b in _chunks(n, n):
        dx = x[a:b, None] - x[None, :]
        dy = y[a:b, None] - y[None, :]
        r2 = dx * dx + dy * dy
        s = np.where(r2 == 0.0, 0.0, 1.0 / np.where(r2 > d2, r2, max(d2, 1e-300)))
        re[a:b] = dx * s
        im[a:b] = -dy * s
    return re, im


# ---------------------------------------------------------------- numba path

if numba is not None:

    @njit(cache=True, parallel=True)
    def _nb_cauchy_sum(tx, ty, sx, sy, v, delta):
        m = tx.shape[0]
        n = sx.shape[0]
        out = np.zeros(m, dtype=np.complex128)
        d2 = delta * delta
        for i in prange(m):
            xi = tx[i]
            yi = ty[i]
            acc_r = 0.0
            acc_i = 0.0
            for j in range(n):
                dx = xi - sx[j]
                dy = yi - sy[j]
                r2 = dx * dx + dy * dy
                if r2 == 0.0:
                    continue
                s = 1.0 / (r2 if r2 > d2 else d2)
                kr = dx * s
                ki = -dy * s
                vr = v[j].real
                vi = v[j].imag
                acc_r += kr * vr - ki * vi
                acc_i += kr * vi + ki * vr
            out[i] = complex(acc_r, acc_i)
        return out

    @njit(cache=True, parallel=True)
    def _nb_tilde_sum(tx, ty, sx, sy, w, z0x, z0y):
        m = tx.shape[0]
        n = sx.shape[0]
        k0r = np.empty(n)
        k0i = np.empty(n)
        for j in range(n):
            ex = z0x - sx[j]
            ey = z0y - sy[j]
            r2 = ex * ex + ey * ey
            k0r[j] = ex / r2
            k0i[j] = -ey / r2
        out = np.zeros(m, dtype=np.complex128)
        for i in prange(m):
            acc_r = 0.0
            acc_i = 0.0
            for j in range(n):
                dx = tx[i] - sx[j]
                dy = ty[i] - sy[j]
                r2 = dx * dx + dy * dy
                acc_r += (dx / r2 - k0r[j]) * w[j]
                acc_i += (-dy / r2 - k0i[j]) * w[j]
            out[i] = complex(acc_r, acc_i)
        return out

    @njit(cache=True, parallel=True)
    def _nb_bilinear_rows(x, y, f, g, w, delta):
        n = x.shape[0]
        rows = np.zeros(n, dtype=np.complex128)
        d2 = delta * delta
        for i in prange(n):
            acc = 0j
            for j in range(n):
                if j == i:
                    continue
                dx = x[i] - x[j]
                dy = y[i] - y[j]
                r2 = dx * dx + dy * dy
                if r2 == 0.0:
                    continue
                s = 1.0 / (r2 if r2 > d2 else d2)
                h = 0.5 * (f[j] * g[i] - f[i] * g[j])
                acc += complex(dx * s, -dy * s) * h * (w[i] * w[j])
            rows[i] = acc
        return rows

    @njit(cache=True, parallel=True)
    def _nb_disc_mass(cx, cy, px, py, w, radii):
        m = cx.shape[0]
        n = px.shape[0]
        k = radii.shape[0]
        out = np.zeros((m, k))
        for i in prange(m):
            buckets = np.zeros(k + 1)
            for j in range(n):
                d = np.hypot(cx[i] - px[j], cy[i] - py[j])
                buckets[np.searchsorted(radii, d, side="right")] += w[j]
            acc = 0.0
            for r in range(k):
                acc += buckets[r]
                out[i, r] = acc
        return out

    @njit(cache=True, parallel=True)
    def _nb_dense_kernel(x, y, delta):
        n = x.shape[0]
        re = np.empty((n, n))
        im = np.empty((n, n))
        d2 = delta * delta
        for i in prange(n):
            for j in range(n):
                dx = x[i] - x[j]
                dy = y[i] - y[j]
                r2 = dx * dx + dy * dy
                if r2 == 0.0:
                    re[i, j] = 0.0
                    im[i, j] = 0.0
                else:
                    s = 1.0 / (r2 if r2 > d2 else d2)
                    re[i, j] = dx * s
                    im[i, j] = -dy * s
        return re, im


IMPLS = {
    "numpy": {
        "cauchy_sum": _np_cauchy_sum,
        "tilde_sum": _np_tilde_sum,
        "bilinear_rows": _np_bilinear_rows,
        "disc_mass": _np_disc_mass,
        "dense_kernel": _np_dense_kernel,
    }
}
if numba is not None:
    IMPLS["numba"] = {
        "cauchy_sum": _nb_cauchy_sum,
        "tilde_sum": _nb_tilde_sum,
        "bilinear_rows": _nb_bilinear_rows,
        "disc_mass": _nb_disc_mass,
        "dense_kernel": _nb_dense_kernel,
    }


def backend():
    return "numba" if USE_NUMBA else "numpy"


def set_threads(k):
    """Cap numba's worker pool; no-op on the numpy path."""
    if numba is not None and k:
        numba.set_num_threads(max(1, min(int(k), numba.config.NUMBA_NUM_THREADS)))


def _impl(name):
    return IMPLS[backend()][name]


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _c128(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def cauchy_sum(targets, sources, values, delta):
    """sum_j K_delta(t - s_j) v_j for every target t; coincident pairs skipped.

    delta = 0 gives the plain kernel 1/z.
    """
    t = _f64(targets).reshape(-1, 2)
    s = _f64(sources).reshape(-1, 2)
    return _impl("cauchy_sum")(_f64(t[:, 0]), _f64(t[:, 1]), _f64(s[:, 0]), _f64(s[:, 1]),
                               _c128(values), float(delta))


def tilde_sum(targets, sources, weights, z0):
    t = _f64(targets).reshape(-1, 2)
    s = _f64(sources).reshape(-1, 2)
    return _impl("tilde_sum")(_f64(t[:, 0]), _f64(t[:, 1]), _f64(s[:, 0]), _f64(s[:, 1]),
                              _f64(weights), float(z0[0]), float(z0[1]))


def bilinear_rows(points, f, g, weights, delta):
    p = _f64(points).reshape(-1, 2)
    return _impl("bilinear_rows")(_f64(p[:, 0]), _f64(p[:, 1]), _c128(f), _c128(g),
                                  _f64(weights), float(delta))


def disc_mass(centers, points, weights, radii):
    """Mass of the open discs B(c, r) for every center c and every radius r.

    radii must be sorted ascending.
    """
    c = _f64(centers).reshape(-1, 2)
    p = _f64(points).reshape(-1, 2)
    return _impl("disc_mass")(_f64(c[:, 0]), _f64(c[:, 1]), _f64(p[:, 0]), _f64(p[:, 1]),
                              _f64(weights), _f64(radii))


def dense_kernel(points, delta):
    """Real and imaginary parts of M[i, j] = K_delta(p_i - p_j), zero diagonal."""
    p = _f64(points).reshape(-1, 2)
    return _impl("dense_kernel")(_f64(p[:, 0]), _f64(p[:, 1]), float(delta))
