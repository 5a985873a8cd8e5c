import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cauchyrect import cauchy as c
from cauchyrect import measure as m
from cauchyrect import riesz
from cauchyrect.spatial import Disc
from oracles import (brute_bilinear, brute_cauchy, dense_operator_norm, resolve_identity_mp, segment_tilde,
                     segment_tilde_quad)

Z0 = (0.0, 2.0)
WINDOW = Disc((0.0, 0.0), 0.5)


def scaled(mu, k):
    return m.PointCloudMeasure(mu.points, mu.weights * k, mu.mesh, mu.label)


# ------------------------------------------------------------ kernels

def test_kernel_examples():
    assert c.kernel(2) == 0.5
    assert c.kernel(1j) == -1j
    with pytest.raises(ZeroDivisionError):
        c.kernel(0)
    assert c.kernel_delta(0, 0.3) == 0
    assert c.kernel_delta(0.25, 0.5) == 1.0
    assert c.kernel_delta(0, 0) == 0


@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), st.floats(0, 10))
def test_kernel_delta_matches_kernel_outside_delta(z, delta):
    if abs(z) >= delta and z != 0:
        assert c.kernel_delta(z, delta) == pytest.approx(c.kernel(z), rel=1e-12)
    else:
        assert abs(c.kernel_delta(z, delta)) <= abs(z) / delta / delta * (1 + 1e-12) if delta else True


def test_kernel_config():
    assert c.KernelConfig().delta == 0
    with pytest.raises(ValueError):
        c.KernelConfig(delta=-1)


# ------------------------------------------------------------ transform

def test_transform_zero_f(short_segment):
    fs = c.transform_delta(short_segment, np.zeros(short_segment.n), 0.04, [(0, 1), (3, 0)])
    assert np.all(fs.values == 0)


def test_transform_single_mass():
    mu = m.PointCloudMeasure([[1.0, 2.0]], [0.7], 0.01)
    t = np.array([[1.5, 2.0], [1.0, 2.01], [4.0, -1.0]])
    fs = c.transform_delta(mu, [1.0], 0.1, t)
    want = 0.7 * c.kernel_delta((t[:, 0] - 1) + 1j * (t[:, 1] - 2), 0.1)
    assert np.allclose(fs.values, want, rtol=1e-14)


def test_transform_matches_loop():
    mu = m.gen_cantor(3)
    f = np.random.default_rng(0).normal(size=mu.n)
    t = np.random.default_rng(1).uniform(0, 1, (25, 2))
    fs = c.transform_delta(mu, f, 0.02, t)
    assert np.allclose(fs.values, brute_cauchy(t, mu.points, f * mu.weights, 0.02), rtol=1e-12, atol=1e-12)


def test_transform_rejects_on_support_at_zero_delta(short_segment):
    with pytest.raises(ValueError):
        c.transform_delta(short_segment, np.ones(short_segment.n), 0.0, short_segment.points[:1])
    with pytest.raises(ValueError):
        c.transform_delta(short_segment, np.ones(short_segment.n), -1.0, [(0, 1)])


def test_pointwise_bound_on_segment(segment):
    c0 = m.regularity(segment).niceness
    delta = 4 * segment.mesh
    rng = np.random.default_rng(3)
    t = rng.uniform([-60, -3], [60, 3], (100, 2))
    f = np.ones(segment.n)
    fs = c.transform_delta(segment, f, delta, t)
    assert np.all(np.abs(fs.values) <= c.pointwise_bound(c0, delta, c.l2_norm(segment, f)))


def test_field_sample_lengths():
    with pytest.raises(ValueError):
        c.FieldSample(np.zeros((2, 2)), np.zeros(3))


# ------------------------------------------------------------ bilinear form

@pytest.fixture(scope="module")
def tents(short_segment):
    p = short_segment.points
    f = np.maximum(0, 1 - np.hypot(p[:, 0] - 1, p[:, 1]) / 2)
    g = np.maximum(0, 1 - np.hypot(p[:, 0] + 0.5, p[:, 1]) / 3) * (1 + 0.5j)
    return f, g


def test_bilinear_antisymmetry(short_segment, tents):
    f, g = tents
    for delta in (0.0, 0.04, 0.3):
        a = c.bilinear_I_delta(short_segment, f, g, delta)
        assert c.bilinear_I_delta(short_segment, g, f, delta) == -a
        assert c.bilinear_I_delta(short_segment, f, f, delta) == 0


def test_bilinear_matches_loop():
    mu = m.gen_cantor(2)
    rng = np.random.default_rng(4)
    f, g = rng.normal(size=16), rng.normal(size=16) + 1j * rng.normal(size=16)
    for delta in (0.0, 0.1):
        assert abs(c.bilinear_I_delta(mu, f, g, delta) - brute_bilinear(mu.points, f, g, mu.weights, delta)) < 1e-12


def test_bilinear_equals_pairing(short_segment, tents):
    f, g = tents
    for delta in (0.0, 0.05):
        assert c.pairing(short_segment, f, g, delta) == pytest.approx(c.bilinear_I_delta(short_segment, f, g, delta),
                                                                     rel=1e-9, abs=1e-12)


def test_bilinear_constant_below_separation(short_segment, tents):
    f, g = tents
    base = c.bilinear_I_delta(short_segment, f, g, 0.0)
    for delta in (short_segment.mesh / 4, short_segment.mesh / 2, 0.9 * short_segment.mesh):
        assert c.bilinear_I_delta(short_segment, f, g, delta) == base


def test_bilinear_delta_dependence_is_linear(short_segment, tents):
    """|I_d1 - I_d2| <= Lh * sum_{0 < |p_i - p_j| < max d} w_i w_j, where
    Lh = (|f|_inf Lip g + |g|_inf Lip f) / 2 bounds |H(z, xi)| / |z - xi| and
    |K - K_d| <= 1 / |z| on |z| < d."""
    f, g = tents
    mu = short_segment
    lip_f, lip_g = 1 / 2, abs(1 + 0.5j) / 3
    lh = (np.abs(f).max() * lip_g + np.abs(g).max() * lip_f) / 2
    base = c.bilinear_I_delta(mu, f, g, mu.mesh / 2)
    from cauchyrect import _kernels
    for delta in (0.02, 0.05, 0.1, 0.2, 0.4):
        close = _kernels.disc_mass(mu.points, mu.points, mu.weights, np.array([delta]))[:, 0] - mu.weights
        bound = lh * float((mu.weights * close).sum())
        assert abs(c.bilinear_I_delta(mu, f, g, delta) - base) <= bound
        # the bound itself is linear in delta: at most C0 * mass * delta
        assert bound <= lh * 2 * mu.mass * delta * 1.01


# ------------------------------------------------------------ operator norm

def test_operator_norm_single_point():
    assert c.operator_norm(m.PointCloudMeasure([[0.0, 0.0]], [1.0], 0.1)) == 0.0


@pytest.mark.parametrize("mu", [m.gen_cantor(3), m.gen_segment(1.0, (0, 0), (3, 1), 0.02),
                                m.gen_circle(1.0, (0, 0), 1.0, 200)], ids=["cantor", "segment", "circle"])
def test_operator_norm_matches_dense_svd(mu):
    delta = 4 * mu.mesh
    assert c.operator_norm(mu, delta, tol=1e-12) == pytest.approx(dense_operator_norm(mu.points, mu.weights, delta),
                                                                  rel=1e-6)


def test_operator_norm_random_weights():
    rng = np.random.default_rng(9)
    mu = m.PointCloudMeasure(rng.uniform(-1, 1, (150, 2)), rng.uniform(0.001, 0.02, 150), 0.01)
    assert c.operator_norm(mu, 0.03, tol=1e-12) == pytest.approx(dense_operator_norm(mu.points, mu.weights, 0.03),
                                                                 rel=1e-6)


def test_operator_norm_free_path_matches_dense():
    mu = m.gen_cantor(3)
    a = c.operator_norm(mu, tol=1e-10)
    b, info = c.operator_norm(mu, tol=1e-10, dense_bytes=0, return_info=True)
    assert not info["dense"] and b == pytest.approx(a, rel=1e-9)


def test_operator_norm_reports_nonconvergence():
    with pytest.raises(c.ConvergenceError) as e:
        c.operator_norm(m.gen_cantor(3), tol=0.0, maxiter=5)
    assert e.value.iterations == 5 and e.value.estimate > 0


# frozen at delta = 4 * mesh(n), seed 0
CANTOR_NORMS = {2: 0.9770189804938979, 3: 1.3461054598774005, 4: 1.6507132071387611, 5: 1.9142004620276218}


def test_cantor_operator_norms_increase():
    vals = [c.operator_norm(m.gen_cantor(n)) for n in sorted(CANTOR_NORMS)]
    for v, n in zip(vals, sorted(CANTOR_NORMS)):
        assert v == pytest.approx(CANTOR_NORMS[n], rel=1e-5)
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_segment_norm_sup_over_delta():
    mu = m.gen_segment(1.0, (-2, 0), (2, 0), 0.01)
    ref = c.operator_norm(mu)
    vals = [c.operator_norm(mu, d) for d in (0.005, 0.01, 0.02, 0.08)]
    assert max(vals) <= 1.1 * ref
    assert vals[0] == pytest.approx(vals[1], rel=1e-6)  # no pair is closer than the mesh


# ------------------------------------------------------------ recentred transform

def test_tilde_examples(segment):
    assert c.tilde_cauchy_one(segment, Z0, Z0) == 0
    up = c.tilde_cauchy_one(segment, (0, 1), Z0)
    down = c.tilde_cauchy_one(segment, (0, -1), Z0)
    assert abs(up) < 0.05
    assert abs(down - 2j * math.pi) < 0.05 * 2 * math.pi
    # frozen
    assert up == pytest.approx(-0.039962706167689536j, abs=1e-12)
    assert down == pytest.approx(6.163233265385754j, abs=1e-12)


@pytest.mark.parametrize("z", [(0, 1), (0, -1), (3, 0.5), (-49, -2), (60, 0.1)])
def test_tilde_matches_closed_form(segment, z):
    exact = segment_tilde(z, Z0, -50, 50)
    quad = segment_tilde_quad(z, Z0, -50, 50)
    assert abs(exact - quad) < 1e-12
    # midpoint sums with mesh 0.01 at distance >= 0.1 from the line
    assert abs(c.tilde_cauchy_one(segment, z, Z0) - exact) < 2e-3


@given(st.floats(-5, 5), st.floats(0.5, 5), st.floats(-5, 5), st.floats(-5, -0.5))
def test_tilde_antisymmetric(x1, y1, x2, y2):
    mu = m.gen_segment(1.0, (-5, 0), (5, 0), 0.05)
    a = c.tilde_cauchy_one(mu, (x1, y1), (x2, y2))
    b = c.tilde_cauchy_one(mu, (x2, y2), (x1, y1))
    assert abs(a + b) <= 1e-12 * max(1, abs(a))


def test_tilde_rejects_near_support(segment):
    with pytest.raises(ValueError):
        c.tilde_cauchy_one(segment, (0.003, 0.0), Z0)
    with pytest.raises(ValueError):
        c.tilde_cauchy_one(segment, (0, 1), (0, 0.01))


def test_jump_across_segment(segment):
    # C~(-y e) - C~(y e) = -2 pi c e^{-i theta} for the upward unit normal e = e^{i theta}
    for y in (0.5, 1.0):
        jump = c.tilde_cauchy_one(segment, (0, -y), Z0) - c.tilde_cauchy_one(segment, (0, y), Z0)
        want = -2 * math.pi * cmath.exp(-1j * math.pi / 2)
        assert abs(jump - want) < 0.05 * abs(want)


# ------------------------------------------------------------ kappa

def test_kappa_segment(segment):
    k = c.kappa_estimate(segment, Z0, WINDOW)
    assert abs(k.value - 1j * math.pi) < 0.05 * math.pi
    assert k.spread < 0.1 * abs(k.value) and not k.unstable
    assert k.value.imag == pytest.approx(3.0616352796090354, rel=1e-9)
    assert k.spread == pytest.approx(0.009866786115501763, rel=1e-6)
    assert len(k.ratios) == 6


def test_kappa_blowup_invariant(segment):
    k = c.kappa_estimate(segment, Z0, WINDOW)
    z, lam = np.array([0.3, 0.0]), 0.5
    nu = m.blowup(segment, z, lam)
    kb = c.kappa_estimate(nu, (np.array(Z0) - z) / lam, Disc(tuple((np.array(WINDOW.center) - z) / lam),
                                                             WINDOW.radius / lam))
    assert abs(kb.value - k.value) <= 1e-12 * abs(k.value)


def test_kappa_linear_in_density(segment):
    k = c.kappa_estimate(segment, Z0, WINDOW)
    k3 = c.kappa_estimate(scaled(segment, 3.0), Z0, WINDOW)
    assert abs(k3.value - 3 * k.value) <= 1e-12 * abs(k3.value)


@pytest.mark.parametrize("x", [-20.0, 0.0, 20.0])
def test_kappa_locally_constant(segment, x):
    k = c.kappa_estimate(segment, Z0, Disc((x, 0.0), 0.5))
    assert k.spread <= 0.02 * abs(k.value)


def test_kappa_flags_unstable():
    mu = m.gen_circle(1.0, (0, 0), 1.0, 2000)
    k = c.kappa_estimate(mu, (0, 0), Disc((1.0, 0.0), 0.5), tolerance=1e-9)
    assert k.unstable


def test_window_must_meet_support(segment):
    with pytest.raises(ValueError):
        c.kappa_estimate(segment, Z0, Disc((0, 10), 0.5))


# ------------------------------------------------------------ reflectionless defect

def test_defect_segment_vs_circle(segment, circle):
    d_seg = c.reflectionless_defect(segment, riesz.make_phi_family(segment, 2.0, 4))
    big = m.blowup(circle, (1.0, 0.0), 0.1)
    d_circ = c.reflectionless_defect(big, riesz.make_phi_family(big, 2.0, 4))
    assert d_seg == pytest.approx(0.03464314076000077, rel=1e-9)
    assert d_circ == pytest.approx(0.2705605164122093, rel=1e-9)
    assert d_seg < d_circ / 5


def test_defect_unit_circle_large(circle):
    nu = m.blowup(circle, (1.0, 0.0), 1.0)
    assert c.reflectionless_defect(nu, riesz.make_phi_family(nu, 2.0, 4)) > 0.1


def test_defect_shrinks_with_segment_length(segment):
    # finite-length effect: the defect on [-L, L] decays like 1/L
    nu = m.blowup(segment, (0.37, 0.0), 0.5)
    d1 = c.reflectionless_defect(segment, riesz.make_phi_family(segment, 2.0, 4))
    d2 = c.reflectionless_defect(nu, riesz.make_phi_family(nu, 2.0, 4))
    assert d2 == pytest.approx(d1 / 2, rel=0.05)


def test_defect_independent_of_base_point(segment):
    fns = riesz.make_phi_family(segment, 2.0, 4)
    a = c.reflectionless_defect(segment, fns)
    b = c.reflectionless_defect(segment, fns, z0=(3.0, -7.0))
    assert b == pytest.approx(a, rel=1e-9)


def test_defect_blowup_with_mapped_dictionary(circle):
    nu = m.blowup(circle, (1.0, 0.0), 0.1)
    fns = riesz.make_phi_family(nu, 2.0, 4)
    z, lam = np.array([0.25, -0.5]), 4.0
    nu2 = m.blowup(nu, z, lam)
    a = c.reflectionless_defect(nu, fns)
    b = c.reflectionless_defect(nu2, [f.mapped(z, lam) for f in fns])
    assert b == pytest.approx(a, rel=1e-10)


def test_defect_empty_dictionary(segment):
    with pytest.raises(ValueError):
        c.reflectionless_defect(segment, [])


# ------------------------------------------------------------ resolvent

def test_resolvent_on_segment(segment):
    k = c.kappa_estimate(segment, Z0, WINDOW)
    rng = np.random.default_rng(0)
    zs = []
    while len(zs) < 20:
        z = rng.uniform(-3, 3, 2)
        if abs(z[1]) >= 0.25:
            zs.append(z)
    res = c.resolvent_residuals(segment, np.array(zs), k.value, Z0)
    assert np.all(res < 0.1 * abs(2 * k.value) ** 2)
    assert c.resolvent_residual(segment, zs[0], k.value, Z0) == pytest.approx(res[0], rel=1e-14)


def test_resolve_identity_example():
    assert c.resolve_identity_residual(1, 2j, -3) < 1e-15
    with pytest.raises(ValueError):
        c.resolve_identity_residual(1, 1, 2)
    with pytest.raises(ValueError):
        c.resolve_identity_residual(1, 0, 2)


def test_resolve_identity_random_triples():
    rng = np.random.default_rng(1)
    z, xi, om = (rng.normal(size=10_000) + 1j * rng.normal(size=10_000) for _ in range(3))
    assert c.resolve_identity_residuals(z, xi, om).max() < 1e-10


@pytest.mark.parametrize("eps", [1e-4, 1e-7, 1e-10])
def test_resolve_identity_near_degenerate(eps):
    rng = np.random.default_rng(int(-math.log10(eps)))
    for _ in range(50):
        z = complex(*rng.normal(size=2))
        xi = z + eps * complex(*rng.normal(size=2))
        om = complex(*rng.normal(size=2))
        exact, scale = resolve_identity_mp(z, xi, om)
        assert exact / scale < 1e-40
        assert c.resolve_identity_residual(z, xi, om) < 1e-10


def test_kappa_to_json(segment):
    js = c.kappa_estimate(segment, Z0, WINDOW).to_json()
    assert set(js) == {"value", "spread", "base_point", "unstable", "ratios"}
