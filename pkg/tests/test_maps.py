import math

import numpy as np
import pytest

from qrlab import maps as Z
from qrlab import metrics as M
from qrlab import points as P
from qrlab.errors import DomainError, NumericError, ParameterError
from qrlab.rng import SplitMix64

import oracles


def beam_points(count, seed, c_range=3.0):
    rng = SplitMix64(seed)
    return np.column_stack([(rng.uniform(count) - 0.5) * 0.999 * math.pi,
                            (rng.uniform(count) - 0.5) * 0.999 * math.pi,
                            (2 * rng.uniform(count) - 1) * c_range])


# evaluation -------------------------------------------------------------

def test_eval_examples():
    assert np.allclose(Z.radial_power(2, 3)([2.0, 0, 0]), [4.0, 0, 0])
    assert np.allclose(Z.radial_power(0.5, 3)([4.0, 0, 0]), [2.0, 0, 0])
    assert np.allclose(Z.planar_polynomial([0, 0, 1])([0.0, 1.0]), [-1.0, 0.0])


def test_eval_rejects_points_outside_domain():
    with pytest.raises(DomainError):
        Z.zorich_bloch()([0.0, 0.0, 1.5])
    with pytest.raises(DomainError):
        Z.identity(3)([0.0, 1.0])


# radial powers ----------------------------------------------------------

@pytest.mark.parametrize("t,n,K,alpha", [(1, 3, 1, 1), (0.5, 3, 4, 0.5), (2, 2, 2, 0.5)])
def test_radial_power_dilatation(t, n, K, alpha):
    f = Z.radial_power(t, n)
    assert f.K == pytest.approx(K) == pytest.approx(oracles.radial_power_K(t, n))
    assert f.alpha == pytest.approx(alpha)


def test_radial_power_modulus_is_exact():
    rng = SplitMix64(7)
    x = rng.normal(1000, 3) * 10.0 ** (rng.uniform(1000) * 6 - 3)[:, None]
    for t in (0.3, 0.5, 2.0):
        f = Z.radial_power(t, 3)
        assert np.allclose(np.linalg.norm(f(x), axis=-1), np.linalg.norm(x, axis=-1) ** t,
                           rtol=1e-13)


def test_radial_power_rejects_nonpositive_exponent():
    with pytest.raises(ParameterError):
        Z.radial_power(0.0, 3)


# Zorich -----------------------------------------------------------------

def test_zorich_examples():
    f = Z.zorich()
    assert np.allclose(f([0.0, 0.0, 0.0]), [0.0, 0.0, 1.0])
    for s in (0.5, 1.0, 7.0):
        assert np.allclose(Z.zorich_inverse([0.0, 0.0, s]), [0.0, 0.0, math.log(s)])


def test_zorich_matches_oracle_on_beam():
    p = beam_points(200, 3)
    got = Z.zorich()(p)
    ref = np.array([oracles.zorich(*q) for q in p])
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_zorich_slices_go_to_hemispheres():
    p = beam_points(1000, 4)
    img = Z.zorich()(p)
    assert np.allclose(np.linalg.norm(img, axis=-1), np.exp(p[:, 2]), rtol=1e-12, atol=0)
    assert np.all(img[:, 2] > 0)


def test_zorich_round_trip():
    p = beam_points(1000, 5)
    assert np.allclose(Z.zorich_inverse(Z.zorich()(p)), p, atol=1e-9)


def test_zorich_reflection_extension():
    f = Z.zorich()
    p = beam_points(200, 6)
    # reflecting in the face a = π/2 reflects the image in the plane x3 = 0
    q = p.copy()
    q[:, 0] = math.pi - p[:, 0]
    a, b = f(p), f(q)
    assert np.allclose(b[:, :2], a[:, :2], atol=1e-9)
    assert np.allclose(b[:, 2], -a[:, 2], atol=1e-9)


def test_zorich_inverse_domain():
    with pytest.raises(DomainError):
        Z.zorich_inverse([0.0, 0.0, -1.0])


def test_zorich_declared_K_bounds_measured_distortion():
    f = Z.zorich()
    d = Z.distortion(f, beam_points(2000, 8, 1.0))
    ok = d["J"] > 1e-8
    assert np.all(np.maximum(d["K_O"][ok], d["K_I"][ok]) <= f.K * (1 + 1e-9))
    assert f.alpha == pytest.approx(f.K ** -0.5)


@pytest.mark.parametrize("r", [0.5, 0.9, 0.99])
def test_zorich_bloch_axis_pair(r):
    f = Z.zorich_bloch()
    x = np.array([0.0, 0.0, -r])
    y = np.array([0.0, 0.0, -(3 * r + 1) / (r + 3)])
    assert f(x)[2] == pytest.approx(math.log(1 - r), rel=1e-12)
    assert f(y)[2] == pytest.approx(math.log((2 - 2 * r) / (r + 3)), rel=1e-12)
    assert np.linalg.norm(f(x) - f(y)) == pytest.approx(math.log((r + 3) / 2), abs=1e-12)


def test_zorich_bloch_image_lies_in_beam():
    rng = SplitMix64(9)
    x = rng.ball(10_000, 3, 1.0) * (1 - 1e-9)
    img = Z.zorich_bloch()(x)
    assert np.all(np.abs(img[:, 0]) < math.pi / 2)
    assert np.all(np.abs(img[:, 1]) < math.pi / 2)


# isometries -------------------------------------------------------------

def test_mobius_ball_isometry_contract():
    assert np.allclose(Z.mobius_ball_isometry(np.zeros(3))([0.2, 0.3, 0.1]), [0.2, 0.3, 0.1])
    a = np.array([0.5, -0.2, 0.3])
    phi = Z.mobius_ball_isometry(a)
    assert np.array_equal(phi(np.zeros(3)), a)
    rng = SplitMix64(10)
    x, y = rng.ball(1000, 3, 0.99), rng.ball(1000, 3, 0.99)
    assert np.allclose(M.dist_hyperbolic(phi(x), phi(y)), M.dist_hyperbolic(x, y), atol=1e-9)
    assert np.allclose(phi.inverse(phi(x)), x, atol=1e-12)


def test_mobius_halfspace_map():
    f = Z.mobius_ball_to_halfspace(3)
    assert np.allclose(f(np.zeros(3)), [0.0, 0.0, 1.0])
    rng = SplitMix64(11)
    x = rng.ball(500, 3, 0.999)
    assert np.all(f(x)[:, 2] > 0)
    assert np.allclose(f.inverse(f(x)), x, atol=1e-10)


def test_spherical_isometry_to_zero():
    assert np.allclose(Z.spherical_isometry_to_zero(np.zeros(2))([0.3, 0.4]), [0.3, 0.4])
    A = Z.spherical_isometry_to_zero(P.infinity(2))
    assert np.allclose(A(P.infinity(2)), [0.0, 0.0], atol=1e-15)
    p = np.array([3.0, -1.0, 0.5])
    A = Z.spherical_isometry_to_zero(p)
    assert np.allclose(A(p), 0.0, atol=1e-14)
    rng = SplitMix64(12)
    u, v = rng.normal(500, 3) * 4, rng.normal(500, 3) * 4
    assert np.allclose(M.dist_spherical(A(u), A(v)), M.dist_spherical(u, v), atol=1e-9)


@pytest.mark.parametrize("kind", ["hyperbolic", "translation", "spherical"])
def test_sampled_isometries_preserve_distance(kind):
    sampler = Z.IsometrySampler(kind, 3, seed=13)
    for A in Z.sample_isometries(sampler, sampler.anchors(20)):
        assert sampler.metric_check(A, tol=1e-9)


def test_isometry_sampler_examples():
    tr = Z.IsometrySampler("translation", 2)
    A = Z.sample_isometries(tr, [[1.0, -2.0]])[0]
    assert np.allclose(A([0.5, 0.5]), [1.5, -1.5])
    hy = Z.IsometrySampler("hyperbolic", 3)
    assert np.allclose(Z.sample_isometries(hy, [np.zeros(3)])[0]([0.1, 0.2, 0.3]),
                       [0.1, 0.2, 0.3])
    d = SplitMix64(3).directions(10, 3) * 0.99
    for A in Z.sample_isometries(hy, d):
        assert hy.metric_check(A, tol=1e-9)


# planar maps and conjugates ---------------------------------------------

def test_conjugate_by_identity_stretch_is_base():
    q = Z.planar_polynomial([0, 0, 1])
    c = Z.qc_conjugate(q, [1.0, 1.0])
    x = SplitMix64(14).normal(100, 2)
    assert np.allclose(c(x), q(x))


def test_conjugate_dilatation():
    c = Z.qc_conjugate(Z.planar_polynomial([0, 0, 1]), [1.0, 2.0])
    assert c.K == pytest.approx(4.0)
    assert c.alpha == pytest.approx(0.25)


def test_conjugate_rejects_nonpositive_stretch():
    with pytest.raises(ParameterError):
        Z.qc_conjugate(Z.planar_polynomial([0, 0, 1]), [1.0, -2.0])


def test_conjugate_iterate_identity():
    q = Z.planar_polynomial([0, 0, 1])
    s = np.array([1.0, 2.0])
    c = Z.qc_conjugate(q, s)
    x = SplitMix64(15).normal(200, 2) * 0.7
    for m in range(11):
        lhs = Z.orbit(c, x, m)
        rhs = Z.orbit(q, x / s, m) * s
        fin = ~P.is_infinite(rhs)
        assert np.all(P.is_infinite(lhs) == ~fin)
        assert np.allclose(lhs[fin], rhs[fin], rtol=1e-6, atol=1e-6)


def test_stretch_family_jacobian():
    for K in (1.5, 3.0):
        d = Z.numeric_jacobian(Z.stretch_family(K), [0.3, -0.7])
        assert d.J == pytest.approx(K, abs=1e-6)
        assert d.K_O == pytest.approx(oracles.stretch_KO(K), abs=1e-6)


def test_polynomial_matches_complex_iteration():
    coeffs = [0.2 + 0.1j, -0.5, 1.0]
    f = Z.planar_polynomial(coeffs)
    for z in (0.3 + 0.2j, -0.5 + 0.5j):
        w = oracles.polynomial_iterate(coeffs, z, 5)
        got = Z.orbit(f, [z.real, z.imag], 5)
        assert got == pytest.approx([w.real, w.imag], rel=1e-12)


# distortion -------------------------------------------------------------

def test_numeric_jacobian_identity_and_radial():
    d = Z.numeric_jacobian(Z.identity(3), [0.1, 0.2, 0.3])
    assert d.J == pytest.approx(1, abs=1e-6)
    assert d.K_O == pytest.approx(1, abs=1e-6) and d.K_I == pytest.approx(1, abs=1e-6)
    for t in (0.3, 0.5, 2.0):
        assert Z.numeric_jacobian(Z.radial_power(t, 3), [1.0, 0, 0]).J == pytest.approx(t, abs=1e-4)


def test_numeric_jacobian_errors():
    with pytest.raises(DomainError):
        Z.numeric_jacobian(Z.zorich_bloch(), [0.0, 0.0, 1.0])
    with pytest.raises(ParameterError):
        Z.numeric_jacobian(Z.identity(2), [0.0, 0.0], h=-1.0)
    with pytest.raises(NumericError):
        Z.numeric_jacobian(Z.exp_exp(), [700.0, 0.0])


@pytest.mark.parametrize("f,pts", [
    (Z.identity(3), SplitMix64(1).normal(200, 3)),
    (Z.radial_power(0.4, 3), SplitMix64(2).normal(200, 3)),
    (Z.radial_power(2.5, 2), SplitMix64(3).normal(200, 2)),
    (Z.zorich(), beam_points(500, 4, 2.0)),
    (Z.zorich_bloch(), SplitMix64(5).ball(500, 3, 0.95)),
    (Z.mobius_ball_isometry([0.3, 0.2, -0.1]), SplitMix64(6).ball(200, 3, 0.9)),
    (Z.planar_polynomial([0, 0, 1]), SplitMix64(7).normal(200, 2)),
    (Z.qc_conjugate(Z.planar_polynomial([0, 0, 1]), [1, 2]), SplitMix64(8).normal(200, 2)),
    (Z.complex_exp(), SplitMix64(9).normal(200, 2)),
    (Z.stretch_family(3.0), SplitMix64(10).normal(200, 2)),
    (Z.piecewise_linear(5), SplitMix64(11).ball(200, 2, 0.9)),
])
def test_distortion_at_least_one(f, pts):
    d = Z.distortion(f, pts)
    ok = d["J"] > 1e-8
    assert np.any(ok)
    assert np.all(d["K_O"][ok] >= 1 - 1e-4)
    assert np.all(d["K_I"][ok] >= 1 - 1e-4)


# orbits -----------------------------------------------------------------

def test_orbit_examples():
    q = Z.planar_polynomial([0, 0, 1])
    for m in (0, 1, 5, 50):
        assert np.array_equal(Z.orbit(q, [0.0, 0.0], m), [0.0, 0.0])
        assert np.allclose(Z.orbit(q, [1.0, 0.0], m), [1.0, 0.0])
    assert np.array_equal(Z.orbit(q, [2.0, 0.0], 3), [256.0, 0.0])
    assert np.all(P.is_infinite(Z.orbit(q, [2.0, 0.0], 12)))
    assert np.all(P.is_infinite(Z.orbit(q, [2.0, 0.0], 40)))


def test_piecewise_linear_family_values():
    for m in (2, 3, 10, 1000):
        f = Z.piecewise_linear(m)
        for x in (-0.5, 0.0, 0.25, 0.5, 0.9):
            assert f([x, 0.3])[0] == pytest.approx(oracles.piecewise_linear_p(m, x), abs=1e-15)
            assert f([x, 0.3])[1] == 0.3
