import math

import numpy as np
import pytest

from qrlab import continuity as C
from qrlab import maps as Z
from qrlab import metrics as M
from qrlab.errors import DomainError, ParameterError
from qrlab.rng import SplitMix64

import oracles

E2, E3 = M.euclidean(2), M.euclidean(3)
S2, S3 = M.spherical(2), M.spherical(3)
H3 = M.hyperbolic(3)


# Hölder constants and exponents -----------------------------------------

def test_holder_identity_is_one():
    fit = C.holder_constant(Z.identity(3), E3, E3, M.ball(np.zeros(3), 1.0), 1.0, seed=1)
    assert fit.L_hat == pytest.approx(1.0, abs=1e-9)
    assert fit.exponent_hat == pytest.approx(1.0, abs=1e-9)
    assert fit.pair_count > 0


@pytest.mark.parametrize("t", [0.3, 0.5, 0.8])
def test_holder_radial_power_through_origin(t):
    fit = C.holder_constant(Z.radial_power(t, 3), E3, E3, M.ball(np.zeros(3), 1.0), t,
                            seed=2, anchor=np.zeros(3))
    assert fit.L_hat == pytest.approx(1.0, abs=1e-3)


def test_holder_zorich_bloch_is_finite():
    f = Z.zorich_bloch()
    fit = C.holder_constant(f, H3, E3, M.ball(np.zeros(3), 0.5), f.alpha, seed=3)
    assert np.isfinite(fit.L_hat) and fit.L_hat > 0


def test_holder_errors():
    f = Z.zorich_bloch()
    with pytest.raises(DomainError):
        C.holder_constant(f, H3, E3, M.unit_ball(3), f.alpha)
    with pytest.raises(ParameterError):
        C.holder_constant(f, H3, E3, M.ball(np.zeros(3), 0.5), 1.5)
    with pytest.raises(ParameterError):
        C.holder_constant(f, H3, E3, M.ball(np.zeros(3), 0.5), 0.5, separations=(1e-2, 1.0))


def test_holder_enlarging_sample_never_decreases_L():
    f = Z.zorich_bloch()
    region = M.ball(np.zeros(3), 0.5)
    small = C.holder_constant(f, H3, E3, region, f.alpha, pairs=512, seed=4)
    large = C.holder_constant(f, H3, E3, region, f.alpha, pairs=4096, seed=4)
    assert large.L_hat >= small.L_hat


@pytest.mark.parametrize("frac", [0.5, 0.75])
def test_exponent_improvement_on_compact_subball(frac):
    f = Z.zorich_bloch()
    region = M.ball(np.zeros(3), 0.9)
    base = C.holder_constant(f, H3, E3, region, f.alpha, seed=5)
    lower = C.holder_constant(f, H3, E3, region, frac * f.alpha, seed=5)
    assert np.isfinite(base.L_hat) and np.isfinite(lower.L_hat)


@pytest.mark.parametrize("t", [0.3, 0.5])
def test_local_exponent_of_radial_power(t):
    fit = C.local_holder_exponent(Z.radial_power(t, 3), E3, E3, np.zeros(3), seed=6)
    assert fit.exponent_hat == pytest.approx(t, abs=0.02)
    assert fit.exponent_hat == pytest.approx(Z.radial_power(t, 3).alpha, abs=0.02)


def test_local_exponent_identity_and_constant():
    fit = C.local_holder_exponent(Z.identity(3), E3, E3, [0.2, 0.1, 0.0], seed=7)
    assert fit.exponent_hat == pytest.approx(1.0, abs=0.01)
    const = C.local_holder_exponent(Z.constant(3, [1.0, 2.0, 3.0]), E3, E3, np.zeros(3))
    assert const.degenerate and math.isnan(const.exponent_hat)


def test_local_exponent_rejects_bad_scales():
    with pytest.raises(ParameterError):
        C.local_holder_exponent(Z.identity(2), E2, E2, np.zeros(2), scales=[1e-3, 1e-1])
    with pytest.raises(ParameterError):
        C.local_holder_exponent(Z.identity(2), E2, E2, np.zeros(2), scales=[1e-3, 1e-10])


# continuity profiles ----------------------------------------------------

DELTAS = [1.0, 0.1, 0.01, 1e-3]


def test_profile_of_bounded_ball_map_tends_to_zero():
    s = Z.IsometrySampler("hyperbolic", 3, seed=8)
    p = C.continuity_profile(Z.identity(3), s, H3, E3, DELTAS, samples=300, seed=8, anchors=32)
    assert p.verdict == "normal-evidence"
    assert np.all(np.diff(p.omega_hat) <= 0)
    assert p.omega_hat[-1] < 1e-2 * p.omega_hat[0]


def test_profile_zorich_translations_spherical_range():
    s = Z.IsometrySampler("translation", 3, seed=9, spread=20.0)
    p = C.continuity_profile(Z.zorich(), s, E3, S3, DELTAS, samples=300, seed=9, anchors=32)
    assert p.verdict == "normal-evidence"
    assert p.omega_hat[-1] < 0.01 * math.pi


def test_profile_exp_exp_not_normal_far_right():
    s = Z.IsometrySampler("translation", 2, seed=10)
    p = C.continuity_profile(Z.exp_exp(), s, E2, S2, [1.0, 0.1, 0.01], samples=300,
                             seed=10, anchors=[[3.0, 0.0], [4.0, 1.0]])
    assert p.omega_hat[1] > 1.0
    assert p.verdict == "not-normal-evidence"
    assert len(p.witnesses) > 0


def test_profile_recentring_independence():
    s = Z.IsometrySampler("hyperbolic", 3, seed=11)
    f = Z.zorich_bloch()
    verdicts = {C.continuity_profile(f, s, H3, E3, DELTAS, samples=300, seed=11, anchors=32,
                                     x0=x0, threshold=0.05).verdict
                for x0 in (np.zeros(3), np.array([0.3, 0.0, 0.0]))}
    assert len(verdicts) == 1


def test_profile_monotone_and_errors():
    s = Z.IsometrySampler("translation", 2, seed=12)
    p = C.continuity_profile(Z.complex_exp(), s, E2, S2, [0.5, 1.0, 0.05], samples=200,
                             seed=12, anchors=8)
    assert np.all(np.diff(p.deltas) < 0)
    assert np.all(np.diff(p.omega_hat) <= 0)
    with pytest.raises(ParameterError):
        C.continuity_profile(Z.complex_exp(), s, E2, S2, [], seed=12)


def test_zorich_holder_lipschitz_shape_in_spherical_range():
    # one constant fitted on one sample bounds a fresh sample
    f = Z.zorich()

    def ratios(seed):
        rng = SplitMix64(seed)
        x = (rng.uniform(4000, 3) - 0.5) * 40.0
        d = rng.directions(4000, 3)
        t = 10.0 ** (rng.uniform(4000) * 6 - 3)
        y = x + t[:, None] * d
        s = M.dist_spherical(f(x), f(y))
        return s / np.maximum(t**f.alpha, t)

    C_fit = float(np.max(ratios(13)))
    assert np.isfinite(C_fit)
    assert float(np.max(ratios(14))) <= 1.5 * C_fit


# Q_f --------------------------------------------------------------------

def test_q_constant_and_identity():
    scales = np.geomspace(1e-1, 1e-5, 5)
    assert C.q_estimate(Z.constant(2), E2, E2, [0.3, 0.1], 0.5, scales) == 0.0
    assert C.q_estimate(Z.identity(2), E2, E2, [0.3, 0.1], 1.0, scales) == pytest.approx(1, abs=1e-3)


def test_q_exp_exp_decays_with_scale():
    f = Z.exp_exp()
    ax = np.linspace(-3, 3, 7)
    grid = np.stack(np.meshgrid(ax, ax), -1).reshape(-1, 2)
    coarse = C.q_grid(f, E2, S2, grid, 0.5, [1e-2], seed=15)
    fine = C.q_grid(f, E2, S2, grid, 0.5, [1e-6], seed=15)
    assert fine < 0.05 * coarse


# Bloch statistics -------------------------------------------------------

def test_bloch_constant_zero():
    st = C.bloch_R(Z.constant(3), centers=50)
    assert st.R_hat == 0.0 and st.f0_norm == 0.0
    assert np.all(st.little_bloch_curve == 0.0)


def test_bloch_zorich_little_bloch_liminf():
    st = C.bloch_R(Z.zorich_bloch(), centers=200, seed=16)
    assert st.R_hat >= st.f0_norm
    assert st.little_bloch_liminf >= math.log(2.0)
    assert np.all(st.little_bloch_curve >= 0)


def test_bloch_mobius_halfspace_grows_toward_boundary():
    f = Z.mobius_ball_to_halfspace(3)
    levels = [(0, 0.5), (0, 0.5, 0.9), (0, 0.5, 0.9, 0.99), (0, 0.5, 0.9, 0.99, 0.999)]
    R = [C.bloch_R(f, centers=60, boundary_approach=lv, seed=17).R_hat for lv in levels]
    assert all(b > 2 * a for a, b in zip(R, R[1:]))


def test_bloch_rejects_poles_in_ball():
    f = Z.QRMap("with-pole", 2, lambda x: x, 1.0, poles=((0.1, 0.0),))
    with pytest.raises(DomainError):
        C.bloch_R(f)


@pytest.mark.parametrize("f", [Z.zorich_bloch(), Z.constant(3), Z.identity(3)])
def test_bloch_growth_check_passes(f):
    st = C.bloch_R(f, centers=300, seed=18)
    rows = C.bloch_growth_check(f, [0.9, 0.99, 0.999], st, seed=18)
    assert all(r.passed for r in rows)
    if f.kind == "constant":
        assert all(r.bound == 0 and r.M == 0 for r in rows)


# growth -----------------------------------------------------------------

def test_identity_spherical_average_half():
    A, se = C.spherical_average(Z.identity(3), np.zeros(3), [1.0], 100_000, seed=19)
    assert abs(A[0] - 0.5) <= 3 * se[0]


def test_identity_spherical_average_matches_quadrature():
    radii = [0.5, 1.0, 2.0]
    A, se = C.spherical_average(Z.identity(2), np.zeros(2), radii, 100_000, seed=20)
    for a, s, r in zip(A, se, radii):
        assert abs(a - oracles.spherical_average_identity(r, 2)) <= 4 * s + 1e-12


def test_spherical_average_nondecreasing():
    radii = np.linspace(0.1, 3.0, 12)
    A, _ = C.spherical_average(Z.complex_exp(), np.zeros(2), radii, 20_000, seed=21)
    assert np.all(np.diff(A) >= 0)


@pytest.mark.parametrize("f,mu,tol", [(Z.zorich(), 2.0, 0.1), (Z.complex_exp(), 1.0, 0.05)])
def test_growth_order(f, mu, tol):
    g = C.growth_suite(f, radii=np.geomspace(10, 500, 12), seed=22)
    assert g.mu_hat == pytest.approx(mu, abs=tol)
    assert np.all(np.diff(g.M) >= 0)
    assert g.omega_n == pytest.approx(C.surface_measure(f.dim))


def test_surface_measure_closed_form():
    assert C.surface_measure(1) == pytest.approx(2 * math.pi)
    assert C.surface_measure(2) == pytest.approx(4 * math.pi)
    assert C.surface_measure(3) == pytest.approx(2 * math.pi**2)


def test_growth_suite_ball_radii():
    with pytest.raises(DomainError):
        C.growth_suite(Z.zorich_bloch(), radii=[0.5, 1.0])


# Zalcman rescaling ------------------------------------------------------

ANCHORS = [[4.0, 0.0], [5.0, 1.0], [6.0, -2.0]]


def test_zalcman_exp_exp_sequence_is_valid():
    seq = C.zalcman_rescale(Z.exp_exp(), alpha=1.0, witnesses=ANCHORS, seed=23)
    assert len(seq) > 0 and not seq.yosida_evidence
    assert np.all(seq.scales > 0) and np.all(np.diff(seq.scales) < 0)
    assert float(np.max(seq.identity_residuals())) <= 1e-9
    assert float(np.max(seq.holder_excess)) <= 1e-3
    assert any(c is not None and c.separation >= 0.1 for c in seq.certificates)
    assert len(seq.rows()) == len(seq)


def test_zalcman_zorich_is_yosida():
    anchors = SplitMix64(24).uniform(8, 3) * 40 - 20
    seq = C.zalcman_rescale(Z.zorich(), witnesses=anchors, seed=24, refinement=50)
    assert seq.yosida_evidence and len(seq) == 0


def test_zalcman_requires_witnesses():
    with pytest.raises(ParameterError):
        C.zalcman_rescale(Z.complex_exp(), witnesses=[])


# orbits -----------------------------------------------------------------

def test_orbit_shifted_family_escapes():
    fam = C.shifted_family(Z.identity(2), [[m, 0.0] for m in range(1, 21)])
    probe = C.orbit_compactness_probe(fam, np.zeros(2), E2)
    assert probe.verdict == "unbounded" and probe.witness == 19


def test_orbit_recentred_family_is_bounded():
    s = Z.IsometrySampler("hyperbolic", 3, seed=25)
    fam = C.recentred_family(Z.zorich_bloch(), Z.sample_isometries(s, s.anchors(20)))
    probe = C.orbit_compactness_probe(fam, np.zeros(3), E3)
    assert probe.verdict == "bounded"
    assert np.all(probe.orbit == 0.0)


def test_orbit_piecewise_linear_dichotomy():
    fam = [Z.piecewise_linear(m) for m in range(2, 200)]
    metric = M.quasihyperbolic(M.box([-1.0, -1.0], [1.0, 1.0]))
    assert C.orbit_compactness_probe(fam, [0.0, 0.0], metric).verdict == "bounded"
    assert C.orbit_compactness_probe(fam, [0.5, 0.0], metric).verdict == "unbounded"


def test_orbit_empty_family():
    with pytest.raises(ParameterError):
        C.orbit_compactness_probe([], np.zeros(2), E2)
