import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qrlab import continuity as C
from qrlab import dynamics as D
from qrlab import maps as Z
from qrlab import metrics as M
from qrlab import points as P
from qrlab import rng as R
from qrlab.io import csv_text, gray_levels

settings.register_profile("qrlab", max_examples=60, deadline=None)
settings.load_profile("qrlab")

coord = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=coord)
inball = arrays(np.float64, 3, elements=st.floats(-0.57, 0.57))
seeds = st.integers(0, 2**64 - 1)


# spherical metric -------------------------------------------------------

@given(vec3, vec3, vec3)
def test_spherical_metric_axioms(u, v, w):
    d = M.dist_spherical
    assert float(d(u, u)) == 0.0
    assert float(d(u, v)) == float(d(v, u))
    assert 0.0 <= float(d(u, v)) <= math.pi
    assert float(d(u, w)) <= float(d(u, v)) + float(d(v, w)) + 1e-12


@given(inball, inball)
def test_spherical_sandwich_in_unit_ball(u, v):
    e = float(np.linalg.norm(u - v))
    s = float(M.dist_spherical(u, v))
    assert e - 1e-12 <= s <= 2 * e + 1e-12


# isometries -------------------------------------------------------------

@given(inball, inball, inball)
def test_mobius_translation_preserves_hyperbolic_distance(a, x, y):
    d0 = float(M.dist_hyperbolic(x, y))
    d1 = float(M.dist_hyperbolic(M.mobius_translate(a, x), M.mobius_translate(a, y)))
    assert abs(d1 - d0) <= 1e-9 * max(1.0, d0)


@given(arrays(np.float64, 3, elements=st.floats(-50, 50)), vec3, vec3)
def test_spherical_isometry_preserves_sigma(p, u, v):
    A = Z.spherical_isometry_to_zero(p)
    assert abs(float(M.dist_spherical(A(u), A(v))) - float(M.dist_spherical(u, v))) <= 1e-9


@given(inball, inball)
def test_mobius_ball_isometry_round_trip(a, x):
    phi = Z.mobius_ball_isometry(a)
    assert np.allclose(phi.inverse(phi(x)), x, atol=1e-10)


# maps -------------------------------------------------------------------

@given(st.floats(0.05, 5.0),
       arrays(np.float64, 3, elements=st.floats(-1e3, 1e3, allow_subnormal=False)))
def test_radial_power_modulus(t, x):
    # safe_norm, since squaring tiny images underflows in np.linalg.norm
    got = float(P.safe_norm(Z.radial_power(t, 3)(x)))
    assert math.isclose(got, float(P.safe_norm(x)) ** t, rel_tol=1e-12, abs_tol=1e-300)


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-20, 20))
def test_zorich_round_trip(a, b, c):
    x = np.array([a, b, c])
    assert np.allclose(Z.zorich_inverse(Z.zorich()(x)), x, atol=1e-8)


# rng --------------------------------------------------------------------

@given(seeds, st.integers(1, 64), st.integers(0, 64))
def test_stream_prefix_property(seed, short, extra):
    a = R.uniform(np.uint64(seed), short)
    b = R.uniform(np.uint64(seed), short + extra)
    assert np.array_equal(a, b[:short])


@given(seeds, st.integers(1, 50), st.integers(0, 50))
def test_task_streams_do_not_depend_on_batching(seed, count, start):
    whole = R.uniform(R.task_seeds(seed, start + count), 4)
    part = R.uniform(R.task_seeds(seed, count, start), 4)
    assert np.array_equal(whole[start:], part)


@given(seeds, st.integers(1, 20))
def test_sequential_view_matches_counter_stream(seed, k):
    g = R.SplitMix64(seed)
    first = g.uniform(k)
    second = g.uniform(k)
    both = R.uniform(np.uint64(seed), 2 * k)
    assert np.array_equal(np.concatenate([first, second]), both)
    assert np.all((both >= 0) & (both < 1))


# oscillation and indicators ---------------------------------------------

@given(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2), seeds, st.integers(8, 64))
@settings(max_examples=25)
def test_L_more_samples_never_decreases(x, y, seed, k):
    f = Z.planar_polynomial([0, 0, 1])
    small = D.L_value(f, [x, y], 0.1, samples=k, seed=seed)
    large = D.L_value(f, [x, y], 0.1, samples=2 * k, seed=seed)
    assert large >= small


@given(st.floats(-1.3, 1.3), st.floats(-1.3, 1.3), seeds)
@settings(max_examples=25)
def test_indicator_grid_monotonicity(x, y, seed):
    f = Z.planar_polynomial([0, 0, 1])
    base = D.julia_indicator(f, [x, y], r_list=[0.5, 0.25], m_list=[1, 3], seed=seed)
    wider = D.julia_indicator(f, [x, y], r_list=[0.5, 0.25, 0.125], m_list=[1, 2, 3, 4],
                              seed=seed)
    assert wider.indicator >= base.indicator


@given(st.integers(0, 2**32))
@settings(max_examples=10)
def test_spherical_average_is_nondecreasing(seed):
    A, se = C.spherical_average(Z.complex_exp(), np.zeros(2), np.linspace(0.2, 2.0, 6),
                                2000, seed=seed)
    assert np.all(np.diff(A) >= 0) and np.all(se >= 0)


# io ---------------------------------------------------------------------

@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_csv_round_trips_doubles(values):
    text = csv_text([{"v": v} for v in values])
    lines = text.splitlines()
    assert lines[0] == "v"
    assert [float(s) for s in lines[1:]] == values


@given(arrays(np.float64, (4, 4), elements=st.floats(0, 1e12)), st.floats(1.0, 1e6))
def test_gray_levels_are_monotone_and_bounded(ind, thr):
    g = gray_levels(ind, thr)
    assert g.min() >= 0 and g.max() <= 255
    order = np.argsort(ind, axis=None, kind="stable")
    assert np.all(np.diff(g.reshape(-1)[order].astype(int)) >= 0)
    assert np.all(g[ind >= thr] == 255)
