import math

import numpy as np
import pytest

from fields import default_zoo, make_affine, make_harmonic_poly, make_linear, make_torus_eigen
from geom import Ball, Cube, subdivide
from growth import (DoublingLattice, check_almost_monotonicity, check_center_shift,
                    check_frequency_doubling_comparison, check_growth_sandwich, check_h_growth_bounds,
                    check_log_integral, check_sphere_sup_comparison, doubling_index_ball, doubling_index_cube,
                    frequency_beta, frequency_profile, radius_ladder, sphere_area, sphere_norm_H, sphere_rule,
                    sup_norm)
from lab_config import NumericKnobs
from lab_errors import DegenerateFieldError, InvalidInputError


@pytest.fixture(scope='module')
def knobs():
    return NumericKnobs()


@pytest.mark.parametrize('n', [2, 3])
def test_sphere_rule_integrates_area(n):
    _, w = sphere_rule(n, 16, 32)
    assert w.sum() == pytest.approx(sphere_area(n), rel=1e-12)


def test_sphere_norm_of_constant():
    u = make_affine([0.0, 0.0, 0.0], 2.0)
    h = sphere_norm_H(u, [0.0, 0.0, 0.0], 0.5)
    assert h.value == pytest.approx(4.0 * 4.0 * math.pi * 0.25, rel=1e-12)
    assert h.scheme == 'gauss-gegenbauer'


@pytest.mark.parametrize('n', [2, 3])
@pytest.mark.parametrize('k', range(0, 11))
def test_frequency_of_harmonic_polynomials(n, k, knobs):
    u = make_harmonic_poly(n, k)
    center = [0.0] * n
    for r in (0.25, 0.5, 1.0):
        assert frequency_beta(u, center, r, knobs) == pytest.approx((2 * k + n - 1) / 2.0, abs=1e-6)


def test_frequency_profile_frame(knobs):
    profile = frequency_profile(make_harmonic_poly(2, 3), [0.0, 0.0], [0.25, 0.5, 1.0], knobs)
    frame = profile.to_frame()
    assert list(frame.columns) == ['r', 'H', 'beta']
    np.testing.assert_allclose(frame['beta'], 3.5, atol=1e-6)
    with pytest.raises(InvalidInputError):
        frequency_profile(make_harmonic_poly(2, 3), [0.0, 0.0], [0.5, 0.25], knobs)


def test_zero_field_is_degenerate(knobs):
    zero = make_affine([0.0, 0.0], 0.0)
    with pytest.raises(DegenerateFieldError):
        sphere_norm_H(zero, [0.0, 0.0], 1.0, knobs)
    with pytest.raises(DegenerateFieldError):
        doubling_index_ball(zero, [0.0, 0.0], 1.0, knobs)


def test_sup_norm_on_cube_and_ball(knobs):
    u = make_harmonic_poly(2, 3)
    report = sup_norm(u, Cube((0.0, 0.0), 1.0), knobs)
    assert report.value == pytest.approx(2.0, rel=1e-12)
    assert abs(u(report.witness)) == report.value
    ball = sup_norm(u, Ball((0.0, 0.0), 0.5), knobs)
    assert ball.value == pytest.approx(0.125, rel=1e-12)


@pytest.mark.parametrize('n', [2, 3])
@pytest.mark.parametrize('k', [0, 1, 3, 6, 10])
def test_doubling_index_of_harmonic_polynomials(n, k, knobs):
    u = make_harmonic_poly(n, k)
    for r in (0.25, 0.5, 1.0):
        assert doubling_index_ball(u, [0.0] * n, r, knobs).N == pytest.approx(k, abs=1e-9)


@pytest.mark.parametrize('k', [2, 5, 8])
def test_cube_index_dominates_degree(k, knobs):
    u = make_harmonic_poly(2, k)
    Q = Cube((0.0, 0.0), 1.0)
    report = doubling_index_cube(u, Q, knobs=knobs)
    assert report.N_of_Q >= k - 1e-9
    origin_only = DoublingLattice(u, [[0.0, 0.0]], [Q.diam, Q.diam / 2.0], knobs)
    N, center, _ = origin_only.max_index()
    assert N == pytest.approx(k, abs=1e-9)
    assert center == (0.0, 0.0)


def test_cube_index_monotone_under_inclusion(knobs):
    u = make_torus_eigen(2, [2, 3])
    Q = Cube((0.0, 0.0), 1.0)
    lattice = DoublingLattice.for_cube(u, Q, knobs, centers_per_axis=9)
    parent, _, _ = lattice.max_index(Q)
    for q in subdivide(Q, 2):
        child, _, _ = lattice.max_index(q)
        assert child <= parent


def test_radius_ladder():
    radii = radius_ladder(8.0, 1.0, 2)
    np.testing.assert_allclose(radii, 8.0 * 2.0 ** (-np.arange(6) / 2.0))
    assert np.all(radii > 1.0)


@pytest.mark.parametrize('name, u', default_zoo(2))
def test_log_integral_identity_plane(name, u, knobs):
    report = check_log_integral(u, [0.05, -0.1], 0.1, 1.0, knobs)
    assert report.residual < 1e-6


@pytest.mark.parametrize('name, u', default_zoo(3))
def test_log_integral_identity_space(name, u, knobs):
    report = check_log_integral(u, [0.05, -0.1, 0.02], 0.1, 1.0, knobs, method='gauss', nodes=32)
    assert report.residual < 1e-6


@pytest.mark.parametrize('t', [3.0, 4.0, 8.0])
def test_growth_sandwich_on_zoo(t, knobs):
    applicable = 0
    for name, u in default_zoo(2):
        report = check_growth_sandwich(u, [0.0, 0.0], 0.1, t, 0.25, knobs, index_floor=4.0)
        if report.applicable:
            applicable += 1
            assert report.holds, name
            assert report.slack_lower >= 0 and report.slack_upper >= 0
    assert applicable >= 2


def test_growth_sandwich_rejects_small_t(knobs):
    with pytest.raises(InvalidInputError):
        check_growth_sandwich(make_harmonic_poly(2, 4), [0.0, 0.0], 0.1, 2.0, 0.25, knobs)


def test_center_shift(knobs):
    u = make_harmonic_poly(2, 5)
    report = check_center_shift(u, [0.0, 0.0], [0.05, 0.0], 0.1, 64.0, knobs)
    assert report.status == 'checked'
    assert report.N_first == pytest.approx(5.0, abs=1e-9)
    assert report.ratio == pytest.approx(math.log2(12.85 / 6.45), abs=1e-6)
    assert report.holds


def test_center_shift_below_floor(knobs):
    report = check_center_shift(make_linear(2), [0.0, 0.0], [0.01, 0.0], 0.1, 8.0, knobs, index_floor=2.0)
    assert report.status == 'below index floor'
    assert report.holds is None
    with pytest.raises(InvalidInputError):
        check_center_shift(make_linear(2), [0.0, 0.0], [0.5, 0.0], 0.1, 8.0, knobs)


def test_almost_monotonicity_for_harmonic_fields(knobs):
    radii = [0.1, 0.2, 0.4, 0.8]
    for name, u in default_zoo(2):
        if not u.harmonic:
            continue
        report = check_almost_monotonicity(u, [0.1, 0.05], radii, 0.05, knobs)
        assert report.violations == [], name


def test_h_growth_bounds(knobs):
    report = check_h_growth_bounds(make_harmonic_poly(2, 4), [0.0, 0.0], 0.2, 0.8, 0.1, knobs)
    assert report.log_ratio == pytest.approx(9.0 * math.log(4.0), rel=1e-9)
    assert report.slack_lower >= 0 and report.slack_upper >= 0


def test_frequency_doubling_comparison(knobs):
    report = check_frequency_doubling_comparison(make_harmonic_poly(2, 5), [0.0, 0.0], 0.2, 0.001, knobs)
    assert report.N == pytest.approx(5.0, abs=1e-9)
    assert report.implied_C == 0.0


@pytest.mark.parametrize('n', [2, 3])
def test_sphere_sup_constant_bounded_by_area(n, knobs):
    u = make_harmonic_poly(n, 3)
    report = check_sphere_sup_comparison(u, [0.0] * n, 0.5, 0.1, knobs)
    assert report.C2 <= report.sphere_area * (1.0 + 1e-12)
    assert report.C1 > 0
