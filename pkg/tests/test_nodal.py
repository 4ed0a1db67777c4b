import math

import numpy as np
import pytest

from fields import (default_zoo, lift_eigenfunction, make_affine, make_circle_field, make_linear, make_torus_eigen,
                    rescale_field)
from geom import Cube, subdivide
from lab_config import NumericKnobs
from lab_errors import InvalidInputError, UnsupportedDimensionError
from nodal import (bad_levels, calibrate_crofton, empirical_F, fit_power_law, kinematic_constant, measure_nodal,
                   nodal_measure_crofton, nodal_measure_marching, nodal_segments, periodic_domain, thv_datapoint,
                   yau_scaling_fit)

SEED = 20240611


@pytest.fixture(scope='module')
def knobs():
    return NumericKnobs(seed=SEED)


@pytest.fixture(scope='module')
def fast_knobs():
    return NumericKnobs(seed=SEED, crofton_lines=20000, crofton_steps=1024, marching_depth=6)


def test_circle_length_marching(knobs):
    estimate = nodal_measure_marching(make_circle_field(0.5), Cube((0.0, 0.0), 1.0), depth=8, knobs=knobs)
    assert estimate.value == pytest.approx(math.pi, rel=0.005)
    assert estimate.error_indicator < 0.01
    assert not estimate.degenerate


def test_line_on_grid_vertices_counts_once(knobs):
    estimate = nodal_measure_marching(make_linear(2, 0), Cube((0.0, 0.0), 1.0), depth=4, knobs=knobs)
    assert estimate.value == pytest.approx(2.0, rel=1e-12)


def test_plane_area_marching(knobs):
    u = make_affine([0.3, -0.2, 1.0], 0.1)
    estimate = nodal_measure_marching(u, Cube((0.0, 0.0, 0.0), 1.0), depth=4, knobs=knobs)
    # the plane z = 0.3 x - 0.2 y - 0.1 never leaves the top and bottom faces
    expected = 4.0 * math.sqrt(1.0 + 0.09 + 0.04)
    assert estimate.value == pytest.approx(expected, rel=1e-9)


def test_torus_length_marching(knobs):
    u = make_torus_eigen(2, [4, 4])
    estimate = nodal_measure_marching(u, periodic_domain(u, knobs), depth=8, knobs=knobs)
    assert estimate.value == pytest.approx(32.0 * math.pi, rel=0.01)


def test_torus_length_crofton(knobs):
    u = make_torus_eigen(2, [4, 4])
    estimate = nodal_measure_crofton(u, periodic_domain(u, knobs), lines=100000, knobs=knobs)
    assert estimate.value == pytest.approx(32.0 * math.pi, rel=0.02)
    assert estimate.seed == SEED
    assert estimate.details['closed_form_constant'] == pytest.approx(math.pi)


def test_zero_field_is_flagged_degenerate(knobs):
    estimate = nodal_measure_marching(make_affine([0.0, 0.0], 0.0), Cube((0.0, 0.0), 1.0), depth=3, knobs=knobs)
    assert estimate.degenerate
    assert math.isinf(estimate.value)


def test_marching_rejects_high_dimension(knobs):
    u = make_affine([1.0, 0.0, 0.0, 0.0])
    with pytest.raises(UnsupportedDimensionError):
        nodal_measure_marching(u, Cube((0.0,) * 4, 1.0), knobs=knobs)


@pytest.mark.parametrize('n', [2, 3])
def test_calibrated_constant_close_to_closed_form(n):
    calibration = calibrate_crofton(n, 1000000, 7919)
    assert calibration.constant == pytest.approx(kinematic_constant(n), rel=0.01)


def test_crofton_needs_seed_and_lines():
    u = make_torus_eigen(2, [1, 1])
    Q = Cube((0.0, 0.0), 1.0)
    with pytest.raises(InvalidInputError):
        nodal_measure_crofton(u, Q, knobs=NumericKnobs())
    with pytest.raises(InvalidInputError):
        nodal_measure_crofton(u, Q, lines=10, seed=1)


def test_crofton_independent_of_thread_count():
    u = make_torus_eigen(2, [2, 3])
    Q = periodic_domain(u)
    one = nodal_measure_crofton(u, Q, lines=5000, seed=3, knobs=NumericKnobs(threads=1, crofton_steps=512))
    four = nodal_measure_crofton(u, Q, lines=5000, seed=3, knobs=NumericKnobs(threads=4, crofton_steps=512))
    assert one.value == four.value
    assert one.details['crossings'] == four.details['crossings']


@pytest.mark.parametrize('n', [2, 3])
def test_methods_agree_on_zoo(n, fast_knobs):
    Q = Cube(tuple([0.1] * n), 0.8)
    for name, u in default_zoo(n):
        marching = nodal_measure_marching(u, Q, knobs=fast_knobs)
        crofton = nodal_measure_crofton(u, Q, knobs=fast_knobs)
        gap = abs(marching.value - crofton.value)
        assert gap <= 3.0 * (marching.error_indicator + crofton.error_indicator), name


@pytest.mark.parametrize('name, u', default_zoo(2), ids=[name for name, _ in default_zoo(2)])
def test_marching_is_additive_over_subcubes(name, u, knobs):
    Q = Cube.from_bounds([-0.7, -0.7], [0.9, 0.9])
    parent = nodal_measure_marching(u, Q, depth=7, knobs=knobs)
    children = [nodal_measure_marching(u, q, depth=6, knobs=knobs) for q in subdivide(Q, 2)]
    tolerance = parent.error_indicator + sum(child.error_indicator for child in children) + 1e-9
    assert sum(child.value for child in children) == pytest.approx(parent.value, abs=tolerance)


@pytest.mark.parametrize('s', [2.0, 0.5, 3.0])
@pytest.mark.parametrize('u', [make_circle_field(0.5), make_affine([0.3, -0.7], 0.11)], ids=['circle', 'affine'])
def test_marching_rescaling(u, s, knobs):
    Q = Cube((0.0, 0.0), 1.0)
    base = nodal_measure_marching(u, Q, depth=7, knobs=knobs)
    scaled = nodal_measure_marching(rescale_field(u, s), Cube((0.0, 0.0), 1.0 / s), depth=7, knobs=knobs)
    assert scaled.value == pytest.approx(base.value / s, rel=1e-6)


@pytest.mark.parametrize('n', [2, 3])
def test_crofton_without_zeros_is_exactly_zero(n, fast_knobs):
    u = make_affine([1.0] + [0.0] * (n - 1), 2.0)
    estimate = nodal_measure_crofton(u, Cube(tuple([0.5] * n), 0.5), knobs=fast_knobs)
    assert estimate.value == 0.0
    assert estimate.details['crossings'] == 0


def test_crofton_is_reproducible_for_a_seed():
    u = make_circle_field(0.5)
    Q = Cube((0.0, 0.0), 1.0)
    knobs = NumericKnobs(crofton_steps=512)
    first = nodal_measure_crofton(u, Q, lines=5000, seed=9, knobs=knobs)
    second = nodal_measure_crofton(u, Q, lines=5000, seed=9, knobs=knobs)
    assert first.value == second.value
    assert first.error_indicator == second.error_indicator
    assert first.details == second.details


def test_periodic_domain_offsets(knobs):
    u = make_torus_eigen(2, [1, 2])
    Q = periodic_domain(u, knobs)
    np.testing.assert_allclose(Q.lo, 0.1234)
    assert Q.side == pytest.approx(2.0 * math.pi)
    with pytest.raises(InvalidInputError):
        periodic_domain(lift_eigenfunction(u), knobs)
    with pytest.raises(InvalidInputError):
        periodic_domain(make_circle_field(), knobs)


def test_nodal_segments_shape(knobs):
    segments = nodal_segments(make_circle_field(0.5), Cube((0.0, 0.0), 1.0), depth=5, knobs=knobs)
    assert segments.ndim == 3 and segments.shape[1:] == (2, 2)
    radii = np.linalg.norm(segments.reshape(-1, 2), axis=1)
    np.testing.assert_allclose(radii, 0.5, atol=0.01)


def test_measure_nodal_unknown_method(knobs):
    with pytest.raises(InvalidInputError):
        measure_nodal(make_circle_field(), Cube((0.0, 0.0), 1.0), 'spectral', knobs)


def test_thv_datapoint(knobs):
    u = make_torus_eigen(2, [2, 2])
    point = thv_datapoint(u, Cube((0.3, 0.3), 0.5), knobs=NumericKnobs(marching_depth=6))
    assert point.method == 'marching'
    assert point.N > 0
    assert point.density == pytest.approx(point.measure / (math.sqrt(2.0) ** 1), rel=1e-12)


def test_empirical_F_and_bad_levels():
    points = [(1.0, 0.5), (2.0, 0.4), (3.0, 2.0), (6.0, 100.0)]
    table = empirical_F(points)
    assert [v for _, v in table] == [0.5, 0.5, 2.0, 100.0]
    # N = 1 has no data at or below 1/2, so it is compared with F = 0
    assert bad_levels(points, 1, 1.0) == [1.0, 6.0]
    with pytest.raises(InvalidInputError):
        bad_levels(points, 1, 0.0)


def test_fit_power_law_exact():
    fit = fit_power_law([(x, 3.0 * x ** 0.5) for x in (1.0, 4.0, 16.0, 64.0)])
    assert fit.fitted_exponent == pytest.approx(0.5, abs=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(3.0)
    assert list(fit.to_frame().columns) == ['x', 'volume']
    with pytest.raises(InvalidInputError):
        fit_power_law([(1.0, 1.0)])


def test_yau_scaling_plane(knobs):
    family = [make_torus_eigen(2, [m0, m0]) for m0 in (1, 2, 4, 8)]
    fit = yau_scaling_fit(family, 'marching', knobs)
    assert fit.fitted_exponent == pytest.approx(0.5, abs=0.02)


def test_yau_scaling_space_crofton(fast_knobs):
    family = [make_torus_eigen(3, [m0] * 3) for m0 in (1, 2, 3, 4)]
    fit = yau_scaling_fit(family, 'crofton', fast_knobs)
    assert fit.fitted_exponent == pytest.approx(0.5, abs=0.05)


def test_yau_family_precondition(knobs):
    family = [make_torus_eigen(2, [m0, m0]) for m0 in (1, 2)]
    with pytest.raises(InvalidInputError):
        yau_scaling_fit(family, 'marching', knobs)
