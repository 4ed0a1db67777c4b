import math
from fractions import Fraction

import numpy as np
import pytest

from census import (extract_wide_simplex, hyperplane_census, recursion_exponent, simplex_lemma_check,
                    simulate_bad_cube_tree, subcube_census)
from fields import make_harmonic_poly, make_linear
from geom import Cube, regular_simplex, subdivide
from growth import DoublingLattice, radius_ladder
from lab_config import NumericKnobs
from lab_errors import InvalidInputError

Q = Cube((0.0, 0.0), 1.0)


@pytest.fixture(scope='module')
def knobs():
    return NumericKnobs()


@pytest.mark.parametrize('k', range(6, 13))
def test_subcube_census_holds_at_fine_subdivision(k, knobs):
    report = subcube_census(make_harmonic_poly(2, k), Q, 27, 0.5, knobs=knobs)
    assert report.N_of_Q >= k - 1e-9
    assert report.bad_count < 0.5 * 27
    assert report.verdict
    assert max(report.indices) <= report.N_of_Q + 1e-12
    assert report.bad_count == sum(1 for v in report.indices if v > report.threshold)


@pytest.mark.parametrize('k', [6, 9, 12])
def test_coarse_census_bad_cubes_surround_the_origin(k, knobs):
    report = subcube_census(make_harmonic_poly(2, k), Q, 9, 0.5, knobs=knobs)
    side = Q.side / 9
    assert 1 <= report.bad_count <= 9
    for witness in report.witnesses:
        assert np.max(np.abs(witness['center'])) <= side + 1e-9
    if not report.verdict:
        assert report.witnesses


def test_census_threshold_rule(knobs):
    report = subcube_census(make_harmonic_poly(2, 6), Q, 3, 0.5, N0=100.0, knobs=knobs)
    assert report.threshold == 100.0
    assert report.bad_count == 0
    assert report.index_matrix.shape == (3, 3)
    frame = report.to_frame()
    assert list(frame.columns) == ['subcube', 'multi_index', 'N', 'bad']
    assert len(frame) == 9


@pytest.mark.parametrize('A, c', [(0, 0.5), (3, 0.0), (2.5, 0.5)])
def test_census_rejects_bad_parameters(A, c, knobs):
    with pytest.raises(InvalidInputError):
        subcube_census(make_harmonic_poly(2, 3), Q, A, c, knobs=knobs)


def test_hyperplane_census_layer(knobs):
    u = make_harmonic_poly(2, 8)
    report = hyperplane_census(u, Q, 9, knobs=knobs)
    assert report.axis == 1
    assert len(report.indices) == 9
    assert report.index_matrix.shape == (9,)
    assert report.threshold == pytest.approx(report.N_of_Q / 2.0)
    assert report.bad_count == sum(1 for v in report.indices if v > report.threshold)
    # the layer cube through the origin carries the full degree
    assert report.indices[4] >= 8 - 1e-9
    for witness in report.witnesses:
        assert abs(witness['center'][1]) <= Q.half_side / 9 + 1e-12


def test_hyperplane_census_needs_odd_factor(knobs):
    with pytest.raises(InvalidInputError):
        hyperplane_census(make_harmonic_poly(2, 4), Q, 4, knobs=knobs)


def test_recursion_exponent_exact():
    model = recursion_exponent(2, 1.0)
    assert model.alpha == 3.0
    assert model.majorant_holds
    assert model.monotone
    assert len(model.levels) == 65
    assert list(model.to_frame().columns) == ['j', 'N', 'log_F', 'log_bound']


def test_recursion_exponent_rejects_zero_c():
    with pytest.raises(InvalidInputError):
        recursion_exponent(2, 0.0)


@pytest.mark.parametrize('seed', range(100))
def test_tree_bounds_hold(seed):
    sim = simulate_bad_cube_tree(2, 2, 12, seed=seed)
    assert sim.K_holds
    assert sim.M_holds
    assert all(isinstance(k, Fraction) for k in sim.K)


def test_tree_modes():
    full = simulate_bad_cube_tree(1, 3, 5, mode='max')
    assert full.cap == Fraction(9, 2)
    assert full.K[5] == Fraction(9, 2) ** 5
    assert full.K_holds
    empty = simulate_bad_cube_tree(1, 3, 5, mode='zero')
    assert empty.K == [Fraction(1)] + [Fraction(0)] * 5
    again = simulate_bad_cube_tree(2, 2, 10, seed=7)
    assert again.K == simulate_bad_cube_tree(2, 2, 10, seed=7).K
    assert list(again.to_frame().columns) == ['level', 'K_j', 'bound', 'M_k', 'M_fraction', 'decay_bound']


def test_tree_depth_limit():
    with pytest.raises(InvalidInputError):
        simulate_bad_cube_tree(2, 2, 21, seed=1)


def test_extract_wide_simplex():
    points = [[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5]]
    wide = extract_wide_simplex(points, Q)
    assert len(wide.indices) == 3
    assert not wide.degenerate
    assert wide.relative_width == pytest.approx(0.5, abs=1e-9)
    assert wide.diam_ratio == pytest.approx(np.sqrt(2.0) / Q.diam)


def test_extract_wide_simplex_collinear():
    wide = extract_wide_simplex([[0, 0], [1, 1], [2, 2], [3, 3]])
    assert wide.degenerate
    assert wide.achieved_a == 0.0


def test_simplex_lemma(knobs):
    S = regular_simplex(2, edge=0.2)
    report = simplex_lemma_check(make_harmonic_poly(2, 6), S, 2.0, 0.5, 4.0, 8.0, knobs)
    assert report.status == 'applicable'
    assert report.barycenter_index == pytest.approx(6.0, abs=1e-9)
    assert report.holds
    flat = simplex_lemma_check(make_linear(2), S, 5.0, 0.5, 4.0, 8.0, knobs)
    assert flat.status == 'not applicable'
    assert flat.holds is None


def test_descendant_indices_never_exceed_their_parent(knobs):
    u = make_harmonic_poly(2, 7)
    lattice = DoublingLattice(u, Q.lattice(13), radius_ladder(Q.diam, Q.diam / 64.0, 2), knobs)
    for child in subdivide(Q, 3):
        parent_index, _, _ = lattice.max_index(child)
        assert parent_index <= lattice.max_index(Q)[0] + 1e-12
        for grandchild in subdivide(child, 2):
            assert lattice.max_index(grandchild)[0] <= parent_index + 1e-12


def test_recursion_exponent_monotone_in_parameters():
    A_values = [2, 3, 9, 27, 81]
    c_values = [0.01, 0.1, 0.5, 1.0, 2.0]
    grid = np.array([[recursion_exponent(A, c, levels=1).alpha for c in c_values] for A in A_values])
    assert np.all(np.diff(grid, axis=1) < 0)
    assert np.all(np.diff(grid, axis=0) > 0)
    assert np.all(grid > 1)


def test_recursion_exponent_large_subdivision():
    model = recursion_exponent(81, 0.01)
    assert model.alpha == pytest.approx(math.log(324) / math.log(1.01), rel=1e-12)
    assert 580 < model.alpha < 582
    assert model.majorant_holds


def test_wide_simplex_from_cube_vertices():
    q = Cube((0.5, 0.5), 0.5)
    wide = extract_wide_simplex(q.lattice(2), q)
    assert wide.achieved_a >= 0.5 - 1e-9
    assert wide.diam_ratio == pytest.approx(1.0)


def test_wide_simplex_from_uniform_points():
    q = Cube((0.5, 0.5), 0.5)
    achieved = []
    for seed in range(100):
        points = np.random.default_rng(seed).uniform(0.0, 1.0, size=(1000, 2))
        achieved.append(extract_wide_simplex(points, q).achieved_a)
    assert sum(a < 0.2 for a in achieved) <= 1
