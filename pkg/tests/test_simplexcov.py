import math

import numpy as np
import pytest

from geom import Simplex, regular_simplex, simplex_metrics
from lab_config import NumericKnobs
from lab_errors import InvalidInputError
from simplexcov import (covering_check, covering_constants, covering_table, delta_of_t, equilateral_critical_c1,
                        max_c1)

EQUILATERAL = Simplex(((0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3.0) / 2.0)))


@pytest.fixture(scope='module')
def fast_knobs():
    return NumericKnobs(seed=5, width_directions=512, bisection_tol=1e-7)


def test_equilateral_max_c1_matches_closed_form():
    c1 = max_c1(EQUILATERAL, 2.0, NumericKnobs())
    assert c1 == pytest.approx(equilateral_critical_c1(2.0), abs=1e-4)


@pytest.mark.parametrize('K', [1.0, 2.0, 4.0, 8.0])
def test_closed_form_non_increasing_in_K(K):
    assert equilateral_critical_c1(K) >= equilateral_critical_c1(2.0 * K)


def test_covering_check_reports_margin(fast_knobs):
    passing = covering_check(EQUILATERAL, 2.0, 0.05, fast_knobs)
    assert passing.holds
    assert passing.margin > 0
    assert passing.rho == pytest.approx(2.0)
    failing = covering_check(EQUILATERAL, 2.0, 0.5, fast_knobs)
    assert not failing.holds
    assert failing.margin < 0


def test_covering_check_monotone_in_c1_on_random_simplices():
    knobs = NumericKnobs(width_directions=256)
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 1000:
        vertices = rng.standard_normal((3, 2))
        metrics = simplex_metrics(vertices, knobs.width_directions)
        if metrics.degenerate or metrics.relative_width < 0.3:
            continue
        S = Simplex(tuple(map(tuple, vertices)))
        verdicts = [covering_check(S, 2.0 / 0.3, c1, knobs).holds for c1 in (0.0, 0.02, 0.1, 0.4)]
        # once a c1 fails every larger one fails
        assert verdicts == sorted(verdicts, reverse=True)
        checked += 1


def test_covering_check_rejects_degenerate(fast_knobs):
    flat = Simplex(((0.0, 0.0), (1.0, 1.0), (2.0, 2.0)))
    with pytest.raises(InvalidInputError):
        covering_check(flat, 2.0, 0.1, fast_knobs)
    with pytest.raises(InvalidInputError):
        covering_check(EQUILATERAL, 0.0, 0.1, fast_knobs)


def test_covering_constants_choose_smallest_K(fast_knobs):
    constants = covering_constants(0.5, 2, shape_samples=2, seed=11, knobs=fast_knobs)
    assert constants.K == pytest.approx(4.0)
    assert constants.c1 > 0
    assert constants.certified_margin >= -1e-9
    c1_values = [row['c1'] for row in constants.table]
    assert all(a >= b - 1e-6 for a, b in zip(c1_values, c1_values[1:]))


def test_covering_constants_reject_unreachable_width(fast_knobs):
    with pytest.raises(InvalidInputError):
        covering_constants(0.9, 2, knobs=fast_knobs)
    with pytest.raises(InvalidInputError):
        covering_constants(0.0, 2, knobs=fast_knobs)


def test_covering_table_columns(fast_knobs):
    table = covering_table([0.4, 0.6], 2, shape_samples=1, seed=3, knobs=fast_knobs)
    assert list(table.columns) == ['a', 'n', 'K', 'c1', 'margin']
    assert len(table) == 2
    # smaller width floor means larger K
    assert table['K'].iloc[0] > table['K'].iloc[1]


def test_regular_tetrahedron_is_covered():
    knobs = NumericKnobs(width_directions=1024)
    result = covering_check(regular_simplex(3), 2.0, 0.02, knobs)
    assert result.holds


def test_delta_of_t():
    report = delta_of_t(EQUILATERAL, 0, 2.0, 3.0)
    assert report.delta == pytest.approx((1.0 / math.sqrt(3.0)) / 6.0)
    assert report.violations == 0
    assert report.tight
    with pytest.raises(InvalidInputError):
        delta_of_t(EQUILATERAL, 3, 2.0, 3.0)
