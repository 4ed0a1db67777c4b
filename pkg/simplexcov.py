"""
Covering of a ball around a simplex barycenter by vertex balls.
B(x0, rho(1 + c1)) is checked against the union of B(x_i, rho), rho = K diam(S),
by a max-min distance problem on the enlarged sphere; the largest admissible
c1 is found by bisection and tabulated against the relative-width floor a.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from geom import Simplex, farthest_min_distance, max_relative_width, regular_simplex, simplex_metrics, sphere_directions
from lab_config import NumericKnobs, performance_monitor
from lab_errors import InvalidInputError

logger = logging.getLogger(__name__)

INTERIOR_FRACTIONS = (0.25, 0.5, 0.75)
DEFAULT_K_FACTORS = (1.0, 1.5, 2.0, 4.0)


def _knobs(knobs: Optional[NumericKnobs]) -> NumericKnobs:
    return knobs if knobs is not None else NumericKnobs()


@dataclass
class CoveringResult:
    holds: bool
    margin: float
    rho: float
    c1: float
    witness: Tuple[float, ...]
    gap_bound: float
    interior_ok: bool


def covering_check(S: Simplex, K: float, c1: float, knobs: Optional[NumericKnobs] = None) -> CoveringResult:
    """Does B(x0, rho(1+c1)) lie in the union of B(x_i, rho) for rho = K diam(S)?"""
    knobs = _knobs(knobs)
    metrics = simplex_metrics(S, knobs.width_directions)
    if metrics.degenerate:
        raise InvalidInputError("covering check needs a simplex of positive width")
    if not K > 0 or c1 < 0:
        raise InvalidInputError(f"need K > 0 and c1 >= 0, got K={K}, c1={c1}")
    rho = K * metrics.diam
    x0 = np.asarray(metrics.barycenter)
    R = rho * (1.0 + c1)
    outer = farthest_min_distance(S.points, x0, R, knobs.width_directions)
    margin = rho - outer.value
    # the union is star-shaped about x0, so inner spheres are implied; checked anyway
    interior_ok = all(farthest_min_distance(S.points, x0, f * R, knobs.width_directions).value <= rho
                      for f in INTERIOR_FRACTIONS)
    return CoveringResult(holds=margin >= 0 and interior_ok, margin=margin, rho=rho, c1=c1,
                          witness=outer.witness, gap_bound=outer.gap_bound, interior_ok=interior_ok)


def max_c1(S: Simplex, K: float, knobs: Optional[NumericKnobs] = None) -> float:
    """Largest c1 passing covering_check, by bisection; 0 when even c1 = 0 fails"""
    knobs = _knobs(knobs)
    if not covering_check(S, K, 0.0, knobs).holds:
        return 0.0
    lo, hi = 0.0, 1.0
    while covering_check(S, K, hi, knobs).holds:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise InvalidInputError("covering never fails: simplex or K out of range")
    while hi - lo > knobs.bisection_tol:
        mid = 0.5 * (lo + hi)
        if covering_check(S, K, mid, knobs).holds:
            lo = mid
        else:
            hi = mid
    return lo


def equilateral_critical_c1(K: float) -> float:
    """Closed-form maximal c1 for an equilateral triangle at rho = K * side"""
    ratio = 1.0 / (math.sqrt(3.0) * K)
    return 0.5 * (ratio + math.sqrt(4.0 - 3.0 * ratio * ratio)) - 1.0


@dataclass
class CoveringConstants:
    a: float
    n: int
    K: float
    c1: float
    certified_margin: float
    shapes: int
    table: List[Dict[str, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _random_shapes(a: float, n: int, count: int, rng: np.random.Generator,
                   knobs: NumericKnobs) -> List[Simplex]:
    """Rejection-sampled simplices with relative width >= a: Gaussian clouds and perturbed regular ones"""
    base = regular_simplex(n).points
    shapes: List[Simplex] = []
    attempts = 0
    limit = 1000 * max(1, count)
    while len(shapes) < count and attempts < limit:
        attempts += 1
        if attempts % 2:
            vertices = rng.standard_normal((n + 1, n))
        else:
            vertices = base + rng.uniform(0.0, 0.5) * rng.standard_normal((n + 1, n))
        candidate = Simplex(tuple(map(tuple, vertices)))
        metrics = simplex_metrics(candidate, knobs.width_directions)
        if not metrics.degenerate and metrics.relative_width >= a:
            shapes.append(candidate)
    if len(shapes) < count:
        logger.warning(f"only {len(shapes)}/{count} simplices with w >= {a} after {attempts} attempts")
    return shapes


@performance_monitor
def covering_constants(a: float, n: int, shape_samples: int = 8, seed: Optional[int] = None,
                       knobs: Optional[NumericKnobs] = None,
                       K_factors: Sequence[float] = DEFAULT_K_FACTORS) -> CoveringConstants:
    """
    For K on a grid starting at 2/a, the largest c1 passing on every sampled shape
    (the regular simplex plus random ones with w >= a); returns the best (K, c1).
    """
    knobs = _knobs(knobs)
    if not 0 < a <= 1:
        raise InvalidInputError(f"a must lie in (0, 1], got {a}")
    if n < 2:
        raise InvalidInputError(f"n must be >= 2, got {n}")
    ceiling = max_relative_width(n)
    if a > ceiling + 1e-12:
        raise InvalidInputError(f"no simplex in R^{n} has relative width {a} (maximum {ceiling:.6f})")
    seed = knobs.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    shapes = [regular_simplex(n)] + _random_shapes(a, n, shape_samples, rng, knobs)

    table = []
    best_K, best_c1 = None, -1.0
    for factor in K_factors:
        K = factor * 2.0 / a
        c1 = min(max_c1(S, K, knobs) for S in shapes)
        table.append({'K': K, 'c1': c1})
        if c1 > best_c1:
            best_K, best_c1 = K, c1
    margin = min(covering_check(S, best_K, best_c1, knobs).margin for S in shapes)
    return CoveringConstants(a=a, n=n, K=best_K, c1=best_c1, certified_margin=margin,
                             shapes=len(shapes), table=table)


def covering_table(a_values: Sequence[float], n: int, shape_samples: int = 8, seed: Optional[int] = None,
                   knobs: Optional[NumericKnobs] = None) -> pd.DataFrame:
    rows = []
    for a in a_values:
        constants = covering_constants(a, n, shape_samples, seed, knobs)
        rows.append({'a': a, 'n': n, 'K': constants.K, 'c1': constants.c1,
                     'margin': constants.certified_margin})
    return pd.DataFrame(rows, columns=['a', 'n', 'K', 'c1', 'margin'])


@dataclass
class DeltaReport:
    delta: float
    violations: int
    witness: Tuple[float, ...]
    witness_distance: float
    tight: bool


def delta_of_t(S: Simplex, i: int, rho: float, t: float, samples: int = 1000) -> DeltaReport:
    """delta = |x_i - x0| / (rho t), the least enlargement with B(x_i, rho t) in B(x0, rho t (1 + delta))"""
    if not rho > 0 or not t > 0:
        raise InvalidInputError(f"rho and t must be positive, got rho={rho}, t={t}")
    pts = S.points
    if not 0 <= i < len(pts):
        raise InvalidInputError(f"vertex index {i} out of range")
    x0 = S.barycenter
    xi = pts[i]
    offset = xi - x0
    gap = float(np.linalg.norm(offset))
    scale = rho * t
    delta = gap / scale
    limit = scale * (1.0 + delta)

    boundary = xi + scale * sphere_directions(S.n, samples)
    distances = np.linalg.norm(boundary - x0, axis=1)
    violations = int(np.count_nonzero(distances > limit * (1.0 + 1e-12)))

    direction = offset / gap if gap > 0 else np.eye(S.n)[0]
    witness = xi + scale * direction
    witness_distance = float(np.linalg.norm(witness - x0))
    return DeltaReport(delta=delta, violations=violations, witness=tuple(witness.tolist()),
                       witness_distance=witness_distance, tight=witness_distance >= limit * (1.0 - 1e-12))
