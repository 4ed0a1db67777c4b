"""
Frequency and doubling-index engines plus checkers for the growth inequalities
satisfied by harmonic functions: almost monotonicity of the frequency, the
log-integral identity, growth sandwiches and the center-shift lemma.
All sup ratios are handled in log2 space; nothing here uses randomness.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.optimize import minimize
from scipy.special import gamma, roots_gegenbauer

from fields import Field
from geom import Ball, Cube, sphere_directions
from lab_config import NumericKnobs, performance_monitor
from lab_errors import DegenerateFieldError, InvalidInputError

logger = logging.getLogger(__name__)

# Below this H is treated as the zero field
H_FLOOR = 1e-300

# Lemma constant for the center-shift check
CENTER_SHIFT_RATIO = 0.99


def _knobs(knobs: Optional[NumericKnobs]) -> NumericKnobs:
    return knobs if knobs is not None else NumericKnobs()


def _point(x, n: int, name: str = "point") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n,):
        raise InvalidInputError(f"{name} must have {n} coordinates, got {np.shape(x)}")
    return arr


def _positive(value: float, name: str) -> float:
    if not (value > 0) or not math.isfinite(value):
        raise InvalidInputError(f"{name} must be positive, got {value}")
    return float(value)


# =============================================================================
# SPHERE QUADRATURE AND FREQUENCY
# =============================================================================

@lru_cache(maxsize=32)
def sphere_rule(n: int, polar: int, azimuth: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights on the unit sphere S^{n-1}.
    n=2 is the periodic trapezoid rule; n>=3 peels one coordinate at a time with
    Gauss-Gegenbauer nodes for the weight (1 - t^2)^((n-3)/2).
    """
    if n == 2:
        theta = 2.0 * np.pi * np.arange(azimuth) / azimuth
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        weights = np.full(azimuth, 2.0 * np.pi / azimuth)
    else:
        t, wt = roots_gegenbauer(polar, (n - 2) / 2.0)
        sub_pts, sub_w = sphere_rule(n - 1, polar, azimuth)
        s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
        pts = np.empty((polar, sub_pts.shape[0], n))
        pts[:, :, 0] = t[:, None]
        pts[:, :, 1:] = s[:, None, None] * sub_pts[None, :, :]
        pts = pts.reshape(-1, n)
        weights = (wt[:, None] * sub_w[None, :]).ravel()
    pts.setflags(write=False)
    weights.setflags(write=False)
    return pts, weights


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1}"""
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


@dataclass
class SphereIntegral:
    value: float
    error: float
    scheme: str
    nodes: int


def _rule_sizes(n: int, knobs: NumericKnobs) -> Tuple[int, int]:
    if n == 2:
        return 1, knobs.circle_nodes
    return knobs.sphere_polar_nodes, knobs.sphere_azimuth_nodes


def _h_raw(u: Field, p: np.ndarray, r: float, polar: int, azimuth: int) -> float:
    pts, w = sphere_rule(u.n, polar, azimuth)
    vals = u(p + r * pts)
    return float(r ** (u.n - 1) * np.dot(w, vals * vals))


def sphere_norm_H(u: Field, p, r: float, knobs: Optional[NumericKnobs] = None) -> SphereIntegral:
    """H(r) = integral of u^2 over the sphere |x - p| = r, with a half-rule error estimate"""
    knobs = _knobs(knobs)
    r = _positive(r, "radius")
    p = _point(p, u.n, "center")
    polar, azimuth = _rule_sizes(u.n, knobs)
    full = _h_raw(u, p, r, polar, azimuth)
    coarse = _h_raw(u, p, r, max(1, polar // 2), max(4, azimuth // 2))
    if not full >= H_FLOOR:
        raise DegenerateFieldError(f"H({r}) = {full:.3e} at {p.tolist()}: {u.name} vanishes on the sphere")
    scheme = 'trapezoid' if u.n == 2 else 'gauss-gegenbauer'
    nodes = azimuth if u.n == 2 else polar ** (u.n - 2) * azimuth
    return SphereIntegral(value=full, error=abs(full - coarse), scheme=scheme, nodes=nodes)


def _log_h(u: Field, p: np.ndarray, r: float, knobs: NumericKnobs) -> float:
    polar, azimuth = _rule_sizes(u.n, knobs)
    value = _h_raw(u, p, r, polar, azimuth)
    if not value >= H_FLOOR:
        raise DegenerateFieldError(f"H({r}) = {value:.3e}: {u.name} vanishes on the sphere")
    return math.log(value)


def frequency_beta(u: Field, p, r: float, knobs: Optional[NumericKnobs] = None,
                   step: Optional[float] = None) -> float:
    """beta(r) = r H'(r) / 2 H(r), by a Richardson-extrapolated central difference of log H"""
    knobs = _knobs(knobs)
    r = _positive(r, "radius")
    p = _point(p, u.n, "center")
    h = step if step is not None else r * 1e-3
    if not 0 < 2 * h < r:
        raise InvalidInputError(f"difference step {h} too large for radius {r}")
    d1 = (_log_h(u, p, r + h, knobs) - _log_h(u, p, r - h, knobs)) / (2.0 * h)
    d2 = (_log_h(u, p, r + 2 * h, knobs) - _log_h(u, p, r - 2 * h, knobs)) / (4.0 * h)
    derivative = (4.0 * d1 - d2) / 3.0
    return 0.5 * r * derivative


@dataclass
class FrequencyProfile:
    center: Tuple[float, ...]
    radii: List[float]
    H_values: List[float]
    beta_values: List[float]
    quadrature: Dict[str, Any]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'r': self.radii, 'H': self.H_values, 'beta': self.beta_values},
                            columns=['r', 'H', 'beta'])

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@performance_monitor
def frequency_profile(u: Field, p, radii: Sequence[float], knobs: Optional[NumericKnobs] = None) -> FrequencyProfile:
    knobs = _knobs(knobs)
    radii = [float(r) for r in radii]
    if not radii or any(b <= a for a, b in zip(radii, radii[1:])):
        raise InvalidInputError(f"radii must be a nonempty increasing list, got {radii}")
    p = _point(p, u.n, "center")
    H_values, beta_values = [], []
    scheme = None
    for r in radii:
        h = sphere_norm_H(u, p, r, knobs)
        scheme = {'scheme': h.scheme, 'nodes': h.nodes}
        H_values.append(h.value)
        beta_values.append(frequency_beta(u, p, r, knobs))
    return FrequencyProfile(center=tuple(p.tolist()), radii=radii, H_values=H_values,
                            beta_values=beta_values, quadrature=scheme)


# =============================================================================
# SUP NORMS AND DOUBLING INDICES
# =============================================================================

@dataclass
class SupReport:
    value: float
    witness: Tuple[float, ...]
    gap_bound: float
    log2_value: float
    lattice_points: int
    refined: int


def _lattice_size(n: int, knobs: NumericKnobs) -> int:
    per_axis = knobs.sup_lattice
    while per_axis > 2 and per_axis ** n > knobs.lattice_cap:
        per_axis -= 1
    return per_axis


def _boundary_count(n: int, per_axis: int) -> int:
    return 8 * (per_axis - 1) if n == 2 else (per_axis - 1) ** 2


def sup_norm(u: Field, region: Union[Ball, Cube], knobs: Optional[NumericKnobs] = None) -> SupReport:
    """
    sup |u| over a closed ball or cube: lattice sampling, then local ascent from
    the best lattice points. The value is always |u| at the returned witness.
    """
    knobs = _knobs(knobs)
    if region.n != u.n:
        raise InvalidInputError(f"region dimension {region.n} does not match field dimension {u.n}")
    n = u.n
    per_axis = _lattice_size(n, knobs)
    if isinstance(region, Cube):
        pts = region.lattice(per_axis)
        spacing = region.side / (per_axis - 1)
    else:
        box = Cube(region.center, region.radius)
        pts = box.lattice(per_axis)
        pts = pts[region.contains(pts)]
        shell = region.c + region.radius * sphere_directions(n, _boundary_count(n, per_axis))
        pts = np.concatenate([region.c[None, :], pts, shell], axis=0)
        spacing = 2.0 * region.radius / (per_axis - 1)

    vals = np.abs(u(pts))
    grads = np.linalg.norm(u.gradient(pts), axis=-1)
    gap_bound = float(grads.max()) * spacing * math.sqrt(n) / 2.0

    starts = max(1, min(knobs.refine_starts, math.ceil(knobs.refine_fraction * len(pts))))
    order = np.argsort(-vals, kind='stable')[:starts]
    best = int(order[0])
    witness, value = pts[best].copy(), float(vals[best])

    def objective(y):
        return -abs(float(u(y)))

    def jacobian(y):
        return -np.sign(float(u(y))) * u.gradient(y)

    for idx in order:
        if vals[idx] == 0:
            continue
        if isinstance(region, Cube):
            res = minimize(objective, pts[idx], jac=jacobian, method='L-BFGS-B',
                           bounds=list(zip(region.lo, region.hi)),
                           options={'ftol': 1e-15, 'gtol': 1e-12, 'maxiter': 200})
            y = np.clip(res.x, region.lo, region.hi)
        else:
            c, R = region.c, region.radius
            res = minimize(objective, pts[idx], jac=jacobian, method='SLSQP',
                           constraints=[{'type': 'ineq',
                                         'fun': lambda y: R * R - float(np.sum((y - c) ** 2)),
                                         'jac': lambda y: -2.0 * (y - c)}],
                           options={'ftol': 1e-15, 'maxiter': 200})
            y = res.x
            dist = float(np.linalg.norm(y - c))
            if dist > R:
                y = c + (y - c) * (R / dist)
        candidate = abs(float(u(y)))
        if np.isfinite(candidate) and candidate > value:
            witness, value = y, candidate

    log2_value = math.log2(value) if value > 0 else -math.inf
    return SupReport(value=value, witness=tuple(witness.tolist()), gap_bound=gap_bound,
                     log2_value=log2_value, lattice_points=len(pts), refined=len(order))


@dataclass
class DoublingReport:
    center: Tuple[float, ...]
    radius: float
    sup_inner: float
    sup_outer: float
    N: float
    refinement: Dict[str, Any] = field(default_factory=dict)


def doubling_index_ball(u: Field, x, r: float, knobs: Optional[NumericKnobs] = None) -> DoublingReport:
    """N(x, r) = log2 of sup over B(x, 2r) / sup over B(x, r)"""
    knobs = _knobs(knobs)
    r = _positive(r, "radius")
    x = _point(x, u.n, "center")
    inner = sup_norm(u, Ball(tuple(x), r), knobs)
    if not inner.value > H_FLOOR:
        raise DegenerateFieldError(f"sup of {u.name} over B({x.tolist()}, {r}) is effectively zero")
    outer = sup_norm(u, Ball(tuple(x), 2.0 * r), knobs)
    # B(x, r) lies inside B(x, 2r)
    if outer.value < inner.value:
        outer = inner
    N = outer.log2_value - inner.log2_value
    return DoublingReport(center=tuple(x.tolist()), radius=r, sup_inner=inner.value, sup_outer=outer.value,
                          N=N, refinement={'lattice_points': inner.lattice_points,
                                           'refined_starts': inner.refined,
                                           'gap_bound_inner': inner.gap_bound,
                                           'gap_bound_outer': outer.gap_bound})


@lru_cache(maxsize=16)
def unit_stencil(n: int, directions: int) -> np.ndarray:
    """Sample points of the closed unit ball: center, two inner shells and the boundary sphere"""
    dirs = sphere_directions(n, directions)
    stencil = np.concatenate([np.zeros((1, n)), dirs / 3.0, 2.0 * dirs / 3.0, dirs], axis=0)
    stencil.setflags(write=False)
    return stencil


def radius_ladder(top: float, bottom: float, per_octave: int) -> np.ndarray:
    """Geometric radii top * 2^(-i/per_octave), strictly above bottom, descending"""
    count = max(1, int(math.floor(per_octave * math.log2(top / bottom) - 1e-9)) + 1)
    radii = top * 2.0 ** (-np.arange(count) / per_octave)
    return radii[radii > bottom * (1.0 + 1e-12)]


class DoublingLattice:
    """
    Table of stencil-sampled doubling indices N(x, r) over a fixed set of centers
    and radii. Cube indices are maxima over sub-tables, so a sub-cube restricted
    to the same lattice never exceeds its parent.
    """

    def __init__(self, u: Field, centers, radii: Sequence[float], knobs: Optional[NumericKnobs] = None):
        self.u = u
        self.knobs = _knobs(knobs)
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.radii = np.sort(np.asarray(radii, dtype=float))[::-1]
        if self.centers.size == 0 or self.radii.size == 0:
            raise InvalidInputError("doubling lattice needs at least one center and one radius")
        if np.any(self.radii <= 0):
            raise InvalidInputError("doubling lattice radii must be positive")
        self.stencil = unit_stencil(u.n, self.knobs.stencil_directions)
        self.log2_inner, self.log2_outer = self._tabulate()
        with np.errstate(invalid='ignore'):
            self.index = self.log2_outer - self.log2_inner
        degenerate = int(np.count_nonzero(~np.isfinite(self.index)))
        if degenerate:
            logger.warning(f"{degenerate} lattice pairs of {u.name} have a vanishing inner sup and are skipped")

    def _log2_sups(self, centers: np.ndarray) -> np.ndarray:
        scales = np.concatenate([self.radii, 2.0 * self.radii])
        out = np.empty((len(centers), len(scales)))
        offsets = scales[:, None, None] * self.stencil[None, :, :]
        for i, c in enumerate(centers):
            vals = np.abs(self.u(c + offsets))
            out[i] = vals.max(axis=1)
        with np.errstate(divide='ignore'):
            return np.log2(out)

    def _tabulate(self) -> Tuple[np.ndarray, np.ndarray]:
        threads = max(1, self.knobs.threads)
        chunks = np.array_split(self.centers, min(len(self.centers), threads * 4))
        if threads == 1:
            parts = [self._log2_sups(chunk) for chunk in chunks]
        else:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                parts = list(executor.map(self._log2_sups, chunks))
        table = np.concatenate(parts, axis=0)
        k = len(self.radii)
        return table[:, :k], table[:, k:]

    @classmethod
    def for_cube(cls, u: Field, Q: Cube, knobs: Optional[NumericKnobs] = None,
                 centers_per_axis: Optional[int] = None, radii_count: Optional[int] = None) -> 'DoublingLattice':
        knobs = _knobs(knobs)
        per_axis = centers_per_axis or knobs.centers_per_axis
        count = radii_count or knobs.radii_count
        exponents = np.arange(count) / count
        radii = Q.diam * knobs.radius_floor_ratio ** exponents
        return cls(u, Q.lattice(per_axis), radii, knobs)

    def masks(self, cube: Optional[Cube] = None) -> Tuple[np.ndarray, np.ndarray]:
        if cube is None:
            return np.ones(len(self.centers), bool), np.ones(len(self.radii), bool)
        centers = cube.contains(self.centers)
        radii = self.radii <= cube.diam * (1.0 + 1e-12)
        return centers, radii

    def max_index(self, cube: Optional[Cube] = None) -> Tuple[float, Tuple[float, ...], float]:
        """(N, argmax center, argmax radius) over the pairs admissible for `cube`"""
        cmask, rmask = self.masks(cube)
        sub = np.where(cmask[:, None] & rmask[None, :] & np.isfinite(self.index), self.index, -np.inf)
        if not np.any(np.isfinite(sub)):
            raise DegenerateFieldError(f"no admissible lattice pair for {self.u.name} in {cube}")
        i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
        return float(sub[i, j]), tuple(self.centers[i].tolist()), float(self.radii[j])


@dataclass
class CubeIndexReport:
    cube: Cube
    N_of_Q: float
    argmax_center: Tuple[float, ...]
    argmax_radius: float
    grid: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {'cube': self.cube.to_dict(), 'N_of_Q': self.N_of_Q, 'argmax_center': list(self.argmax_center),
                'argmax_radius': self.argmax_radius, 'grid': self.grid}


@performance_monitor
def doubling_index_cube(u: Field, Q: Cube, grid: Optional[Dict[str, int]] = None,
                        knobs: Optional[NumericKnobs] = None) -> CubeIndexReport:
    """N(Q): max of N(x, r) over lattice centers in Q and radii in (floor * diam Q, diam Q]"""
    knobs = _knobs(knobs)
    grid = dict(grid or {})
    per_axis = int(grid.get('centers_per_axis', knobs.centers_per_axis))
    count = int(grid.get('radii_count', knobs.radii_count))
    if per_axis < 1 or count < 1:
        raise InvalidInputError(f"grid must be nonempty, got {grid}")
    lattice = DoublingLattice.for_cube(u, Q, knobs, per_axis, count)
    N, center, radius = lattice.max_index()
    return CubeIndexReport(cube=Q, N_of_Q=N, argmax_center=center, argmax_radius=radius,
                           grid={'centers_per_axis': per_axis, 'radii_count': count,
                                 'radius_floor_ratio': knobs.radius_floor_ratio,
                                 'stencil_points': int(lattice.stencil.shape[0])})


# =============================================================================
# GROWTH INEQUALITY CHECKERS
# =============================================================================

@dataclass
class SandwichReport:
    center: Tuple[float, ...]
    rho: float
    t: float
    eps: float
    log_t_ratio: float
    N_inner: float
    N_outer: float
    slack_lower: float
    slack_upper: float
    applicable: bool
    holds: Optional[bool]


def check_growth_sandwich(u: Field, x, rho: float, t: float, eps: float,
                          knobs: Optional[NumericKnobs] = None, index_floor: Optional[float] = None,
                          tol: Optional[float] = None) -> SandwichReport:
    """
    t^{N(x,rho)(1-eps)} <= sup_{B(x,t rho)} / sup_{B(x,rho)} <= t^{N(x,t rho)(1+eps)} with C = 0.
    Slacks are the implied margins in log_t units; a verdict is given only above the index floor.
    """
    knobs = _knobs(knobs)
    if not t > 2:
        raise InvalidInputError(f"t must exceed 2, got {t}")
    if not 0 < eps < 1:
        raise InvalidInputError(f"eps must lie in (0, 1), got {eps}")
    floor = knobs.index_floor if index_floor is None else index_floor
    tol = knobs.tolerance if tol is None else tol
    x = _point(x, u.n, "center")
    small = sup_norm(u, Ball(tuple(x), rho), knobs)
    if not small.value > H_FLOOR:
        raise DegenerateFieldError(f"sup of {u.name} over B({x.tolist()}, {rho}) is effectively zero")
    large = sup_norm(u, Ball(tuple(x), t * rho), knobs)
    log_t_ratio = max(0.0, large.log2_value - small.log2_value) / math.log2(t)
    N_inner = doubling_index_ball(u, x, rho, knobs).N
    N_outer = doubling_index_ball(u, x, t * rho, knobs).N
    slack_lower = log_t_ratio - N_inner * (1.0 - eps)
    slack_upper = N_outer * (1.0 + eps) - log_t_ratio
    applicable = N_inner >= floor
    holds = (slack_lower >= -tol and slack_upper >= -tol) if applicable else None
    if holds is False:
        logger.warning(f"growth sandwich violated for {u.name} at x={x.tolist()}, rho={rho}, t={t}: "
                       f"slack_lower={slack_lower:.3e}, slack_upper={slack_upper:.3e}")
    return SandwichReport(center=tuple(x.tolist()), rho=rho, t=t, eps=eps, log_t_ratio=log_t_ratio,
                          N_inner=N_inner, N_outer=N_outer, slack_lower=slack_lower,
                          slack_upper=slack_upper, applicable=applicable, holds=holds)


@dataclass
class LogIntegralReport:
    r1: float
    r2: float
    log_ratio: float
    integral: float
    residual: float
    method: str


def check_log_integral(u: Field, p, r1: float, r2: float, knobs: Optional[NumericKnobs] = None,
                       method: str = 'adaptive', nodes: int = 64) -> LogIntegralReport:
    """|log(H(r2)/H(r1)) - 2 * integral of beta over log r|"""
    knobs = _knobs(knobs)
    if not 0 < r1 < r2:
        raise InvalidInputError(f"need 0 < r1 < r2, got {r1}, {r2}")
    p = _point(p, u.n, "center")
    log_ratio = _log_h(u, p, r2, knobs) - _log_h(u, p, r1, knobs)
    lo, hi = math.log(r1), math.log(r2)

    def beta_of_log(s: float) -> float:
        return frequency_beta(u, p, math.exp(s), knobs)

    if method == 'adaptive':
        integral, _ = quad(beta_of_log, lo, hi, epsabs=1e-11, epsrel=1e-11, limit=100)
    elif method == 'gauss':
        t, w = np.polynomial.legendre.leggauss(nodes)
        s = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
        integral = 0.5 * (hi - lo) * float(np.dot(w, [beta_of_log(v) for v in s]))
    else:
        raise InvalidInputError(f"unknown integration method {method!r}")
    residual = abs(log_ratio - 2.0 * integral)
    return LogIntegralReport(r1=r1, r2=r2, log_ratio=log_ratio, integral=integral,
                             residual=residual, method=method)


@dataclass
class CenterShiftReport:
    x1: Tuple[float, ...]
    x2: Tuple[float, ...]
    rho: float
    C: float
    N_first: float
    N_second: float
    ratio: float
    status: str
    holds: Optional[bool]


def check_center_shift(u: Field, x1, x2, rho: float, C: float, knobs: Optional[NumericKnobs] = None,
                       index_floor: Optional[float] = None) -> CenterShiftReport:
    """N(x2, C rho) / N(x1, rho), judged against 99/100 only when N(x1, rho) exceeds the index floor"""
    knobs = _knobs(knobs)
    x1 = _point(x1, u.n, "x1")
    x2 = _point(x2, u.n, "x2")
    rho = _positive(rho, "rho")
    C = _positive(C, "C")
    if not np.linalg.norm(x1 - x2) < rho:
        raise InvalidInputError(f"|x1 - x2| must be below rho={rho}")
    floor = knobs.index_floor if index_floor is None else index_floor
    first = doubling_index_ball(u, x1, rho, knobs).N
    second = doubling_index_ball(u, x2, C * rho, knobs).N
    ratio = second / first if first > 0 else math.nan
    if not first > floor:
        return CenterShiftReport(tuple(x1.tolist()), tuple(x2.tolist()), rho, C, first, second, ratio,
                                 status='below index floor', holds=None)
    holds = ratio >= CENTER_SHIFT_RATIO
    if not holds:
        logger.warning(f"center shift ratio {ratio:.4f} < {CENTER_SHIFT_RATIO} for {u.name}: "
                       f"x1={x1.tolist()}, x2={x2.tolist()}, rho={rho}, C={C}")
    return CenterShiftReport(tuple(x1.tolist()), tuple(x2.tolist()), rho, C, first, second, ratio,
                             status='checked', holds=holds)


@dataclass
class MonotonicityReport:
    radii: List[float]
    beta_values: List[float]
    eps: float
    worst_slack: float
    violations: List[Tuple[float, float]]


def check_almost_monotonicity(u: Field, p, radii: Sequence[float], eps: float = 0.05,
                              knobs: Optional[NumericKnobs] = None, tol: float = 1e-9) -> MonotonicityReport:
    """beta(r1) <= (1 + eps) beta(r2) + tol for every sampled r1 < r2"""
    knobs = _knobs(knobs)
    radii = sorted(float(r) for r in radii)
    p = _point(p, u.n, "center")
    betas = [frequency_beta(u, p, r, knobs) for r in radii]
    worst = math.inf
    violations = []
    for i in range(len(radii)):
        for j in range(i + 1, len(radii)):
            slack = (1.0 + eps) * betas[j] + tol - betas[i]
            worst = min(worst, slack)
            if slack < 0:
                violations.append((radii[i], radii[j]))
    if violations:
        logger.warning(f"frequency of {u.name} not almost monotone at {len(violations)} radius pairs")
    return MonotonicityReport(radii=radii, beta_values=betas, eps=eps,
                              worst_slack=worst if math.isfinite(worst) else 0.0, violations=violations)


@dataclass
class HGrowthReport:
    r1: float
    r2: float
    log_ratio: float
    lower: float
    upper: float
    slack_lower: float
    slack_upper: float


def check_h_growth_bounds(u: Field, p, r1: float, r2: float, eps: float,
                          knobs: Optional[NumericKnobs] = None) -> HGrowthReport:
    """(r2/r1)^{2 beta(r1)/(1+eps)} <= H(r2)/H(r1) <= (r2/r1)^{2 beta(r2)(1+eps)}, in log form"""
    knobs = _knobs(knobs)
    if not 0 < r1 < r2:
        raise InvalidInputError(f"need 0 < r1 < r2, got {r1}, {r2}")
    p = _point(p, u.n, "center")
    log_ratio = _log_h(u, p, r2, knobs) - _log_h(u, p, r1, knobs)
    span = math.log(r2 / r1)
    lower = 2.0 * frequency_beta(u, p, r1, knobs) / (1.0 + eps) * span
    upper = 2.0 * frequency_beta(u, p, r2, knobs) * (1.0 + eps) * span
    return HGrowthReport(r1=r1, r2=r2, log_ratio=log_ratio, lower=lower, upper=upper,
                         slack_lower=log_ratio - lower, slack_upper=upper - log_ratio)


@dataclass
class ComparisonReport:
    r: float
    eps1: float
    N: float
    beta_low: float
    beta_high: float
    slack_lower: float
    slack_upper: float
    implied_C: float


def check_frequency_doubling_comparison(u: Field, p, r: float, eps1: float,
                                        knobs: Optional[NumericKnobs] = None) -> ComparisonReport:
    """
    beta(p, r(1+e))(1 - 100e) - C <= N(p, r) <= beta(p, 2r(1+e))(1 + 100e) + C;
    implied_C is the smallest C >= 0 making both hold.
    """
    knobs = _knobs(knobs)
    if not eps1 > 0:
        raise InvalidInputError(f"eps1 must be positive, got {eps1}")
    p = _point(p, u.n, "center")
    N = doubling_index_ball(u, p, r, knobs).N
    beta_low = frequency_beta(u, p, r * (1.0 + eps1), knobs)
    beta_high = frequency_beta(u, p, 2.0 * r * (1.0 + eps1), knobs)
    slack_lower = N - beta_low * (1.0 - 100.0 * eps1)
    slack_upper = beta_high * (1.0 + 100.0 * eps1) - N
    return ComparisonReport(r=r, eps1=eps1, N=N, beta_low=beta_low, beta_high=beta_high,
                            slack_lower=slack_lower, slack_upper=slack_upper,
                            implied_C=max(0.0, -slack_lower, -slack_upper))


@dataclass
class SphereSupReport:
    r: float
    eps: float
    sphere_sup_sq: float
    C1: float
    C2: float
    sphere_area: float


def check_sphere_sup_comparison(u: Field, p, r: float, eps: float,
                                knobs: Optional[NumericKnobs] = None) -> SphereSupReport:
    """
    Measured constants of sup_{|x-p|=r} u^2 <= C1 H(r(1+eps)) / r^{n-1} and
    H(r) <= C2 r^{n-1} sup_{|x-p|=r} u^2. C2 never exceeds the unit sphere area.
    """
    knobs = _knobs(knobs)
    r = _positive(r, "radius")
    p = _point(p, u.n, "center")
    polar, azimuth = _rule_sizes(u.n, knobs)
    nodes, _ = sphere_rule(u.n, polar, azimuth)
    sphere_pts = np.concatenate([nodes, sphere_directions(u.n, knobs.width_directions)], axis=0)
    sup_sq = float(np.max(u(p + r * sphere_pts) ** 2))
    if not sup_sq > H_FLOOR:
        raise DegenerateFieldError(f"{u.name} vanishes on the sphere of radius {r}")
    scale = r ** (u.n - 1)
    C1 = sup_sq * scale / sphere_norm_H(u, p, r * (1.0 + eps), knobs).value
    C2 = sphere_norm_H(u, p, r, knobs).value / (scale * sup_sq)
    return SphereSupReport(r=r, eps=eps, sphere_sup_sq=sup_sq, C1=C1, C2=C2, sphere_area=sphere_area(u.n))
