"""
Nodal measure estimators.
Marching simplices (n = 2, 3) and Cauchy-Crofton line counting (any n) for
H^{n-1}({u = 0} within a cube), the (N(Q), density) pairing behind F(N), and
log-log scaling fits of nodal volume against eigenvalue.
Sign convention everywhere: a sample is positive when u > 0, non-positive otherwise.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import gamma
from scipy.stats import linregress

from fields import Field
from geom import Cube
from growth import doubling_index_cube
from lab_config import NumericKnobs, performance_monitor
from lab_errors import InvalidInputError, UnsupportedDimensionError

logger = logging.getLogger(__name__)

CROFTON_BATCH = 1000
CROFTON_MIN_LINES = 1000
BISECTION_TOL = 1e-10


def _knobs(knobs: Optional[NumericKnobs]) -> NumericKnobs:
    return knobs if knobs is not None else NumericKnobs()


@dataclass
class NodalEstimate:
    cube: Cube
    method: str
    value: float
    resolution: int
    error_indicator: float
    seed: Optional[int] = None
    degenerate: bool = False
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out['cube'] = self.cube.to_dict()
        return out


# =============================================================================
# MARCHING SIMPLICES
# =============================================================================

@lru_cache(maxsize=4)
def _cell_simplices(n: int) -> Tuple[Tuple[int, ...], ...]:
    """Simplices of the unit cell as corner indices in itertools.product((0, 1), repeat=n) order"""
    if n not in (2, 3):
        raise UnsupportedDimensionError(f"marching simplices support n = 2, 3; got n = {n} (use crofton)")
    corners = list(itertools.product((0, 1), repeat=n))
    index = {c: i for i, c in enumerate(corners)}
    simplices = []
    # Kuhn triangulation: one simplex per axis ordering
    for perm in itertools.permutations(range(n)):
        vertex = [0] * n
        path = [index[tuple(vertex)]]
        for axis in perm:
            vertex[axis] = 1
            path.append(index[tuple(vertex)])
        simplices.append(tuple(path))
    return tuple(simplices)


def _crossing(pa: np.ndarray, pb: np.ndarray, fa: np.ndarray, fb: np.ndarray) -> np.ndarray:
    t = fa / (fa - fb)
    return pa + t[:, None] * (pb - pa)


def _triangle_segments(P: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Zero segments of linear interpolants on triangles P (M, 3, 2), values F (M, 3)"""
    pos = F > 0
    count = pos.sum(axis=1)
    mixed = (count == 1) | (count == 2)
    segments = []
    for lone in range(3):
        a, b = [k for k in range(3) if k != lone]
        mask = mixed & (pos[:, lone] != pos[:, a]) & (pos[:, lone] != pos[:, b])
        if not mask.any():
            continue
        start = _crossing(P[mask, lone], P[mask, a], F[mask, lone], F[mask, a])
        end = _crossing(P[mask, lone], P[mask, b], F[mask, lone], F[mask, b])
        segments.append(np.stack([start, end], axis=1))
    if not segments:
        return np.empty((0, 2, 2))
    return np.concatenate(segments, axis=0)


def _tetra_area(P: np.ndarray, F: np.ndarray) -> float:
    """Total zero-surface area of linear interpolants on tetrahedra P (M, 4, 3)"""
    pos = F > 0
    count = pos.sum(axis=1)
    total = 0.0
    for lone in range(4):
        others = [k for k in range(4) if k != lone]
        mask = ((count == 1) & pos[:, lone]) | ((count == 3) & ~pos[:, lone])
        if not mask.any():
            continue
        a, b, c = (_crossing(P[mask, lone], P[mask, k], F[mask, lone], F[mask, k]) for k in others)
        total += 0.5 * float(np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())
    for i, j in itertools.combinations(range(4), 2):
        k, l = [v for v in range(4) if v not in (i, j)]
        mask = (count == 2) & pos[:, i] & pos[:, j]
        if not mask.any():
            continue
        Pm, Fm = P[mask], F[mask]
        p1 = _crossing(Pm[:, i], Pm[:, k], Fm[:, i], Fm[:, k])
        p2 = _crossing(Pm[:, i], Pm[:, l], Fm[:, i], Fm[:, l])
        p3 = _crossing(Pm[:, j], Pm[:, l], Fm[:, j], Fm[:, l])
        p4 = _crossing(Pm[:, j], Pm[:, k], Fm[:, j], Fm[:, k])
        total += 0.5 * float(np.linalg.norm(np.cross(p3 - p1, p4 - p2), axis=1).sum())
    return total


def _measure_cells(P: np.ndarray, F: np.ndarray, collect: bool = False):
    """PL zero-set measure of cells given by corners P (M, 2^n, n) and values F (M, 2^n)"""
    n = P.shape[-1]
    simplices = _cell_simplices(n)
    if n == 2:
        segments = [_triangle_segments(P[:, s, :], F[:, s]) for s in simplices]
        segments = np.concatenate(segments, axis=0)
        length = float(np.linalg.norm(segments[:, 1] - segments[:, 0], axis=1).sum())
        return length, (segments if collect else None)
    return sum(_tetra_area(P[:, s, :], F[:, s]) for s in simplices), None


def _refine_cells(u: Field, origins: np.ndarray, h: np.ndarray, collect: bool):
    """Refine sign-change-free cells once on a 3^n sublattice and measure what appears"""
    n = origins.shape[1]
    offsets = np.array(list(itertools.product(range(3), repeat=n)), dtype=float) * (h / 2.0)
    pts = origins[:, None, :] + offsets[None, :, :]
    vals = u(pts)
    pos = vals > 0
    flips = pos.any(axis=1) & ~pos.all(axis=1)
    if not flips.any():
        return 0.0, None, 0
    pts, vals = pts[flips], vals[flips]
    corners = list(itertools.product((0, 1), repeat=n))
    sub_index = []
    for sub in itertools.product((0, 1), repeat=n):
        sub_index.append([int(np.ravel_multi_index(tuple(np.add(sub, c)), (3,) * n)) for c in corners])
    sub_index = np.asarray(sub_index)
    P = pts[:, sub_index, :].reshape(-1, 2 ** n, n)
    F = vals[:, sub_index].reshape(-1, 2 ** n)
    measure, segments = _measure_cells(P, F, collect)
    return measure, segments, int(flips.sum())


def _cell_corners(grid_pts: np.ndarray, grid_vals: np.ndarray, n: int):
    """Corner arrays of all cells of a structured (m+1)^n grid"""
    shape = grid_vals.shape
    P, F = [], []
    for corner in itertools.product((0, 1), repeat=n):
        window = tuple(slice(c, c + size - 1) for c, size in zip(corner, shape))
        P.append(grid_pts[window].reshape(-1, n))
        F.append(grid_vals[window].ravel())
    return np.stack(P, axis=1), np.stack(F, axis=1)


def _marching_pass(u: Field, Q: Cube, depth: int, collect: bool = False):
    """(measure, segments, all_zero, refinements) on the uniform 2^depth grid"""
    n = u.n
    m = 2 ** depth
    axes = [np.linspace(lo, hi, m + 1) for lo, hi in zip(Q.lo, Q.hi)]
    h = np.array([ax[1] - ax[0] for ax in axes])
    total, refinements, all_zero = 0.0, 0, True
    collected = []

    def handle(P, F):
        nonlocal total, refinements
        pos = F > 0
        mixed = pos.any(axis=1) & ~pos.all(axis=1)
        if mixed.any():
            measure, segs = _measure_cells(P[mixed], F[mixed], collect)
            total += measure
            if segs is not None:
                collected.append(segs)
        absf = np.abs(F[~mixed])
        spread = F[~mixed].max(axis=1) - F[~mixed].min(axis=1)
        small = absf.min(axis=1) < spread
        if small.any():
            measure, segs, count = _refine_cells(u, P[~mixed][small][:, 0, :], h, collect)
            total += measure
            refinements += count
            if segs is not None:
                collected.append(segs)

    if n == 2:
        mesh = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
        vals = u(mesh)
        all_zero = not np.any(vals)
        if not all_zero:
            handle(*_cell_corners(mesh, vals, n))
    else:
        plane = np.stack(np.meshgrid(*axes[1:], indexing='ij'), axis=-1)

        def layer(i):
            pts = np.concatenate([np.full(plane.shape[:-1] + (1,), axes[0][i]), plane], axis=-1)
            return pts, u(pts)

        prev_pts, prev_vals = layer(0)
        all_zero = not np.any(prev_vals)
        for i in range(m):
            next_pts, next_vals = layer(i + 1)
            all_zero = all_zero and not np.any(next_vals)
            slab_pts = np.stack([prev_pts, next_pts], axis=0)
            slab_vals = np.stack([prev_vals, next_vals], axis=0)
            handle(*_cell_corners(slab_pts, slab_vals, n))
            prev_pts, prev_vals = next_pts, next_vals
    segments = np.concatenate(collected, axis=0) if collected else np.empty((0, 2, n))
    return total, segments, all_zero, refinements


@performance_monitor
def nodal_measure_marching(u: Field, Q: Cube, depth: Optional[int] = None,
                           knobs: Optional[NumericKnobs] = None) -> NodalEstimate:
    """PL zero-set measure on a 2^depth grid split into simplices; error = change from depth - 1"""
    knobs = _knobs(knobs)
    depth = knobs.marching_depth if depth is None else depth
    if u.n != Q.n:
        raise InvalidInputError(f"field dimension {u.n} does not match cube dimension {Q.n}")
    _cell_simplices(u.n)
    if not isinstance(depth, int) or depth < 1:
        raise InvalidInputError(f"depth must be a positive integer, got {depth!r}")
    value, _, all_zero, refinements = _marching_pass(u, Q, depth)
    if all_zero:
        logger.error(f"{u.name} vanishes at every grid point of {Q}: nodal measure undefined")
        return NodalEstimate(cube=Q, method='marching', value=math.inf, resolution=depth,
                             error_indicator=math.inf, degenerate=True)
    coarse, _, _, _ = _marching_pass(u, Q, depth - 1) if depth > 1 else (0.0, None, False, 0)
    indicator = abs(value - coarse) if depth > 1 else value
    return NodalEstimate(cube=Q, method='marching', value=value, resolution=depth,
                         error_indicator=indicator, details={'refinements': refinements, 'coarse_value': coarse})


def nodal_segments(u: Field, Q: Cube, depth: Optional[int] = None,
                   knobs: Optional[NumericKnobs] = None) -> np.ndarray:
    """Zero polyline segments (M, 2, 2) of a planar field, for rendering"""
    knobs = _knobs(knobs)
    if u.n != 2:
        raise UnsupportedDimensionError(f"nodal segments are planar only, got n = {u.n}")
    _, segments, _, _ = _marching_pass(u, Q, knobs.marching_depth if depth is None else depth, collect=True)
    return segments


# =============================================================================
# CAUCHY-CROFTON
# =============================================================================

def kinematic_constant(n: int) -> float:
    """pi^{n/2} / Gamma(n/2): H^{n-1} = constant * R^{n-1} * mean crossing count"""
    return math.pi ** (n / 2.0) / gamma(n / 2.0)


def _sample_lines(rng: np.random.Generator, count: int, center: np.ndarray, R: float):
    n = center.size
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    g = rng.standard_normal((count, n))
    g -= np.sum(g * d, axis=1, keepdims=True) * d
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius = R * rng.random(count) ** (1.0 / (n - 1))
    return center + radius[:, None] * g, d


def _clip_to_cube(origin: np.ndarray, d: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Parameter interval [s0, s1] of each line inside the box, and whether it is nonempty"""
    with np.errstate(divide='ignore', invalid='ignore'):
        t1 = (lo - origin) / d
        t2 = (hi - origin) / d
    moving = d != 0
    tmin = np.where(moving, np.minimum(t1, t2), -np.inf)
    tmax = np.where(moving, np.maximum(t1, t2), np.inf)
    inside = moving | ((origin >= lo) & (origin <= hi))
    s0, s1 = tmin.max(axis=1), tmax.min(axis=1)
    return s0, s1, inside.all(axis=1) & (s1 > s0)


@dataclass
class CroftonCalibration:
    n: int
    constant: float
    closed_form: float
    lines: int
    seed: int


@lru_cache(maxsize=16)
def calibrate_crofton(n: int, lines: int, seed: int) -> CroftonCalibration:
    """Kinematic constant from exact crossings of the hyperplane x_1 = 0 in [-1, 1]^n"""
    Q = Cube(tuple([0.0] * n), 1.0)
    R = Q.diam / 2.0
    rng = np.random.default_rng(seed)
    crossings = 0
    remaining = lines
    while remaining > 0:
        batch = min(remaining, 100000)
        origin, d = _sample_lines(rng, batch, Q.c, R)
        s0, s1, hit = _clip_to_cube(origin, d, Q.lo, Q.hi)
        with np.errstate(divide='ignore', invalid='ignore'):
            s_star = -origin[:, 0] / d[:, 0]
        crossings += int(np.count_nonzero(hit & (d[:, 0] != 0) & (s_star >= s0) & (s_star <= s1)))
        remaining -= batch
    mean = crossings / lines
    constant = 2.0 ** (n - 1) / (R ** (n - 1) * mean)
    logger.info(f"Crofton constant for n={n}: calibrated {constant:.6f}, closed form {kinematic_constant(n):.6f}")
    return CroftonCalibration(n=n, constant=constant, closed_form=kinematic_constant(n), lines=lines, seed=seed)


def _count_batch(u: Field, Q: Cube, R: float, steps: int, count: int,
                 seed_seq: np.random.SeedSequence) -> Tuple[int, int]:
    """(sum of crossings, sum of squared crossings) over one batch of lines"""
    rng = np.random.default_rng(seed_seq)
    origin, d = _sample_lines(rng, count, Q.c, R)
    s0, s1, hit = _clip_to_cube(origin, d, Q.lo, Q.hi)
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return 0, 0
    origin, d, s0, s1 = origin[idx], d[idx], s0[idx], s1[idx]
    grid = np.linspace(0.0, 1.0, steps + 1)
    s = s0[:, None] + (s1 - s0)[:, None] * grid[None, :]
    f = u(origin[:, None, :] + s[:, :, None] * d[:, None, :])
    pos = f > 0
    line_id, step_id = np.nonzero(pos[:, 1:] != pos[:, :-1])
    if line_id.size == 0:
        return 0, 0

    # bisection on every bracket down to the configured tolerance
    a, b = s[line_id, step_id], s[line_id, step_id + 1]
    a_pos = pos[line_id, step_id]
    width = float(np.max(b - a))
    for _ in range(max(0, int(math.ceil(math.log2(width / BISECTION_TOL))))):
        mid = 0.5 * (a + b)
        mid_pos = u(origin[line_id] + mid[:, None] * d[line_id]) > 0
        same = mid_pos == a_pos
        a = np.where(same, mid, a)
        b = np.where(same, b, mid)
    roots = 0.5 * (a + b)
    confirmed = (roots >= s0[line_id]) & (roots <= s1[line_id])
    per_line = np.bincount(line_id[confirmed], minlength=len(idx)).astype(np.int64)
    return int(per_line.sum()), int((per_line * per_line).sum())


@performance_monitor
def nodal_measure_crofton(u: Field, Q: Cube, lines: Optional[int] = None, seed: Optional[int] = None,
                          knobs: Optional[NumericKnobs] = None) -> NodalEstimate:
    """Random-line crossing counts scaled by the calibrated kinematic constant"""
    knobs = _knobs(knobs)
    lines = knobs.crofton_lines if lines is None else lines
    seed = knobs.seed if seed is None else seed
    if seed is None:
        raise InvalidInputError("crofton estimation needs a seed")
    if lines < CROFTON_MIN_LINES:
        raise InvalidInputError(f"crofton estimation needs at least {CROFTON_MIN_LINES} lines, got {lines}")
    if u.n != Q.n:
        raise InvalidInputError(f"field dimension {u.n} does not match cube dimension {Q.n}")
    n = u.n
    calibration = calibrate_crofton(n, knobs.calibration_lines, knobs.calibration_seed)
    R = Q.diam / 2.0
    sizes = [CROFTON_BATCH] * (lines // CROFTON_BATCH)
    if lines % CROFTON_BATCH:
        sizes.append(lines % CROFTON_BATCH)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, seeds))

    def run(job):
        return _count_batch(u, Q, R, knobs.crofton_steps, job[0], job[1])

    threads = max(1, knobs.threads)
    if threads == 1:
        results = [run(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(run, jobs))
    total = sum(r[0] for r in results)
    total_sq = sum(r[1] for r in results)
    mean = total / lines
    variance = max(0.0, total_sq / lines - mean * mean)
    scale = calibration.constant * R ** (n - 1)
    return NodalEstimate(cube=Q, method='crofton', value=scale * mean, resolution=lines,
                         error_indicator=scale * math.sqrt(variance / lines), seed=seed,
                         details={'kinematic_constant': calibration.constant,
                                  'closed_form_constant': calibration.closed_form,
                                  'crossings': total, 'steps': knobs.crofton_steps})


# =============================================================================
# F(N) DATA AND SCALING FITS
# =============================================================================

def periodic_domain(u: Field, knobs: Optional[NumericKnobs] = None) -> Cube:
    """Fundamental domain [s, s + period]^n, offset so no zero hyperplane sits on its boundary"""
    knobs = _knobs(knobs)
    if u.period is None:
        raise InvalidInputError(f"{u.name} is not periodic")
    if u.kind == 'lifted_eigen':
        raise InvalidInputError("a lifted eigenfunction is periodic in x only")
    half = u.period / 2.0
    return Cube(tuple([knobs.torus_offset + half] * u.n), half)


def measure_nodal(u: Field, Q: Cube, method: str, knobs: Optional[NumericKnobs] = None,
                  seed: Optional[int] = None) -> NodalEstimate:
    if method == 'marching':
        return nodal_measure_marching(u, Q, knobs=knobs)
    if method == 'crofton':
        return nodal_measure_crofton(u, Q, seed=seed, knobs=knobs)
    raise InvalidInputError(f"unknown nodal method {method!r}")


@dataclass
class ThvPoint:
    N: float
    density: float
    measure: float
    method: str
    cube: Cube


def thv_datapoint(u: Field, Q: Cube, method: Optional[str] = None,
                  knobs: Optional[NumericKnobs] = None) -> ThvPoint:
    """(N_u(Q), H^{n-1}(Z within Q) / diam(Q)^{n-1})"""
    knobs = _knobs(knobs)
    method = method or ('marching' if u.n in (2, 3) else 'crofton')
    index = doubling_index_cube(u, Q, knobs=knobs)
    estimate = measure_nodal(u, Q, method, knobs)
    return ThvPoint(N=index.N_of_Q, density=estimate.value / Q.diam ** (u.n - 1),
                    measure=estimate.value, method=method, cube=Q)


def empirical_F(points: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Running maximum of density over N: the empirical majorant F(N) at each observed N"""
    ordered = sorted((float(N), float(v)) for N, v in points)
    out, best = [], 0.0
    for N, v in ordered:
        best = max(best, v)
        out.append((N, best))
    return out


def _F_at(table: List[Tuple[float, float]], N: float) -> float:
    value = 0.0
    for level, v in table:
        if level > N:
            break
        value = v
    return value


def bad_levels(points: Sequence[Tuple[float, float]], A: int, c: float) -> List[float]:
    """Observed N with F(N) > 4A F(N / (1 + c))"""
    if not c > 0:
        raise InvalidInputError(f"c must be positive, got {c}")
    table = empirical_F(points)
    return [N for N, value in table if value > 4 * A * _F_at(table, N / (1.0 + c))]


@dataclass
class ScalingFit:
    points: List[Tuple[float, float]]
    fitted_exponent: float
    fit_residual: float
    intercept: float
    stderr: float
    method: str = ''

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.points, columns=['x', 'volume'])

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def fit_power_law(points: Sequence[Tuple[float, float]], method: str = '') -> ScalingFit:
    """Least squares on (log x, log y)"""
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    if len(xs) < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidInputError("power-law fit needs at least two points with positive coordinates")
    if np.ptp(xs) == 0:
        raise InvalidInputError("power-law fit needs at least two distinct abscissae")
    fit = linregress(np.log(xs), np.log(ys))
    residuals = np.log(ys) - (fit.intercept + fit.slope * np.log(xs))
    return ScalingFit(points=[(float(x), float(y)) for x, y in zip(xs, ys)],
                      fitted_exponent=float(fit.slope),
                      fit_residual=float(np.sqrt(np.mean(residuals ** 2))),
                      intercept=float(fit.intercept), stderr=float(fit.stderr), method=method)


@performance_monitor
def yau_scaling_fit(family: Sequence[Field], method: str = 'marching', knobs: Optional[NumericKnobs] = None,
                    seed: Optional[int] = None) -> ScalingFit:
    """Nodal volume per fundamental domain against eigenvalue, fitted on log-log axes"""
    knobs = _knobs(knobs)
    eigenvalues = [u.eigenvalue for u in family]
    if any(lam is None for lam in eigenvalues):
        raise InvalidInputError("every family member needs an eigenvalue")
    distinct = sorted(set(eigenvalues))
    if len(distinct) < 4 or distinct[-1] < 8 * distinct[0]:
        raise InvalidInputError(f"family needs >= 4 eigenvalues spanning a factor >= 8, got {distinct}")
    points = []
    for u in family:
        estimate = measure_nodal(u, periodic_domain(u, knobs), method, knobs, seed)
        logger.info(f"{u.name}: lambda={u.eigenvalue:g}, volume={estimate.value:.6g} "
                    f"(+/- {estimate.error_indicator:.2g}, truth {u.nodal_measure})")
        points.append((u.eigenvalue, estimate.value))
    return fit_power_law(points, method)
