"""
Cube-hierarchy censuses of the doubling index.
Counts high-index subcubes of a subdivided cube (whole cube and central
hyperplane layer), the recursion exponent alpha = log(4A)/log(1+c), a
stochastic bad-cube tree, and greedy wide-simplex extraction with the
simplex-lemma check built on it.
"""

import logging
import math
import random
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist, squareform

from fields import Field
from geom import Cube, Simplex, simplex_metrics, subdivide
from growth import DoublingLattice, doubling_index_ball, doubling_index_cube, radius_ladder
from lab_config import NumericKnobs, performance_monitor
from lab_errors import InvalidInputError

logger = logging.getLogger(__name__)

MAX_TREE_DEPTH = 20


def _knobs(knobs: Optional[NumericKnobs]) -> NumericKnobs:
    return knobs if knobs is not None else NumericKnobs()


def _check_factor(A, name: str = "A", minimum: int = 1) -> int:
    if isinstance(A, bool) or not isinstance(A, (int, np.integer)) or A < minimum:
        raise InvalidInputError(f"{name} must be an integer >= {minimum}, got {A!r}")
    return int(A)


# =============================================================================
# SUBCUBE CENSUSES
# =============================================================================

@dataclass
class CensusReport:
    cube: Cube
    A: int
    rule: str
    N_of_Q: float
    threshold: float
    indices: List[float]
    bad_count: int
    bound: float
    verdict: bool
    c: Optional[float] = None
    index_floor: Optional[float] = None
    axis: Optional[int] = None
    witnesses: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def index_matrix(self) -> np.ndarray:
        """Per-subcube indices shaped (A,)*n, or (A,)*(n-1) for a hyperplane layer"""
        dims = self.cube.n if self.axis is None else self.cube.n - 1
        return np.asarray(self.indices, dtype=float).reshape((self.A,) * dims)

    def to_frame(self) -> pd.DataFrame:
        dims = self.cube.n if self.axis is None else self.cube.n - 1
        rows = []
        for flat, value in enumerate(self.indices):
            multi = np.unravel_index(flat, (self.A,) * dims)
            rows.append({'subcube': flat, 'multi_index': '-'.join(str(int(i)) for i in multi),
                         'N': value, 'bad': bool(value > self.threshold)})
        return pd.DataFrame(rows, columns=['subcube', 'multi_index', 'N', 'bad'])

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out['cube'] = self.cube.to_dict()
        out['fraction'] = self.bad_count / self.A ** (self.cube.n - 1)
        return out


def _shared_lattice(u: Field, Q: Cube, A: int, knobs: NumericKnobs,
                    center_filter=None) -> Tuple[DoublingLattice, float]:
    """Lattice whose centers include points_per_child points per axis in every subcube"""
    per_axis = A * (knobs.points_per_child - 1) + 1
    centers = Q.lattice(per_axis)
    if center_filter is not None:
        centers = centers[center_filter(centers)]
    child_diam = Q.diam / A
    radii = radius_ladder(Q.diam, child_diam * knobs.radius_floor_ratio, knobs.radii_per_octave)
    return DoublingLattice(u, centers, radii, knobs), child_diam


def _child_indices(lattice: DoublingLattice, children: Sequence[Cube]) -> Tuple[List[float], List[Tuple]]:
    """Max index per child over its lattice centers and radii up to the child diameter"""
    child_diam = children[0].diam
    rmask = lattice.radii <= child_diam * (1.0 + 1e-12)
    table = np.where(rmask[None, :] & np.isfinite(lattice.index), lattice.index, -np.inf)
    best_r = np.argmax(table, axis=1)
    best = table[np.arange(len(table)), best_r]
    values, argmax = [], []
    for q in children:
        inside = np.flatnonzero(q.contains(lattice.centers))
        if inside.size == 0:
            raise InvalidInputError(f"shared lattice has no center in {q}")
        k = inside[int(np.argmax(best[inside]))]
        values.append(float(best[k]))
        argmax.append((tuple(lattice.centers[k].tolist()), float(lattice.radii[best_r[k]])))
    return values, argmax


@performance_monitor
def subcube_census(u: Field, Q: Cube, A: int, c: float, N0: Optional[float] = None,
                   knobs: Optional[NumericKnobs] = None) -> CensusReport:
    """
    Count subcubes with index > max(N(Q)/(1+c), N0); verdict is count < A^{n-1}/2.
    Subcube indices are restrictions of the shared lattice, so N(q) <= N(Q) holds
    for every descendant and good cubes need no separate inheritance check.
    """
    knobs = _knobs(knobs)
    A = _check_factor(A)
    if not c > 0:
        raise InvalidInputError(f"c must be positive, got {c}")
    if A < 3 or A % 2 == 0:
        logger.info(f"subcube census with A={A}: odd A >= 3 is the intended regime")
    floor = knobs.index_floor if N0 is None else N0
    lattice, _ = _shared_lattice(u, Q, A, knobs)
    N_of_Q, _, _ = lattice.max_index()
    threshold = max(N_of_Q / (1.0 + c), floor)

    children = subdivide(Q, A)
    indices, argmax = _child_indices(lattice, children)
    witnesses = []
    for i, (q, value) in enumerate(zip(children, indices)):
        if value > threshold:
            center, radius = argmax[i]
            witnesses.append({'subcube': i, 'center': list(q.center), 'N': value,
                              'argmax_center': list(center), 'argmax_radius': radius})
    bad_count = len(witnesses)
    bound = 0.5 * A ** (Q.n - 1)
    verdict = bad_count < bound

    if not verdict:
        logger.warning(f"census verdict violated for {u.name}: {bad_count} bad subcubes >= {bound} "
                       f"(A={A}, c={c}, N(Q)={N_of_Q:.4f}); witnesses: {witnesses}")
    return CensusReport(cube=Q, A=A, rule='max(N(Q)/(1+c),N0)', N_of_Q=N_of_Q, threshold=threshold,
                        indices=indices, bad_count=bad_count, bound=bound, verdict=verdict,
                        c=c, index_floor=floor, witnesses=witnesses)


@performance_monitor
def hyperplane_census(u: Field, Q: Cube, A1: int, N: Optional[float] = None, axis: Optional[int] = None,
                      eps: Optional[float] = None, knobs: Optional[NumericKnobs] = None) -> CensusReport:
    """
    Subcubes of the central layer crossing {x_axis = center} with index > N/2.
    The verdict is fraction < eps when eps is given, fraction < 1/2 otherwise.
    """
    knobs = _knobs(knobs)
    A1 = _check_factor(A1, "A1", 3)
    if A1 % 2 == 0:
        raise InvalidInputError(f"A1 must be odd so the central hyperplane crosses one layer, got {A1}")
    axis = Q.n - 1 if axis is None else axis
    if not 0 <= axis < Q.n:
        raise InvalidInputError(f"axis {axis} out of range for n={Q.n}")
    if N is None:
        N = doubling_index_cube(u, Q, knobs=knobs).N_of_Q
    half_layer = Q.half_side / A1
    center = Q.center[axis]

    def in_layer(points):
        return np.abs(points[:, axis] - center) <= half_layer * (1.0 + 1e-12)

    lattice, _ = _shared_lattice(u, Q, A1, knobs, center_filter=in_layer)
    middle = (A1 - 1) // 2
    children = [q for i, q in enumerate(subdivide(Q, A1))
                if np.unravel_index(i, (A1,) * Q.n)[axis] == middle]
    indices, argmax = _child_indices(lattice, children)
    threshold = N / 2.0
    witnesses = [{'subcube': i, 'center': list(q.center), 'N': v,
                  'argmax_center': list(argmax[i][0]), 'argmax_radius': argmax[i][1]}
                 for i, (q, v) in enumerate(zip(children, indices)) if v > threshold]
    total = A1 ** (Q.n - 1)
    limit = 0.5 if eps is None else eps
    bound = limit * total
    verdict = len(witnesses) < bound
    if not verdict:
        logger.warning(f"hyperplane census for {u.name}: {len(witnesses)}/{total} layer cubes above N/2={threshold:.4f}")
    return CensusReport(cube=Q, A=A1, rule='N/2-hyperplane', N_of_Q=float(N), threshold=threshold,
                        indices=indices, bad_count=len(witnesses), bound=bound, verdict=verdict,
                        axis=axis, witnesses=witnesses)


# =============================================================================
# RECURSION MODEL
# =============================================================================

@dataclass
class RecursionModel:
    A: int
    c: float
    N0: float
    alpha: float
    levels: List[Dict[str, float]] = field(default_factory=list)
    majorant_holds: bool = True
    monotone: bool = True

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.levels, columns=['j', 'N', 'log_F', 'log_bound'])

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def recursion_exponent(A: int, c: float, N0: float = 1.0, levels: int = 64) -> RecursionModel:
    """alpha = log(4A) / log(1+c) and the majorant F((1+c)^j N0) = (4A)^j F(N0), in log2 space"""
    A = _check_factor(A, "A", 2)
    if not c > 0:
        raise InvalidInputError(f"c must be positive (alpha is undefined at c = {c})")
    if not N0 > 0:
        raise InvalidInputError(f"N0 must be positive, got {N0}")
    log_step = math.log2(4 * A)
    log_growth = math.log2(1.0 + c)
    alpha = log_step / log_growth
    rows = []
    holds, monotone = True, True
    previous = -math.inf
    for j in range(levels + 1):
        log_F = j * log_step
        log_bound = alpha * (j * log_growth)
        if log_F > log_bound + 1e-12 * max(1.0, abs(log_bound)):
            holds = False
        if log_F < previous:
            monotone = False
        previous = log_F
        rows.append({'j': j, 'N': N0 * 2.0 ** (j * log_growth), 'log_F': log_F, 'log_bound': log_bound})
    return RecursionModel(A=A, c=c, N0=N0, alpha=alpha, levels=rows, majorant_holds=holds, monotone=monotone)


# =============================================================================
# BAD-CUBE TREE
# =============================================================================

@dataclass
class TreeSimulation:
    A0: int
    n: int
    depth: int
    j0: int
    seed: Optional[int]
    mode: str
    cap: Fraction
    K: List[Fraction]
    M: List[Fraction]
    K_holds: bool
    M_holds: bool

    @property
    def layer_size(self) -> int:
        return (2 * self.A0 + 1) ** (self.n - 1)

    def K_bound(self, j: int) -> Fraction:
        if j < self.j0:
            return self.K[j]
        return self.K[self.j0] * self.cap ** (j - self.j0)

    def M_decay(self, k: int) -> Fraction:
        return (1 - Fraction(1, self.layer_size)) ** k

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for level in range(self.depth + 1):
            rows.append({'level': level, 'K_j': float(self.K[level]), 'bound': float(self.K_bound(level)),
                         'M_k': float(self.M[level]),
                         'M_fraction': float(self.M[level] / self.layer_size ** level),
                         'decay_bound': float(self.M_decay(level))})
        return pd.DataFrame(rows, columns=['level', 'K_j', 'bound', 'M_k', 'M_fraction', 'decay_bound'])

    def to_dict(self) -> Dict[str, Any]:
        return {'A0': self.A0, 'n': self.n, 'depth': self.depth, 'j0': self.j0, 'seed': self.seed,
                'mode': self.mode, 'cap': str(self.cap), 'K': [str(k) for k in self.K],
                'M': [str(m) for m in self.M], 'K_holds': self.K_holds, 'M_holds': self.M_holds}


def simulate_bad_cube_tree(A0: int, n: int, depth: int, j0: int = 0, seed: Optional[int] = None,
                           mode: str = 'uniform', cap: Optional[Fraction] = None,
                           start: int = 1) -> TreeSimulation:
    """
    Level counts K_j of bad cubes when each level spawns at most cap * K_j bad cubes,
    cap = (2A0+1)^{n-1}/2, and hyperplane-layer counts M_k with at most
    M_k((2A0+1)^{n-1} - 1) bad successors. Counts are exact integers or fractions.
    """
    A0 = _check_factor(A0, "A0")
    if n < 2:
        raise InvalidInputError(f"n must be >= 2, got {n}")
    if not 0 <= depth <= MAX_TREE_DEPTH:
        raise InvalidInputError(f"depth must lie in [0, {MAX_TREE_DEPTH}], got {depth}")
    if not 0 <= j0 <= depth:
        raise InvalidInputError(f"j0 must lie in [0, depth], got {j0}")
    if mode not in ('uniform', 'max', 'zero'):
        raise InvalidInputError(f"mode must be uniform, max or zero, got {mode!r}")
    layer = (2 * A0 + 1) ** (n - 1)
    cap = Fraction(layer, 2) if cap is None else Fraction(cap)
    if mode == 'zero':
        cap = Fraction(0)
    rng = random.Random(seed)

    def spawn(count: Fraction, limit: Fraction) -> Fraction:
        top = count * limit
        if mode == 'uniform':
            return Fraction(rng.randint(0, math.floor(top)))
        return top

    K = [Fraction(start)]
    M = [Fraction(start)]
    for _ in range(depth):
        K.append(spawn(K[-1], cap))
        M.append(spawn(M[-1], Fraction(layer - 1) if mode != 'zero' else Fraction(0)))

    simulation = TreeSimulation(A0=A0, n=n, depth=depth, j0=j0, seed=seed, mode=mode, cap=cap,
                                K=K, M=M, K_holds=True, M_holds=True)
    simulation.K_holds = all(K[j] <= simulation.K_bound(j) for j in range(j0, depth + 1))
    simulation.M_holds = all(M[k] / Fraction(layer) ** k <= start * simulation.M_decay(k)
                             for k in range(depth + 1))
    if not (simulation.K_holds and simulation.M_holds):
        logger.warning(f"bad-cube tree bound violated (seed={seed}, mode={mode})")
    return simulation


# =============================================================================
# WIDE SIMPLICES
# =============================================================================

@dataclass
class WideSimplex:
    simplex: Simplex
    indices: List[int]
    relative_width: float
    diam_ratio: float
    achieved_a: float
    degenerate: bool


def extract_wide_simplex(points, q: Optional[Cube] = None, tol: float = 1e-12) -> WideSimplex:
    """Greedy simplex: a diameter pair, then repeatedly the point farthest from the affine hull"""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < pts.shape[1] + 1:
        raise InvalidInputError(f"need at least n+1 points in R^n, got array of shape {pts.shape}")
    n = pts.shape[1]
    dist = squareform(pdist(pts))
    i, j = np.unravel_index(int(np.argmax(dist)), dist.shape)
    chosen = [int(i), int(j)]
    scale = max(float(dist[i, j]), 1e-300)
    degenerate = dist[i, j] <= tol
    while len(chosen) < n + 1:
        base = pts[chosen[0]]
        span = (pts[chosen[1:]] - base).T
        q_basis, _ = np.linalg.qr(span)
        rel = pts - base
        residual = rel - (rel @ q_basis) @ q_basis.T
        far = np.linalg.norm(residual, axis=1)
        far[chosen] = -1.0
        k = int(np.argmax(far))
        if far[k] <= tol * scale:
            degenerate = True
        chosen.append(k)
    simplex = Simplex(tuple(map(tuple, pts[chosen])))
    metrics = simplex_metrics(simplex)
    diam_ratio = metrics.diam / q.diam if q is not None else 1.0
    degenerate = degenerate or metrics.degenerate
    achieved = 0.0 if degenerate else min(metrics.relative_width, diam_ratio)
    return WideSimplex(simplex=simplex, indices=chosen, relative_width=metrics.relative_width,
                       diam_ratio=diam_ratio, achieved_a=achieved, degenerate=degenerate)


@dataclass
class SimplexLemmaReport:
    status: str
    vertex_indices: List[Optional[float]]
    vertex_radii: List[Optional[float]]
    barycenter_index: Optional[float]
    target: float
    holds: Optional[bool]


def simplex_lemma_check(u: Field, S: Simplex, N: float, c: float, K: float, C: float,
                        knobs: Optional[NumericKnobs] = None, ladder: int = 8) -> SimplexLemmaReport:
    """
    If every vertex has N(x_i, r_i) > N for some r_i <= (K/2) diam S, report whether
    N(x0, C diam S) > N(1+c) at the barycenter; otherwise the check is not applicable.
    """
    knobs = _knobs(knobs)
    if not c > 0 or not K > 0 or not C > 0:
        raise InvalidInputError("c, K and C must be positive")
    metrics = simplex_metrics(S, knobs.width_directions)
    if metrics.degenerate:
        raise InvalidInputError("simplex lemma needs a nondegenerate simplex")
    top = 0.5 * K * metrics.diam
    target = N * (1.0 + c)
    vertex_indices, vertex_radii = [], []
    applicable = True
    for x in S.points:
        found = None
        for level in range(ladder):
            r = top * 2.0 ** (-level)
            value = doubling_index_ball(u, x, r, knobs).N
            if value > N:
                found = (value, r)
                break
        if found is None:
            applicable = False
            vertex_indices.append(None)
            vertex_radii.append(None)
        else:
            vertex_indices.append(found[0])
            vertex_radii.append(found[1])
    if not applicable:
        return SimplexLemmaReport(status='not applicable', vertex_indices=vertex_indices,
                                  vertex_radii=vertex_radii, barycenter_index=None, target=target, holds=None)
    bary = doubling_index_ball(u, metrics.barycenter, C * metrics.diam, knobs).N
    holds = bary > target
    if not holds:
        logger.warning(f"simplex lemma conclusion fails for {u.name}: N(x0, C diam) = {bary:.4f} <= {target:.4f}")
    return SimplexLemmaReport(status='applicable', vertex_indices=vertex_indices, vertex_radii=vertex_radii,
                              barycenter_index=bary, target=target, holds=holds)
