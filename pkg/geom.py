"""
Exact Euclidean primitives shared by the laboratory: cubes, balls, simplices,
cube subdivision, slab widths and max-min distances on spheres.
All operations are pure and safe to call from several threads.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial.distance import cdist, pdist
from scipy.special import gamma

from lab_errors import InvalidInputError

logger = logging.getLogger(__name__)

# Relative slack used for closed-cube membership tests
MEMBERSHIP_TOL = 1e-12


def _as_point(x, name: str = "point") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0 or not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be a finite 1-D coordinate vector, got {x!r}")
    return arr


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class Cube:
    """Closed axis-aligned cube center +- half_side along every axis"""
    center: Tuple[float, ...]
    half_side: float

    def __post_init__(self):
        center = tuple(float(c) for c in _as_point(self.center, "cube center"))
        object.__setattr__(self, 'center', center)
        object.__setattr__(self, 'half_side', float(self.half_side))
        if len(center) < 2:
            raise InvalidInputError(f"cube dimension must be >= 2, got {len(center)}")
        if not (self.half_side > 0) or not math.isfinite(self.half_side):
            raise InvalidInputError(f"half_side must be positive, got {self.half_side}")

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> 'Cube':
        lo_arr, hi_arr = _as_point(lo, "lo"), _as_point(hi, "hi")
        sides = hi_arr - lo_arr
        if lo_arr.shape != hi_arr.shape or not np.allclose(sides, sides[0], rtol=1e-12, atol=0):
            raise InvalidInputError(f"bounds {lo} / {hi} do not describe a cube")
        return cls(tuple((lo_arr + hi_arr) / 2.0), float(sides[0]) / 2.0)

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @property
    def lo(self) -> np.ndarray:
        return self.c - self.half_side

    @property
    def hi(self) -> np.ndarray:
        return self.c + self.half_side

    @property
    def side(self) -> float:
        return 2.0 * self.half_side

    @property
    def diam(self) -> float:
        return self.side * math.sqrt(self.n)

    @property
    def volume(self) -> float:
        return self.side ** self.n

    def scaled(self, rho: float) -> 'Cube':
        """The homothety image rho*Q, same center"""
        return Cube(self.center, self.half_side * rho)

    def contains(self, points, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        slack = tol * max(1.0, self.half_side, float(np.max(np.abs(self.c))))
        return np.all((pts >= self.lo - slack) & (pts <= self.hi + slack), axis=-1)

    def lattice(self, per_axis: int) -> np.ndarray:
        """Uniform closed lattice with per_axis points along every axis, shape (per_axis**n, n)"""
        if per_axis < 1:
            raise InvalidInputError(f"per_axis must be >= 1, got {per_axis}")
        if per_axis == 1:
            return self.c[None, :]
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def faces(self) -> List['Face']:
        return [Face(self, axis, upper) for axis in range(self.n) for upper in (False, True)]

    def to_dict(self):
        return {'center': list(self.center), 'half_side': self.half_side}


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball B(center, radius)"""
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(float(c) for c in _as_point(self.center, "ball center")))
        object.__setattr__(self, 'radius', float(self.radius))
        if not (self.radius > 0) or not math.isfinite(self.radius):
            raise InvalidInputError(f"radius must be positive, got {self.radius}")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def scaled(self, r: float) -> 'Ball':
        """The homothety image rB, same center"""
        return Ball(self.center, self.radius * r)

    def contains(self, points, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.linalg.norm(pts - self.c, axis=-1) <= self.radius * (1.0 + tol)

    def to_dict(self):
        return {'center': list(self.center), 'radius': self.radius}


@dataclass(frozen=True)
class Face:
    """A face of a cube: the coordinate `axis` frozen at the lower or upper bound"""
    cube: Cube
    axis: int
    upper: bool = False

    def __post_init__(self):
        if not 0 <= self.axis < self.cube.n:
            raise InvalidInputError(f"face axis {self.axis} out of range for n={self.cube.n}")

    @property
    def level(self) -> float:
        return float(self.cube.hi[self.axis] if self.upper else self.cube.lo[self.axis])

    @property
    def side_length(self) -> float:
        return self.cube.side

    @property
    def free_axes(self) -> List[int]:
        return [j for j in range(self.cube.n) if j != self.axis]

    def embed(self, coords) -> np.ndarray:
        """Map (..., n-1) in-face coordinates to points of R^n"""
        coords = np.asarray(coords, dtype=float)
        out = np.empty(coords.shape[:-1] + (self.cube.n,))
        out[..., self.free_axes] = coords
        out[..., self.axis] = self.level
        return out

    def lattice(self, per_axis: int) -> np.ndarray:
        lo, hi = self.cube.lo[self.free_axes], self.cube.hi[self.free_axes]
        axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return self.embed(np.stack([m.ravel() for m in mesh], axis=-1))


@dataclass(frozen=True)
class Simplex:
    """Simplex given by n+1 vertices in R^n"""
    vertices: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        pts = np.asarray(self.vertices, dtype=float)
        if pts.ndim != 2 or not np.all(np.isfinite(pts)):
            raise InvalidInputError("simplex vertices must be a finite (n+1) x n array")
        if pts.shape[0] != pts.shape[1] + 1:
            raise InvalidInputError(
                f"a simplex in R^{pts.shape[1]} needs {pts.shape[1] + 1} vertices, got {pts.shape[0]}")
        object.__setattr__(self, 'vertices', tuple(tuple(float(v) for v in row) for row in pts))

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def n(self) -> int:
        return len(self.vertices[0])

    @property
    def barycenter(self) -> np.ndarray:
        return self.points.mean(axis=0)

    @property
    def diam(self) -> float:
        return float(pdist(self.points).max())

    def to_dict(self):
        return {'vertices': [list(v) for v in self.vertices]}


@dataclass
class SimplexMetrics:
    diam: float
    width: float
    relative_width: float
    barycenter: Tuple[float, ...]
    width_direction: Tuple[float, ...]
    degenerate: bool = False


@dataclass
class FarthestPoint:
    """max over the sphere |y - x0| = R of min_i |y - centers_i|"""
    value: float
    witness: Tuple[float, ...]
    gap_bound: float


# =============================================================================
# DIRECTION SETS
# =============================================================================

@lru_cache(maxsize=64)
def sphere_directions(n: int, count: int) -> np.ndarray:
    """Deterministic set of unit vectors in R^n (read-only array)"""
    if n < 2:
        raise InvalidInputError(f"direction sets need n >= 2, got {n}")
    if n == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    else:
        parts = [np.eye(n), -np.eye(n)]
        ring = 2.0 * np.pi * np.arange(32) / 32
        for i, j in itertools.combinations(range(n), 2):
            circle = np.zeros((32, n))
            circle[:, i] = np.cos(ring)
            circle[:, j] = np.sin(ring)
            parts.append(circle)
        if n == 3:
            k = np.arange(count)
            z = 1.0 - (2.0 * k + 1.0) / count
            phi = k * np.pi * (3.0 - math.sqrt(5.0))
            s = np.sqrt(1.0 - z * z)
            parts.append(np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1))
        else:
            cloud = np.random.default_rng(12345).standard_normal((count, n))
            parts.append(cloud / np.linalg.norm(cloud, axis=1, keepdims=True))
        dirs = np.concatenate(parts, axis=0)
    dirs.setflags(write=False)
    return dirs


def direction_spacing(n: int, count: int) -> float:
    """Heuristic angular covering radius of sphere_directions(n, count)"""
    if n == 2:
        return math.pi / count
    area = 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)
    return (area / count) ** (1.0 / (n - 1))


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


# =============================================================================
# OPERATIONS
# =============================================================================

def subdivide(Q: Cube, A: int) -> List[Cube]:
    """Partition Q into A^n equal closed subcubes, ordered by multi-index (first axis slowest)"""
    if isinstance(A, bool) or not isinstance(A, (int, np.integer)) or A < 1:
        raise InvalidInputError(f"subdivision factor must be a positive integer, got {A!r}")
    A = int(A)
    h = Q.half_side / A
    lo = Q.lo
    children = []
    for idx in itertools.product(range(A), repeat=Q.n):
        center = lo + (2.0 * np.asarray(idx) + 1.0) * h
        children.append(Cube(tuple(center), h))
    return children


def owning_child(Q: Cube, A: int, x) -> int:
    """Flat index of the subcube owning x: half-open [lo, hi) except on the parent's upper faces"""
    x = _as_point(x)
    if not bool(Q.contains(x)):
        raise InvalidInputError(f"point {x.tolist()} lies outside the cube")
    side = Q.side / A
    idx = np.floor((x - Q.lo) / side).astype(int)
    idx = np.clip(idx, 0, A - 1)
    return int(np.ravel_multi_index(tuple(idx), (A,) * Q.n))


def regular_simplex(n: int, edge: float = 1.0, center: Optional[Sequence[float]] = None) -> Simplex:
    """Regular n-simplex with the given edge length, barycenter at `center` (origin by default)"""
    if n < 2:
        raise InvalidInputError(f"n must be >= 2, got {n}")
    corners = np.eye(n + 1)
    corners -= corners.mean(axis=0)
    _, _, vt = np.linalg.svd(corners)
    coords = corners @ vt[:n].T
    coords *= edge / math.sqrt(2.0)
    if center is not None:
        coords += _as_point(center)
    return Simplex(tuple(map(tuple, coords)))


def max_relative_width(n: int) -> float:
    """Relative width of the regular n-simplex, the largest any n-simplex attains"""
    if n % 2 == 1:
        return math.sqrt(2.0 / (n + 1))
    return math.sqrt(2.0 * (n + 1) / (n * (n + 2)))


def _extent(points: np.ndarray, d: np.ndarray) -> float:
    proj = points @ d
    return float(proj.max() - proj.min())


def point_set_width(points, directions: int = 4096, starts: int = 4) -> Tuple[float, np.ndarray]:
    """Minimal slab thickness of a finite point set: sphere sampling plus local refinement"""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[1]
    D = sphere_directions(n, directions)
    proj = pts @ D.T
    ranges = proj.max(axis=0) - proj.min(axis=0)
    order = np.argsort(ranges, kind='stable')[:starts]
    best_w, best_d = float(ranges[order[0]]), D[order[0]].copy()

    for k in order:
        d0 = D[k]
        if n == 2:
            theta0 = math.atan2(d0[1], d0[0])
            step = 4.0 * math.pi / directions
            res = minimize_scalar(lambda t: _extent(pts, np.array([math.cos(t), math.sin(t)])),
                                  bounds=(theta0 - step, theta0 + step), method='bounded',
                                  options={'xatol': 1e-13})
            d = np.array([math.cos(res.x), math.sin(res.x)])
        else:
            res = minimize(lambda v: _extent(pts, _unit(v)), d0, method='Nelder-Mead',
                           options={'xatol': 1e-12, 'fatol': 1e-14, 'maxiter': 4000 * n})
            d = _unit(res.x)
        w = _extent(pts, d)
        if w < best_w:
            best_w, best_d = w, d
    return best_w, best_d


def _bipartition_candidates(pts: np.ndarray):
    """Slab directions where every vertex touches one of the two hyperplanes"""
    m, n = pts.shape
    rest = list(range(1, m))
    for size in range(0, m - 1):
        for extra in itertools.combinations(rest, size):
            group_i = [0, *extra]
            group_j = [k for k in rest if k not in extra]
            rows = [pts[k] - pts[group_i[0]] for k in group_i[1:]]
            rows += [pts[k] - pts[group_j[0]] for k in group_j[1:]]
            if rows:
                _, _, vt = np.linalg.svd(np.asarray(rows))
                d = vt[-1]
            else:
                d = _unit(pts[group_j[0]] - pts[group_i[0]])
            yield d


def simplex_metrics(S, directions: int = 4096) -> SimplexMetrics:
    """Diameter, width, relative width and barycenter of a simplex"""
    if not isinstance(S, Simplex):
        S = Simplex(tuple(map(tuple, np.asarray(S, dtype=float))))
    pts = S.points
    n = S.n
    diam = S.diam
    bary = tuple(S.barycenter)
    if diam <= 0 or np.linalg.matrix_rank(pts[1:] - pts[0], tol=1e-12 * max(diam, 1e-300)) < n:
        return SimplexMetrics(diam, 0.0, 0.0, bary, tuple([0.0] * n), degenerate=True)

    width, direction = point_set_width(pts, directions)
    for d in _bipartition_candidates(pts):
        w = _extent(pts, d)
        if w < width:
            width, direction = w, d
    return SimplexMetrics(diam=diam, width=width, relative_width=width / diam,
                          barycenter=bary, width_direction=tuple(direction))


def farthest_min_distance(centers, x0, R: float, directions: int = 4096, starts: int = 4) -> FarthestPoint:
    """max over |y - x0| = R of min_i |y - centers_i|, sphere sampling plus local ascent"""
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    if C.size == 0:
        raise InvalidInputError("centers must be nonempty")
    x0 = _as_point(x0, "x0")
    if not R > 0:
        raise InvalidInputError(f"R must be positive, got {R}")
    n = x0.size

    def min_dist(y: np.ndarray) -> float:
        return float(np.min(np.linalg.norm(C - y, axis=1)))

    D = sphere_directions(n, directions)
    Y = x0 + R * D
    vals = cdist(Y, C).min(axis=1)
    order = np.argsort(-vals, kind='stable')[:starts]
    best = float(vals[order[0]])
    witness = Y[order[0]].copy()

    for k in order:
        d0 = D[k]
        if n == 2:
            theta0 = math.atan2(d0[1], d0[0])
            step = 4.0 * math.pi / directions
            res = minimize_scalar(lambda t: -min_dist(x0 + R * np.array([math.cos(t), math.sin(t)])),
                                  bounds=(theta0 - step, theta0 + step), method='bounded',
                                  options={'xatol': 1e-13})
            y = x0 + R * np.array([math.cos(res.x), math.sin(res.x)])
        else:
            res = minimize(lambda v: -min_dist(x0 + R * _unit(v)), d0, method='Nelder-Mead',
                           options={'xatol': 1e-12, 'fatol': 1e-15, 'maxiter': 4000 * n})
            y = x0 + R * _unit(res.x)
        value = min_dist(y)
        if value > best:
            best, witness = value, y
    return FarthestPoint(value=best, witness=tuple(witness), gap_bound=R * direction_spacing(n, directions))
