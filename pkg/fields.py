"""
Library of explicitly known harmonic functions and Laplace eigenfunctions.
Every field carries a closed-form gradient and the ground truths the other
modules are checked against (degree, eigenvalue, frequency, nodal measure).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from lab_config import MAX_DEGREE
from lab_errors import InvalidInputError

logger = logging.getLogger(__name__)

FIELD_KINDS = ('harmonic_poly', 'torus_eigen', 'lifted_eigen', 'custom')

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Field:
    """
    Immutable evaluable scalar field on R^n.
    value_fn maps (..., n) points to (...) values, gradient_fn to (..., n) vectors.
    """
    kind: str
    n: int
    params: Dict[str, Any]
    value_fn: Evaluator = field(repr=False)
    gradient_fn: Evaluator = field(repr=False)
    eigenvalue: Optional[float] = None
    degree: Optional[int] = None
    frequency: Optional[float] = None
    nodal_measure: Optional[float] = None
    period: Optional[float] = None
    harmonic: bool = False

    def _points(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if pts.shape[-1:] != (self.n,):
            raise InvalidInputError(f"{self.name} expects points in R^{self.n}, got shape {pts.shape}")
        return pts

    def __call__(self, x):
        return self.value_fn(self._points(x))

    def gradient(self, x) -> np.ndarray:
        return self.gradient_fn(self._points(x))

    @property
    def descriptor(self) -> Dict[str, Any]:
        return dict(self.params)

    @property
    def name(self) -> str:
        parts = [f"{k}={v}" for k, v in self.params.items() if k != 'kind' and not isinstance(v, dict)]
        return f"{self.params.get('kind', self.kind)}({', '.join(parts)})"


def _check_dimension(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidInputError(f"dimension must be an integer >= 2, got {n!r}")
    return int(n)


# =============================================================================
# HARMONIC POLYNOMIALS
# =============================================================================

def make_harmonic_poly(n: int, k: int, variant: str = 're', max_degree: Optional[int] = None) -> Field:
    """Re or Im of (x_1 + i x_2)^k, harmonic in R^n and homogeneous of degree k"""
    n = _check_dimension(n)
    cap = MAX_DEGREE if max_degree is None else max_degree
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 0:
        raise InvalidInputError(f"degree must be a non-negative integer, got {k!r}")
    if k > cap:
        raise InvalidInputError(f"degree {k} exceeds the configured cap {cap} (LAB_MAX_DEGREE)")
    if variant not in ('re', 'im'):
        raise InvalidInputError(f"variant must be 're' or 'im', got {variant!r}")
    if k == 0 and variant == 'im':
        raise InvalidInputError("Im (x1 + i x2)^0 is the zero field")
    k = int(k)
    take = np.real if variant == 're' else np.imag

    def value(x):
        z = x[..., 0] + 1j * x[..., 1]
        return take(z ** k)

    def gradient(x):
        out = np.zeros(x.shape, dtype=float)
        if k == 0:
            return out
        dz = k * (x[..., 0] + 1j * x[..., 1]) ** (k - 1)
        if variant == 're':
            out[..., 0] = dz.real
            out[..., 1] = -dz.imag
        else:
            out[..., 0] = dz.imag
            out[..., 1] = dz.real
        return out

    return Field(kind='harmonic_poly', n=n,
                 params={'kind': 'harmonic_poly', 'n': n, 'k': k, 'variant': variant},
                 value_fn=value, gradient_fn=gradient,
                 degree=k, frequency=(2 * k + n - 1) / 2.0, harmonic=True)


# =============================================================================
# TORUS EIGENFUNCTIONS
# =============================================================================

def torus_nodal_measure(m: Sequence[int], parity: Sequence[str]) -> float:
    """H^{n-1} of the zero set per fundamental domain [s, s + 2 pi)^n"""
    n = len(m)
    count = sum(2 * abs(mj) for mj, p in zip(m, parity) if mj != 0)
    return float(count * (2.0 * math.pi) ** (n - 1))


def make_torus_eigen(n: int, m: Sequence[int], parity: Optional[Sequence[str]] = None,
                     max_degree: Optional[int] = None) -> Field:
    """prod_j trig_j(m_j x_j) on the flat torus (R / 2 pi Z)^n, eigenvalue sum m_j^2"""
    n = _check_dimension(n)
    cap = MAX_DEGREE if max_degree is None else max_degree
    modes = [int(mj) for mj in m]
    if len(modes) != n:
        raise InvalidInputError(f"mode vector needs {n} entries, got {len(modes)}")
    if not any(modes):
        raise InvalidInputError("zero mode vector m gives a constant, not an eigenfunction")
    if max(abs(mj) for mj in modes) > cap:
        raise InvalidInputError(f"mode {modes} exceeds the configured cap {cap} (LAB_MAX_DEGREE)")
    parity = list(parity) if parity is not None else ['sin'] * n
    if len(parity) != n or any(p not in ('sin', 'cos') for p in parity):
        raise InvalidInputError(f"parity must list 'sin'/'cos' per axis, got {parity}")
    for mj, p in zip(modes, parity):
        if p == 'sin' and mj == 0:
            raise InvalidInputError("sin factor with m_j = 0 makes the field identically zero")

    m_arr = np.asarray(modes, dtype=float)
    is_sin = np.array([p == 'sin' for p in parity])

    def factors(x):
        phase = x * m_arr
        vals = np.where(is_sin, np.sin(phase), np.cos(phase))
        ders = np.where(is_sin, m_arr * np.cos(phase), -m_arr * np.sin(phase))
        return vals, ders

    def value(x):
        vals, _ = factors(x)
        return np.prod(vals, axis=-1)

    def gradient(x):
        vals, ders = factors(x)
        out = np.empty(x.shape, dtype=float)
        for j in range(n):
            others = np.prod(np.delete(vals, j, axis=-1), axis=-1)
            out[..., j] = ders[..., j] * others
        return out

    return Field(kind='torus_eigen', n=n,
                 params={'kind': 'torus_eigen', 'n': n, 'm': modes, 'parity': parity},
                 value_fn=value, gradient_fn=gradient,
                 eigenvalue=float(np.sum(m_arr ** 2)),
                 nodal_measure=torus_nodal_measure(modes, parity),
                 period=2.0 * math.pi)


def lift_eigenfunction(phi: Field) -> Field:
    """Harmonic lift u(x, t) = phi(x) exp(sqrt(lambda) t) on R^{n+1}"""
    if phi.eigenvalue is None or not phi.eigenvalue > 0:
        raise InvalidInputError(f"{phi.name} carries no positive eigenvalue to lift")
    root = math.sqrt(phi.eigenvalue)

    def value(x):
        return phi.value_fn(x[..., :-1]) * np.exp(root * x[..., -1])

    def gradient(x):
        growth = np.exp(root * x[..., -1])
        out = np.empty(x.shape, dtype=float)
        out[..., :-1] = phi.gradient_fn(x[..., :-1]) * growth[..., None]
        out[..., -1] = root * phi.value_fn(x[..., :-1]) * growth
        return out

    # zero set is Z_phi x R, so the measure per unit t-length is phi's
    return Field(kind='lifted_eigen', n=phi.n + 1,
                 params={'kind': 'lifted_eigen', 'base': phi.descriptor},
                 value_fn=value, gradient_fn=gradient,
                 eigenvalue=phi.eigenvalue, nodal_measure=phi.nodal_measure,
                 period=phi.period, harmonic=True)


# =============================================================================
# CUSTOM FIELDS
# =============================================================================

def make_affine(a: Sequence[float], b: float = 0.0) -> Field:
    """u(x) = <a, x> + b"""
    a_arr = np.asarray(a, dtype=float)
    n = _check_dimension(a_arr.size)
    b = float(b)

    def value(x):
        return x @ a_arr + b

    def gradient(x):
        return np.broadcast_to(a_arr, x.shape).copy()

    constant = not np.any(a_arr)
    return Field(kind='custom', n=n,
                 params={'kind': 'affine', 'a': a_arr.tolist(), 'b': b},
                 value_fn=value, gradient_fn=gradient,
                 degree=0 if constant else None,
                 frequency=(n - 1) / 2.0 if constant else None,
                 harmonic=True)


def make_constant(n: int, value: float = 1.0) -> Field:
    n = _check_dimension(n)
    if value == 0:
        raise InvalidInputError("the zero constant has no doubling index or frequency")
    built = make_affine([0.0] * n, value)
    return Field(kind='custom', n=n, params={'kind': 'constant', 'n': n, 'value': float(value)},
                 value_fn=built.value_fn, gradient_fn=built.gradient_fn,
                 degree=0, frequency=(n - 1) / 2.0, harmonic=True)


def make_linear(n: int, axis: int = 0) -> Field:
    """u = x_axis"""
    n = _check_dimension(n)
    if not 0 <= axis < n:
        raise InvalidInputError(f"axis {axis} out of range for n={n}")
    a = [0.0] * n
    a[axis] = 1.0
    built = make_affine(a)
    return Field(kind='custom', n=n, params={'kind': 'linear', 'n': n, 'axis': axis},
                 value_fn=built.value_fn, gradient_fn=built.gradient_fn,
                 degree=1, frequency=(n + 1) / 2.0, harmonic=True)


def make_quadric(a: Sequence[float], center: Optional[Sequence[float]] = None, b: float = 0.0) -> Field:
    """u(x) = sum_j a_j (x_j - c_j)^2 + b; harmonic when sum a_j = 0"""
    a_arr = np.asarray(a, dtype=float)
    n = _check_dimension(a_arr.size)
    c_arr = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if c_arr.shape != (n,):
        raise InvalidInputError(f"quadric center must have {n} coordinates")
    b = float(b)

    def value(x):
        return np.sum(a_arr * (x - c_arr) ** 2, axis=-1) + b

    def gradient(x):
        return 2.0 * a_arr * (x - c_arr)

    return Field(kind='custom', n=n,
                 params={'kind': 'quadric', 'a': a_arr.tolist(), 'center': c_arr.tolist(), 'b': b},
                 value_fn=value, gradient_fn=gradient,
                 harmonic=bool(abs(a_arr.sum()) < 1e-15))


def make_circle_field(radius: float = 0.5) -> Field:
    """x^2 + y^2 - radius^2: zero set is a circle of length 2 pi radius"""
    if not radius > 0:
        raise InvalidInputError(f"radius must be positive, got {radius}")
    return make_quadric([1.0, 1.0], b=-radius * radius)


def make_sinh_mode(k: float, n: int = 2) -> Field:
    """sin(k x_1) sinh(k x_2) / sinh(k): harmonic, zero on {x_2 = 0}, sup 1 on [0,1]^2 for k >= pi/2"""
    n = _check_dimension(n)
    if not 0 < k <= 700:
        raise InvalidInputError(f"sinh mode wavenumber must lie in (0, 700], got {k}")
    k = float(k)
    norm = math.sinh(k)

    def value(x):
        return np.sin(k * x[..., 0]) * np.sinh(k * x[..., 1]) / norm

    def gradient(x):
        out = np.zeros(x.shape, dtype=float)
        out[..., 0] = k * np.cos(k * x[..., 0]) * np.sinh(k * x[..., 1]) / norm
        out[..., 1] = k * np.sin(k * x[..., 0]) * np.cosh(k * x[..., 1]) / norm
        return out

    return Field(kind='custom', n=n, params={'kind': 'sinh_mode', 'n': n, 'k': k},
                 value_fn=value, gradient_fn=gradient, harmonic=True)


def rescale_field(u: Field, s: float) -> Field:
    """v(x) = u(s x)"""
    if not s > 0:
        raise InvalidInputError(f"rescaling factor must be positive, got {s}")
    s = float(s)

    def value(x):
        return u.value_fn(s * x)

    def gradient(x):
        return s * u.gradient_fn(s * x)

    return Field(kind=u.kind, n=u.n, params={'kind': 'rescaled', 'base': u.descriptor, 's': s},
                 value_fn=value, gradient_fn=gradient,
                 eigenvalue=None if u.eigenvalue is None else u.eigenvalue * s * s,
                 degree=u.degree, frequency=u.frequency,
                 nodal_measure=None if u.nodal_measure is None else u.nodal_measure * s ** (-(u.n - 1)),
                 period=None if u.period is None else u.period / s,
                 harmonic=u.harmonic)


def scale_field(u: Field, c: float) -> Field:
    """v(x) = c u(x)"""
    if c == 0:
        raise InvalidInputError("scaling by zero gives the zero field")
    c = float(c)

    def value(x):
        return c * u.value_fn(x)

    def gradient(x):
        return c * u.gradient_fn(x)

    return Field(kind=u.kind, n=u.n, params={'kind': 'scaled', 'base': u.descriptor, 'c': c},
                 value_fn=value, gradient_fn=gradient,
                 eigenvalue=u.eigenvalue, degree=u.degree, frequency=u.frequency,
                 nodal_measure=u.nodal_measure, period=u.period, harmonic=u.harmonic)


# =============================================================================
# VALIDATION
# =============================================================================

def laplacian_residual(u: Field, x, h: float = 1e-4) -> float:
    """Second-order central-difference Laplacian of u at x"""
    if not h > 0:
        raise InvalidInputError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    steps = h * np.eye(u.n)
    center = u(x)
    total = np.sum(u(x + steps) + u(x - steps) - 2.0 * center)
    return float(total / (h * h))


def gradient_residual(u: Field, x, h: float = 1e-4) -> float:
    """Relative gap between the closed-form gradient and central differences"""
    if not h > 0:
        raise InvalidInputError(f"step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    steps = h * np.eye(u.n)
    fd = (u(x + steps) - u(x - steps)) / (2.0 * h)
    exact = u.gradient(x)
    return float(np.linalg.norm(fd - exact) / max(1.0, float(np.linalg.norm(exact))))


# =============================================================================
# DESCRIPTORS
# =============================================================================

def field_to_descriptor(u: Field) -> Dict[str, Any]:
    return u.descriptor


def _require(desc: Dict[str, Any], *keys: str) -> None:
    missing = [k for k in keys if k not in desc]
    if missing:
        raise InvalidInputError(f"field descriptor {desc.get('kind')!r} is missing {', '.join(missing)}")


def field_from_descriptor(desc: Dict[str, Any], max_degree: Optional[int] = None) -> Field:
    """Rebuild a field from its JSON descriptor"""
    if not isinstance(desc, dict) or 'kind' not in desc:
        raise InvalidInputError(f"field descriptor must be an object with a 'kind', got {desc!r}")
    kind = desc['kind']
    if kind == 'harmonic_poly':
        _require(desc, 'n', 'k')
        return make_harmonic_poly(desc['n'], desc['k'], desc.get('variant', 're'), max_degree)
    if kind == 'torus_eigen':
        _require(desc, 'm')
        return make_torus_eigen(desc.get('n', len(desc['m'])), desc['m'], desc.get('parity'), max_degree)
    if kind == 'lifted_eigen':
        _require(desc, 'base')
        return lift_eigenfunction(field_from_descriptor(desc['base'], max_degree))
    if kind == 'affine':
        _require(desc, 'a')
        return make_affine(desc['a'], desc.get('b', 0.0))
    if kind == 'constant':
        _require(desc, 'n')
        return make_constant(desc['n'], desc.get('value', 1.0))
    if kind == 'linear':
        _require(desc, 'n')
        return make_linear(desc['n'], desc.get('axis', 0))
    if kind == 'quadric':
        _require(desc, 'a')
        return make_quadric(desc['a'], desc.get('center'), desc.get('b', 0.0))
    if kind == 'circle':
        return make_circle_field(desc.get('radius', 0.5))
    if kind == 'sinh_mode':
        _require(desc, 'k')
        return make_sinh_mode(desc['k'], desc.get('n', 2))
    if kind == 'rescaled':
        _require(desc, 'base', 's')
        return rescale_field(field_from_descriptor(desc['base'], max_degree), desc['s'])
    if kind == 'scaled':
        _require(desc, 'base', 'c')
        return scale_field(field_from_descriptor(desc['base'], max_degree), desc['c'])
    raise InvalidInputError(f"unknown field kind {kind!r}")


def default_zoo(n: int) -> List[Tuple[str, Field]]:
    """Named field battery for invariant checks in dimension n (2 or 3)"""
    n = _check_dimension(n)
    zoo: List[Tuple[str, Field]] = [
        ('constant', make_constant(n, 1.0)),
        ('linear', make_linear(n, 0)),
        ('affine', make_affine([0.3] + [0.0] * (n - 2) + [-0.4], 0.7)),
    ]
    for k in (2, 3, 5):
        zoo.append((f'harmonic_re_{k}', make_harmonic_poly(n, k, 're')))
    zoo.append(('harmonic_im_4', make_harmonic_poly(n, 4, 'im')))
    if n == 2:
        zoo.append(('torus_1_1', make_torus_eigen(2, [1, 1])))
        zoo.append(('torus_2_3', make_torus_eigen(2, [2, 3])))
        zoo.append(('torus_cos_2_1', make_torus_eigen(2, [2, 1], ['cos', 'sin'])))
    else:
        zoo.append(('saddle', make_quadric([1.0, 1.0] + [0.0] * (n - 3) + [-2.0])))
        zoo.append(('torus_1_1_1', make_torus_eigen(n, [1] * n)))
        if n == 3:
            zoo.append(('lift_1_1', lift_eigenfunction(make_torus_eigen(2, [1, 1]))))
    logger.debug(f"default_zoo(n={n}): {len(zoo)} fields")
    return zoo
