"""
Propagation of smallness of Cauchy data.
For harmonic families normalized to sup 1 on a cube q, measures eps (the size of
|u| and r|grad u| on a face F) against sup |u| over the concentric half cube and
fits sup <= C eps^alpha on log-log axes.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.stats import linregress

from fields import Field, make_harmonic_poly, make_sinh_mode
from geom import Cube, Face
from growth import sup_norm
from lab_config import NumericKnobs, performance_monitor
from lab_errors import InvalidInputError

logger = logging.getLogger(__name__)

MIN_MEMBERS = 4
SLACK_TOL = 1e-12


def _knobs(knobs: Optional[NumericKnobs]) -> NumericKnobs:
    return knobs if knobs is not None else NumericKnobs()


@dataclass
class CauchyData:
    sup_value: float
    sup_scaled_gradient: float
    value_witness: Tuple[float, ...]
    gradient_witness: Tuple[float, ...]

    @property
    def eps(self) -> float:
        return max(self.sup_value, self.sup_scaled_gradient)


def cauchy_data_on_face(u: Field, F: Face, knobs: Optional[NumericKnobs] = None) -> CauchyData:
    """sup |u| and sup r |grad u| on a cube face, r the side length; lattice plus L-BFGS-B refinement"""
    knobs = _knobs(knobs)
    if F.cube.n != u.n:
        raise InvalidInputError(f"face of a cube in R^{F.cube.n} used with a field on R^{u.n}")
    r = F.side_length
    dims = u.n - 1
    per_axis = knobs.sup_lattice
    while per_axis > 2 and per_axis ** dims > knobs.lattice_cap:
        per_axis -= 1
    pts = F.lattice(per_axis)
    free = F.free_axes
    bounds = list(zip(F.cube.lo[free], F.cube.hi[free]))

    def value_at(y):
        return abs(float(u(F.embed(y))))

    def gradient_at(y):
        return r * float(np.linalg.norm(u.gradient(F.embed(y))))

    def refine(objective: Callable, samples: np.ndarray) -> Tuple[float, np.ndarray]:
        starts = max(1, min(knobs.refine_starts, math.ceil(knobs.refine_fraction * len(samples))))
        order = np.argsort(-samples, kind='stable')[:starts]
        best_val, best_y = float(samples[order[0]]), pts[order[0]][free]
        if best_val == 0:
            return 0.0, best_y
        for idx in order:
            res = minimize(lambda y: -objective(y), pts[idx][free], method='L-BFGS-B', bounds=bounds,
                           options={'ftol': 1e-15, 'gtol': 1e-12, 'maxiter': 200})
            y = np.clip(res.x, F.cube.lo[free], F.cube.hi[free])
            value = objective(y)
            if value > best_val:
                best_val, best_y = value, y
        return best_val, best_y

    values = np.abs(u(pts))
    grads = r * np.linalg.norm(u.gradient(pts), axis=-1)
    sup_value, value_y = refine(value_at, values)
    sup_grad, grad_y = refine(gradient_at, grads)
    return CauchyData(sup_value=sup_value, sup_scaled_gradient=sup_grad,
                      value_witness=tuple(F.embed(value_y).tolist()),
                      gradient_witness=tuple(F.embed(grad_y).tolist()))


@dataclass
class SmallnessReport:
    cube: Cube
    face_axis: int
    face_upper: bool
    family: List[str]
    samples: List[Dict[str, float]]
    fitted_alpha: float
    fitted_C: float
    excluded: List[Dict[str, Any]] = field(default_factory=list)
    monotone: bool = True

    @property
    def eps_values(self) -> np.ndarray:
        return np.array([s['eps'] for s in self.samples])

    @property
    def sup_values(self) -> np.ndarray:
        return np.array([s['sup_half'] for s in self.samples])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.samples, columns=['member', 'eps', 'sup_half', 'sup_q'])

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out['cube'] = self.cube.to_dict()
        return out


def smallness_family(name: str, k_values: Sequence[float], max_degree: Optional[int] = None) -> List[Field]:
    if name == 'sinh_mode':
        return [make_sinh_mode(k) for k in k_values]
    if name == 'harmonic_im':
        return [make_harmonic_poly(2, int(k), 'im', max_degree) for k in k_values]
    raise InvalidInputError(f"unknown smallness family {name!r}")


def default_geometry() -> Tuple[Cube, Face]:
    """q = [0, 1]^2 with F its bottom face {y = 0}"""
    q = Cube((0.5, 0.5), 0.5)
    return q, Face(q, axis=1, upper=False)


@performance_monitor
def smallness_experiment(family: Sequence[Field], q: Optional[Cube] = None, face: Optional[Face] = None,
                         knobs: Optional[NumericKnobs] = None) -> SmallnessReport:
    """Per member: eps on the face and sup over q/2, both after normalizing sup over q to 1"""
    knobs = _knobs(knobs)
    if q is None and face is None:
        q, face = default_geometry()
    elif face is None:
        face = Face(q, axis=q.n - 1, upper=False)
    elif q is None:
        q = face.cube
    if face.cube != q:
        raise InvalidInputError("the face must belong to the cube q")
    half = q.scaled(0.5)
    samples, excluded = [], []
    for u in family:
        sup_q = sup_norm(u, q, knobs).value
        if not sup_q > 0:
            excluded.append({'member': u.name, 'reason': 'zero on q'})
            continue
        data = cauchy_data_on_face(u, face, knobs)
        eps = data.eps / sup_q
        if not eps > 0:
            excluded.append({'member': u.name, 'reason': 'eps = 0'})
            logger.warning(f"{u.name}: vanishing Cauchy data on the face, member excluded")
            continue
        sup_half = sup_norm(u, half, knobs).value / sup_q
        samples.append({'member': u.name, 'eps': eps, 'sup_half': sup_half, 'sup_q': sup_q})
    if len(samples) < MIN_MEMBERS:
        raise InvalidInputError(f"smallness fit needs >= {MIN_MEMBERS} usable members, got {len(samples)}")
    samples.sort(key=lambda s: -s['eps'])
    fit = linregress(np.log([s['eps'] for s in samples]), np.log([s['sup_half'] for s in samples]))
    alpha, C = float(fit.slope), float(math.exp(fit.intercept))
    if not 0 < alpha <= 1:
        logger.warning(f"fitted alpha {alpha:.4f} outside (0, 1]")
    monotone = all(b['sup_half'] <= a['sup_half'] * (1.0 + SLACK_TOL) for a, b in zip(samples, samples[1:]))
    if not monotone:
        logger.warning("smaller eps produced a larger half-cube sup within the family")
    return SmallnessReport(cube=q, face_axis=face.axis, face_upper=face.upper, family=[u.name for u in family],
                           samples=samples, fitted_alpha=alpha, fitted_C=C, excluded=excluded, monotone=monotone)


def envelope_constant(report: SmallnessReport, alpha: float) -> float:
    """Smallest C with sup_i <= C eps_i^alpha for every sample"""
    return float(np.max(report.sup_values / report.eps_values ** alpha))


@dataclass
class BoundCheck:
    C: float
    alpha: float
    slacks: List[float]
    holds: bool


def smallness_bound_check(report: SmallnessReport, C_candidate: float, alpha_candidate: float) -> BoundCheck:
    """slack_i = C eps_i^alpha - sup_i"""
    if not report.samples:
        raise InvalidInputError("empty smallness report")
    slacks = C_candidate * report.eps_values ** alpha_candidate - report.sup_values
    tolerance = SLACK_TOL * np.maximum(1.0, report.sup_values)
    return BoundCheck(C=C_candidate, alpha=alpha_candidate, slacks=slacks.tolist(),
                      holds=bool(np.all(slacks >= -tolerance)))


def _max_abs_sin(k: float, a: float, b: float) -> float:
    """max of |sin(k x)| for x in [a, b]"""
    lo, hi = k * a, k * b
    first_peak = math.ceil((lo - math.pi / 2) / math.pi)
    if math.pi / 2 + first_peak * math.pi <= hi:
        return 1.0
    return max(abs(math.sin(lo)), abs(math.sin(hi)))


def closed_form_sinh_alpha(k_values: Sequence[float]) -> float:
    """Log-log slope of the exact sinh-family data on q = [0, 1]^2, F = {y = 0}"""
    eps, sups = [], []
    for k in k_values:
        sup_q = _max_abs_sin(k, 0.0, 1.0)
        eps.append(k * sup_q / math.sinh(k) / sup_q)
        sups.append(_max_abs_sin(k, 0.25, 0.75) * math.sinh(0.75 * k) / math.sinh(k) / sup_q)
    return float(linregress(np.log(eps), np.log(sups)).slope)
