"""
Configuration layer for the nodal laboratory.
Environment settings (.env), numeric knobs, experiment configs and run manifests.
"""

import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from functools import wraps
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from lab_errors import ConfigError

# Load environment variables from .env file
load_dotenv()

__version__ = "1.0.0"

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


DEFAULT_THREADS = max(1, _env_int('LAB_THREADS', 1))
MAX_DEGREE = _env_int('LAB_MAX_DEGREE', 16)
LOG_LEVEL = os.getenv('LAB_LOG_LEVEL', 'INFO').upper()
LOG_FILE = os.getenv('LAB_LOG_FILE')

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Configure root logging once for CLI runs"""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    target = log_file or LOG_FILE
    if target:
        handlers.append(logging.FileHandler(target, encoding='utf-8'))
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def performance_monitor(func):
    """Decorator to monitor function performance"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            execution_time = time.perf_counter() - start_time
            logging.getLogger(func.__module__).info(f"{func.__name__} executed in {execution_time:.3f} seconds")
            return result
        except Exception as e:
            execution_time = time.perf_counter() - start_time
            logging.getLogger(func.__module__).error(
                f"{func.__name__} failed after {execution_time:.3f} seconds: {str(e)}")
            raise
    return wrapper


# =============================================================================
# NUMERIC KNOBS
# =============================================================================

@dataclass
class NumericKnobs:
    """Every numerical tunable of the laboratory, with its default"""
    circle_nodes: int = 256
    sphere_polar_nodes: int = 64
    sphere_azimuth_nodes: int = 128
    sup_lattice: int = 33
    lattice_cap: int = 35937
    refine_fraction: float = 0.01
    refine_starts: int = 8
    stencil_directions: int = 64
    centers_per_axis: int = 5
    radii_count: int = 8
    radius_floor_ratio: float = 1.0 / 64.0
    points_per_child: int = 3
    radii_per_octave: int = 2
    marching_depth: int = 8
    crofton_lines: int = 100000
    crofton_steps: int = 2048
    calibration_lines: int = 1000000
    calibration_seed: int = 7919
    width_directions: int = 4096
    bisection_tol: float = 1e-10
    tolerance: float = 1e-9
    index_floor: float = 1.0
    domain_radius: float = 1.0
    max_degree: int = MAX_DEGREE
    torus_offset: float = 0.1234
    seed: Optional[int] = None
    threads: int = DEFAULT_THREADS

    # knobs allowed to be zero
    _NON_NEGATIVE = ('torus_offset', 'calibration_seed')
    _UNIT_INTERVAL = ('refine_fraction', 'radius_floor_ratio')

    def validate(self) -> None:
        for f in fields(self):
            name = f.name
            value = getattr(self, name)
            if name == 'seed':
                if value is not None and (not isinstance(value, int) or isinstance(value, bool) or value < 0):
                    raise ConfigError("seed must be a non-negative integer", field=f"numerics.{name}")
                continue
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"expected a number, got {value!r}", field=f"numerics.{name}")
            if f.type in ('int', int) and not isinstance(value, int):
                raise ConfigError(f"expected an integer, got {value!r}", field=f"numerics.{name}")
            if name in self._NON_NEGATIVE:
                if value < 0:
                    raise ConfigError(f"must be >= 0, got {value}", field=f"numerics.{name}")
            elif value <= 0:
                raise ConfigError(f"must be positive, got {value}", field=f"numerics.{name}")
            if name in self._UNIT_INTERVAL and value > 1:
                raise ConfigError(f"must lie in (0, 1], got {value}", field=f"numerics.{name}")
        if self.sup_lattice < 2:
            raise ConfigError("must be at least 2", field="numerics.sup_lattice")
        if self.points_per_child < 2:
            raise ConfigError("must be at least 2", field="numerics.points_per_child")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'NumericKnobs':
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown knob(s): {', '.join(unknown)}", field=f"numerics.{unknown[0]}")
        return cls(**data)


# =============================================================================
# EXPERIMENT CONFIGURATION
# =============================================================================

EXPERIMENT_KINDS = ('freq', 'doubling', 'nodal', 'census', 'simplex', 'smallness', 'yau', 'exponent')


@dataclass
class ExperimentConfig:
    """One batch run: what to compute, on which fields and geometry, with which knobs"""
    experiment: str
    fields: List[Dict[str, Any]] = field(default_factory=list)
    geometry: Dict[str, Any] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)
    numerics: NumericKnobs = field(default_factory=NumericKnobs)

    def is_stochastic(self) -> bool:
        if self.experiment == 'simplex':
            return True
        if self.experiment == 'census':
            return 'tree' in self.params
        if self.experiment == 'nodal':
            return 'crofton' in self.params.get('methods', ['marching', 'crofton'])
        if self.experiment == 'yau':
            return self.params.get('method', 'marching') == 'crofton'
        return False

    def validate(self) -> None:
        if self.experiment not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENT_KINDS)}",
                              field="experiment")
        if not isinstance(self.fields, list):
            raise ConfigError("must be a list of field descriptors", field="fields")
        for i, desc in enumerate(self.fields):
            if not isinstance(desc, dict) or 'kind' not in desc:
                raise ConfigError("field descriptor needs a 'kind'", field=f"fields[{i}]")
        if not isinstance(self.geometry, dict):
            raise ConfigError("must be an object", field="geometry")
        if not isinstance(self.params, dict):
            raise ConfigError("must be an object", field="params")
        self.numerics.validate()
        if self.is_stochastic() and self.numerics.seed is None:
            raise ConfigError(f"a seed is mandatory for the stochastic experiment {self.experiment!r}",
                              field="numerics.seed")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'experiment': self.experiment,
            'fields': self.fields,
            'geometry': self.geometry,
            'params': self.params,
            'numerics': self.numerics.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object")
        if 'experiment' not in data:
            raise ConfigError("missing required key", field="experiment")
        unknown = sorted(set(data) - {'experiment', 'fields', 'geometry', 'params', 'numerics'})
        if unknown:
            raise ConfigError("unknown top-level key", field=unknown[0])
        return cls(
            experiment=data['experiment'],
            fields=data.get('fields', []),
            geometry=data.get('geometry', {}),
            params=data.get('params', {}),
            numerics=NumericKnobs.from_dict(data.get('numerics')),
        )

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _locate_key(text: str, dotted: Optional[str]) -> Optional[int]:
    """Line number (1-based) of the last key of a dotted field path in raw JSON text"""
    if not dotted:
        return None
    key = dotted.split('.')[-1].split('[')[0]
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def parse_experiment_config(text: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; errors carry the offending line"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, line=e.lineno) from e
    try:
        config = ExperimentConfig.from_dict(data)
        for name, value in (overrides or {}).items():
            if value is not None:
                setattr(config.numerics, name, value)
        config.validate()
    except ConfigError as e:
        if e.line is None:
            located = _locate_key(text, e.field)
            raise ConfigError(str(e).split(': ', 1)[-1] if e.field else str(e),
                              field=e.field, line=located) from e
        raise
    except TypeError as e:
        raise ConfigError(str(e)) from e
    return config


def load_experiment_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()
    return parse_experiment_config(text, overrides)


# =============================================================================
# RUN MANIFEST
# =============================================================================

@dataclass
class RunManifest:
    """Provenance of one CLI run"""
    config_hash: str
    version: str = __version__
    started_at: str = ""
    finished_at: str = ""
    outputs: List[str] = field(default_factory=list)
    exit_status: int = 0
    config: Dict[str, Any] = field(default_factory=dict)

    def start(self) -> None:
        self.started_at = datetime.now().isoformat()

    def finish(self, exit_status: int) -> None:
        self.finished_at = datetime.now().isoformat()
        self.exit_status = exit_status

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
