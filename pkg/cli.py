"""
Batch experiment driver for the nodal laboratory.

Usage:
    python cli.py <experiment> --config configs/yau.json --out results/yau [--seed 7] [--threads 4]

Each run writes <experiment>.csv, <experiment>.json, optionally <experiment>.svg,
errors.json when an item failed, and manifest.json.
Exit codes: 0 success, 2 invalid configuration or input, 3 numerical degeneracy.
"""

import argparse
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from census import (extract_wide_simplex, hyperplane_census, recursion_exponent, simplex_lemma_check,
                    simulate_bad_cube_tree, subcube_census)
from fields import Field, field_from_descriptor, make_torus_eigen
from geom import Cube, Face, Simplex, simplex_metrics
from growth import doubling_index_ball, doubling_index_cube, frequency_profile
from lab_config import (EXPERIMENT_KINDS, ExperimentConfig, RunManifest, configure_logging,
                        load_experiment_config, performance_monitor)
from lab_errors import ConfigError, DegenerateFieldError, LabError
from lab_reports import emit_plot, ensure_dir, write_csv, write_json
from nodal import measure_nodal, nodal_segments, periodic_domain, thv_datapoint, yau_scaling_fit
from simplexcov import covering_check, covering_table, delta_of_t
from smallness import (default_geometry, envelope_constant, smallness_bound_check, smallness_experiment,
                       smallness_family)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DEGENERATE = 3


class RunContext:
    """Output directory, config and the running lists of outputs and error records"""

    def __init__(self, config: ExperimentConfig, out_dir: str):
        self.config = config
        self.out_dir = out_dir
        self.knobs = config.numerics
        self.params = config.params
        self.geometry = config.geometry
        self.outputs: List[str] = []
        self.errors: List[Dict[str, Any]] = []

    @property
    def name(self) -> str:
        return self.config.experiment

    def path(self, suffix: str) -> str:
        return os.path.join(self.out_dir, f"{self.name}{suffix}")

    def record_error(self, item: str, exc: Exception) -> None:
        level = logging.ERROR if isinstance(exc, DegenerateFieldError) else logging.WARNING
        logger.log(level, f"{self.name}: {item} failed: {exc}")
        self.errors.append({'item': item, 'error': type(exc).__name__, 'message': str(exc)})

    def csv(self, frame: pd.DataFrame, suffix: str = '.csv') -> None:
        self.outputs.append(write_csv(frame, self.path(suffix)))

    def json(self, data: Any, suffix: str = '.json') -> None:
        self.outputs.append(write_json(data, self.path(suffix)))

    def plot(self, report: Any) -> None:
        if not self.params.get('plot', True):
            return
        try:
            self.outputs.append(emit_plot(report, self.path('.svg')))
        except LabError as e:
            self.record_error('plot', e)

    def fields(self) -> List[Tuple[str, Field]]:
        built = []
        for i, desc in enumerate(self.config.fields):
            try:
                u = field_from_descriptor(desc, self.knobs.max_degree)
                built.append((desc.get('name', u.name), u))
            except LabError as e:
                self.record_error(f"fields[{i}]", e)
        return built

    def exit_status(self) -> int:
        if any(e['error'] == DegenerateFieldError.__name__ for e in self.errors):
            return EXIT_DEGENERATE
        return EXIT_INVALID if self.errors else EXIT_OK


# =============================================================================
# GEOMETRY HELPERS
# =============================================================================

def _cube_from(entry: Optional[Dict[str, Any]], n: int) -> Cube:
    if not entry:
        return Cube(tuple([0.0] * n), 1.0)
    if 'lo' in entry and 'hi' in entry:
        return Cube.from_bounds(entry['lo'], entry['hi'])
    if 'center' not in entry or 'half_side' not in entry:
        raise ConfigError("cube needs center/half_side or lo/hi", field="geometry.cube")
    return Cube(tuple(entry['center']), entry['half_side'])


def _domain_for(ctx: RunContext, u: Field) -> Cube:
    if ctx.geometry.get('domain') == 'periodic':
        return periodic_domain(u, ctx.knobs)
    return _cube_from(ctx.geometry.get('cube'), u.n)


def _radii(entry: Any) -> List[float]:
    if isinstance(entry, dict):
        return np.geomspace(entry['start'], entry['stop'], int(entry['count'])).tolist()
    return [float(r) for r in entry]


def _join(values) -> str:
    return ';'.join(repr(float(v)) for v in values)


# =============================================================================
# SUBCOMMAND RUNNERS
# =============================================================================

def run_freq(ctx: RunContext) -> None:
    rows, profiles = [], []
    radii = _radii(ctx.params.get('radii', [0.25, 0.5, 1.0]))
    for name, u in ctx.fields():
        try:
            center = ctx.geometry.get('center', [0.0] * u.n)
            profile = frequency_profile(u, center, radii, ctx.knobs)
        except LabError as e:
            ctx.record_error(name, e)
            continue
        profiles.append(profile)
        frame = profile.to_frame()
        frame.insert(0, 'field', name)
        rows.append(frame)
    if rows:
        ctx.csv(pd.concat(rows, ignore_index=True))
        ctx.json({'profiles': [p.to_dict() for p in profiles]})
        ctx.plot(profiles[0])


def run_doubling(ctx: RunContext) -> None:
    rows, cubes = [], []
    for name, u in ctx.fields():
        for ball in ctx.params.get('balls', []):
            try:
                report = doubling_index_ball(u, ball['center'], ball['r'], ctx.knobs)
            except LabError as e:
                ctx.record_error(f"{name} ball {ball}", e)
                continue
            rows.append({'field': name, 'region': 'ball', 'center': _join(report.center),
                         'radius': report.radius, 'N': report.N})
        if ctx.params.get('cube', True):
            try:
                Q = _domain_for(ctx, u)
                report = doubling_index_cube(u, Q, ctx.params.get('grid'), ctx.knobs)
            except LabError as e:
                ctx.record_error(f"{name} cube", e)
                continue
            cubes.append({'field': name, **report.to_dict()})
            rows.append({'field': name, 'region': 'cube', 'center': _join(report.argmax_center),
                         'radius': report.argmax_radius, 'N': report.N_of_Q})
    ctx.csv(pd.DataFrame(rows, columns=['field', 'region', 'center', 'radius', 'N']))
    ctx.json({'rows': rows, 'cubes': cubes})


def run_nodal(ctx: RunContext) -> None:
    rows = []
    methods = ctx.params.get('methods', ['marching', 'crofton'])
    plotted = False
    for name, u in ctx.fields():
        try:
            Q = _domain_for(ctx, u)
        except LabError as e:
            ctx.record_error(name, e)
            continue
        for method in methods:
            try:
                estimate = measure_nodal(u, Q, method, ctx.knobs)
            except LabError as e:
                ctx.record_error(f"{name} {method}", e)
                continue
            if estimate.degenerate:
                ctx.record_error(f"{name} {method}", DegenerateFieldError("field vanishes on the grid"))
            rows.append({'field': name, 'method': method, 'value': estimate.value,
                         'resolution': estimate.resolution, 'error_indicator': estimate.error_indicator,
                         'seed': estimate.seed, 'truth': u.nodal_measure})
        if ctx.params.get('thv'):
            try:
                point = thv_datapoint(u, Q, knobs=ctx.knobs)
                rows.append({'field': name, 'method': f"thv-{point.method}", 'value': point.density,
                             'resolution': None, 'error_indicator': None, 'seed': None, 'truth': point.N})
            except LabError as e:
                ctx.record_error(f"{name} thv", e)
        if not plotted and u.n == 2:
            try:
                ctx.plot(nodal_segments(u, Q, knobs=ctx.knobs))
                plotted = True
            except LabError as e:
                ctx.record_error(f"{name} segments", e)
    columns = ['field', 'method', 'value', 'resolution', 'error_indicator', 'seed', 'truth']
    ctx.csv(pd.DataFrame(rows, columns=columns))
    ctx.json({'estimates': rows})


def run_census(ctx: RunContext) -> None:
    summary, reports = [], []
    sub = ctx.params.get('subcube')
    plane = ctx.params.get('hyperplane')
    for name, u in ctx.fields():
        Q = _cube_from(ctx.geometry.get('cube'), u.n)
        for A in (sub or {}).get('A', []):
            try:
                report = subcube_census(u, Q, A, sub.get('c', 0.5), sub.get('N0'), ctx.knobs)
            except LabError as e:
                ctx.record_error(f"{name} subcube A={A}", e)
                continue
            reports.append({'field': name, **report.to_dict()})
            summary.append({'field': name, 'rule': report.rule, 'A': A, 'N_of_Q': report.N_of_Q,
                            'threshold': report.threshold, 'bad_count': report.bad_count,
                            'bound': report.bound, 'verdict': report.verdict})
            if len(reports) == 1:
                ctx.plot(report)
        for A1 in (plane or {}).get('A1', []):
            try:
                report = hyperplane_census(u, Q, A1, plane.get('N'), plane.get('axis'), plane.get('eps'), ctx.knobs)
            except LabError as e:
                ctx.record_error(f"{name} hyperplane A1={A1}", e)
                continue
            reports.append({'field': name, **report.to_dict()})
            summary.append({'field': name, 'rule': report.rule, 'A': A1, 'N_of_Q': report.N_of_Q,
                            'threshold': report.threshold, 'bad_count': report.bad_count,
                            'bound': report.bound, 'verdict': report.verdict})
    trees = []
    tree = ctx.params.get('tree')
    if tree:
        frames = []
        for offset in range(int(tree.get('runs', 1))):
            seed = ctx.knobs.seed + offset
            try:
                sim = simulate_bad_cube_tree(tree['A0'], tree['n'], tree['depth'], tree.get('j0', 0),
                                             seed, tree.get('mode', 'uniform'))
            except (LabError, KeyError) as e:
                ctx.record_error(f"tree seed={seed}", e if isinstance(e, LabError) else ConfigError(str(e)))
                continue
            trees.append(sim.to_dict())
            frame = sim.to_frame()
            frame.insert(0, 'seed', seed)
            frames.append(frame)
        if frames:
            ctx.csv(pd.concat(frames, ignore_index=True), '_tree.csv')
    columns = ['field', 'rule', 'A', 'N_of_Q', 'threshold', 'bad_count', 'bound', 'verdict']
    ctx.csv(pd.DataFrame(summary, columns=columns))
    ctx.json({'censuses': reports, 'trees': trees})


def run_simplex(ctx: RunContext) -> None:
    result: Dict[str, Any] = {}
    rows = []
    covering = ctx.params.get('covering')
    if covering:
        try:
            table = covering_table(covering['a_values'], covering.get('n', 2),
                                   covering.get('shape_samples', 8), ctx.knobs.seed, ctx.knobs)
            rows = table.to_dict('records')
        except LabError as e:
            ctx.record_error('covering', e)
    result['covering'] = rows
    checks = []
    for entry in ctx.params.get('checks', []):
        try:
            S = Simplex(tuple(map(tuple, entry['vertices'])))
            check = covering_check(S, entry['K'], entry['c1'], ctx.knobs)
            metrics = simplex_metrics(S, ctx.knobs.width_directions)
            checks.append({'vertices': entry['vertices'], 'K': entry['K'], 'c1': entry['c1'],
                           'holds': check.holds, 'margin': check.margin,
                           'relative_width': metrics.relative_width})
            if 'delta' in entry:
                d = entry['delta']
                report = delta_of_t(S, d['i'], d['rho'], d['t'])
                checks[-1]['delta'] = report.delta
        except LabError as e:
            ctx.record_error(f"check {entry}", e)
    result['checks'] = checks
    lemma = ctx.params.get('lemma')
    if lemma:
        lemma_rows = []
        for name, u in ctx.fields():
            try:
                if 'points' in lemma:
                    S = extract_wide_simplex(lemma['points']).simplex
                else:
                    S = Simplex(tuple(map(tuple, lemma['vertices'])))
                report = simplex_lemma_check(u, S, lemma['N'], lemma['c'], lemma['K'], lemma['C'], ctx.knobs)
                lemma_rows.append({'field': name, **vars(report)})
            except LabError as e:
                ctx.record_error(f"{name} lemma", e)
        result['lemma'] = lemma_rows
    ctx.csv(pd.DataFrame(rows, columns=['a', 'n', 'K', 'c1', 'margin']))
    ctx.json(result)


def run_smallness(ctx: RunContext) -> None:
    family = smallness_family(ctx.params.get('family', 'sinh_mode'),
                              ctx.params.get('k_values', list(range(4, 25, 2))), ctx.knobs.max_degree)
    if ctx.geometry.get('cube'):
        q = _cube_from(ctx.geometry['cube'], 2)
        face = Face(q, ctx.geometry.get('face_axis', 1), ctx.geometry.get('face_upper', False))
    else:
        q, face = default_geometry()
    report = smallness_experiment(family, q, face, ctx.knobs)
    C = envelope_constant(report, report.fitted_alpha)
    check = smallness_bound_check(report, C, report.fitted_alpha)
    ctx.csv(report.to_frame())
    ctx.json({'report': report.to_dict(), 'envelope_C': C, 'bound_check': vars(check)})
    ctx.plot(report)


def run_yau(ctx: RunContext) -> None:
    n = ctx.params.get('n', 2)
    method = ctx.params.get('method', 'marching')
    family = [make_torus_eigen(n, [m0] * n, max_degree=ctx.knobs.max_degree)
              for m0 in ctx.params.get('m0', [1, 2, 4, 8])]
    fit = yau_scaling_fit(family, method, ctx.knobs)
    frame = pd.DataFrame({'lambda': [p[0] for p in fit.points], 'volume': [p[1] for p in fit.points],
                          'truth': [u.nodal_measure for u in family]}, columns=['lambda', 'volume', 'truth'])
    ctx.csv(frame)
    ctx.json(fit.to_dict())
    ctx.plot(fit)


def run_exponent(ctx: RunContext) -> None:
    model = recursion_exponent(ctx.params.get('A', 2), ctx.params.get('c', 1.0),
                               ctx.params.get('N0', 1.0), ctx.params.get('levels', 64))
    ctx.csv(model.to_frame())
    ctx.json(model.to_dict())


RUNNERS: Dict[str, Callable[[RunContext], None]] = {
    'freq': run_freq,
    'doubling': run_doubling,
    'nodal': run_nodal,
    'census': run_census,
    'simplex': run_simplex,
    'smallness': run_smallness,
    'yau': run_yau,
    'exponent': run_exponent,
}


# =============================================================================
# ENTRY POINT
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Nodal set laboratory: batch experiments")
    parser.add_argument('experiment', choices=EXPERIMENT_KINDS, help="experiment to run")
    parser.add_argument('--config', required=True, help="JSON experiment configuration")
    parser.add_argument('--out', required=True, help="output directory")
    parser.add_argument('--seed', type=int, default=None, help="override numerics.seed")
    parser.add_argument('--threads', type=int, default=None, help="override numerics.threads (env LAB_THREADS)")
    parser.add_argument('--log-level', default=None, help="override LAB_LOG_LEVEL")
    return parser


@performance_monitor
def run(experiment: str, config_path: str, out_dir: str, seed: Optional[int] = None,
        threads: Optional[int] = None) -> int:
    try:
        config = load_experiment_config(config_path, {'seed': seed, 'threads': threads})
        if config.experiment != experiment:
            raise ConfigError(f"config is for {config.experiment!r}, not {experiment!r}", field="experiment")
    except ConfigError as e:
        logger.error(f"Invalid configuration {config_path}: {e}")
        print(f"{config_path}: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"Cannot read configuration {config_path}: {e}")
        return EXIT_INVALID

    ctx = RunContext(config, ensure_dir(out_dir))
    manifest = RunManifest(config_hash=config.config_hash(), config=config.to_dict())
    manifest.start()
    try:
        RUNNERS[experiment](ctx)
    except LabError as e:
        ctx.record_error(experiment, e)
    except KeyError as e:
        ctx.record_error(experiment, ConfigError(f"missing parameter {e}"))
    except (ValueError, TypeError) as e:
        ctx.record_error(experiment, ConfigError(f"malformed parameter: {e}"))
    if ctx.errors:
        ctx.outputs.append(write_json({'errors': ctx.errors}, os.path.join(out_dir, 'errors.json')))
    status = ctx.exit_status()
    manifest.finish(status)
    manifest.outputs = [os.path.basename(p) for p in ctx.outputs]
    write_json(manifest.to_dict(), os.path.join(out_dir, 'manifest.json'))
    logger.info(f"{experiment} finished with status {status}: {len(ctx.outputs)} outputs, {len(ctx.errors)} errors")
    return status


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    return run(args.experiment, args.config, args.out, args.seed, args.threads)


if __name__ == '__main__':
    sys.exit(main())
