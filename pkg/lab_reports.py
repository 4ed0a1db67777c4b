"""
Report persistence: CSV and JSON writers and SVG plots for experiment results.
Output bytes depend only on the data passed in.
"""

import json
import logging
import math
import os
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from typing import Any

import matplotlib
matplotlib.use('Agg')  # For headless environments
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns
from matplotlib.collections import LineCollection

from census import CensusReport
from growth import FrequencyProfile
from lab_errors import InvalidInputError
from nodal import ScalingFit
from smallness import SmallnessReport

logger = logging.getLogger(__name__)

plt.rcParams['svg.hashsalt'] = 'nodal-lab'
plt.rcParams['svg.fonttype'] = 'path'


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become strings"""
    if hasattr(value, 'to_dict') and not isinstance(value, (pd.DataFrame, pd.Series)):
        return to_jsonable(value.to_dict())
    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def write_csv(frame: pd.DataFrame, path: str) -> str:
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(data: Any, path: str) -> str:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(to_jsonable(data), f, sort_keys=True, indent=2)
        f.write('\n')
    logger.info(f"Wrote {path}")
    return path


def _save(fig, path: str) -> str:
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    logger.info(f"Wrote plot {path}")
    return path


def _loglog_fit(ax, xs, ys, slope: float, intercept: float, xlabel: str, ylabel: str):
    ax.loglog(xs, ys, 'o', color='#007bff')
    grid = np.geomspace(min(xs), max(xs), 50)
    ax.loglog(grid, np.exp(intercept) * grid ** slope, '-', color='#28a745')
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.text(0.05, 0.92, f"slope = {slope:.4f}", transform=ax.transAxes, fontsize=10)


def emit_plot(report: Any, path: str) -> str:
    """Render a report as SVG: log-log fits, frequency profiles, census heatmaps, nodal lines"""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    try:
        if isinstance(report, ScalingFit):
            if len(report.points) < 2:
                raise InvalidInputError("scaling fit needs at least 2 points to plot")
            xs, ys = zip(*report.points)
            _loglog_fit(ax, xs, ys, report.fitted_exponent, report.intercept, 'eigenvalue', 'nodal volume')
        elif isinstance(report, FrequencyProfile):
            if len(report.radii) < 2:
                raise InvalidInputError("frequency profile needs at least 2 radii to plot")
            ax.plot(report.radii, report.beta_values, marker='o')
            ax.set_xlabel('r')
            ax.set_ylabel('beta(r)')
        elif isinstance(report, CensusReport):
            matrix = report.index_matrix
            if matrix.size < 2:
                raise InvalidInputError("census needs at least 2 subcubes to plot")
            if matrix.ndim == 1:
                matrix = matrix[None, :]
            elif matrix.ndim > 2:
                matrix = matrix[tuple([matrix.shape[0] // 2] * (matrix.ndim - 2))]
            sns.heatmap(matrix, ax=ax, cmap='viridis', cbar_kws={'label': 'doubling index'})
            ax.set_title(f"threshold {report.threshold:.3f}, bad {report.bad_count}")
        elif isinstance(report, SmallnessReport):
            _loglog_fit(ax, report.eps_values, report.sup_values, report.fitted_alpha,
                        math.log(report.fitted_C), 'eps', 'sup over q/2')
        elif isinstance(report, np.ndarray) and report.ndim == 3 and report.shape[1:] == (2, 2):
            if len(report) < 2:
                raise InvalidInputError("nodal set needs at least 2 segments to plot")
            ax.add_collection(LineCollection(report, colors='#007bff', linewidths=0.8))
            ax.autoscale()
            ax.set_aspect('equal')
        else:
            raise InvalidInputError(f"no plot available for {type(report).__name__}")
    except Exception:
        plt.close(fig)
        raise
    fig.tight_layout()
    return _save(fig, path)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
