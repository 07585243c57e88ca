"""Data behind the quadratic-cost figures.

All sweeps use the classic penalty, phi(u) = a u^2 + b u on R without 0, and
closed-form evaluation only, so the output is deterministic.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Sequence

import numpy as np

from .control import ControlSet, CostModel, Quadratic
from .penalty import PenaltyModel
from .solver import Solution, eval_value, solve
from .stats import CHARACTERISTIC_COLUMNS, DensitySeries, characteristics, conditional_mean_tau, tau_density

FIG1_COLUMNS = ("sweep", "parameter", "a", "b", "c", "M", "u_star", "A_star", "upper")
FIG2_COLUMNS = ("sweep", "parameter", "pi", "value")
FIG3_DENSITY_COLUMNS = ("b", "theta", "t", "density")

FIG3_B = (1.28, 1.31, 1.34, 1.37, 1.4)
FIG3_PI = 0.625
B_LIMIT_GAP = 1e-6
A_LIMIT = 1e4


def quadratic_preset(a: float, b: float, c: float) -> Solution:
    return solve(PenaltyModel.classic(), CostModel(Quadratic(a, b), c), ControlSet.reals())


def _nan(x):
    return math.nan if x is None else float(x)


def fig1_rows(n: int = 50) -> list[dict]:
    """Boundaries along the a, b and c sweeps (plus a row next to b = 2)."""
    sweeps = {
        "a": [(a, 1.0, 1.0) for a in np.linspace(0.3, 5.0, n)],
        "b": [(1.0, b, 1.0) for b in np.linspace(0.0, 2.0, n, endpoint=False)] + [(1.0, 2.0 - B_LIMIT_GAP, 1.0)],
        "c": [(1.0, 1.0, c) for c in np.linspace(0.3, 5.0, n)],
    }
    rows = []
    for name, params in sweeps.items():
        for a, b, c in params:
            sol = quadratic_preset(a, b, c)
            par = {"a": a, "b": b, "c": c}[name]
            rows.append(
                {
                    "sweep": name,
                    "parameter": float(par),
                    "a": float(a),
                    "b": float(b),
                    "c": float(c),
                    "M": float(sol.M),
                    "u_star": _nan(sol.u_star),
                    "A_star": float(sol.A_star),
                    "upper": 1.0 - float(sol.A_star),
                }
            )
    return rows


def fig2_rows(n_curves: int = 20, n_pi: int = 201) -> list[dict]:
    """V(pi) for a in [1/4, 5] (b = c = 1), b in [0, 2] (a = c = 1), and a = 1e4."""
    pis = np.linspace(0.0, 1.0, n_pi)
    curves = [("a", a, (a, 1.0, 1.0)) for a in np.linspace(0.25, 5.0, n_curves)]
    curves += [("b", b, (1.0, b, 1.0)) for b in np.linspace(0.0, 2.0, n_curves)]
    curves += [("a_limit", A_LIMIT, (A_LIMIT, 1.0, 1.0))]
    rows = []
    for name, par, (a, b, c) in curves:
        vals = eval_value(quadratic_preset(a, b, c), pis)
        rows.extend({"sweep": name, "parameter": float(par), "pi": float(p), "value": float(v)} for p, v in zip(pis, vals))
    return rows


def fig3_density_rows(n_t: int = 400) -> list[dict]:
    """Conditional exit-time densities at pi = 0.625, a = 1/2, c = 1."""
    rows = []
    for b in FIG3_B:
        sol = quadratic_preset(0.5, b, 1.0)
        A, u = sol.A_star, sol.u_star
        t_hi = 6.0 * max(conditional_mean_tau(A, FIG3_PI, u))
        ts = np.linspace(t_hi / n_t, t_hi, n_t)
        for theta in (0, 1):
            dens = tau_density(DensitySeries(A, FIG3_PI, u, theta), ts)
            rows.extend({"b": b, "theta": theta, "t": float(t), "density": float(d)} for t, d in zip(ts, dens))
    return rows


def fig3_error_rows(n: int = 60) -> list[dict]:
    """Error rates and mean durations for b in [1, sqrt(2) - 1e-4]."""
    rows = []
    for b in np.linspace(1.0, math.sqrt(2.0) - 1e-4, n):
        ch = characteristics(quadratic_preset(0.5, float(b), 1.0), FIG3_PI)
        rows.append({"parameter": float(b), **{k: float(getattr(ch, k)) for k in CHARACTERISTIC_COLUMNS[1:]}})
    return rows


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_rows(rows: Sequence[dict], columns: Sequence[str], path: str, fmt: str = "csv") -> str:
    """Write rows as CSV (header + repr floats) or as a JSON list; returns the path."""
    if fmt == "json":
        path = os.path.splitext(path)[0] + ".json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([{k: r[k] for k in columns} for r in rows], fh, indent=1, allow_nan=True)
        return path
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_fmt(r[k]) for k in columns])
    return path


def write_all(out_dir: str, fmt: str = "csv", n: int = 50) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    jobs = [
        ("fig1_boundaries.csv", fig1_rows(n), FIG1_COLUMNS),
        ("fig2_value.csv", fig2_rows(), FIG2_COLUMNS),
        ("fig3_densities.csv", fig3_density_rows(), FIG3_DENSITY_COLUMNS),
        ("fig3_errors.csv", fig3_error_rows(), CHARACTERISTIC_COLUMNS),
    ]
    return [write_rows(rows, cols, os.path.join(out_dir, name), fmt) for name, rows, cols in jobs]
