"""Command line front end: ``seqctl {solve,simulate,stats,figures}``.

Problems are described in INI files; see README.md for the keys.  Exit codes:
0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import re
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from . import figures, simulate, solver, stats
from .control import ControlSet, CostModel, Interval, Point, Power, Quadratic, Table
from .errors import ConfigError, ConvergenceError, DomainError, NotApplicable
from .penalty import PenaltyModel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3

PENALTIES = {
    "classic": PenaltyModel.classic,
    "cross_entropy": PenaltyModel.cross_entropy,
    "l2": PenaltyModel.l2,
}


# -- config parsing ------------------------------------------------------------------


class _Source:
    """Parsed INI text that remembers where each key was written."""

    def __init__(self, text: str, name: str):
        self.name = name
        self.parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            self.parser.read_string(text, source=name)
        except configparser.ParsingError as exc:
            lineno, line = exc.errors[0] if exc.errors else ("?", "")
            # configparser hands back the offending line as a repr
            text = line.strip().strip("'\"").replace("\\n", "")
            raise ConfigError(f"{name}:{lineno}: cannot parse line: {text}") from None
        except configparser.Error as exc:
            lineno = getattr(exc, "lineno", "?")
            raise ConfigError(f"{name}:{lineno}: {exc.message if hasattr(exc, 'message') else exc}") from None
        self.lines: dict[tuple[str, str], int] = {}
        section = None
        for i, raw in enumerate(text.splitlines(), start=1):
            m = re.match(r"\s*\[([^\]]+)\]", raw)
            if m:
                section = m.group(1).strip()
                continue
            m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", raw)
            if m and section is not None:
                self.lines[(section, m.group(1).strip().lower())] = i

    def where(self, section: str, key: Optional[str] = None) -> str:
        if key is not None and (section, key) in self.lines:
            return f"{self.name}:{self.lines[(section, key)]}"
        return f"{self.name}: [{section}]"

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str, default=None, required: bool = False) -> Optional[str]:
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        if required:
            raise ConfigError(f"{self.where(section)}: missing required key '{key}'")
        return default

    def number(self, section: str, key: str, default=None, required: bool = False, kind=float):
        text = self.raw(section, key, None, required)
        if text is None:
            return default
        try:
            return kind(text)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: '{key}' must be a number, got {text!r}") from None

    def numbers(self, section: str, key: str) -> Optional[list[float]]:
        text = self.raw(section, key)
        if text is None:
            return None
        try:
            return [float(x) for x in text.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: '{key}' must be a list of numbers") from None


_NUM = r"[-+]?(?:inf|infinity|\d+(?:\.\d*)?(?:e[-+]?\d+)?|\.\d+(?:e[-+]?\d+)?)"


def parse_control_set(text: str) -> ControlSet:
    """Parse e.g. ``R\\0``, ``(0, inf)``, ``[1, 2] U {3, 4}``."""
    compact = text.strip().replace(" ", "")
    if compact.lower() in ("r\\0", "r\\{0}", "reals", "r"):
        return ControlSet.reals()
    pieces = []
    for part in re.split(r"[Uu]|∪", compact):
        if not part:
            raise ValueError("empty piece")
        m = re.fullmatch(r"\{(.*)\}", part)
        if m:
            pieces.extend(Point(float(x)) for x in m.group(1).split(",") if x)
            continue
        m = re.fullmatch(rf"([\[(])({_NUM}),({_NUM})([\])])", part, flags=re.IGNORECASE)
        if not m:
            raise ValueError(f"cannot read control piece {part!r}")
        pieces.append(Interval(float(m.group(2)), float(m.group(3)), m.group(1) == "[", m.group(4) == "]"))
    return ControlSet(tuple(pieces))


def _parse_table(text: str) -> Table:
    pairs = []
    for item in text.split(","):
        u, _, v = item.partition(":")
        pairs.append((float(u), float(v)))
    return Table(tuple(pairs))


@dataclass(frozen=True)
class ProblemConfig:
    penalty: PenaltyModel
    cost: CostModel
    uset: ControlSet


def read_problem(src: _Source) -> ProblemConfig:
    sec = "problem"
    if not src.parser.has_section(sec):
        raise ConfigError(f"{src.name}: missing [problem] section")
    name = src.raw(sec, "penalty", "classic").lower()
    if name not in PENALTIES:
        raise ConfigError(f"{src.where(sec, 'penalty')}: unknown penalty {name!r} (choose from {', '.join(PENALTIES)})")
    kind = src.raw(sec, "phi", "quadratic").lower()
    try:
        if kind == "quadratic":
            phi = Quadratic(src.number(sec, "a", required=True), src.number(sec, "b", 0.0))
        elif kind == "power":
            phi = Power(src.number(sec, "coef", required=True), src.number(sec, "exponent", required=True))
        elif kind == "table":
            phi = _parse_table(src.raw(sec, "table", required=True))
        else:
            raise ConfigError(f"{src.where(sec, 'phi')}: unknown cost {kind!r} (quadratic, power, table)")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{src.where(sec, 'table')}: malformed table: {exc}") from None
    c = src.number(sec, "c", required=True)
    if not c > 0:
        raise ConfigError(f"{src.where(sec, 'c')}: time cost c must be positive, got {c}")
    try:
        uset = parse_control_set(src.raw(sec, "controls", "R\\0"))
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"{src.where(sec, 'controls')}: invalid control set: {exc}") from None
    return ProblemConfig(PENALTIES[name](), CostModel(phi, c), uset)


def _load(path: str) -> _Source:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return _Source(text, path)


# -- commands ------------------------------------------------------------------------------


def _out_dir(args, src: Optional[_Source]) -> Optional[str]:
    out = args.out or (src.raw("output", "dir") if src is not None else None)
    if out:
        os.makedirs(out, exist_ok=True)
    return out


def _format(args, src: Optional[_Source]) -> str:
    fmt = args.format or (src.raw("output", "format") if src is not None else None) or "json"
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output format must be csv or json, got {fmt!r}")
    return fmt


def _solve(prob: ProblemConfig) -> solver.Solution:
    return solver.solve(prob.penalty, prob.cost, prob.uset)


def cmd_solve(args) -> int:
    src = _load(args.config)
    prob = read_problem(src)
    sol = _solve(prob)
    print(solver.summary(sol))
    out, fmt = _out_dir(args, src), _format(args, src)
    if out:
        if fmt == "json":
            path = os.path.join(out, "solution.json")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(solver.to_json(sol))
        else:
            path = os.path.join(out, "solution.csv")
            d = solver.to_dict(sol)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("pi", "value"))
                for p, v in d["value_samples"]:
                    w.writerow((repr(p), v if isinstance(v, str) else repr(v)))
        print(f"wrote {path}")
    return EXIT_OK


def _table(rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)


def _sim_config(src: _Source, args) -> simulate.SimConfig:
    sec = "simulate"
    if not src.parser.has_section(sec):
        raise ConfigError(f"{src.name}: missing [simulate] section")
    seed = args.seed if args.seed is not None else src.number(sec, "seed", kind=int)
    if seed is None:
        raise ConfigError(f"{src.where(sec)}: a seed is required (key 'seed' or --seed)")
    theta = src.raw(sec, "theta", "Bernoulli")
    space = src.raw(sec, "space", "LogitExact")
    try:
        theta_mode = simulate.ThetaMode(theta)
    except ValueError:
        raise ConfigError(f"{src.where(sec, 'theta')}: theta must be Bernoulli, Fixed0 or Fixed1") from None
    try:
        space_mode = simulate.Space(space)
    except ValueError:
        raise ConfigError(f"{src.where(sec, 'space')}: space must be LogitExact, StrongX or PiEuler") from None
    bridge = src.raw(sec, "bridge", "true").lower()
    if bridge not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
        raise ConfigError(f"{src.where(sec, 'bridge')}: bridge must be a boolean")
    values = dict(
        p=src.number(sec, "p", required=True),
        u=src.number(sec, "u", required=True),
        delta=src.number(sec, "delta", required=True),
        dt=args.dt if args.dt is not None else src.number(sec, "dt", 1e-3),
        n_paths=args.paths if args.paths is not None else src.number(sec, "paths", 10_000, kind=int),
        t_max=src.number(sec, "t_max"),
        seed=seed,
        theta_mode=theta_mode,
        space=space_mode,
        bridge=bridge in ("true", "yes", "1", "on"),
        scheme=src.raw(sec, "scheme", "milstein"),
    )
    try:
        return simulate.SimConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{src.where(sec)}: {exc}") from None


def _fmt_est(e: simulate.McEstimate) -> str:
    return f"{e.mean:.6f} +- {e.std_error:.6f}" if e.n else "n/a"


def cmd_simulate(args) -> int:
    src = _load(args.config)
    cfg = _sim_config(src, args)
    alphas = src.numbers("simulate", "alphas") or []
    if alphas and cfg.theta_mode is simulate.ThetaMode.BERNOULLI:
        raise ConfigError(f"{src.where('simulate', 'alphas')}: Laplace estimates need theta = Fixed0 or Fixed1")
    samples = simulate.simulate_paths(cfg)
    rows = [("quantity", "monte carlo", "closed form")]
    summary: dict = {"config": {k: (v.value if hasattr(v, "value") else v) for k, v in cfg.__dict__.items()}}
    A, pi, u = cfg.delta, cfg.p, cfg.u
    interior = 0.0 < A < pi < 1.0 - A
    tau = simulate.mc_expected_tau(cfg, samples=samples)
    closed = {"E[tau]": stats.unconditional_mean_tau(A, pi, u) if interior else math.nan}
    if cfg.theta_mode is not simulate.ThetaMode.BERNOULLI:
        th = 1 if cfg.theta_mode is simulate.ThetaMode.FIXED1 else 0
        label = f"E[tau | theta={th}]"
        closed[label] = stats.conditional_mean_tau(A, pi, u)[1 - th] if interior else math.nan
        rows.append((label, _fmt_est(tau), f"{closed[label]:.6f}"))
        summary[label] = tau.__dict__
    else:
        rows.append(("E[tau]", _fmt_est(tau), f"{closed['E[tau]']:.6f}"))
        summary["E[tau]"] = tau.__dict__
        dec = simulate.mc_decision_and_errors(cfg, samples=samples)
        p1, p0 = stats.decision_probabilities(A, pi) if interior else (math.nan, math.nan)
        m1, m0 = stats.conditional_mean_tau(A, pi, u) if interior else (math.nan, math.nan)
        for label, est, ref in (
            ("P(upper | theta=1)", dec.p_upper_given_1, p1),
            ("P(upper | theta=0)", dec.p_upper_given_0, p0),
            ("E[tau | theta=1]", dec.mean_tau_1, m1),
            ("E[tau | theta=0]", dec.mean_tau_0, m0),
        ):
            rows.append((label, _fmt_est(est), f"{ref:.6f}"))
            summary[label] = est.__dict__
    if alphas:
        th = 1 if cfg.theta_mode is simulate.ThetaMode.FIXED1 else 0
        for a, est in zip(alphas, simulate.mc_laplace(cfg, None, alphas, samples=samples)):
            ref = stats.laplace_tau(A, pi, u, a, th) if interior else math.nan
            label = f"E[exp(-{a:g} tau) | theta={th}]"
            rows.append((label, _fmt_est(est), f"{ref:.6f}"))
            summary[label] = est.__dict__
    rows.append(("censored paths", str(int(samples.censored.sum())), ""))
    print(_table(rows))
    out = _out_dir(args, src)
    if out:
        with open(os.path.join(out, "simulate.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
        with open(os.path.join(out, "samples.csv"), "w", newline="", encoding="utf-8") as fh:
            simulate.write_samples_csv(samples, fh)
        print(f"wrote {out}/simulate.json and {out}/samples.csv")
    return EXIT_OK


def cmd_stats(args) -> int:
    src = _load(args.config)
    sec = "stats"
    if not src.parser.has_section(sec):
        raise ConfigError(f"{src.name}: missing [stats] section")
    pi = src.number(sec, "pi", required=True)
    A, u = src.number(sec, "A"), src.number(sec, "u")
    if A is None or u is None:
        if not src.parser.has_section("problem"):
            raise ConfigError(f"{src.where(sec)}: give 'A' and 'u' or a [problem] section to solve")
        sol = _solve(read_problem(src))
        if sol.regime is not solver.Regime.POSITIVE or not sol.attained:
            raise NotApplicable(f"problem regime {sol.regime.value} has no optimal threshold test")
        A = sol.A_star if A is None else A
        u = sol.u_star if u is None else u
    ch = stats.characteristics_for(A, pi, u)
    rows = [("quantity", "value")]
    for name in ("p_upper_1", "p_upper_0", "mean_tau_1", "mean_tau_0", "type1", "type2", "power"):
        rows.append((name, f"{getattr(ch, name):.10g}"))
    result = {"A": A, "pi": pi, "u": u, **{k: getattr(ch, k) for k in ch.__dataclass_fields__}}
    alphas = src.numbers(sec, "alphas") or []
    inside = 0.0 < A < 0.5 and A <= pi <= 1.0 - A
    for a in alphas:
        for th in (1, 0):
            val = stats.laplace_tau(A, pi, u, a, th) if inside else 1.0
            rows.append((f"E[exp(-{a:g} tau) | theta={th}]", f"{val:.10g}"))
            result[f"laplace_{a:g}_{th}"] = val
    print(_table(rows))
    out, fmt = _out_dir(args, src), _format(args, src)
    if out:
        if fmt == "json":
            path = os.path.join(out, "stats.json")
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(result, fh, indent=2)
        else:
            path = os.path.join(out, "stats.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                stats.write_characteristics_csv([(pi, ch)], fh)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_figures(args) -> int:
    src = _load(args.config) if args.config else None
    n = src.number("figures", "points", 50, kind=int) if src is not None else 50
    out = _out_dir(args, src) or "figures"
    os.makedirs(out, exist_ok=True)
    fmt = args.format or (src.raw("output", "format") if src is not None else None) or "csv"
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output format must be csv or json, got {fmt!r}")
    try:
        paths = figures.write_all(out, fmt, n)
    except (DomainError, NotApplicable) as exc:
        raise ConvergenceError(f"figure sweep failed: {exc}") from exc
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI problem/run description")
    common.add_argument("--out", metavar="DIR", help="directory for output files")
    common.add_argument("--format", choices=("csv", "json"), help="output file format")

    parser = argparse.ArgumentParser(prog="seqctl", description="Controlled Bayesian sequential testing toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="optimal control, boundary and value function")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo against closed forms")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    p.add_argument("--paths", type=int, help="number of paths")
    p.add_argument("--dt", type=float, help="time step")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("stats", parents=[common], help="closed-form test characteristics")
    p.set_defaults(func=cmd_stats)
    p = sub.add_parser("figures", parents=[common], help="regenerate the figure data")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "figures" and not args.config:
        parser.error(f"{args.command} requires --config")
    try:
        return args.func(args)
    except (ConfigError, NotApplicable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
