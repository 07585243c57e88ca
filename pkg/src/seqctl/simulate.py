"""Monte Carlo for the posterior under a constant control.

Three equivalent representations of the same process are available:

* ``LOGIT_EXACT``: log-odds Y with exact Gaussian transitions (default);
* ``STRONG_X``: the raw observation X mapped through the likelihood ratio;
* ``PI_EULER``: the posterior SDE itself, Milstein or Euler-Maruyama.

Every path owns two counter-based Philox streams keyed by (seed, path index),
one for Gaussian increments and one (a jumped copy) for theta and bridge
uniforms, so results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, TextIO

import numpy as np

from . import _kernels
from .errors import ConfigError
from .geometry import psi

MAX_DT = 1e-2
T_MAX_FACTOR = 1e3


class ThetaMode(enum.Enum):
    BERNOULLI = "Bernoulli"
    FIXED0 = "Fixed0"
    FIXED1 = "Fixed1"


class Space(enum.Enum):
    PI_EULER = "PiEuler"
    LOGIT_EXACT = "LogitExact"
    STRONG_X = "StrongX"


class ExitSide(enum.IntEnum):
    LOWER = -1
    CENSORED = 0
    UPPER = 1

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo experiment.

    ``t_max=None`` caps each path at 1000 times the closed-form mean exit
    time.  ``scheme`` applies to ``PI_EULER`` only ("milstein" or "euler");
    ``bridge`` to the two log-odds based representations.
    """

    p: float
    u: float
    delta: float
    dt: float = 1e-4
    n_paths: int = 10_000
    t_max: Optional[float] = None
    seed: int = 0
    theta_mode: ThetaMode = ThetaMode.BERNOULLI
    space: Space = Space.LOGIT_EXACT
    bridge: bool = True
    scheme: str = "milstein"

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"prior p must lie in (0, 1), got {self.p}")
        if self.u == 0 or not math.isfinite(self.u):
            raise ConfigError(f"control u must be finite and nonzero, got {self.u}")
        if not 0.0 <= self.delta < 0.5:
            raise ConfigError(f"boundary delta must lie in [0, 1/2), got {self.delta}")
        if not 0.0 < self.dt <= MAX_DT:
            raise ConfigError(f"dt must lie in (0, {MAX_DT}], got {self.dt}")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be positive")
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if self.t_max is None and self.delta == 0.0:
            raise ConfigError("delta = 0 never exits; give an explicit t_max")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.scheme not in ("milstein", "euler"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")

    @property
    def horizon(self) -> float:
        if self.t_max is not None:
            return self.t_max
        if not self.delta < self.p < 1.0 - self.delta:
            return self.dt
        mean = 2.0 / (self.u * self.u) * (psi(self.p) - psi(self.delta))
        return max(T_MAX_FACTOR * mean, 10 * self.dt)

    @property
    def max_steps(self) -> int:
        return max(1, int(math.ceil(self.horizon / self.dt - 1e-9)))


@dataclass(frozen=True)
class PathOutcome:
    tau: float
    exit_side: ExitSide
    theta: int
    pi_at_exit: float

    @property
    def censored(self) -> bool:
        return self.exit_side is ExitSide.CENSORED


def _streams(seed: int, index: int):
    key = np.array([seed, index], dtype=np.uint64)
    bits = np.random.Philox(key=key)
    return np.random.Generator(bits), np.random.Generator(bits.jumped())


def _draw_theta(cfg: SimConfig, gu: np.random.Generator) -> int:
    if cfg.theta_mode is ThetaMode.FIXED0:
        return 0
    if cfg.theta_mode is ThetaMode.FIXED1:
        return 1
    return int(gu.random() < cfg.p)


def simulate_path(cfg: SimConfig, path_index: int) -> PathOutcome:
    """Run one path until the posterior leaves (delta, 1 - delta) or time runs out."""
    gw, gu = _streams(cfg.seed, path_index)
    theta = _draw_theta(cfg, gu)
    lo, hi = cfg.delta, 1.0 - cfg.delta
    if cfg.p <= lo:
        return PathOutcome(0.0, ExitSide.LOWER, theta, cfg.p)
    if cfg.p >= hi:
        return PathOutcome(0.0, ExitSide.UPPER, theta, cfg.p)

    nmax = cfg.max_steps
    if cfg.space is Space.LOGIT_EXACT:
        y0 = math.log(cfg.p) - math.log1p(-cfg.p)
        gamma = math.log(hi) - math.log(lo) if cfg.delta > 0 else math.inf
        drift = 0.5 * cfg.u * cfg.u * (2 * theta - 1)
        steps, side, y = _kernels.logit_path(gw, gu, y0, gamma, drift, cfg.u, cfg.dt, nmax, cfg.bridge)
        state = 1.0 / (1.0 + math.exp(-y)) if y > -700 else 0.0
    elif cfg.space is Space.STRONG_X:
        steps, side, state = _kernels.strongx_path(gw, gu, cfg.p, cfg.delta, float(theta), cfg.u, cfg.dt, nmax, cfg.bridge)
    else:
        steps, side, state = _kernels.pi_euler_path(
            gw, cfg.p, cfg.delta, float(theta), cfg.u, cfg.dt, nmax, cfg.scheme == "milstein"
        )
    side = ExitSide(int(side))
    # overshoot is clamped onto the barrier that was crossed
    if side is ExitSide.UPPER:
        state = hi
    elif side is ExitSide.LOWER:
        state = lo
    return PathOutcome(steps * cfg.dt, side, theta, float(state))


@dataclass(frozen=True)
class PathSamples:
    """Outcomes of paths 0..n-1 in index order."""

    theta: np.ndarray
    tau: np.ndarray
    exit_side: np.ndarray
    pi_at_exit: np.ndarray
    config: SimConfig

    @property
    def n(self) -> int:
        return int(self.tau.size)

    @property
    def censored(self) -> np.ndarray:
        return self.exit_side == ExitSide.CENSORED

    def subset(self, theta: int) -> "PathSamples":
        m = self.theta == theta
        return PathSamples(self.theta[m], self.tau[m], self.exit_side[m], self.pi_at_exit[m], self.config)


def _run_block(cfg: SimConfig, start: int, stop: int):
    out = np.empty((stop - start, 4))
    for j, i in enumerate(range(start, stop)):
        o = simulate_path(cfg, i)
        out[j] = (o.theta, o.tau, int(o.exit_side), o.pi_at_exit)
    return out


def simulate_paths(cfg: SimConfig, n_paths: Optional[int] = None, workers: int = 1) -> PathSamples:
    """Simulate ``n_paths`` (default ``cfg.n_paths``) independent paths.

    With ``workers > 1`` paths are split into contiguous blocks run on a
    thread pool; output is identical to the serial run.
    """
    n = cfg.n_paths if n_paths is None else int(n_paths)
    if workers <= 1 or n < 2 * workers:
        data = _run_block(cfg, 0, n)
    else:
        edges = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda ab: _run_block(cfg, ab[0], ab[1]), zip(edges[:-1], edges[1:])))
        data = np.concatenate(blocks)
    return PathSamples(
        theta=data[:, 0].astype(np.int8),
        tau=data[:, 1].copy(),
        exit_side=data[:, 2].astype(np.int8),
        pi_at_exit=data[:, 3].copy(),
        config=cfg,
    )


# -- estimators ---------------------------------------------------------------------


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n: int
    censored_count: int = 0

    @classmethod
    def from_values(cls, values: np.ndarray, censored_count: int = 0) -> "McEstimate":
        values = np.asarray(values, dtype=float)
        n = int(values.size)
        if n == 0:
            return cls(math.nan, math.nan, 0, censored_count)
        mean = float(np.mean(values))
        se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return cls(mean, se, n, censored_count)

    def within(self, target: float, k: float = 3.0) -> bool:
        """|mean - target| <= k standard errors."""
        return abs(self.mean - target) <= k * self.std_error

    def __str__(self) -> str:
        return f"{self.mean:.6g} +- {self.std_error:.2g} (n={self.n})"


def _with_start(cfg: SimConfig, pi_start: Optional[float]) -> SimConfig:
    return cfg if pi_start is None or pi_start == cfg.p else replace(cfg, p=float(pi_start))


def _warn_censored(count: int, n: int) -> None:
    if count:
        warnings.warn(f"{count} of {n} paths censored at t_max and excluded", RuntimeWarning, stacklevel=3)


def mc_expected_tau(
    cfg: SimConfig, pi_start: Optional[float] = None, *, samples: Optional[PathSamples] = None
) -> McEstimate:
    """Sample mean of the exit time; censored paths are excluded and counted."""
    s = samples if samples is not None else simulate_paths(_with_start(cfg, pi_start))
    cens = s.censored
    _warn_censored(int(cens.sum()), s.n)
    return McEstimate.from_values(s.tau[~cens], int(cens.sum()))


@dataclass(frozen=True)
class DecisionEstimates:
    p_upper_given_1: McEstimate
    p_upper_given_0: McEstimate
    type1: McEstimate
    type2: McEstimate
    power: McEstimate
    mean_tau_1: McEstimate
    mean_tau_0: McEstimate


def mc_decision_and_errors(
    cfg: SimConfig, pi_start: Optional[float] = None, *, samples: Optional[PathSamples] = None
) -> DecisionEstimates:
    """Exit-side frequencies and mean exit times split by the drawn theta.

    Upper exit rejects H0: theta = 0, so type1 = P(upper | 0),
    type2 = P(lower | 1) and power = P(upper | 1).
    """
    s = samples if samples is not None else simulate_paths(_with_start(cfg, pi_start))
    cens = s.censored
    _warn_censored(int(cens.sum()), s.n)
    est = {}
    for th in (0, 1):
        m = (s.theta == th) & ~cens
        c = int(((s.theta == th) & cens).sum())
        up = (s.exit_side[m] == ExitSide.UPPER).astype(float)
        est[th] = (McEstimate.from_values(up, c), McEstimate.from_values(1.0 - up, c), McEstimate.from_values(s.tau[m], c))
    return DecisionEstimates(
        p_upper_given_1=est[1][0],
        p_upper_given_0=est[0][0],
        type1=est[0][0],
        type2=est[1][1],
        power=est[1][0],
        mean_tau_1=est[1][2],
        mean_tau_0=est[0][2],
    )


def mc_laplace(
    cfg: SimConfig,
    pi_start: Optional[float],
    alphas: Sequence[float],
    *,
    samples: Optional[PathSamples] = None,
) -> list[McEstimate]:
    """Sample means of exp(-alpha tau) under a fixed theta."""
    if cfg.theta_mode is ThetaMode.BERNOULLI:
        raise ConfigError("Laplace estimates need theta_mode Fixed0 or Fixed1")
    s = samples if samples is not None else simulate_paths(_with_start(cfg, pi_start))
    cens = s.censored
    _warn_censored(int(cens.sum()), s.n)
    tau = s.tau[~cens]
    out = []
    for a in alphas:
        if a < 0:
            raise ConfigError(f"alpha must be nonnegative, got {a}")
        out.append(McEstimate.from_values(np.exp(-a * tau), int(cens.sum())))
    return out


def mc_strategy_cost(cfg: SimConfig, penalty, cost, pi_start: Optional[float] = None) -> McEstimate:
    """Realised cost g(Pi(tau)) + (phi(u) + c) tau of a constant-control threshold rule."""
    from .penalty import g_closed

    s = simulate_paths(_with_start(cfg, pi_start))
    run = float(cost.phi(cfg.u)) + cost.c
    vals = np.asarray(g_closed(penalty, np.clip(s.pi_at_exit, 0.0, 1.0))) + run * s.tau
    return McEstimate.from_values(vals, int(s.censored.sum()))


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    n: int
    censored: int

    @property
    def mass(self) -> np.ndarray:
        return self.counts / self.n if self.n else np.zeros_like(self.counts, dtype=float)

    @property
    def std_error(self) -> np.ndarray:
        m = self.mass
        return np.sqrt(m * (1.0 - m) / max(self.n, 1))


def mc_tau_density_histogram(
    cfg: SimConfig,
    pi_start: Optional[float] = None,
    bins: int | np.ndarray = 50,
    *,
    theta: Optional[int] = None,
    samples: Optional[PathSamples] = None,
) -> Histogram:
    """Histogram of uncensored exit times, as fractions of all paths of that theta.

    With an integer ``bins`` the edges span [0, max tau] uniformly.  ``theta``
    restricts to one value of theta (default: the fixed mode's theta, or all).
    """
    s = samples if samples is not None else simulate_paths(_with_start(cfg, pi_start))
    if theta is None and cfg.theta_mode is not ThetaMode.BERNOULLI:
        theta = 1 if cfg.theta_mode is ThetaMode.FIXED1 else 0
    if theta is not None:
        s = s.subset(theta)
    cens = s.censored
    tau = s.tau[~cens]
    if s.n == 0 or (tau.size and tau.max() == 0.0):
        nb = bins if isinstance(bins, int) else len(bins) - 1
        return Histogram(np.linspace(0.0, 1.0, nb + 1), np.zeros(nb, dtype=int), s.n, int(cens.sum()))
    if isinstance(bins, int):
        edges = np.linspace(0.0, float(tau.max()), bins + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    counts, _ = np.histogram(tau, bins=edges)
    return Histogram(edges, counts, s.n, int(cens.sum()))


# -- representation cross-check ------------------------------------------------


@dataclass(frozen=True)
class CrosscheckReport:
    """Pathwise gaps between representations driven by the same noise.

    ``euler_coarse`` and ``euler_fine`` hold, per path, the maximal gap over
    the time grid between the PiEuler posterior and the likelihood-ratio
    posterior at step ``dt`` and ``dt / 2``; ``ratio`` is the mean of their
    per-path ratios.  ``logit_vs_strongx`` is the largest gap between the two
    exact representations.
    """

    dt: float
    scheme: str
    euler_coarse: np.ndarray
    euler_fine: np.ndarray
    ratio: float
    logit_vs_strongx: float


def _expit(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _euler_track(dW: np.ndarray, dt: float, p: float, u: float, theta: np.ndarray, milstein: bool):
    """PiEuler posterior and likelihood-ratio posterior on a shared grid."""
    n_paths, n_steps = dW.shape
    pi = np.full(n_paths, p)
    x = np.zeros(n_paths)
    dev = np.zeros(n_paths)
    for k in range(n_steps):
        dx = theta * u * dt + dW[:, k]
        db = dx - u * pi * dt
        s = u * pi * (1.0 - pi)
        nxt = pi + s * db
        if milstein:
            nxt += 0.5 * s * u * (1.0 - 2.0 * pi) * (db * db - dt)
        pi = nxt
        x += dx
        with np.errstate(over="ignore"):
            L = np.exp(u * x - 0.5 * u * u * (k + 1) * dt)
            pl = np.where(np.isinf(L), 1.0, p * L / (p * L + 1.0 - p))
        dev = np.maximum(dev, np.abs(pi - pl))
    return dev


def crosscheck_representations(
    cfg_base: SimConfig, horizon: float = 5.0, n_paths: int = 64, *, scheme: Optional[str] = None
) -> CrosscheckReport:
    """Compare representations on shared Brownian paths over [0, horizon].

    Fine increments at dt / 2 are summed in pairs for the coarse grid, so the
    two PiEuler runs see the same path.  Boundaries are ignored here.
    """
    cfg = cfg_base
    scheme = scheme or cfg.scheme
    dt_f = cfg.dt / 2.0
    n_f = int(round(horizon / dt_f))
    n_f += n_f % 2
    dW = np.empty((n_paths, n_f))
    theta = np.empty(n_paths)
    for i in range(n_paths):
        gw, gu = _streams(cfg.seed, i)
        theta[i] = _draw_theta(cfg, gu)
        dW[i] = gw.standard_normal(n_f) * math.sqrt(dt_f)
    dW_c = dW[:, 0::2] + dW[:, 1::2]
    milstein = scheme == "milstein"
    coarse = _euler_track(dW_c, cfg.dt, cfg.p, cfg.u, theta, milstein)
    fine = _euler_track(dW, dt_f, cfg.p, cfg.u, theta, milstein)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = fine / coarse
    ratio = float(np.mean(ratios[np.isfinite(ratios)]))

    # exact representations on the coarse grid
    u, p = cfg.u, cfg.p
    t = cfg.dt * np.arange(1, dW_c.shape[1] + 1)
    y0 = math.log(p) - math.log1p(-p)
    drift = 0.5 * u * u * (2.0 * theta - 1.0)
    y = y0 + np.cumsum(drift[:, None] * cfg.dt + u * dW_c, axis=1)
    pi_logit = _expit(y)
    x = np.cumsum(theta[:, None] * u * cfg.dt + dW_c, axis=1)
    with np.errstate(over="ignore", invalid="ignore"):
        L = np.exp(u * x - 0.5 * u * u * t)
        pi_x = np.where(np.isinf(L), 1.0, p * L / (p * L + 1.0 - p))
    gap = float(np.max(np.abs(pi_logit - pi_x)))
    return CrosscheckReport(cfg.dt, scheme, coarse, fine, ratio, gap)


# -- output ---------------------------------------------------------------------------


SAMPLE_COLUMNS = ("path_index", "theta", "tau", "exit_side")


def write_samples_csv(samples: PathSamples, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SAMPLE_COLUMNS)
    for i in range(samples.n):
        writer.writerow([i, int(samples.theta[i]), repr(float(samples.tau[i])), ExitSide(int(samples.exit_side[i])).label])
