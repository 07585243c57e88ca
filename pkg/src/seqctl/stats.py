"""Closed-form operating characteristics of the two-threshold test.

Under a constant control u the log-odds Y = log(Pi / (1 - Pi)) is, given
theta, a Brownian motion with drift (2 theta - 1) u^2 / 2 and volatility |u|.
The test stops when Y leaves (-G, G) with G = log((1 - A) / A), so every
quantity below is a two-barrier exit functional of a drifted Brownian motion.
Only u^2 enters, hence the sign of the control is irrelevant here.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO

import numpy as np

from .control import Regime
from .errors import DomainError, NotApplicable, TruncationWarning
from .geometry import psi

DEFAULT_TRUNCATION = 50
REL_TERM_TOL = 1e-16


def _check(A: float, pi: float, u: Optional[float] = None) -> None:
    if not 0.0 < A < 0.5:
        raise DomainError(f"boundary A must lie in (0, 1/2), got {A}")
    if not A <= pi <= 1.0 - A:
        raise DomainError(f"prior {pi} outside [A, 1 - A] = [{A}, {1 - A}]")
    if u is not None and (u == 0 or not math.isfinite(u)):
        raise DomainError(f"control must be finite and nonzero, got {u}")


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def decision_probabilities(A: float, pi: float) -> tuple[float, float]:
    """P(exit at 1 - A | theta = 1) and P(exit at 1 - A | theta = 0)."""
    _check(A, pi)
    span = 1.0 - 2.0 * A
    return (1.0 - A) * (pi - A) / (span * pi), A * (pi - A) / (span * (1.0 - pi))


def conditional_mean_tau(A: float, pi: float, u: float) -> tuple[float, float]:
    """E[tau | theta = 1] and E[tau | theta = 0]."""
    _check(A, pi, u)
    G = math.log((1.0 - A) / A)
    shift = math.log((1.0 - A) * pi / (A * (1.0 - pi)))  # y + G
    p1, p0 = decision_probabilities(A, pi)
    scale = 2.0 / (u * u)
    mean_1 = scale * (2.0 * G * p1 - shift)
    mean_0 = scale * (shift - 2.0 * G * p0)
    # the exact zeros at pi = A or 1 - A can come out as -1e-17
    return max(mean_1, 0.0), max(mean_0, 0.0)


def unconditional_mean_tau(A: float, pi: float, u: float) -> float:
    """E[tau] = (2 / u^2) (Psi(pi) - Psi(A))."""
    _check(A, pi, u)
    return 2.0 / (u * u) * (psi(pi) - psi(A))


def _sinh_ratio(a: float, b: float) -> float:
    """sinh(a) / sinh(b) for 0 <= a <= b, b > 0, without overflow."""
    if a == 0.0:
        return 0.0
    return math.exp(a - b) * math.expm1(-2.0 * a) / math.expm1(-2.0 * b)


def laplace_tau(A: float, pi: float, u: float, alpha: float, theta: int) -> float:
    """E[exp(-alpha tau) | theta].

    Defined for alpha > -u^2 / 8, where the transform is still finite;
    negative alphas are accepted so that derivatives at 0 can be taken by
    central differences.
    """
    _check(A, pi, u)
    if theta not in (0, 1):
        raise DomainError(f"theta must be 0 or 1, got {theta}")
    if not alpha > -u * u / 8.0:
        raise DomainError(f"alpha must exceed -u^2/8 = {-u * u / 8.0}, got {alpha}")
    G = math.log((1.0 - A) / A)
    y = _logit(pi)
    beta = math.sqrt(2.0 * alpha / (u * u) + 0.25)
    mu = theta - 0.5
    lo, hi = y + G, G - y
    # drift tilt times the scale-function ratio for each barrier
    upper = math.exp(mu * hi) * _sinh_ratio(lo * beta, 2.0 * G * beta)
    lower = math.exp(-mu * lo) * _sinh_ratio(hi * beta, 2.0 * G * beta)
    return upper + lower


# -- densities ------------------------------------------------------------------


@dataclass(frozen=True)
class DensitySeries:
    """Conditional density of tau given theta as an image-charge series."""

    A: float
    pi: float
    u: float
    theta: int
    truncation_K: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        _check(self.A, self.pi, self.u)
        if self.theta not in (0, 1):
            raise DomainError(f"theta must be 0 or 1, got {self.theta}")
        if self.truncation_K < 1:
            raise DomainError("truncation_K must be positive")

    def __call__(self, t):
        return tau_density(self, t)


def _first_passage_sum(d: float, w: float, log_pref: np.ndarray, s: np.ndarray, K: int) -> tuple[np.ndarray, bool]:
    """sum_k (d + 2kw) / sqrt(2 pi s^3) exp(-(d + 2kw)^2 / (2 s)) times exp(log_pref).

    Terms are formed in log space; returns the sum and a convergence flag.
    """
    base = log_pref - 0.5 * math.log(2.0 * math.pi) - 1.5 * np.log(s)

    def term(k: int) -> np.ndarray:
        x = d + 2.0 * k * w
        if x == 0.0:
            return np.zeros_like(s)
        return math.copysign(1.0, x) * np.exp(base + math.log(abs(x)) - x * x / (2.0 * s))

    total = term(0)
    converged = False
    for k in range(1, K + 1):
        tk = term(k) + term(-k)
        total = total + tk
        scale = np.maximum(np.abs(total), np.finfo(float).tiny)
        if np.all(np.abs(tk) <= REL_TERM_TOL * scale):
            converged = True
            break
    return total, converged


def tau_density(series: DensitySeries, t):
    """Density of tau given theta at times t > 0 (0 at t <= 0)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t_arr)
    pos = t_arr > 0.0
    if np.any(pos):
        A, pi, u = series.A, series.pi, series.u
        G = math.log((1.0 - A) / A)
        y = _logit(pi)
        sign = 2 * series.theta - 1
        u2 = u * u
        s = u2 * t_arr[pos]
        d_lo, d_up, w = y + G, G - y, 2.0 * G
        common = math.log(u2) - s / 8.0
        # Girsanov weights exp(-drift/sigma * distance) fold into the prefactors
        lo_sum, ok_lo = _first_passage_sum(d_lo, w, common - sign * d_lo / 2.0, s, series.truncation_K)
        up_sum, ok_up = _first_passage_sum(d_up, w, common + sign * d_up / 2.0, s, series.truncation_K)
        if not (ok_lo and ok_up):
            warnings.warn(
                f"density series not converged within K={series.truncation_K} terms",
                TruncationWarning,
                stacklevel=2,
            )
        out[pos] = np.maximum(lo_sum + up_sum, 0.0)
    return float(out[0]) if np.ndim(t) == 0 else out


def exit_time_cdf_mass(series: DensitySeries, t0: float, t1: float) -> float:
    """Probability that tau falls in [t0, t1] by adaptive quadrature of the series."""
    from scipy.integrate import quad

    val, _ = quad(lambda x: tau_density(series, x), max(t0, 0.0), t1, limit=200, epsabs=1e-13, epsrel=1e-11)
    return float(val)


# -- operating characteristics ----------------------------------------------------


@dataclass(frozen=True)
class TestCharacteristics:
    """Error rates and mean durations of the threshold test for H0: theta = 0.

    Upper exit rejects H0.  Starting outside the continuation region stops at
    once: at or above 1 - A the test rejects (type1 = 1, type2 = 0), at or
    below A it accepts (type1 = 0, type2 = 1).
    """

    __test__ = False  # not a pytest class

    A: float
    pi: float
    u: float
    p_upper_1: float
    p_upper_0: float
    mean_tau_1: float
    mean_tau_0: float
    type1: float
    type2: float
    power: float


def characteristics_for(A: float, pi: float, u: float) -> TestCharacteristics:
    if not 0.0 < pi < 1.0:
        raise DomainError(f"prior must lie in (0, 1), got {pi}")
    if A >= 0.5 or pi <= A or pi >= 1.0 - A:
        up = 1.0 if pi >= 0.5 and pi >= 1.0 - A else 0.0
        return TestCharacteristics(A, pi, u, up, up, 0.0, 0.0, up, 1.0 - up, up)
    p1, p0 = decision_probabilities(A, pi)
    m1, m0 = conditional_mean_tau(A, pi, u)
    return TestCharacteristics(A, pi, u, p1, p0, m1, m0, p0, 1.0 - p1, p1)


def characteristics(sol, pi: float) -> TestCharacteristics:
    """Operating characteristics of the optimal test started at prior pi."""
    if sol.regime is not Regime.POSITIVE or not sol.attained:
        raise NotApplicable("characteristics need M > 0 with an attained optimal control")
    return characteristics_for(sol.A_star, pi, sol.u_star)


CHARACTERISTIC_COLUMNS = ("parameter", "type1", "type2", "power", "mean_tau_1", "mean_tau_0")


def write_characteristics_csv(rows: Iterable[tuple[float, TestCharacteristics]], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CHARACTERISTIC_COLUMNS)
    for param, ch in rows:
        writer.writerow([repr(float(param))] + [repr(float(getattr(ch, c))) for c in CHARACTERISTIC_COLUMNS[1:]])
