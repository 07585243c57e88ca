"""Value function, optimal policy and verification for the controlled test.

Everything hinges on M = inf eta over the control set:

* M > 0: V = 2M (Psi(pi) - Psi(A*)) + g(A*) on (A*, 1 - A*) and g elsewhere,
  where A* is the smallest root in (0, 1/2] of g' = 2M Psi';
* M = 0: V is identically 0 (observe forever, or nearly so);
* M < 0: V is identically -inf (observing earns money).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import control
from .control import ControlSet, CostModel, EtaSolution, Regime, eta, gap_infimum, minimize_eta
from .errors import DomainError, NotApplicable
from .geometry import psi, psi1, solve_boundary
from .penalty import PenaltyModel, eval_g, eval_Lg, g1_left_half, g_closed

VI_GRID = 4096
VI_EXCLUDE = 1e-6
VALUE_SAMPLES = 512
EPS_TERMS = 60


class PolicyKind(enum.Enum):
    CONSTANT_CONTROL_AND_THRESHOLD = "ConstantControlAndThreshold"
    EPSILON_OPTIMAL_FAMILY = "EpsilonOptimalFamily"
    STOP_IMMEDIATELY = "StopImmediately"
    NEVER_STOP = "NeverStop"


@dataclass(frozen=True)
class PolicyDescription:
    """How to act.

    ``A_star = 0`` means the threshold is never reached (tau = inf) and
    ``A_star = 1/2`` means stop at once.  ``epsilon_recipe`` lists
    (u_n, delta_n) pairs whose cost converges to the value; for M = 0 the
    pairs depend on the prior, see :func:`epsilon_strategy`.
    """

    kind: PolicyKind
    u_star: Optional[float]
    A_star: float
    epsilon_recipe: Optional[tuple[tuple[float, float], ...]] = None


@dataclass(frozen=True)
class ControlProblem:
    penalty: PenaltyModel
    cost: CostModel
    uset: ControlSet


@dataclass(frozen=True)
class Solution:
    regime: Regime
    M: float
    K: float
    A_star: float
    eta_solution: EtaSolution
    policy: PolicyDescription
    problem: ControlProblem

    def value(self, pi):
        return eval_value(self, pi)

    @property
    def u_star(self) -> Optional[float]:
        return self.eta_solution.u_star

    @property
    def attained(self) -> bool:
        return self.eta_solution.attained


def _positive_recipe(es: EtaSolution, A: float, n_terms: int = EPS_TERMS) -> tuple[tuple[float, float], ...]:
    seq = es.sequence(n_terms)
    return tuple((float(u), A + (0.5 - A) * 2.0 ** (-n)) for n, u in enumerate(seq, start=1))


def _negative_control(es: EtaSolution, cost: CostModel) -> float:
    if es.attained:
        return float(es.u_star)
    for u in es.sequence():
        if float(eta(cost, u)) < 0.0:
            return float(u)
    raise NotApplicable("no control with negative eta found along the minimising sequence")


def solve(penalty: PenaltyModel, cost: CostModel, uset: ControlSet, *, grid_n: int = control.GRID_POINTS) -> Solution:
    """Three-regime solution of the controlled sequential test."""
    es = minimize_eta(cost, uset, grid_n=grid_n)
    problem = ControlProblem(penalty, cost, uset)
    if es.regime is Regime.POSITIVE:
        K = 2.0 * es.M
        A = solve_boundary(penalty, K)
        if A >= 0.5:
            policy = PolicyDescription(PolicyKind.STOP_IMMEDIATELY, es.u_star, 0.5)
        elif es.attained:
            policy = PolicyDescription(PolicyKind.CONSTANT_CONTROL_AND_THRESHOLD, es.u_star, A)
        else:
            policy = PolicyDescription(PolicyKind.EPSILON_OPTIMAL_FAMILY, None, A, _positive_recipe(es, A))
        return Solution(es.regime, es.M, K, A, es, policy, problem)
    if es.regime is Regime.ZERO:
        if es.attained:
            # tau at A* = 0 never fires: keep observing with u*
            policy = PolicyDescription(PolicyKind.CONSTANT_CONTROL_AND_THRESHOLD, es.u_star, 0.0)
        else:
            policy = PolicyDescription(PolicyKind.EPSILON_OPTIMAL_FAMILY, None, 0.0)
        return Solution(es.regime, 0.0, 0.0, 0.0, es, policy, problem)
    u = _negative_control(es, cost)
    policy = PolicyDescription(PolicyKind.NEVER_STOP, u, 0.0)
    return Solution(es.regime, es.M, 0.0, 0.0, es, policy, problem)


def eval_value(sol: Solution, pi):
    """V(pi) on [0, 1]; -inf throughout when M < 0."""
    p = np.asarray(pi, dtype=float)
    if np.any((p < 0.0) | (p > 1.0) | np.isnan(p)):
        raise DomainError(f"probability must lie in [0, 1], got {pi!r}")
    if sol.regime is Regime.NEGATIVE:
        out = np.full_like(p, -np.inf)
    elif sol.regime is Regime.ZERO:
        out = np.zeros_like(p)
    else:
        penalty, A = sol.problem.penalty, sol.A_star
        out = np.asarray(g_closed(penalty, p), dtype=float).copy()
        inside = (p > A) & (p < 1.0 - A)
        if np.any(inside):
            out[inside] = sol.K * (np.asarray(psi(p[inside])) - psi(A)) + eval_g(penalty, A)
    return float(out) if p.ndim == 0 else out


# -- verification of the variational inequalities ----------------------------


@dataclass(frozen=True)
class VIReport:
    """Maximal violations of the three variational inequalities on a grid.

    ``viol_iii`` is None when no bounded minimising sequence exists, since
    complementarity is then not expected.  ``kink`` measures a concave
    corner of V at the boundary (V'(A+) < g'(A-)), which a pointwise check
    cannot see but which breaks (ii) in the distributional sense.
    """

    n_points: int
    viol_i: float
    viol_ii: float
    viol_iii: Optional[float]
    smooth_fit_gap: float
    kink: float
    tol: float

    @property
    def ok_i(self) -> bool:
        return self.viol_i <= self.tol

    @property
    def ok_ii(self) -> bool:
        return self.viol_ii <= self.tol and self.kink <= self.tol

    @property
    def ok_iii(self) -> bool:
        return self.viol_iii is None or self.viol_iii <= self.tol

    @property
    def ok(self) -> bool:
        return self.ok_i and self.ok_ii and self.ok_iii

    @property
    def max_violation(self) -> float:
        return max(self.viol_i, self.viol_ii, self.viol_iii or 0.0, self.kink)


def _kappa(sol: Solution, p: np.ndarray) -> np.ndarray:
    """-V''(pi) (pi (1 - pi))^2 / 2 computed analytically."""
    A = sol.A_star
    if sol.regime is Regime.ZERO:
        return np.zeros_like(p)
    inside = (p > A) & (p < 1.0 - A)
    # Psi'' (pi(1-pi))^2 = -1, so the continuation region gives exactly M
    out = np.full_like(p, sol.M)
    if np.any(~inside):
        out[~inside] = -0.5 * np.asarray(eval_Lg(sol.problem.penalty, p[~inside]), dtype=float)
    return out


def _inner(sol: Solution, kappas: np.ndarray, grid_n: int) -> np.ndarray:
    cost, uset = sol.problem.cost, sol.problem.uset
    out = np.empty_like(kappas)
    cache: dict[float, float] = {}
    for i, k in enumerate(kappas):
        key = float(k)
        if key not in cache:
            cache[key] = gap_infimum(cost, uset, key, grid_n)
        out[i] = cache[key]
    return out


def verify_vi(sol: Solution, grid_n: int = VI_GRID, *, tol: float = 1e-8, inner_grid: int = 512) -> VIReport:
    """Check g - V >= 0, the Hamiltonian inequality and complementarity.

    The grid is ``grid_n`` equispaced interior points of (0, 1) with
    ``VI_EXCLUDE``-neighbourhoods of A*, 1 - A* (and of the classic kink at
    1/2 inside the stopping region) removed, as V'' need not exist there.
    """
    if sol.regime is Regime.NEGATIVE:
        raise NotApplicable("the value is -inf; there are no inequalities to check")
    penalty = sol.problem.penalty
    A = sol.A_star
    p = np.linspace(0.0, 1.0, grid_n + 2)[1:-1]
    keep = (np.abs(p - A) > VI_EXCLUDE) & (np.abs(p - (1.0 - A)) > VI_EXCLUDE)
    stopping = (p <= A) | (p >= 1.0 - A)
    if penalty.is_classic:
        keep &= ~(stopping & (np.abs(p - 0.5) <= VI_EXCLUDE))
    p = p[keep]

    gap = np.asarray(eval_g(penalty, p)) - np.asarray(eval_value(sol, p))
    viol_i = float(np.max(np.maximum(0.0, -gap), initial=0.0)) + 0.0  # no -0.0

    inner = _inner(sol, _kappa(sol, p), inner_grid)
    viol_ii = float(np.max(np.maximum(0.0, -inner), initial=0.0)) + 0.0

    viol_iii = None
    if sol.eta_solution.bounded_sequence or sol.problem.uset.bounded:
        with np.errstate(invalid="ignore"):
            prod = np.abs(gap * inner)
        prod = np.where(np.isnan(prod), np.inf, prod)
        viol_iii = float(np.max(prod, initial=0.0))

    fit, kink = 0.0, 0.0
    if sol.regime is Regime.POSITIVE and 0.0 < A < 0.5:
        jump = sol.K * psi1(A) - float(g1_left_half(penalty, A))
        fit = abs(jump)
        kink = max(0.0, -jump)
    return VIReport(int(p.size), viol_i, viol_ii, viol_iii, fit, kink, tol)


# -- epsilon-optimal strategies ---------------------------------------------------


def _delta_schedule(pi: float, k: int) -> float:
    """delta in (0, 1/2) with Psi(pi) - Psi(delta) = k, or 1/2 if none exists."""
    target = psi(pi) - k
    # Psi increases from -inf to 0 on (0, 1/2)
    if target >= 0.0:
        return 0.5
    lo, hi = 1e-300, 0.5
    if psi(lo) > target:
        return lo
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if psi(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def epsilon_strategy(sol: Solution, pi: float, n_terms: int = EPS_TERMS) -> list[tuple[float, float]]:
    """(u, delta) pairs whose expected cost tends to V(pi).

    For M = 0 without attainment, delta_k solves Psi(pi) - Psi(delta_k) = k
    and u is the first term of the minimising sequence with eta <= 1/k^2,
    so the cost is at most g(delta_k) + 2/k.
    """
    es = sol.eta_solution
    if sol.regime is Regime.NEGATIVE:
        return [(sol.policy.u_star, 0.0)] * n_terms
    if es.attained:
        return [(es.u_star, sol.A_star)] * n_terms
    if sol.regime is Regime.POSITIVE:
        return list(sol.policy.epsilon_recipe[:n_terms]) if sol.policy.epsilon_recipe else list(
            _positive_recipe(es, sol.A_star, n_terms)
        )
    cost = sol.problem.cost
    pairs = []
    n = 1
    for k in range(1, n_terms + 1):
        while n < 1000:
            u = es.approach.term(n)
            if not math.isfinite(u):
                break
            if float(eta(cost, u)) <= k ** -2:
                break
            n += 1
        else:
            break
        if not math.isfinite(u):
            break
        pairs.append((float(u), _delta_schedule(pi, k)))
    return pairs


def strategy_cost(sol: Solution, pi: float, u: float, delta: float) -> float:
    """Expected cost of constant control u with exit threshold delta.

    Uses the closed form g(delta) + 2 eta(u) (Psi(pi) - Psi(delta)) inside
    (delta, 1 - delta) and g(pi) outside; delta = 0 means never stopping.
    """
    penalty = sol.problem.penalty
    e = float(eta(sol.problem.cost, u))
    if not (delta < pi < 1.0 - delta):
        return float(g_closed(penalty, pi))
    if delta == 0.0:
        if e > 0:
            return math.inf
        return 0.0 if e == 0 else -math.inf
    return float(eval_g(penalty, delta)) + 2.0 * e * (psi(pi) - psi(delta))


# -- observation-space boundaries -------------------------------------------------


@dataclass(frozen=True)
class XBoundaries:
    """Stopping lines for the raw observation X(t) = u theta t + W(t).

    Observation continues while X(t) lies strictly between
    u t / 2 + gamma_lower / u and u t / 2 + gamma_upper / u (ordered by sign
    of u).
    """

    p: float
    u_star: float
    gamma_upper: float
    gamma_lower: float

    def at(self, t) -> tuple[np.ndarray, np.ndarray]:
        """(lower, upper) X-levels at time t."""
        t = np.asarray(t, dtype=float)
        a = self.u_star * t / 2.0 + self.gamma_lower / self.u_star
        b = self.u_star * t / 2.0 + self.gamma_upper / self.u_star
        return np.minimum(a, b), np.maximum(a, b)


def x_space_boundaries(sol: Solution, p: float) -> XBoundaries:
    if sol.regime is not Regime.POSITIVE or not sol.attained:
        raise NotApplicable("linear X-boundaries need M > 0 with an attained minimiser")
    if not 0.0 < p < 1.0:
        raise DomainError(f"prior must lie in (0, 1), got {p}")
    A = sol.A_star
    upper = math.log((1.0 - A) * (1.0 - p) / (A * p))
    lower = math.log(A * (1.0 - p) / ((1.0 - A) * p))
    return XBoundaries(p, float(sol.u_star), upper, lower)


# -- serialisation ------------------------------------------------------------


def _num(x: Optional[float]):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _unnum(x):
    if x is None:
        return None
    return float(x)


def value_grid(n: int = VALUE_SAMPLES) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


def to_dict(sol: Solution, n_samples: int = VALUE_SAMPLES) -> dict:
    grid = value_grid(n_samples)
    vals = np.asarray(eval_value(sol, grid))
    return {
        "regime": sol.regime.value,
        "M": _num(sol.M),
        "u_star": _num(sol.u_star),
        "attained": sol.attained,
        "A_star": float(sol.A_star),
        "value_samples": [[float(x), _num(float(v))] for x, v in zip(grid, vals)],
    }


def to_json(sol: Solution, n_samples: int = VALUE_SAMPLES) -> str:
    return json.dumps(to_dict(sol, n_samples), indent=2)


@dataclass(frozen=True)
class SolutionRecord:
    """A solution as read back from JSON."""

    regime: Regime
    M: float
    u_star: Optional[float]
    attained: bool
    A_star: float
    value_samples: tuple[tuple[float, float], ...]


def from_json(text: str) -> SolutionRecord:
    d = json.loads(text)
    return SolutionRecord(
        regime=Regime(d["regime"]),
        M=_unnum(d["M"]),
        u_star=_unnum(d["u_star"]),
        attained=bool(d["attained"]),
        A_star=float(d["A_star"]),
        value_samples=tuple((float(x), _unnum(v)) for x, v in d["value_samples"]),
    )


def summary(sol: Solution) -> str:
    lines = [f"regime: {sol.regime.value}"]
    if sol.regime is Regime.NEGATIVE:
        lines.append(f"M: {sol.M:.12g}")
        lines.append(f"control: u = {sol.policy.u_star:.12g} (eta < 0)")
        lines.append("value -inf; never stop")
        return "\n".join(lines)
    lines.append(f"M: {sol.M:.12g}")
    if sol.attained:
        lines.append(f"u*: {sol.u_star:.12g}")
    else:
        lines.append("u*: not attained (epsilon-optimal family)")
    if sol.regime is Regime.ZERO:
        lines.append("A*: 0 (value identically 0; keep observing)")
    elif sol.A_star >= 0.5:
        lines.append("A*: 0.5 (continuation region empty; stop at once)")
    else:
        lines.append(f"A*: {sol.A_star:.12g}  continuation region ({sol.A_star:.6g}, {1 - sol.A_star:.6g})")
    lines.append(f"policy: {sol.policy.kind.value}")
    return "\n".join(lines)
