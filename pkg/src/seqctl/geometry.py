"""The function Psi, the obstacle gap H = g - K Psi and the free-boundary root.

Psi(pi) = (1 - 2 pi) log(pi / (1 - pi)) is the fundamental solution that
shapes both expected exit times and the value function in the continuation
region.  For K > 0 the stopping boundary is the smallest root in (0, 1/2] of
g'(pi) = K Psi'(pi), i.e. a critical point of H(.; K).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError
from .penalty import PenaltyKind, PenaltyModel, eval_g, eval_g2, eval_Lg, g1_left_half, lg_is_monotone

ROOT_XTOL = 1e-12
ROOT_MAXITER = 200
SCAN_POINTS = 4096


def _unit(pi) -> np.ndarray:
    arr = np.asarray(pi, dtype=float)
    if np.any(~(arr > 0.0) | ~(arr < 1.0)):
        raise DomainError(f"probability must lie in (0, 1), got {pi!r}")
    return arr


def _out(val, like):
    return float(val) if np.ndim(like) == 0 else val


def psi(pi):
    p = _unit(pi)
    return _out((1.0 - 2.0 * p) * (np.log(p) - np.log1p(-p)), pi)


def psi1(pi):
    p = _unit(pi)
    val = (1.0 - 2.0 * p) / (p * (1.0 - p)) - 2.0 * (np.log(p) - np.log1p(-p))
    return _out(val, pi)


def psi2(pi):
    p = _unit(pi)
    return _out(-1.0 / (p * (1.0 - p)) ** 2, pi)


def eval_H(penalty: PenaltyModel, K: float, pi):
    if not K > 0:
        raise DomainError(f"K must be positive, got {K}")
    return _out(np.asarray(eval_g(penalty, pi)) - K * np.asarray(psi(pi)), pi)


def eval_H2(penalty: PenaltyModel, K: float, pi):
    """H''(pi; K) = g''(pi) + K / (pi (1 - pi))^2."""
    p = _unit(pi)
    return _out(np.asarray(eval_g2(penalty, p)) - K * np.asarray(psi2(p)), pi)


@dataclass(frozen=True)
class HClassification:
    """Convexity structure of H(.; K) on (0, 1/2].

    ``pi_star`` is the inflection point (1/2 when H is convex on all of
    (0, 1/2)); ``pi_0`` the interior minimiser when one exists.
    ``reliable`` is False for custom penalties whose L g is not monotone.
    """

    K: float
    pi_star: float
    has_interior_root: bool
    pi_0: Optional[float] = None
    reliable: bool = True


def _boundary_gap(penalty: PenaltyModel, K: float):
    def f(p: float) -> float:
        return float(g1_left_half(penalty, p)) - K * float(psi1(p))

    return f


def _refine(f, lo: float, hi: float) -> float:
    try:
        root, info = brentq(f, lo, hi, xtol=ROOT_XTOL, maxiter=ROOT_MAXITER, full_output=True, disp=False)
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(f"boundary root refinement failed on [{lo}, {hi}]: {exc}") from exc
    if not info.converged:
        raise ConvergenceError(f"boundary root did not converge in {ROOT_MAXITER} iterations")
    return float(root)


def _left_bracket(f, right: float) -> Optional[float]:
    """Walk geometrically towards 0 until g' - K Psi' turns negative."""
    p = right
    for _ in range(1100):
        p *= 0.5
        if p <= 0.0:
            return None
        if f(p) < 0.0:
            return p
    return None


def _leftmost_root(penalty: PenaltyModel, K: float, n_scan: int = SCAN_POINTS) -> Optional[float]:
    f = _boundary_gap(penalty, K)
    if penalty.is_classic:
        # g' = 1 on (0, 1/2] while K Psi' decreases from +inf to 0: one sign change
        lo = _left_bracket(f, 0.5)
        if lo is None:
            raise ConvergenceError("could not bracket the classic boundary root")
        return _refine(f, lo, 0.5)

    grid = 0.5 * np.arange(1, n_scan + 1) / (n_scan + 1)
    vals = np.asarray(g1_left_half(penalty, grid), dtype=float) - K * np.asarray(psi1(grid))
    if vals[0] >= 0.0:
        lo = _left_bracket(f, float(grid[0]))
        if lo is None:
            return None
        if vals[0] == 0.0:
            return float(grid[0])
        return _refine(f, lo, float(grid[0]))
    nonneg = np.nonzero(vals >= 0.0)[0]
    if nonneg.size == 0:
        # a root squeezed between the last grid point and 1/2
        lo, gap = float(grid[-1]), 0.5 - float(grid[-1])
        for _ in range(40):
            gap *= 0.5
            if f(0.5 - gap) > 0.0:
                return _refine(f, lo, 0.5 - gap)
        return None
    i = int(nonneg[0])
    if vals[i] == 0.0:
        return float(grid[i])
    return _refine(f, float(grid[i - 1]), float(grid[i]))


def _inflection(penalty: PenaltyModel, K: float) -> float:
    if penalty.is_classic:
        return 0.5
    # sign of H'' equals the sign of L g + K
    def s(p: float) -> float:
        return float(eval_Lg(penalty, p)) + K

    if s(0.5) >= 0.0:
        return 0.5
    lo = 1e-12
    if s(lo) <= 0.0:
        return lo
    try:
        return float(brentq(s, lo, 0.5, xtol=ROOT_XTOL, maxiter=ROOT_MAXITER))
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(f"inflection search failed: {exc}") from exc


def classify_H(penalty: PenaltyModel, K: float) -> HClassification:
    """Locate the inflection point of H(.; K) and decide whether a root exists."""
    if not K > 0:
        raise DomainError(f"K must be positive, got {K}")
    pi_star = _inflection(penalty, K)
    if penalty.is_classic:
        return HClassification(K, 0.5, True, _leftmost_root(penalty, K))

    reliable = penalty.kind is not PenaltyKind.CUSTOM_SMOOTH or lg_is_monotone(penalty)
    if reliable:
        has_root = float(eval_g2(penalty, 0.5)) < -16.0 * K
        pi_0 = _leftmost_root(penalty, K) if has_root else None
        if has_root and pi_0 is None:
            raise ConvergenceError("interior boundary root predicted but not found")
        return HClassification(K, pi_star, has_root, pi_0, True)

    pi_0 = _leftmost_root(penalty, K)
    return HClassification(K, pi_star, pi_0 is not None, pi_0, False)


def solve_boundary(penalty: PenaltyModel, K: float) -> float:
    """Smallest root in (0, 1/2] of g'(pi) = K Psi'(pi).

    Returns 1/2 when no interior root exists (the continuation region is
    then empty).
    """
    cls = classify_H(penalty, K)
    if not cls.reliable:
        warnings.warn("H classification unreliable for this custom penalty", RuntimeWarning, stacklevel=2)
    if cls.has_interior_root:
        return float(cls.pi_0)
    return 0.5
