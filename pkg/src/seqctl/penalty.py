"""Terminal penalties g(pi) induced by classification losses.

A penalty is the minimal expected loss of the best decision given a posterior
probability ``pi`` that theta = 1.  Three families are built in:

* ``CLASSIC``: 0-1 loss with hard decisions, g = min(pi, 1 - pi);
* ``CROSS_ENTROPY``: log loss with soft decisions, g = binary entropy (nats);
* ``L2``: squared loss with soft decisions, g = pi (1 - pi).

``CUSTOM_SMOOTH`` wraps user supplied g, g', g''.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, KinkError


class PenaltyKind(enum.Enum):
    CLASSIC = "classic"
    CROSS_ENTROPY = "cross_entropy"
    L2 = "l2"
    CUSTOM_SMOOTH = "custom"


RealFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PenaltyModel:
    """Terminal penalty g together with the decision rule that attains it.

    ``decision_set`` is either a finite tuple of decisions in [0, 1] or
    ``None`` for the whole unit interval.
    """

    kind: PenaltyKind
    decision_set: Optional[tuple[float, ...]] = None
    custom_g: Optional[RealFn] = None
    custom_g1: Optional[RealFn] = None
    custom_g2: Optional[RealFn] = None
    custom_selector: Optional[Callable[[float], float]] = None
    custom_loss: Optional[Callable[[int, float], float]] = None
    name: str = ""

    @classmethod
    def classic(cls) -> "PenaltyModel":
        return cls(PenaltyKind.CLASSIC, decision_set=(0.0, 1.0), name="classic")

    @classmethod
    def cross_entropy(cls) -> "PenaltyModel":
        return cls(PenaltyKind.CROSS_ENTROPY, name="cross_entropy")

    @classmethod
    def l2(cls) -> "PenaltyModel":
        return cls(PenaltyKind.L2, name="l2")

    @classmethod
    def custom(
        cls,
        g: RealFn,
        g1: RealFn,
        g2: RealFn,
        *,
        selector: Optional[Callable[[float], float]] = None,
        loss: Optional[Callable[[int, float], float]] = None,
        decision_set: Optional[Sequence[float]] = None,
        name: str = "custom",
        check: bool = True,
    ) -> "PenaltyModel":
        """Build a smooth custom penalty from g and its first two derivatives.

        With ``check`` the monotonicity of pi^2 (1-pi)^2 g''(pi) on each half of
        the unit interval is tested on a 1024-point grid; a violation only
        warns, since boundary solving still works but the single-crossing
        structure of H is no longer guaranteed.
        """
        model = cls(
            PenaltyKind.CUSTOM_SMOOTH,
            decision_set=None if decision_set is None else tuple(float(d) for d in decision_set),
            custom_g=g,
            custom_g1=g1,
            custom_g2=g2,
            custom_selector=selector,
            custom_loss=loss,
            name=name,
        )
        if check and not lg_is_monotone(model):
            warnings.warn(
                f"penalty {name!r}: pi^2(1-pi)^2 g'' is not strictly decreasing on (0, 1/2); "
                "boundary classification may be unreliable",
                RuntimeWarning,
                stacklevel=2,
            )
        return model

    @property
    def is_classic(self) -> bool:
        return self.kind is PenaltyKind.CLASSIC

    @property
    def is_smooth(self) -> bool:
        return not self.is_classic


def _check_open_unit(pi) -> np.ndarray:
    arr = np.asarray(pi, dtype=float)
    if np.any(~(arr > 0.0) | ~(arr < 1.0)):
        raise DomainError(f"probability must lie in (0, 1), got {pi!r}")
    return arr


def _out(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def eval_g(model: PenaltyModel, pi):
    """Terminal penalty g(pi) for pi in (0, 1)."""
    p = _check_open_unit(pi)
    if model.kind is PenaltyKind.CLASSIC:
        val = np.minimum(p, 1.0 - p)
    elif model.kind is PenaltyKind.CROSS_ENTROPY:
        val = -p * np.log(p) - (1.0 - p) * np.log1p(-p)
    elif model.kind is PenaltyKind.L2:
        val = p * (1.0 - p)
    else:
        val = np.asarray(model.custom_g(p), dtype=float)
    return _out(val, pi)


def g_closed(model: PenaltyModel, pi):
    """g on the closed interval [0, 1], using g(0) = g(1) = 0."""
    p = np.asarray(pi, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)):
        raise DomainError(f"probability must lie in [0, 1], got {pi!r}")
    inner = (p > 0.0) & (p < 1.0)
    val = np.zeros_like(p)
    if np.any(inner):
        val[inner] = eval_g(model, p[inner])
    return _out(val, pi)


def _classic_kink(p: np.ndarray) -> None:
    if np.any(p == 0.5):
        raise KinkError("classic penalty is not differentiable at pi = 1/2")


def eval_g1(model: PenaltyModel, pi):
    """First derivative g'(pi)."""
    p = _check_open_unit(pi)
    if model.kind is PenaltyKind.CLASSIC:
        _classic_kink(p)
        val = np.where(p < 0.5, 1.0, -1.0)
    elif model.kind is PenaltyKind.CROSS_ENTROPY:
        val = np.log1p(-p) - np.log(p)
    elif model.kind is PenaltyKind.L2:
        val = 1.0 - 2.0 * p
    else:
        val = np.asarray(model.custom_g1(p), dtype=float)
    return _out(val, pi)


def eval_g2(model: PenaltyModel, pi):
    """Second derivative g''(pi)."""
    p = _check_open_unit(pi)
    if model.kind is PenaltyKind.CLASSIC:
        _classic_kink(p)
        val = np.zeros_like(p)
    elif model.kind is PenaltyKind.CROSS_ENTROPY:
        val = -1.0 / (p * (1.0 - p))
    elif model.kind is PenaltyKind.L2:
        val = np.full_like(p, -2.0)
    else:
        val = np.asarray(model.custom_g2(p), dtype=float)
    return _out(val, pi)


def eval_Lg(model: PenaltyModel, pi):
    """(L g)(pi) = pi^2 (1 - pi)^2 g''(pi)."""
    p = _check_open_unit(pi)
    if model.kind is PenaltyKind.CROSS_ENTROPY:
        # closed form avoids the 0 * inf cancellation near the endpoints
        val = -p * (1.0 - p)
    else:
        val = (p * (1.0 - p)) ** 2 * np.asarray(eval_g2(model, p), dtype=float)
    return _out(val, pi)


def g1_left_half(model: PenaltyModel, pi):
    """g' on (0, 1/2], taking the one-sided value +1 at the classic kink."""
    p = np.asarray(pi, dtype=float)
    if model.kind is PenaltyKind.CLASSIC:
        if np.any((p <= 0.0) | (p > 0.5)):
            raise DomainError("one-sided derivative is defined on (0, 1/2]")
        return _out(np.ones_like(p), pi)
    return eval_g1(model, pi)


def loss_value(model: PenaltyModel, pi, d: float) -> float:
    """Expected loss f(pi, d) = L(1, d) pi + L(0, d) (1 - pi) of decision d."""
    pi = float(pi)
    if model.kind is PenaltyKind.CLASSIC:
        return pi * float(d != 1.0) + (1.0 - pi) * float(d != 0.0)
    if model.kind is PenaltyKind.L2:
        return pi * (1.0 - d) ** 2 + (1.0 - pi) * d**2
    if model.kind is PenaltyKind.CROSS_ENTROPY:
        lo = -np.inf if d == 0.0 else np.log(d)
        hi = -np.inf if d == 1.0 else np.log1p(-d)
        terms = []
        if pi > 0.0:
            terms.append(-pi * lo)
        if pi < 1.0:
            terms.append(-(1.0 - pi) * hi)
        return float(sum(terms))
    if model.custom_loss is None:
        raise DomainError("custom penalty was built without a loss function")
    return pi * model.custom_loss(1, d) + (1.0 - pi) * model.custom_loss(0, d)


def selector(model: PenaltyModel, pi) -> float:
    """Optimal decision h(pi); hard decisions break the tie at 1/2 towards 1."""
    p = float(_check_open_unit(pi))
    if model.kind is PenaltyKind.CLASSIC:
        return 1.0 if p >= 0.5 else 0.0
    if model.kind in (PenaltyKind.CROSS_ENTROPY, PenaltyKind.L2):
        return p
    if model.custom_selector is None:
        raise DomainError("custom penalty was built without a selector")
    return float(model.custom_selector(p))


def lg_is_monotone(model: PenaltyModel, n: int = 1024) -> bool:
    """Check that L g decreases on (0, 1/2) and increases on (1/2, 1)."""
    if model.is_classic:
        return True
    left = np.linspace(0.0, 0.5, n + 1)[1:-1]
    lg = np.asarray(eval_Lg(model, left), dtype=float)
    right = np.asarray(eval_Lg(model, 1.0 - left), dtype=float)
    return bool(np.all(np.diff(lg) < 0.0) and np.all(np.diff(right) < 0.0))
