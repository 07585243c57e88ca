"""Controlled Bayesian sequential testing of a Brownian drift.

The observer chooses a signal intensity u, pays phi(u) + c per unit time and
a terminal penalty g(pi) on stopping.  The optimal control is a constant
minimiser of (phi(u) + c) / u^2 and the optimal stopping rule a symmetric
threshold on the posterior.
"""

from .control import ControlSet, CostModel, Custom, EtaSolution, Interval, Point, Power, Quadratic, Regime, Table, eta, minimize_eta
from .errors import ConfigError, ConvergenceError, DomainError, KinkError, NotApplicable, TruncationWarning
from .geometry import classify_H, eval_H, psi, psi1, psi2, solve_boundary
from .penalty import PenaltyKind, PenaltyModel, eval_g, eval_g1, eval_g2, eval_Lg, selector
from .solver import PolicyKind, Solution, epsilon_strategy, eval_value, solve, verify_vi, x_space_boundaries
from .stats import DensitySeries, characteristics, conditional_mean_tau, decision_probabilities, laplace_tau, tau_density

__version__ = "0.1.0"

__all__ = [
    "ControlSet",
    "CostModel",
    "Custom",
    "EtaSolution",
    "Interval",
    "Point",
    "Power",
    "Quadratic",
    "Regime",
    "Table",
    "eta",
    "minimize_eta",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "KinkError",
    "NotApplicable",
    "TruncationWarning",
    "classify_H",
    "eval_H",
    "psi",
    "psi1",
    "psi2",
    "solve_boundary",
    "PenaltyKind",
    "PenaltyModel",
    "eval_g",
    "eval_g1",
    "eval_g2",
    "eval_Lg",
    "selector",
    "PolicyKind",
    "Solution",
    "epsilon_strategy",
    "eval_value",
    "solve",
    "verify_vi",
    "x_space_boundaries",
    "DensitySeries",
    "characteristics",
    "conditional_mean_tau",
    "decision_probabilities",
    "laplace_tau",
    "tau_density",
]
