from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqctl.control import ControlSet, CostModel, Power, Quadratic, Regime, Table
from seqctl.errors import DomainError, NotApplicable
from seqctl.penalty import PenaltyModel, eval_g
from seqctl.solver import (
    PolicyKind,
    epsilon_strategy,
    eval_value,
    from_json,
    solve,
    strategy_cost,
    summary,
    to_json,
    verify_vi,
    x_space_boundaries,
)

from oracles import classic_boundary, psi, quadratic_M

CLASSIC, CE, L2 = PenaltyModel.classic(), PenaltyModel.cross_entropy(), PenaltyModel.l2()
R0 = ControlSet.reals()
A_PRESET = 0.4585247738319121  # [DERIVED] 1e-12 bisection of 1 = 1.5 Psi'(pi)


@pytest.fixture(scope="module")
def preset():
    return solve(CLASSIC, CostModel(Quadratic(1, 1), 1), R0)


def test_preset_solution(preset):
    assert preset.regime is Regime.POSITIVE
    assert preset.M == 0.75 and preset.K == 1.5 and preset.u_star == -2.0
    assert preset.A_star == pytest.approx(A_PRESET, abs=1e-12)
    assert preset.policy.kind is PolicyKind.CONSTANT_CONTROL_AND_THRESHOLD


def test_negative_regime():
    sol = solve(CLASSIC, CostModel(Quadratic(1, -4), 1), ControlSet.interval(0.0, math.inf))
    assert sol.regime is Regime.NEGATIVE and sol.policy.kind is PolicyKind.NEVER_STOP
    assert np.all(np.isneginf(eval_value(sol, np.linspace(0, 1, 5))))
    assert sol.policy.u_star == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(NotApplicable):
        verify_vi(sol)
    assert "value -inf; never stop" in summary(sol)


def test_single_point_control():
    # phi + c = u^2 on {1} gives eta = 1 and K = 2
    sol = solve(L2, CostModel(Table(((1.0, 0.0),)), 1.0), ControlSet.points(1.0))
    assert sol.M == 1.0 and sol.attained and sol.u_star == 1.0
    A = sol.A_star
    assert 1 - 2 * A == pytest.approx(2.0 * ((1 - 2 * A) / (A * (1 - A)) - 2 * math.log(A / (1 - A))), abs=1e-9)


def test_value_examples(preset):
    A = preset.A_star
    assert eval_value(preset, A) == pytest.approx(eval_g(CLASSIC, A), abs=1e-15)
    assert eval_value(preset, 0.0) == 0.0 and eval_value(preset, 1.0) == 0.0
    for p in (0.1, 0.3, 0.95):
        assert eval_value(preset, p) == eval_g(CLASSIC, p)
    mid = 0.5
    assert eval_value(preset, mid) == pytest.approx(1.5 * (psi(mid) - psi(A)) + A, abs=1e-14)
    with pytest.raises(DomainError):
        eval_value(preset, 1.2)


def test_value_below_penalty_and_symmetric(preset):
    p = np.linspace(0.001, 0.999, 999)
    v = eval_value(preset, p)
    assert np.all(v <= np.asarray(eval_g(CLASSIC, p)) + 1e-15)
    np.testing.assert_allclose(v, eval_value(preset, 1 - p), atol=1e-12)


def test_vi_preset(preset):
    rep = verify_vi(preset, 4096)
    assert rep.ok
    assert rep.viol_i <= 1e-8 and rep.viol_ii <= 1e-8 and rep.viol_iii <= 1e-8
    assert rep.smooth_fit_gap < 1e-9


def test_vi_zero_regime():
    sol = solve(CLASSIC, CostModel(Power(1.0, 1.0), 1.0), ControlSet.interval(0.0, math.inf))
    assert sol.regime is Regime.ZERO
    assert np.all(eval_value(sol, np.linspace(0, 1, 11)) == 0.0)
    rep = verify_vi(sol)
    assert rep.ok_i and rep.ok_ii


def test_vi_detects_perturbed_boundary(preset):
    # moving A* inward leaves a concave corner at the boundary
    out = verify_vi(dataclasses.replace(preset, A_star=preset.A_star + 0.01))
    assert out.kink > 0.1 and not out.ok_ii and not out.ok
    # moving it outward makes V exceed g just inside the boundary
    inw = verify_vi(dataclasses.replace(preset, A_star=preset.A_star - 0.01))
    assert inw.viol_i > 1e-4 and not inw.ok


def test_cross_entropy_substitute_preset():
    sol = solve(CE, CostModel(Quadratic(0.1, 0.1), 0.1), R0)
    assert sol.regime is Regime.POSITIVE and 0 < sol.A_star < 0.5
    assert sol.M == pytest.approx(0.075)
    assert verify_vi(sol).ok


def test_cross_entropy_listed_preset_is_negative():
    sol = solve(CE, CostModel(Quadratic(0.05, 0.1), 0.01), R0)
    assert sol.regime is Regime.NEGATIVE
    assert sol.M == pytest.approx(quadratic_M(0.05, 0.1, 0.01))


def test_stop_immediately_when_no_interior_root():
    # cross-entropy needs g''(1/2) = -4 < -16 K for an interior root
    sol = solve(CE, CostModel(Quadratic(1, 0.0001), 1), R0)
    assert sol.A_star == 0.5 and sol.policy.kind is PolicyKind.STOP_IMMEDIATELY
    p = np.linspace(0.01, 0.99, 50)
    np.testing.assert_allclose(eval_value(sol, p), eval_g(CE, p))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-1.9, 1.9), st.floats(0.2, 5.0))
def test_quadratic_sweep_against_oracle(a, b, c):
    if 4 * a * c - b * b < 1e-3:
        return
    sol = solve(CLASSIC, CostModel(Quadratic(a, b), c), R0)
    assert sol.M == pytest.approx(quadratic_M(a, b, c), rel=1e-12)
    assert sol.A_star == pytest.approx(classic_boundary(sol.M), abs=1e-10)


def test_epsilon_family_positive_unattained():
    sol = solve(CLASSIC, CostModel(Quadratic(1, 0), 1), R0)
    assert sol.policy.kind is PolicyKind.EPSILON_OPTIMAL_FAMILY and not sol.attained
    pairs = epsilon_strategy(sol, 0.5)
    costs = [strategy_cost(sol, 0.5, u, d) for u, d in pairs]
    assert abs(costs[-1] - eval_value(sol, 0.5)) < 1e-8
    assert all(c >= eval_value(sol, 0.5) - 1e-12 for c in costs)


def test_epsilon_family_zero_regime():
    sol = solve(CLASSIC, CostModel(Power(1.0, 1.0), 1.0), ControlSet.interval(0.0, math.inf))
    pairs = epsilon_strategy(sol, 0.4, 30)
    costs = [strategy_cost(sol, 0.4, u, d) for u, d in pairs]
    assert costs[-1] < 0.1
    assert costs[-1] < costs[0]
    assert all(c >= 0 for c in costs)


def test_strategy_cost_matches_value_at_optimum(preset):
    for p in (0.47, 0.5, 0.53):
        assert strategy_cost(preset, p, -2.0, preset.A_star) == pytest.approx(eval_value(preset, p), abs=1e-14)
        assert strategy_cost(preset, p, -2.0, preset.A_star - 0.02) > eval_value(preset, p)


def test_x_space_boundaries():
    sol = solve(CLASSIC, CostModel(Quadratic(1, 1), 1), R0)
    sol = dataclasses.replace(sol, A_star=0.25)
    xb = x_space_boundaries(sol, 0.5)
    assert xb.gamma_upper == pytest.approx(math.log(3.0))
    assert xb.gamma_lower == pytest.approx(-math.log(3.0))
    at_edge = x_space_boundaries(sol, 0.75)
    assert at_edge.gamma_upper == pytest.approx(0.0, abs=1e-15)
    lo, hi = xb.at(0.0)
    assert lo == pytest.approx(-math.log(3) / 2) and hi == pytest.approx(math.log(3) / 2)


def test_x_boundaries_reproduce_posterior_thresholds(preset):
    # at the X-levels the likelihood-ratio posterior equals A* and 1 - A*
    p, u = 0.5, preset.u_star
    xb = x_space_boundaries(preset, p)
    for t in (0.0, 0.7, 3.0):
        lo, hi = xb.at(t)
        for x in (float(lo), float(hi)):
            L = math.exp(u * x - u * u * t / 2)
            post = p * L / (p * L + 1 - p)
            assert min(abs(post - preset.A_star), abs(post - (1 - preset.A_star))) < 1e-12


def test_json_round_trip(preset):
    rec = from_json(to_json(preset, 33))
    assert rec.regime is Regime.POSITIVE and rec.M == 0.75 and rec.u_star == -2.0
    assert rec.A_star == preset.A_star
    assert len(rec.value_samples) == 33
    neg = solve(CLASSIC, CostModel(Quadratic(1, -4), 1), ControlSet.interval(0.0, math.inf))
    rec = from_json(to_json(neg, 5))
    assert rec.value_samples[2][1] == -math.inf


@pytest.mark.parametrize(
    "phi, c, u0, M",
    [
        # zeta(u) = 0.02 u^3 + 0.02 >= zeta(1) u^2 on (0, 1]: full bang control
        (Power(0.02, 3.0), 0.02, 1.0, 0.04),
        # zeta(u) = 0.08 u^4 + 0.005 has zeta / u^2 minimal at u0 = (0.005 / 0.08)^(1/4) = 1/2
        (Power(0.08, 4.0), 0.005, 0.5, 0.04),
    ],
)
def test_l2_penalty_with_unit_interval_controls(phi, c, u0, M):
    # M < 1/16 keeps g''(1/2) = -2 below -16 K, so the boundary is interior
    sol = solve(L2, CostModel(phi, c), ControlSet.interval(0.0, 1.0, hi_closed=True))
    assert sol.attained and sol.u_star == pytest.approx(u0, abs=1e-8)
    assert sol.M == pytest.approx(M, abs=1e-10)
    assert sol.policy.kind is PolicyKind.CONSTANT_CONTROL_AND_THRESHOLD
    assert 0 < sol.A_star < 0.5
    assert verify_vi(sol).ok
