from __future__ import annotations

import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from seqctl.control import ControlSet, CostModel, Quadratic
from seqctl.errors import DomainError, NotApplicable, TruncationWarning
from seqctl.penalty import PenaltyModel
from seqctl.solver import solve
from seqctl.stats import (
    DensitySeries,
    characteristics,
    characteristics_for,
    conditional_mean_tau,
    decision_probabilities,
    exit_time_cdf_mass,
    laplace_tau,
    tau_density,
    unconditional_mean_tau,
    write_characteristics_csv,
)

from oracles import exit_density_sine_series, mean_exit_time, upper_exit_probs

LN3 = math.log(3.0)


def test_decision_probability_examples():
    assert decision_probabilities(0.25, 0.5) == pytest.approx((0.75, 0.25))
    assert decision_probabilities(0.25, 0.25) == (0.0, 0.0)
    assert decision_probabilities(0.25, 0.75) == pytest.approx((1.0, 1.0))


@given(st.floats(0.01, 0.49), st.floats(0.0, 1.0))
def test_decision_probabilities_oracle(A, frac):
    pi = min(A + frac * (1 - 2 * A), 1 - A)
    p1, p0 = decision_probabilities(A, pi)
    r1, r0 = upper_exit_probs(A, pi)
    assert p1 == pytest.approx(r1, abs=1e-12) and p0 == pytest.approx(r0, abs=1e-12)
    # the mixture is the martingale exit probability
    assert pi * p1 + (1 - pi) * p0 == pytest.approx((pi - A) / (1 - 2 * A), abs=1e-12)


def test_mean_examples():
    m1, m0 = conditional_mean_tau(0.25, 0.5, 1.0)
    assert m1 == pytest.approx(LN3, abs=1e-14) and m0 == pytest.approx(LN3, abs=1e-14)
    assert conditional_mean_tau(0.25, 0.25, 1.0) == (0.0, 0.0)
    a = conditional_mean_tau(0.2, 0.6, 1.0)
    b = conditional_mean_tau(0.2, 0.6, 2.0)
    assert b[0] == pytest.approx(a[0] / 4) and b[1] == pytest.approx(a[1] / 4)
    assert unconditional_mean_tau(0.25, 0.5, 1.0) == pytest.approx(LN3)
    assert unconditional_mean_tau(0.25, 0.5, 2.0) == pytest.approx(LN3 / 4)


def test_domain_checks():
    with pytest.raises(DomainError):
        decision_probabilities(0.5, 0.5)
    with pytest.raises(DomainError):
        conditional_mean_tau(0.25, 0.1, 1.0)
    with pytest.raises(DomainError):
        laplace_tau(0.25, 0.5, 0.0, 1.0, 1)
    with pytest.raises(DomainError):
        laplace_tau(0.25, 0.5, 1.0, -0.2, 1)
    with pytest.raises(DomainError):
        DensitySeries(0.25, 0.5, 1.0, 2)


@settings(max_examples=30)
@given(st.floats(0.02, 0.45), st.floats(0.01, 0.99), st.floats(0.2, 4.0))
def test_mixture_identity(A, frac, u):
    pi = min(A + frac * (1 - 2 * A), 1 - A)
    m1, m0 = conditional_mean_tau(A, pi, u)
    assert pi * m1 + (1 - pi) * m0 == pytest.approx(mean_exit_time(A, pi, u), rel=1e-10, abs=1e-12)


def test_laplace_normalisation_and_limits():
    for th in (0, 1):
        assert laplace_tau(0.25, 0.5, 1.0, 0.0, th) == pytest.approx(1.0, abs=1e-14)
        assert laplace_tau(0.25, 0.5, 1.0, 1e8, th) < 1e-100
        assert laplace_tau(0.25, 0.25, 1.0, 3.0, th) == pytest.approx(1.0, abs=1e-14)
    # extreme barriers stay finite
    assert 0 < laplace_tau(1e-12, 0.5, 1.0, 5.0, 1) < 1


@pytest.mark.parametrize("theta", [0, 1])
def test_laplace_derivative_is_minus_mean(theta):
    A, pi, u, h = 0.2, 0.6, 1.3, 1e-5
    d = (laplace_tau(A, pi, u, h, theta) - laplace_tau(A, pi, u, -h, theta)) / (2 * h)
    assert -d == pytest.approx(conditional_mean_tau(A, pi, u)[1 - theta], abs=1e-6)


@pytest.mark.parametrize("theta", [0, 1])
def test_density_against_sine_series(theta):
    A, pi, u = 0.25, 0.625, 1.4
    ser = DensitySeries(A, pi, u, theta)
    for t in (0.02, 0.1, 0.5, 1.0, 3.0, 10.0):
        assert ser(t) == pytest.approx(exit_density_sine_series(A, pi, u, theta, t), rel=1e-7, abs=1e-12)


def test_density_mass_and_moments():
    A, pi, u = 0.25, 0.5, 1.0
    for th in (0, 1):
        ser = DensitySeries(A, pi, u, th)
        mass = quad(ser, 0, 200, limit=400)[0]
        assert mass == pytest.approx(1.0, abs=1e-4)
        mean = quad(lambda t: t * ser(t), 0, 200, limit=400)[0]
        assert mean == pytest.approx(conditional_mean_tau(A, pi, u)[1 - th], rel=1e-7)
        lap = quad(lambda t: math.exp(-t) * ser(t), 0, 200, limit=400)[0]
        assert lap == pytest.approx(laplace_tau(A, pi, u, 1.0, th), rel=1e-8)
    assert exit_time_cdf_mass(DensitySeries(A, pi, u, 1), 0, 200) == pytest.approx(1.0, abs=1e-8)


def test_density_edge_behaviour():
    ser = DensitySeries(0.25, 0.5, 1.0, 1)
    assert ser(1e-4) < 1e-100
    assert ser(0.0) == 0.0 and ser(-1.0) == 0.0
    arr = ser(np.array([-1.0, 0.5, 1.0]))
    assert arr.shape == (3,) and arr[0] == 0.0
    # at the symmetric start the law of tau does not depend on theta
    np.testing.assert_allclose(ser(np.linspace(0.1, 5, 20)), DensitySeries(0.25, 0.5, 1.0, 0)(np.linspace(0.1, 5, 20)))


def test_truncation_warning():
    ser = DensitySeries(0.25, 0.5, 1.0, 1, truncation_K=1)
    with pytest.warns(TruncationWarning):
        tau_density(ser, np.array([50.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tau_density(DensitySeries(0.25, 0.5, 1.0, 1), np.linspace(0.01, 50, 100))


def test_characteristics_examples():
    ch = characteristics_for(0.25, 0.5, 1.0)
    assert ch.type1 == pytest.approx(0.25) and ch.power == pytest.approx(0.75)
    assert ch.type2 == pytest.approx(0.25)
    # outside the continuation region the test stops at once
    hi = characteristics_for(0.25, 0.9, 1.0)
    assert (hi.type1, hi.type2, hi.power, hi.mean_tau_1) == (1.0, 0.0, 1.0, 0.0)
    lo = characteristics_for(0.25, 0.1, 1.0)
    assert (lo.type1, lo.type2, lo.power) == (0.0, 1.0, 0.0)


def test_characteristics_of_solution():
    sol = solve(PenaltyModel.classic(), CostModel(Quadratic(1, 1), 1), ControlSet.reals())
    ch = characteristics(sol, 0.5)
    assert ch.type1 == pytest.approx(sol.A_star) and ch.power == pytest.approx(1 - sol.A_star)
    neg = solve(PenaltyModel.classic(), CostModel(Quadratic(1, 3), 1), ControlSet.reals())
    with pytest.raises(NotApplicable):
        characteristics(neg, 0.5)
    buf = io.StringIO()
    write_characteristics_csv([(0.5, ch)], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "parameter,type1,type2,power,mean_tau_1,mean_tau_0"
    assert len(lines) == 2
