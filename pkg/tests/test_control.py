from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqctl.control import (
    ControlSet,
    CostModel,
    Custom,
    Interval,
    Point,
    Power,
    Quadratic,
    Regime,
    Table,
    eta,
    gap_infimum,
    minimize_eta,
    rescale_problem,
)
from seqctl.errors import ConfigError, DomainError

from oracles import quadratic_M

R0 = ControlSet.reals()


def test_eta_examples():
    assert eta(CostModel(Quadratic(1, 1), 1), -2.0) == pytest.approx(0.75)
    assert eta(CostModel(Quadratic(1, 0), 1), 10.0) == pytest.approx(1.01)
    cost = CostModel(Quadratic(2, 0), 0.5)
    assert eta(cost, 3.0) == eta(cost, -3.0)
    with pytest.raises(DomainError):
        eta(cost, 0.0)


def test_cost_and_set_validation():
    with pytest.raises(DomainError):
        CostModel(Quadratic(1, 1), 0.0)
    with pytest.raises(DomainError):
        Point(0.0)
    with pytest.raises(DomainError):
        Interval(-1.0, 1.0)
    with pytest.raises(DomainError):
        Interval(2.0, 1.0)
    assert Interval(0.0, 1.0, hi_closed=True).contains(1.0)
    assert not R0.contains(0.0) and R0.contains(-5.0)
    assert ControlSet.points(1, 2).bounded and not R0.bounded


def test_sample_stays_in_set():
    rng = np.random.default_rng(3)
    for uset in (R0, ControlSet.interval(0.0, 1.0, hi_closed=True), ControlSet.points(1.0, -2.0)):
        xs = uset.sample(rng, 200)
        assert all(uset.contains(float(x)) for x in xs)


def test_quadratic_preset_closed_form():
    es = minimize_eta(CostModel(Quadratic(1, 1), 1), R0)
    assert es.M == 0.75 and es.u_star == -2.0 and es.attained
    assert es.regime is Regime.POSITIVE


def test_quadratic_preset_numeric_agrees():
    es = minimize_eta(CostModel(Quadratic(1, 1), 1), R0, method="numeric")
    assert es.M == pytest.approx(0.75, abs=1e-12)
    assert es.u_star == pytest.approx(-2.0, abs=1e-6)
    assert es.attained


def test_unattained_at_infinity():
    for method in ("auto", "numeric"):
        es = minimize_eta(CostModel(Quadratic(1, 0), 1), R0, method=method)
        assert es.M == pytest.approx(1.0, abs=1e-12)
        assert not es.attained and es.u_star is None
    es = minimize_eta(CostModel(Quadratic(1, 0), 1), R0)
    seq = es.sequence(60)
    assert [abs(u) for u in seq[:3]] == [2.0, 4.0, 8.0]
    assert eta(CostModel(Quadratic(1, 0), 1), seq[-1]) - 1.0 < 1e-8


def test_table_on_points():
    cost = CostModel(Table(((1.0, 0.0), (2.0, 1.0), (3.0, 5.0))), 1.0)
    es = minimize_eta(cost, ControlSet.points(1, 2, 3))
    assert es.M == pytest.approx(0.5) and es.u_star == 2.0 and es.attained
    with pytest.raises(ConfigError):
        minimize_eta(cost, R0)
    with pytest.raises(ConfigError):
        minimize_eta(cost, ControlSet.points(1, 4))


def test_negative_regime_on_half_line():
    es = minimize_eta(CostModel(Quadratic(1, -4), 1), ControlSet.interval(0.0, math.inf))
    assert es.M == pytest.approx(-3.0, abs=1e-9)
    assert es.u_star == pytest.approx(0.5, abs=1e-6)
    assert es.regime is Regime.NEGATIVE


def test_zero_regime_unattained():
    es = minimize_eta(CostModel(Power(1.0, 1.0), 1.0), ControlSet.interval(0.0, math.inf))
    assert es.M == 0.0 and es.regime is Regime.ZERO and not es.attained
    assert abs(es.sequence(5)[-1]) > 10


def test_excluded_endpoint_is_not_attained():
    # eta decreases towards u* = -2, so on (-3, -2.5) the infimum sits at the open end
    cost = CostModel(Quadratic(1, 1), 1)
    es = minimize_eta(cost, ControlSet.interval(-3.0, -2.5))
    assert es.M == pytest.approx(float(eta(cost, -2.5)), abs=1e-10)
    assert not es.attained
    seq = es.sequence(60)
    # later terms round onto the endpoint in double precision
    assert all(-3.0 < u < -2.5 for u in seq[:45])
    assert abs(seq[-1] + 2.5) < 1e-12
    closed = minimize_eta(cost, ControlSet.interval(-3.0, -2.5, hi_closed=True))
    assert closed.attained and closed.u_star == pytest.approx(-2.5)


def test_unbounded_below():
    es = minimize_eta(CostModel(Custom(lambda u: -(u**4)), 1.0), R0)
    assert es.M == -math.inf and es.regime is Regime.NEGATIVE


@settings(max_examples=40, deadline=None)
@given(
    st.floats(min_value=0.1, max_value=5.0),
    st.floats(min_value=-3.0, max_value=3.0).filter(lambda b: abs(b) > 1e-3),
    st.floats(min_value=0.1, max_value=5.0),
)
def test_numeric_matches_closed_form(a, b, c):
    cost = CostModel(Quadratic(a, b), c)
    closed = minimize_eta(cost, R0)
    assert closed.M == pytest.approx(quadratic_M(a, b, c), rel=1e-12, abs=1e-12)
    assert closed.u_star == pytest.approx(-2 * c / b)
    numeric = minimize_eta(cost, R0, method="numeric")
    assert numeric.M == pytest.approx(closed.M, rel=1e-9, abs=1e-9)


def test_gap_infimum_closed_form_and_numeric():
    cost = CostModel(Quadratic(1, 1), 1)
    assert gap_infimum(cost, R0, 0.75) == pytest.approx(0.0, abs=1e-14)
    assert gap_infimum(cost, R0, 0.0) == pytest.approx(0.75)
    assert gap_infimum(cost, R0, 2.0) == -math.inf
    numeric = gap_infimum(cost, ControlSet.interval(-10.0, -0.1, True, True), 0.5)
    assert numeric == pytest.approx(1 - 1 / (4 * 0.5), abs=1e-9)


@pytest.mark.parametrize("snr", [0.5, 2.0, -3.0])
def test_rescaling_divides_M_by_snr_squared(snr):
    cost = CostModel(Quadratic(1, 1), 1)
    c2, u2 = rescale_problem(cost, R0, snr)
    es = minimize_eta(c2, u2)
    assert es.M == pytest.approx(0.75 / snr**2, rel=1e-9)
    assert es.u_star == pytest.approx(-2.0 * snr, rel=1e-5)
