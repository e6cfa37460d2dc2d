import math

import numpy as np
import pytest

from repeated_sales.distributions import PiecewiseLinearCDF, PowerLaw, Uniform
from repeated_sales.errors import ThresholdInversionError
from repeated_sales.simulator import SimulationConfig, expected_revenue
from repeated_sales.two_round import (
    buyer_decision_two_round,
    solve_two_round,
    threshold_for_price,
    two_round_objective,
    two_round_strategies,
    upper_price,
)


def test_uniform_equilibrium():
    eq = solve_two_round(Uniform(0.0, 1.0))
    assert eq.p1 == pytest.approx(0.3, abs=1e-6)
    assert eq.t1 == pytest.approx(0.6, abs=1e-6)
    assert eq.p20 == pytest.approx(0.3, abs=1e-6)
    assert eq.p21 == pytest.approx(0.6, abs=1e-6)
    assert eq.revenue == pytest.approx(0.45, abs=1e-9)
    assert not eq.p1_equals_lower_support


def test_uniform_revenue_oracle():
    # opening at z on U[0,1]: threshold 2z, rejecters see z again, buyers see max(2z, 1/2)
    z = np.linspace(0.0, 0.5, 500_001)
    t = 2 * z
    hi = np.maximum(t, 0.5)
    full = z * (1 - t) + hi * (1 - hi) + z * (t - z)
    j = int(np.argmax(full))
    assert full[j] == pytest.approx(0.45, abs=1e-9)
    assert z[j] == pytest.approx(0.3, abs=1e-5)


def test_scaled_uniform():
    eq = solve_two_round(Uniform(0.0, 2.0))
    assert eq.revenue == pytest.approx(0.9, abs=1e-8)
    assert eq.p1 == pytest.approx(0.6, abs=1e-6)


def test_lower_support_opening():
    eq = solve_two_round(Uniform(0.5, 1.0))
    assert eq.p1 == 0.5 and eq.revenue == pytest.approx(1.0)
    assert eq.p1_equals_lower_support and eq.lower_support_in_argmax


def test_power_law_matches_quadrature_replay():
    d = PowerLaw(1)
    eq = solve_two_round(d)
    seller, buyer = two_round_strategies(d, eq)
    value, err = expected_revenue(seller, buyer, d, SimulationConfig.fixed(2))
    assert value == pytest.approx(eq.revenue, abs=1e-9)


def test_objective_is_maximized():
    d = PowerLaw(1)
    eq = solve_two_round(d)
    grid = np.linspace(d.low, eq.monopoly_price, 801)
    vals = [two_round_objective(d, z) for z in grid]
    assert eq.revenue >= max(vals) - 1e-12


def test_threshold_inversion_uniform_and_power_law():
    assert threshold_for_price(Uniform(0, 1), 0.3) == pytest.approx(0.6)
    d = PowerLaw(1)
    t = threshold_for_price(d, 0.4)
    assert d.restrict(0.0, t).monopoly_price()[0] == pytest.approx(0.4, abs=1e-12)


def test_threshold_inversion_smallest_at_kink():
    d = PiecewiseLinearCDF(((0.0, 0.0), (0.4, 0.2), (1.0, 1.0)))
    x = 0.3
    t = threshold_for_price(d, x)
    assert d.restrict(0.0, t).monopoly_price()[0] == pytest.approx(x, abs=1e-7)
    # nothing smaller works
    lower = max(x + 1e-6, t - 1e-4)
    assert d.restrict(0.0, lower).monopoly_price()[0] < x - 1e-9 or lower >= t


def test_threshold_inversion_out_of_range():
    with pytest.raises(ThresholdInversionError):
        threshold_for_price(Uniform(0, 1), 0.7)


def test_upper_price():
    assert upper_price(Uniform(0, 1), 0.6) == pytest.approx(0.6)
    assert upper_price(Uniform(0, 1), 0.2) == pytest.approx(0.5)
    assert upper_price(Uniform(0, 1), 1.0) == 1.0


def test_buyer_decision():
    u = Uniform(0, 1)
    assert buyer_decision_two_round(0.7, 1, 0.3, u)
    assert not buyer_decision_two_round(0.5, 1, 0.3, u)
    assert not buyer_decision_two_round(0.99, 1, 0.6, u)
    assert buyer_decision_two_round(0.6, 2, 0.6, u)
    with pytest.raises(ValueError):
        buyer_decision_two_round(0.5, 3, 0.1, u)


def test_buyer_utility_is_optimal_on_grid():
    eq = solve_two_round(Uniform(0, 1))
    for v in np.linspace(0, 1, 101):
        accept_now = (v - eq.p1) + max(v - eq.p21, 0.0)
        wait = max(v - eq.p20, 0.0)
        assert eq.buyer_utility(v) >= max(accept_now, wait) - 1e-6
