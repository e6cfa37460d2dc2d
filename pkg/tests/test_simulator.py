import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from repeated_sales.distributions import PowerLaw, Uniform
from repeated_sales.errors import InvalidPrice
from repeated_sales.finite_horizon import finite_partial_strategies
from repeated_sales.infinite_horizon import equilibrium, partial_strategies, zero_strategies
from repeated_sales.simulator import (
    BuyerStrategy,
    SellerStrategy,
    SimulationConfig,
    expected_revenue,
    geometric_equivalence_check,
    partition,
    playout,
    stream,
    truncation_rounds,
)
from repeated_sales.two_round import solve_two_round, two_round_strategies

U = Uniform(0.0, 1.0)


class Posted(SellerStrategy):
    """Posts the same price forever."""

    stationary = True

    def __init__(self, x):
        self.x = x

    def initial_state(self):
        return 0

    def price(self, state):
        return self.x

    def update(self, state, price, accepted):
        return 0


class Myopic(BuyerStrategy):
    def threshold(self, state, price):
        return price


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig.fixed(0)
    with pytest.raises(ValueError):
        SimulationConfig.discounted(1.5)
    with pytest.raises(ValueError):
        SimulationConfig(regime="forever")


def test_truncation_rounds():
    T = truncation_rounds(0.1, 1e-10)
    assert 0.9 ** T / 0.1 <= 1e-10 < 0.9 ** (T - 1) / 0.1
    assert truncation_rounds(1.0, 1e-10) == 1
    cfg = SimulationConfig.discounted(0.2)
    assert cfg.tail_bound() <= cfg.tol / 10


def test_posted_price_closed_form():
    # posting x forever to a myopic buyer earns x (1 - x) / delta
    value, err = expected_revenue(Posted(0.5), Myopic(), U, SimulationConfig.discounted(0.25))
    assert value == pytest.approx(0.25 / 0.25, abs=1e-9)
    assert err <= 1e-9


def test_fixed_horizon_posted_price():
    value, err = expected_revenue(Posted(0.4), Myopic(), U, SimulationConfig.fixed(7))
    assert value == pytest.approx(7 * 0.4 * 0.6, abs=1e-12) and err == 0.0


def test_invalid_price():
    for bad in (-0.1, math.nan, math.inf):
        with pytest.raises(InvalidPrice):
            playout(Posted(bad), Myopic(), 0.5, SimulationConfig.fixed(1))


def test_transcript_contents():
    eq = equilibrium(0.3)
    seller, buyer = partial_strategies(0.3)
    tr = playout(seller, buyer, 0.7, SimulationConfig.discounted(0.3), rounds=4)
    d = tr.to_dict()
    assert [r["decision"] for r in d["rounds"]] == ["reject", "accept", "accept", "accept"]
    assert d["rounds"][0]["price"] == pytest.approx(eq.p)
    assert [r["weight"] for r in d["rounds"]] == pytest.approx([1.0, 0.7, 0.49, 0.343])


def test_forced_actions_and_first_price():
    seller, buyer = partial_strategies(0.3)
    cfg = SimulationConfig.discounted(0.3)
    tr = playout(seller, buyer, 0.9, cfg, first_price=0.2, actions=[False, False], rounds=3)
    assert tr.rounds[0].price == 0.2 and not tr.rounds[0].accepted and not tr.rounds[1].accepted


def test_quadrature_matches_monte_carlo():
    eq = solve_two_round(U)
    seller, buyer = two_round_strategies(U, eq)
    cfg = SimulationConfig.fixed(2, samples=200_000, seed=11)
    mc, se = expected_revenue(seller, buyer, U, cfg, "monte_carlo")
    quad, _ = expected_revenue(seller, buyer, U, cfg)
    assert abs(mc - quad) <= 4 * se
    assert quad == pytest.approx(0.45, abs=1e-9)


def test_monte_carlo_is_reproducible():
    seller, buyer = partial_strategies(0.4)
    cfg = SimulationConfig.discounted(0.4, samples=30_000, seed=5)
    a = expected_revenue(seller, buyer, U, cfg, "monte_carlo")
    b = expected_revenue(seller, buyer, U, cfg, "monte_carlo")
    c = expected_revenue(seller, buyer, U, SimulationConfig.discounted(0.4, samples=30_000, seed=6), "monte_carlo")
    assert a == b and a != c
    assert stream(3, 1).random() == stream(3, 1).random()


def test_geometric_stopping_equivalence():
    seller, buyer = partial_strategies(0.3)
    rep = geometric_equivalence_check(seller, buyer, U, 0.3, samples=200_000, seed=2)
    assert rep["passed"]
    assert rep["discounted_quadrature"] == pytest.approx(equilibrium(0.3).R, abs=1e-8)


def test_quadrature_refuses_geometric_regime():
    seller, buyer = partial_strategies(0.3)
    with pytest.raises(ValueError):
        expected_revenue(seller, buyer, U, SimulationConfig.geometric(0.3))


def test_zero_commitment_revenue_is_zero():
    seller, buyer = zero_strategies(0.3)
    value, _ = expected_revenue(seller, buyer, U, SimulationConfig.discounted(0.3))
    assert value == 0.0


def test_partition_covers_support():
    seller, buyer = partial_strategies(0.2)
    part = partition(seller, buyer, 0.0, 1.0, 50, 0.8)
    assert part.lo[0] == 0.0 and part.hi[-1] == 1.0
    assert np.allclose(part.hi[:-1], part.lo[1:])
    v = np.linspace(0, 1, 257)
    direct = [playout(seller, buyer, x, SimulationConfig.discounted(0.2), rounds=50).revenue for x in v]
    assert np.allclose(part.seller_revenue(v), direct, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.02, 1.0))
def test_prices_never_rise_after_a_purchase(v, delta):
    seller, buyer = partial_strategies(delta)
    tr = playout(seller, buyer, v, SimulationConfig.discounted(delta), rounds=40)
    bought = False
    floor = math.inf
    for r in tr.rounds:
        if bought:
            assert r.price <= floor
        if r.accepted:
            bought = True
            floor = min(floor, r.price)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_revenue_monotone_in_value(a, b):
    lo, hi = min(a, b), max(a, b)
    seller, buyer, prior = finite_partial_strategies(6, 1)
    cfg = SimulationConfig.fixed(6)
    assert playout(seller, buyer, lo, cfg).revenue <= playout(seller, buyer, hi, cfg).revenue + 1e-12
    s2, b2 = partial_strategies(0.25)
    cfg2 = SimulationConfig.discounted(0.25)
    assert playout(s2, b2, lo, cfg2).revenue <= playout(s2, b2, hi, cfg2).revenue + 1e-12


def test_power_law_prior_quadrature():
    seller, buyer, prior = finite_partial_strategies(3, 2)
    assert isinstance(prior, PowerLaw)
    value, _ = expected_revenue(seller, buyer, prior, SimulationConfig.fixed(3))
    assert value == pytest.approx(seller.table.R[3], abs=1e-10)
