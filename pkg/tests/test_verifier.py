import numpy as np
import pytest

from repeated_sales.distributions import Uniform
from repeated_sales.games import build_game
from repeated_sales.infinite_horizon import equilibrium
from repeated_sales.simulator import SimulationConfig, expected_revenue
from repeated_sales.two_round import two_round_objective
from repeated_sales.verifier import (
    PERTURBATIONS,
    check_belief_consistency,
    check_buyer_best_response,
    check_revenue_upper_bound,
    check_seller_best_response,
    on_path_states,
    perturb,
    replay_witness,
    revenue_benchmark,
    verify_all,
)


@pytest.fixture(scope="module")
def two_round():
    return build_game("two-round")


def test_two_round_passes_everything(two_round):
    for rep in verify_all(two_round):
        assert rep.passed, rep.as_dict()
        assert rep.verdict.startswith("pass")


def test_two_round_deviation_oracle():
    # for z >= 1/4 an opening price z earns z(1-2z) + 2z(1-2z) + z^2 = 3z - 5z^2
    assert two_round_objective(Uniform(0, 1), 0.3) == pytest.approx(0.45)
    assert two_round_objective(Uniform(0, 1), 0.5) == pytest.approx(0.25)
    for z in (0.25, 0.3, 0.4, 0.5):
        assert two_round_objective(Uniform(0, 1), z) == pytest.approx(3 * z - 5 * z * z)


def test_zero_commitment_passes():
    g = build_game("infinite-zero", delta=0.5)
    reps = verify_all(g)
    assert all(r.passed for r in reps)


def test_zero_commitment_rejecting_low_price_is_verified():
    g = build_game("infinite-zero", delta=0.5)
    rep = check_buyer_best_response(g, n_probe=10)
    assert rep.passed and rep.nodes > 1


def test_finite_power_law_passes():
    g = build_game("finite", n=3, k=2)
    for rep in verify_all(g, buyer={"grid_size": 1001}, seller={"grid_size": 1001}):
        assert rep.passed, rep.as_dict()


def test_infinite_partial_buyer_and_beliefs_pass():
    g = build_game("infinite-partial", delta=0.3)
    assert check_buyer_best_response(g, grid_size=1001, lookahead=3, n_probe=4).passed
    assert check_belief_consistency(g).passed


def test_belief_consistency_examples():
    d = 0.3
    eq = equilibrium(d)
    g = build_game("infinite-partial", delta=d)
    s0 = g.seller.initial_state()
    rej = g.seller.update(s0, eq.p, False)
    acc = g.seller.update(s0, eq.p, True)
    assert (rej.mu_begin, rej.mu_end) == pytest.approx((0.0, eq.t))
    assert (acc.mu_begin, acc.mu_end) == pytest.approx((eq.t, 1.0))
    assert g.seller.update(s0, 0.0, False).is_absorbing()


def infinite_partial_one_shot(delta, z):
    # open at the price whose threshold is z, then play the equilibrium
    eq = equilibrium(delta)
    c = delta + (1 - delta) * eq.p
    return z * (1 - z) * c / delta + (1 - delta) * z * z * eq.R


def test_infinite_partial_seller_check_matches_one_shot_oracle():
    d = 0.3
    g = build_game("infinite-partial", delta=d)
    rep = check_seller_best_response(g, grid_size=1001, depth=1)
    z = np.linspace(0, 1, 1_000_001)
    oracle = infinite_partial_one_shot(d, z)
    gain = float(oracle.max() - equilibrium(d).R)
    assert rep.gain == pytest.approx(gain, abs=1e-6)
    c = d + (1 - d) * equilibrium(d).p
    assert rep.witness["price"] == pytest.approx(z[np.argmax(oracle)] * c, abs=1e-5)
    assert replay_witness(g, rep) == pytest.approx(rep.gain, abs=1e-9)


@pytest.mark.parametrize("delta", [0.1, 0.5, 0.9])
def test_one_shot_gain_is_positive_below_one(delta):
    z = np.linspace(0, 1, 200_001)
    assert infinite_partial_one_shot(delta, z).max() > equilibrium(delta).R + 1e-5


def test_one_shot_gain_vanishes_at_one():
    z = np.linspace(0, 1, 200_001)
    assert infinite_partial_one_shot(1.0, z).max() == pytest.approx(equilibrium(1.0).R, abs=1e-12)


@pytest.mark.parametrize("kind", PERTURBATIONS)
def test_perturbations_fail_with_replayable_witness(two_round, kind):
    g = perturb(two_round, kind)
    failed = [r for r in verify_all(g) if not r.passed]
    assert failed
    for r in failed:
        assert r.verdict == "fail(witness)" and r.witness is not None
        assert replay_witness(g, r) == pytest.approx(r.gain, abs=1e-9)
        assert r.gain > r.epsilon


def test_buyer_threshold_witness_lies_in_the_shifted_band():
    d = 0.3
    g = perturb(build_game("infinite-partial", delta=d), "buyer-threshold")
    rep = check_buyer_best_response(g, grid_size=1001, lookahead=3, depth=0, n_probe=0)
    assert not rep.passed
    t = equilibrium(d).t
    assert t - 0.05 <= rep.witness["value"] < t
    assert replay_witness(g, rep) == pytest.approx(rep.gain, abs=1e-9)


def test_root_price_perturbation_lowers_revenue():
    g = build_game("infinite-partial", delta=0.3)
    pg = perturb(g, "root-price")
    base, _ = expected_revenue(g.seller, g.buyer, g.dist, g.config)
    bumped, _ = expected_revenue(pg.seller, pg.buyer, pg.dist, pg.config)
    assert bumped < base


def test_unknown_perturbation():
    with pytest.raises(ValueError):
        perturb(build_game("two-round"), "flip-coin")


def test_revenue_upper_bound():
    assert revenue_benchmark(Uniform(0, 1), SimulationConfig.fixed(100)) == pytest.approx(25.0)
    assert revenue_benchmark(Uniform(0, 1), SimulationConfig.discounted(0.01)) == pytest.approx(25.0)
    assert check_revenue_upper_bound(7.3, Uniform(0, 1), SimulationConfig.fixed(100)).passed
    assert check_revenue_upper_bound(0.25, Uniform(0, 1), SimulationConfig.fixed(1)).passed
    assert not check_revenue_upper_bound(0.26, Uniform(0, 1), SimulationConfig.fixed(1)).passed


def test_on_path_states_start_at_root(two_round):
    states = on_path_states(two_round, 2)
    assert states[0][0] == two_round.seller.initial_state()
    assert len(states) >= 3


def test_deeper_seller_deviations_run(two_round):
    rep = check_seller_best_response(two_round, grid_size=257, deviation_depth=2)
    assert rep.passed


def test_report_serializes(two_round):
    d = check_belief_consistency(two_round).as_dict()
    assert d["verdict"] == "pass(0)" or d["verdict"].startswith("pass")
    assert {"role", "check", "gain", "error_budget", "witness"} <= set(d)
