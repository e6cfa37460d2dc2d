"""Equilibria of repeated posted-price sales to a single strategic buyer."""

from .distributions import PiecewiseLinearCDF, PowerLaw, Truncated, Uniform, ValueDistribution, load_distribution
from .errors import (
    CorruptBeliefState,
    DegenerateRestriction,
    DensityVanishes,
    InvalidPrice,
    ThresholdInversionError,
    UnsupportedDiscount,
)
from .finite_horizon import (
    FiniteRecursionTable,
    asymptotic_gap,
    finite_partial_strategies,
    scalar_revenue,
    solve_partial_power_law,
    solve_partial_uniform,
    threshold_pbe_exists,
)
from .games import build_game
from .infinite_horizon import LIMIT_PRICE, LIMIT_RATIO, InfiniteEquilibrium, equilibrium, partial_strategies, zero_strategies
from .simulator import SimulationConfig, expected_revenue, geometric_equivalence_check, partition, playout
from .two_round import TwoRoundEquilibrium, solve_two_round, threshold_for_price, two_round_strategies
from .verifier import (
    DeviationReport,
    Game,
    check_belief_consistency,
    check_buyer_best_response,
    check_revenue_upper_bound,
    check_seller_best_response,
    perturb,
    replay_witness,
    verify_all,
)

__version__ = "0.1.0"
