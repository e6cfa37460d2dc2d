"""Discounted infinite-horizon game with a U[0, 1] prior.

Round ``i`` (0-based) is weighted by ``(1 - delta)**i``. With partial
commitment the seller posts ``p * mu_end`` while every offer has been
refused, and the buyer accepts at the stationary fraction ``t`` of the
current belief; once a price is accepted it is posted forever. Without
commitment (``delta <= 1/2``) the seller gives the good away and the buyer
never pays a positive price unless punished.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .beliefs import BeliefState, PartialCommitmentBuyer, PartialCommitmentSeller
from .errors import UnsupportedDiscount
from .search import grid_golden_max
from .simulator import BuyerStrategy, SellerStrategy

LIMIT_RATIO = 4.0 / (3.0 + 2.0 * math.sqrt(2.0))
LIMIT_PRICE = math.sqrt(2.0) / (math.sqrt(2.0) + 1.0)
THRESHOLD_GRID = 4097
THRESHOLD_TOL = 1e-12


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise UnsupportedDiscount(f"delta must lie in (0, 1], got {delta}")
    return delta


def revenue_objective(z, delta: float):
    """Revenue ``z(1-z) / ((1-(1-delta)z)(1-(1-delta)z^2))`` of stationary threshold ``z``.

    Evaluated through ``w = 1 - z`` so the denominators do not cancel when
    ``delta`` is tiny and ``z`` is close to one.
    """
    z = np.asarray(z, dtype=float)
    w = 1.0 - z
    g = 1.0 - delta
    out = z * w / ((delta + g * w) * (delta + g * (2.0 * w - w * w)))
    return float(out) if out.ndim == 0 else out


def optimal_threshold(delta: float) -> float:
    delta = _check_delta(delta)
    lo = max(0.0, 1.0 - 10.0 * delta) if delta <= 1e-3 else 0.0
    t, _ = grid_golden_max(
        lambda z: revenue_objective(z, delta), lo, 1.0,
        n_grid=THRESHOLD_GRID, tol=THRESHOLD_TOL,
        vectorized=lambda z: revenue_objective(z, delta),
    )
    # the peak is too flat for a comparison search to pin t below ~1e-8;
    # the log-derivative crosses zero steeply, so finish with a root
    step = (1.0 - lo) / (THRESHOLD_GRID - 1)
    a, b = max(t - step, 1e-300), min(t + step, 1.0 - 1e-300)
    if _log_slope(a, delta) > 0.0 > _log_slope(b, delta):
        t = brentq(_log_slope, a, b, args=(delta,), xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return t


def _log_slope(z: float, delta: float) -> float:
    """d/dz of log revenue_objective, in the cancellation-free ``w = 1 - z`` form."""
    w = 1.0 - z
    g = 1.0 - delta
    return 1.0 / z - 1.0 / w + g / (delta + g * w) + 2.0 * g * z / (delta + g * (2.0 * w - w * w))


@dataclass(frozen=True)
class InfiniteEquilibrium:
    delta: float
    t: float
    p: float
    R: float
    ratio: float
    buyer_utility_top: float
    indifference_residual: float

    @property
    def benchmark(self) -> float:
        return 1.0 / (4.0 * self.delta)

    def threshold_map(self, x: float) -> float:
        """Threshold the buyer applies to price ``x`` on the all-reject path."""
        return x / (self.delta + (1.0 - self.delta) * self.p)

    def as_dict(self) -> dict:
        return {"delta": self.delta, "t": self.t, "p": self.p, "R": self.R, "ratio": self.ratio}


@lru_cache(maxsize=256)
def equilibrium(delta: float) -> InfiniteEquilibrium:
    delta = _check_delta(delta)
    t = optimal_threshold(delta)
    p = delta * t / (1.0 - (1.0 - delta) * t)
    R = revenue_objective(t, delta)
    u = (1.0 - p) / delta
    residual = abs((1.0 - delta) * u * t - (t - p) / delta)
    if residual > 1e-9 * max(1.0, u):
        raise ArithmeticError(f"buyer indifference fails at delta={delta}: residual {residual}")
    return InfiniteEquilibrium(delta, t, p, R, 4.0 * delta * R, u, residual)


def ratio_sweep(deltas) -> list[InfiniteEquilibrium]:
    return [equilibrium(float(d)) for d in deltas]


class InfinitePartialSeller(PartialCommitmentSeller):
    stationary = True

    def __init__(self, eq: InfiniteEquilibrium):
        self.eq = eq

    def threshold_map(self, state, x):
        return self.eq.threshold_map(x)

    def price_factor(self, state):
        return self.eq.p

    def overpriced_threshold(self, state, x):
        d = self.eq.delta
        return (x - (1.0 - d) * self.eq.p * state.mu_end) / d


def partial_strategies(delta: float):
    seller = InfinitePartialSeller(equilibrium(delta))
    return seller, PartialCommitmentBuyer(seller)


@lru_cache(maxsize=64)
def _machines(delta: float):
    return partial_strategies(delta)


def initial_belief() -> BeliefState:
    return BeliefState(0.0, 1.0)


def seller_step_partial(state: BeliefState, price: float, accepted: bool, delta: float) -> tuple[BeliefState, float]:
    """Belief after the buyer's response to ``price``, and the next price."""
    seller, _ = _machines(_check_delta(delta))
    nxt = seller.update(state, price, accepted)
    return nxt, seller.price(nxt)


def buyer_decide_partial(v: float, price: float, state: BeliefState, delta: float) -> bool:
    _, buyer = _machines(_check_delta(delta))
    state.check()
    return buyer.accepts(v, state, price)


# -- zero commitment ----------------------------------------------------------


@dataclass(frozen=True)
class ZeroState:
    ever_accepted_positive: bool = False
    ever_rejected_zero: bool = False
    mu_begin: float = 0.0
    mu_end: float = 1.0

    @property
    def punished(self) -> bool:
        return self.ever_accepted_positive or self.ever_rejected_zero


def _check_zero_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta <= 0.5:
        raise UnsupportedDiscount(f"zero-commitment equilibrium needs 0 < delta <= 0.5, got {delta}")
    return delta


def seller_step_zero(flags: ZeroState) -> float:
    return 1.0 if flags.punished else 0.0


def buyer_decide_zero(v: float, price: float, flags: ZeroState, delta: float) -> bool:
    _check_zero_delta(delta)
    if price == 0.0:
        return True
    return flags.punished and v >= price


class ZeroCommitmentSeller(SellerStrategy):
    stationary = True

    def __init__(self, delta: float):
        self.delta = _check_zero_delta(delta)

    def initial_state(self) -> ZeroState:
        return ZeroState()

    def price(self, state: ZeroState) -> float:
        return seller_step_zero(state)

    def update(self, state: ZeroState, price: float, accepted: bool) -> ZeroState:
        acc_pos = state.ever_accepted_positive or (accepted and price > 0.0)
        rej_zero = state.ever_rejected_zero or (not accepted and price == 0.0)
        tau = price if state.punished else (0.0 if price == 0.0 else math.inf)
        a, b = state.mu_begin, state.mu_end
        lo, hi = (max(a, tau), b) if accepted else (a, min(b, tau))
        if not hi > lo:
            lo = hi = 1.0
        return ZeroState(acc_pos, rej_zero, lo, hi)


class ZeroCommitmentBuyer(BuyerStrategy):
    def __init__(self, delta: float):
        self.delta = _check_zero_delta(delta)

    def threshold(self, state: ZeroState, price: float) -> float:
        if price == 0.0:
            return -math.inf
        return price if state.punished else math.inf


def zero_strategies(delta: float):
    return ZeroCommitmentSeller(delta), ZeroCommitmentBuyer(delta)
