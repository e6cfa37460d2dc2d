"""Two-round no-commitment game for an arbitrary atomless prior.

In round one the seller posts ``p1``. A buyer accepts iff ``v >= t(p1)``,
where ``t(x)`` is the smallest upper end ``t`` such that the monopoly price of
the prior restricted to ``[low, t]`` equals ``x``. After a rejection the
seller reprices at ``p1`` (the monopoly price of ``[low, t(p1)]``); after an
acceptance at the monopoly price of ``[t(p1), high]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distributions import PowerLaw, Uniform, ValueDistribution
from .errors import ThresholdInversionError
from .search import grid_golden_max
from .simulator import BuyerStrategy, SellerStrategy

INVERSION_TOL = 1e-7
TWO_ROUND_GRID = 4097


def _exact_inversion(dist: ValueDistribution) -> bool:
    # for these families the first-order candidate is the exact inverse
    return isinstance(dist, (Uniform, PowerLaw))


def threshold_for_price(dist: ValueDistribution, x: float, verify: bool | None = None) -> float:
    """Smallest ``t`` with ``monopoly_price(restrict(dist, low, t)) == x``.

    Prices at or below the lower support end map to ``low`` (everyone buys).
    The candidate ``F^-1(F(x) + x f(x-))`` solves the first-order condition
    with the left density, which picks the smallest ``t`` when ``x`` sits on a
    density kink. Unless the family is known to invert exactly, the candidate
    is checked and, if wrong, replaced by bisection on ``t``.
    """
    lo, hi = dist.low, dist.high
    x = float(x)
    if x <= lo:
        return lo
    p_star, _ = dist.monopoly_price()
    if x > p_star + INVERSION_TOL:
        raise ThresholdInversionError(
            f"threshold inversion failed: price {x} outside the achievable range [{lo}, {p_star}]"
        )
    if x >= p_star:
        return _smallest_threshold(dist, p_star, hi) if not _exact_inversion(dist) else hi
    q = float(dist.cdf(x)) + x * float(dist.pdf(np.nextafter(x, -math.inf)))
    if q >= 1.0:
        cand = hi
    else:
        cand = float(dist.inverse_cdf(q))
    if verify is None:
        verify = not _exact_inversion(dist)
    if not verify:
        return cand
    if cand > x and abs(_restricted_price(dist, cand) - x) <= INVERSION_TOL:
        return cand
    return _smallest_threshold(dist, x, hi)


def _restricted_price(dist: ValueDistribution, t: float) -> float:
    return dist.restrict(dist.low, t).monopoly_price()[0]


def _smallest_threshold(dist: ValueDistribution, x: float, upper: float) -> float:
    """Bisection on the nondecreasing map ``t -> p*_[low, t]``."""
    a, b = x, upper
    if _restricted_price(dist, b) < x - INVERSION_TOL:
        raise ThresholdInversionError(f"threshold inversion failed: price {x} not reached on [{dist.low}, {upper}]")
    for _ in range(60):
        m = 0.5 * (a + b)
        if m <= dist.low or dist.mass(dist.low, m) <= 0.0:
            a = m
            continue
        if _restricted_price(dist, m) >= x - INVERSION_TOL:
            b = m
        else:
            a = m
        if b - a <= 1e-13:
            break
    if abs(_restricted_price(dist, b) - x) > INVERSION_TOL:
        raise ThresholdInversionError(
            f"threshold inversion failed: price {x} is skipped by the restricted monopoly price"
        )
    return b


def upper_price(dist: ValueDistribution, t: float) -> float:
    """Monopoly price of the prior restricted to ``[t, high]`` (``high`` if that is empty)."""
    if t >= dist.high:
        return dist.high
    return dist.restrict(max(t, dist.low), dist.high).monopoly_price()[0]


@dataclass(frozen=True)
class TwoRoundEquilibrium:
    p1: float
    t1: float
    p20: float
    p21: float
    revenue: float
    monopoly_price: float
    monopoly_revenue: float
    p1_equals_lower_support: bool
    lower_support_in_argmax: bool
    dist: ValueDistribution

    def buyer_utility(self, v: float) -> float:
        """On-path utility of a buyer with value ``v``."""
        if v >= self.t1:
            return (v - self.p1) + max(v - self.p21, 0.0)
        return max(v - self.p20, 0.0)

    def as_dict(self) -> dict:
        return {
            "p1": self.p1,
            "t1": self.t1,
            "p20": self.p20,
            "p21": self.p21,
            "revenue": self.revenue,
            "monopoly_price": self.monopoly_price,
            "p1_equals_lower_support": self.p1_equals_lower_support,
            "lower_support_in_argmax": self.lower_support_in_argmax,
        }


def two_round_objective(dist: ValueDistribution, z: float) -> float:
    """Seller revenue ``R(z) + R(p*_[t(z), high])`` when opening at ``z``; ``-inf`` if ``t(z)`` is undefined."""
    try:
        t = threshold_for_price(dist, z)
    except ThresholdInversionError:
        return -math.inf
    return float(dist.revenue(z)) + float(dist.revenue(upper_price(dist, t)))


def solve_two_round(dist: ValueDistribution, grid: int = TWO_ROUND_GRID, tol: float = 1e-10) -> TwoRoundEquilibrium:
    lo = dist.low
    p_star, r_star = dist.monopoly_price()

    def f(z):
        return two_round_objective(dist, z)

    if p_star - lo <= tol:
        p1, best = lo, f(lo)
    else:
        p1, best = grid_golden_max(f, lo, p_star, n_grid=grid, tol=tol)
    # an argmax within tol of the lower end is the lower end
    at_low = f(lo)
    if p1 - lo <= 10 * tol and at_low >= best - 1e-12:
        p1, best = lo, at_low
    t1 = threshold_for_price(dist, p1)
    p21 = upper_price(dist, t1)
    revenue = float(dist.revenue(p1)) + float(dist.revenue(p21))
    return TwoRoundEquilibrium(
        p1=p1,
        t1=t1,
        p20=p1,
        p21=p21,
        revenue=revenue,
        monopoly_price=p_star,
        monopoly_revenue=r_star,
        p1_equals_lower_support=abs(p1 - lo) <= 1e-9,
        lower_support_in_argmax=at_low >= best - 1e-12,
        dist=dist,
    )


def buyer_decision_two_round(v: float, round: int, price: float, dist: ValueDistribution) -> bool:
    """``True`` means accept. Threshold types accept."""
    if round == 1:
        p_star, _ = dist.monopoly_price()
        if price > p_star:
            return False
        return v >= threshold_for_price(dist, price)
    if round == 2:
        return v >= price
    raise ValueError(f"round must be 1 or 2, got {round}")


@dataclass(frozen=True)
class TwoRoundState:
    round: int
    p1: float | None
    accepted: bool | None
    mu_begin: float
    mu_end: float


class TwoRoundSeller(SellerStrategy):
    """Seller state machine of the two-round equilibrium; rounds are 0-based internally."""

    stationary = False

    def __init__(self, eq: TwoRoundEquilibrium):
        self.eq = eq
        self.dist = eq.dist
        self._threshold = lru_cache(maxsize=None)(lambda x: threshold_for_price(self.dist, x))
        self._upper = lru_cache(maxsize=None)(lambda t: upper_price(self.dist, t))

    def threshold(self, x: float) -> float:
        if x > self.eq.monopoly_price:
            return math.inf
        return self._threshold(x)

    def initial_state(self) -> TwoRoundState:
        return TwoRoundState(0, None, None, self.dist.low, self.dist.high)

    def price(self, state: TwoRoundState) -> float:
        if state.round == 0:
            return self.eq.p1
        if state.round != 1:
            raise ValueError("the two-round game has no third round")
        if state.p1 <= self.eq.monopoly_price:
            return self._upper(self._threshold(state.p1)) if state.accepted else state.p1
        return self.dist.high if state.accepted else self.eq.monopoly_price

    def update(self, state: TwoRoundState, price: float, accepted: bool) -> TwoRoundState:
        tau = self.threshold(price) if state.round == 0 else price
        a, b = state.mu_begin, state.mu_end
        if accepted:
            lo2, hi2 = max(a, tau), b
        else:
            lo2, hi2 = a, min(b, tau)
        if not hi2 > lo2 or self.dist.mass(lo2, hi2) <= 0.0:
            lo2 = hi2 = self.dist.high
        return TwoRoundState(state.round + 1, price if state.round == 0 else state.p1,
                             accepted if state.round == 0 else state.accepted, lo2, hi2)


class TwoRoundBuyer(BuyerStrategy):
    def __init__(self, seller: TwoRoundSeller):
        self.seller = seller

    def threshold(self, state: TwoRoundState, price: float) -> float:
        if state.round == 0:
            return self.seller.threshold(price)
        return price


def two_round_strategies(dist: ValueDistribution, eq: TwoRoundEquilibrium | None = None):
    eq = solve_two_round(dist) if eq is None else eq
    seller = TwoRoundSeller(eq)
    return seller, TwoRoundBuyer(seller)
