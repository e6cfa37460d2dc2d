"""Seller belief states and the partial-commitment state machine shared by
the finite- and infinite-horizon games.

The seller's posterior is always the prior restricted to
``[mu_begin, mu_end]``; after a zero-probability buyer action it jumps to the
point mass at the top of the support (``mu_begin == mu_end == top``). Once
the buyer has accepted, the seller is bound never to price above the lowest
accepted price, and in equilibrium simply keeps posting it.

The buyer runs the very same update code to infer the seller's belief, so the
two sides can never disagree about the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import CorruptBeliefState
from .simulator import BuyerStrategy, SellerStrategy


@dataclass(frozen=True)
class BeliefState:
    mu_begin: float = 0.0
    mu_end: float = 1.0
    min_accepted_price: float | None = None
    ever_accepted: bool = False
    round: int = 0

    def check(self) -> "BeliefState":
        if not (0.0 <= self.mu_begin <= self.mu_end) or math.isnan(self.mu_end):
            raise CorruptBeliefState(f"corrupt belief state: support [{self.mu_begin}, {self.mu_end}]")
        if self.ever_accepted != (self.min_accepted_price is not None):
            raise CorruptBeliefState("corrupt belief state: acceptance flag and recorded price disagree")
        if self.min_accepted_price is not None and not self.min_accepted_price >= 0.0:
            raise CorruptBeliefState(f"corrupt belief state: min accepted price {self.min_accepted_price}")
        return self

    def is_absorbing(self, top: float = 1.0) -> bool:
        return self.mu_begin == top and self.mu_end == top

    def as_dict(self) -> dict:
        return {
            "mu_begin": self.mu_begin,
            "mu_end": self.mu_end,
            "min_accepted_price": self.min_accepted_price,
            "ever_accepted": self.ever_accepted,
            "round": self.round,
        }


def _record(state: BeliefState, price: float) -> float:
    if state.min_accepted_price is None:
        return price
    return min(price, state.min_accepted_price)


class PartialCommitmentSeller(SellerStrategy):
    """Belief updates and pricing common to the partial-commitment games.

    Subclasses supply, for an all-reject state, the threshold ``t(x)`` that
    the buyer applies to a price ``x`` when that threshold stays inside the
    belief, the price factor ``p`` (equilibrium price ``p * mu_end``) and the
    threshold used when ``t(x)`` overshoots the belief.
    """

    top: float = 1.0

    def initial_state(self) -> BeliefState:
        return BeliefState(0.0, self.top)

    def threshold_map(self, state: BeliefState, x: float) -> float:
        raise NotImplementedError

    def price_factor(self, state: BeliefState) -> float:
        raise NotImplementedError

    def overpriced_threshold(self, state: BeliefState, x: float) -> float:
        raise NotImplementedError

    def _next(self, state: BeliefState, **kw) -> BeliefState:
        kw.setdefault("round", state.round + (0 if self.stationary else 1))
        return replace(state, **kw)

    def _absorb(self, state: BeliefState, **kw) -> BeliefState:
        return self._next(state, mu_begin=self.top, mu_end=self.top, **kw)

    def update(self, state: BeliefState, price: float, accepted: bool) -> BeliefState:
        state.check()
        if state.is_absorbing(self.top):
            # the original rule leaves the record untouched here; we still log
            # the price so the no-raise promise stays well defined
            if accepted:
                return self._next(state, min_accepted_price=_record(state, price), ever_accepted=True)
            return self._next(state)
        if state.ever_accepted:
            if not accepted:
                return self._absorb(state)
            return self._next(state, min_accepted_price=_record(state, price))
        t = self.threshold_map(state, price)
        if not accepted:
            if price == 0.0:
                return self._absorb(state)
            if t > state.mu_end:
                return self._next(state)
            return self._next(state, mu_end=t)
        if t > state.mu_end:
            return self._absorb(state, min_accepted_price=price, ever_accepted=True)
        return self._next(state, mu_begin=t, min_accepted_price=price, ever_accepted=True)

    def price(self, state: BeliefState) -> float:
        state.check()
        if state.ever_accepted:
            return state.min_accepted_price
        if state.is_absorbing(self.top):
            return self.top
        return self.price_factor(state) * state.mu_end

    def price_cap(self, state: BeliefState) -> float:
        return state.min_accepted_price if state.ever_accepted else math.inf


class PartialCommitmentBuyer(BuyerStrategy):
    def __init__(self, seller: PartialCommitmentSeller):
        self.seller = seller

    def threshold(self, state: BeliefState, price: float) -> float:
        if state.ever_accepted or state.is_absorbing(self.seller.top):
            return price
        t = self.seller.threshold_map(state, price)
        if t <= state.mu_end:
            return t
        return self.seller.overpriced_threshold(state, price)
