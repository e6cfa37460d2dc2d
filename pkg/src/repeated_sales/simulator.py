"""Play seller/buyer strategy pairs forward and integrate their payoffs.

Strategies are small state machines. A seller maps a public state to a price
and updates the state after each buyer response; a buyer is a threshold rule
that accepts a price ``x`` at state ``s`` iff ``v >= threshold(s, x)``. The
public state is shared by both sides: the buyer infers the seller's belief by
running the seller's own update code.

Three regimes are supported:

* ``fixed_horizon``: exactly ``n`` rounds, undiscounted;
* ``discounted``: round ``i`` (0-based) weighted by ``(1 - delta)**i``,
  truncated after ``T`` rounds with ``(1 - delta)**T * high / delta <= tol / 10``;
* ``geometric_stopping``: undiscounted, the game survives each round with
  probability ``1 - delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Hashable, Sequence

import numpy as np

from .distributions import ValueDistribution
from .errors import InvalidPrice

MC_CHUNK = 1 << 16


class SellerStrategy:
    """Base class for seller state machines.

    ``stationary`` sellers price from the state alone (no round counter), so a
    state that maps to itself under an update repeats forever.
    """

    stationary: bool = False

    def initial_state(self) -> Hashable:
        raise NotImplementedError

    def price(self, state) -> float:
        raise NotImplementedError

    def update(self, state, price: float, accepted: bool):
        raise NotImplementedError

    def belief(self, state) -> tuple[float, float]:
        """Support ``(mu_begin, mu_end)`` of the seller's posterior over the prior."""
        return state.mu_begin, state.mu_end

    def price_cap(self, state) -> float:
        """Largest price the seller may post at ``state`` (partial commitment)."""
        return math.inf


class BuyerStrategy:
    def threshold(self, state, price: float) -> float:
        raise NotImplementedError

    def accepts(self, v: float, state, price: float) -> bool:
        return v >= self.threshold(state, price)


@dataclass(frozen=True)
class SimulationConfig:
    regime: str = "discounted"
    n: int | None = None
    delta: float | None = None
    tol: float = 1e-9
    truncation: int | None = None
    panels: int = 10_000
    samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.regime == "fixed_horizon":
            if self.n is None or self.n < 1:
                raise ValueError("fixed_horizon needs n >= 1")
        elif self.regime in ("discounted", "geometric_stopping"):
            if self.delta is None or not 0.0 < self.delta <= 1.0:
                raise ValueError(f"{self.regime} needs 0 < delta <= 1")
        else:
            raise ValueError(f"unknown regime {self.regime!r}")

    @classmethod
    def fixed(cls, n: int, **kw) -> "SimulationConfig":
        return cls(regime="fixed_horizon", n=n, **kw)

    @classmethod
    def discounted(cls, delta: float, **kw) -> "SimulationConfig":
        return cls(regime="discounted", delta=delta, **kw)

    @classmethod
    def geometric(cls, delta: float, **kw) -> "SimulationConfig":
        return cls(regime="geometric_stopping", delta=delta, **kw)

    @property
    def discount(self) -> float:
        """Per-round weight multiplier used in transcripts."""
        if self.regime == "discounted":
            return 1.0 - self.delta
        return 1.0

    def rounds(self, high: float = 1.0) -> int:
        """Number of rounds a playout runs (the truncation point for discounted play)."""
        if self.regime == "fixed_horizon":
            return self.n
        if self.truncation is not None:
            return self.truncation
        return truncation_rounds(self.delta, self.tol / 10.0, high)

    def tail_bound(self, high: float = 1.0) -> float:
        """Bound on payoff lost by truncating a discounted playout."""
        if self.regime != "discounted" or self.delta == 1.0:
            return 0.0
        return (1.0 - self.delta) ** self.rounds(high) * high / self.delta

    def as_dict(self) -> dict[str, Any]:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def truncation_rounds(delta: float, tail: float, high: float = 1.0) -> int:
    """Smallest ``T`` with ``(1 - delta)**T * high / delta <= tail``."""
    if delta >= 1.0:
        return 1
    need = math.log(tail * delta / high) / math.log1p(-delta)
    return max(1, math.ceil(need))


def stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for replicate ``index`` of run ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


@dataclass(frozen=True)
class RoundRecord:
    index: int
    price: float
    accepted: bool
    weight: float


@dataclass(frozen=True)
class Transcript:
    rounds: tuple[RoundRecord, ...]
    value: float
    revenue: float
    utility: float
    final_state: Any = field(repr=False, default=None)

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "revenue": self.revenue,
            "utility": self.utility,
            "rounds": [
                {"round": r.index, "price": r.price, "decision": "accept" if r.accepted else "reject", "weight": r.weight}
                for r in self.rounds
            ],
        }


def _check_price(x: float) -> float:
    if not (x >= 0.0 and math.isfinite(x)):
        raise InvalidPrice(f"invalid price {x!r}")
    return float(x)


def playout(
    seller: SellerStrategy,
    buyer: BuyerStrategy,
    v: float,
    config: SimulationConfig,
    *,
    start_state=None,
    start_round: int = 0,
    first_price: float | None = None,
    actions: Sequence[bool] | None = None,
    rounds: int | None = None,
    high: float = 1.0,
    replicate: int = 0,
) -> Transcript:
    """Play one game for buyer value ``v``.

    ``first_price`` overrides the seller's first price and ``actions``
    overrides the buyer's first ``len(actions)`` decisions; both exist to
    replay deviations. Weights are relative to the starting round.
    """
    state = seller.initial_state() if start_state is None else start_state
    if rounds is None:
        if config.regime == "geometric_stopping":
            rounds = int(stream(config.seed, replicate).geometric(config.delta))
        elif config.regime == "fixed_horizon":
            rounds = config.n - start_round
        else:
            rounds = config.rounds(high)
    disc = config.discount
    records = []
    revenue = utility = 0.0
    w = 1.0
    for i in range(rounds):
        if i == 0 and first_price is not None:
            x = _check_price(first_price)
        else:
            x = _check_price(seller.price(state))
        if actions is not None and i < len(actions):
            acc = bool(actions[i])
        else:
            acc = bool(buyer.accepts(v, state, x))
        records.append(RoundRecord(start_round + i, x, acc, w))
        if acc:
            revenue += w * x
            utility += w * (v - x)
        state = seller.update(state, x, acc)
        w *= disc
    return Transcript(tuple(records), float(v), revenue, utility, state)


@dataclass(frozen=True)
class Partition:
    """Value-space partition induced by threshold play.

    Leaf ``j`` covers ``lo[j] <= v < hi[j]``; every value in it follows the
    same accept/reject path, earning the seller ``revenue[j]`` and the buyer
    ``accepted_weight[j] * v - revenue[j]``.
    """

    lo: np.ndarray
    hi: np.ndarray
    accepted_weight: np.ndarray
    revenue: np.ndarray

    def locate(self, v) -> np.ndarray:
        idx = np.searchsorted(self.lo, np.asarray(v, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self.lo) - 1)

    def utility(self, v) -> np.ndarray:
        j = self.locate(v)
        return self.accepted_weight[j] * np.asarray(v, dtype=float) - self.revenue[j]

    def seller_revenue(self, v) -> np.ndarray:
        return self.revenue[self.locate(v)]

    def expected_revenue(self, dist: ValueDistribution, a: float | None = None, b: float | None = None) -> float:
        """Exact E[revenue | a <= v <= b] under ``dist`` (leaves are piecewise constant)."""
        a = dist.low if a is None else a
        b = dist.high if b is None else b
        total = dist.mass(a, b)
        if total <= 0.0:
            raise ValueError(f"no mass on [{a}, {b}]")
        lo = np.clip(self.lo, a, b)
        hi = np.clip(self.hi, a, b)
        masses = np.clip(np.asarray(dist.sf(lo)) - np.asarray(dist.sf(hi)), 0.0, None)
        return float(np.sum(masses * self.revenue) / total)


def partition(
    seller: SellerStrategy,
    buyer: BuyerStrategy,
    lo: float,
    hi: float,
    rounds: int,
    discount: float = 1.0,
    *,
    start_state=None,
    first_price: float | None = None,
) -> Partition:
    """Split ``[lo, hi)`` into classes of values that play identically for ``rounds`` rounds.

    For stationary sellers a branch whose state maps to itself is closed with
    the geometric sum of its remaining (truncated) rounds, so the cost is
    linear in ``rounds`` for the equilibria here.
    """
    state0 = seller.initial_state() if start_state is None else start_state
    leaves: list[tuple[float, float, float, float]] = []
    stack = [(state0, 0, float(lo), float(hi), 0.0, 0.0, 1.0)]
    while stack:
        state, i, a, b, acc_w, rev, w = stack.pop()
        if i >= rounds:
            leaves.append((a, b, acc_w, rev))
            continue
        forced = i == 0 and first_price is not None
        x = _check_price(first_price) if forced else _check_price(seller.price(state))
        tau = buyer.threshold(state, x)
        for accepted, c, d in ((True, max(a, tau), b), (False, a, min(b, tau))):
            if not d > c:
                continue
            nxt = seller.update(state, x, accepted)
            acc_w2 = acc_w + (w if accepted else 0.0)
            rev2 = rev + (w * x if accepted else 0.0)
            if seller.stationary and not forced and nxt == state:
                remaining = rounds - i - 1
                if discount == 1.0:
                    tail = w * remaining
                else:
                    tail = w * discount * (1.0 - discount**remaining) / (1.0 - discount)
                if accepted:
                    acc_w2 += tail
                    rev2 += tail * x
                leaves.append((c, d, acc_w2, rev2))
            else:
                stack.append((nxt, i + 1, c, d, acc_w2, rev2, w * discount))
    leaves.sort()
    arr = np.array(leaves, dtype=float).reshape(-1, 4)
    return Partition(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy())


def _horizon(config: SimulationConfig, start_round: int, high: float) -> int:
    if config.regime == "fixed_horizon":
        return config.n - start_round
    return config.rounds(high)


def expected_revenue(
    seller: SellerStrategy,
    buyer: BuyerStrategy,
    dist: ValueDistribution,
    config: SimulationConfig,
    method: str = "quadrature",
    *,
    start_state=None,
    start_round: int = 0,
    first_price: float | None = None,
) -> tuple[float, float]:
    """Expected seller revenue and an error bound.

    ``quadrature`` integrates playout revenue over ``v`` on at least
    ``config.panels`` panels whose boundaries include every threshold
    breakpoint; the integrand is then constant on each panel, so the error is
    the truncation tail. ``monte_carlo`` averages over inverse-CDF samples and
    reports the standard error.
    """
    if method == "quadrature":
        if config.regime == "geometric_stopping":
            raise ValueError("quadrature needs a fixed_horizon or discounted regime; use monte_carlo")
        return _quadrature(seller, buyer, dist, config, start_state, start_round, first_price)
    if method in ("monte_carlo", "mc"):
        return _monte_carlo(seller, buyer, dist, config, start_state, start_round, first_price)
    raise ValueError(f"unknown method {method!r}")


def _quadrature(seller, buyer, dist, config, start_state, start_round, first_price):
    high = dist.high
    rounds = _horizon(config, start_round, high)
    top = np.nextafter(high, math.inf)
    part = partition(seller, buyer, dist.low, top, rounds, config.discount, start_state=start_state, first_price=first_price)
    inner = part.lo[(part.lo > dist.low) & (part.lo < high)]
    edges = np.union1d(np.linspace(dist.low, high, config.panels + 1), inner)
    mids = 0.5 * (edges[:-1] + edges[1:])
    masses = np.clip(np.asarray(dist.sf(edges[:-1])) - np.asarray(dist.sf(edges[1:])), 0.0, None)
    leaf = part.locate(mids)
    cache: dict[int, float] = {}
    values = np.empty(len(mids))
    for k, (j, v) in enumerate(zip(leaf, mids)):
        j = int(j)
        if j not in cache:
            cache[j] = playout(
                seller, buyer, float(v), config,
                start_state=start_state, start_round=start_round, first_price=first_price, rounds=rounds,
            ).revenue
        values[k] = cache[j]
    total = float(np.sum(masses * values))
    return total, config.tail_bound(high)


def _leaf_tables(seller, buyer, dist, config, start_state, start_round, first_price, rounds):
    """Per-leaf cumulative undiscounted and discounted revenue by round."""
    top = np.nextafter(dist.high, math.inf)
    part = partition(seller, buyer, dist.low, top, rounds, config.discount if config.regime == "discounted" else 1.0,
                     start_state=start_state, first_price=first_price)
    cum = np.zeros((len(part.lo), rounds + 1))
    for j in range(len(part.lo)):
        hi = min(part.hi[j], dist.high)
        v = 0.5 * (part.lo[j] + hi)
        tr = playout(seller, buyer, v, config if config.regime != "geometric_stopping" else replace(config, regime="fixed_horizon", n=rounds, delta=None),
                     start_state=start_state, start_round=start_round, first_price=first_price, rounds=rounds)
        per_round = [r.weight * r.price if r.accepted else 0.0 for r in tr.rounds]
        cum[j, 1:] = np.cumsum(per_round)
    return part, cum


def _monte_carlo(seller, buyer, dist, config, start_state, start_round, first_price):
    samples = config.samples
    if config.regime == "geometric_stopping":
        rounds = truncation_rounds(config.delta, 1e-12, dist.high) if config.delta < 1.0 else 1
    else:
        rounds = _horizon(config, start_round, dist.high)
    part, cum = _leaf_tables(seller, buyer, dist, config, start_state, start_round, first_price, rounds)
    chunks = []
    for c in range(math.ceil(samples / MC_CHUNK)):
        m = min(MC_CHUNK, samples - c * MC_CHUNK)
        rng = stream(config.seed, c)
        v = np.asarray(dist.inverse_cdf(rng.random(m)), dtype=float)
        leaf = part.locate(v)
        if config.regime == "geometric_stopping":
            n_rounds = rng.geometric(config.delta, m)
            out = cum[leaf, np.minimum(n_rounds, rounds)]
            for k in np.nonzero(n_rounds > rounds)[0]:
                fixed = replace(config, regime="fixed_horizon", n=int(n_rounds[k]) + start_round, delta=None)
                out[k] = playout(seller, buyer, float(v[k]), fixed, start_state=start_state,
                                 start_round=start_round, first_price=first_price).revenue
        else:
            out = cum[leaf, rounds]
        chunks.append(out)
    values = np.concatenate(chunks)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.inf
    return mean, se


def geometric_equivalence_check(
    seller: SellerStrategy,
    buyer: BuyerStrategy,
    dist: ValueDistribution,
    delta: float,
    samples: int = 1_000_000,
    seed: int = 0,
    n_se: float = 4.0,
) -> dict[str, Any]:
    """Compare geometric-stopping Monte Carlo with discounted quadrature."""
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    mc, se = expected_revenue(seller, buyer, dist, SimulationConfig.geometric(delta, samples=samples, seed=seed), "monte_carlo")
    quad, bound = expected_revenue(seller, buyer, dist, SimulationConfig.discounted(delta), "quadrature")
    diff = abs(mc - quad)
    ok = diff <= n_se * se + bound if se > 0 else diff <= 1e-12 + bound
    return {
        "delta": delta,
        "geometric_mc": mc,
        "standard_error": se,
        "discounted_quadrature": quad,
        "truncation_bound": bound,
        "difference": diff,
        "passed": bool(ok),
    }
