"""Numerical certificates that a strategy profile is an epsilon-equilibrium.

All checks walk the public state machine rather than raw histories: the
strategies here are Markovian in the shared state, so two histories with the
same state are the same decision problem.

* Buyer: at every on-path state up to a depth (plus states reached through a
  probe price), and for the equilibrium price and a set of probe prices, every
  value on a grid tries all ``2**L`` accept/reject sequences over the next
  ``L`` rounds followed by equilibrium play.
* Seller: at every on-path state the next price is replaced by each point of
  a price grid (capped by the no-raise promise) and expected revenue under the
  seller's belief is compared with the equilibrium price. Deeper deviations
  reduce to these one-shot ones.
* Beliefs: after each positive-probability action the posterior must be the
  set of values that take it; zero-probability actions must lead to the point
  mass at the top of the support.

Every failure carries a witness that :func:`replay_witness` re-evaluates
through the simulator.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .distributions import ValueDistribution
from .search import golden_max
from .simulator import (
    BuyerStrategy,
    Partition,
    SellerStrategy,
    SimulationConfig,
    expected_revenue,
    partition,
    playout,
)

DEFAULT_EPSILON = 1e-4
FLOAT_SLACK = 1e-12


@dataclass(frozen=True)
class Game:
    """A strategy profile together with the prior and the payoff regime."""

    seller: SellerStrategy
    buyer: BuyerStrategy
    dist: ValueDistribution
    config: SimulationConfig
    name: str = "game"

    def horizon(self, state) -> int:
        if self.config.regime == "fixed_horizon":
            return self.config.n - getattr(state, "round", 0)
        return self.config.rounds(self.dist.high)

    @property
    def discount(self) -> float:
        return self.config.discount

    @property
    def tail(self) -> float:
        return self.config.tail_bound(self.dist.high)


@dataclass
class DeviationReport:
    role: str
    check: str
    history: str
    deviation: str
    gain: float
    epsilon: float
    budget: float
    passed: bool
    nodes: int = 0
    witness: dict[str, Any] | None = None
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return f"pass({self.epsilon:g})" if self.passed else "fail(witness)"

    def as_dict(self) -> dict[str, Any]:
        return {
            "role": self.role,
            "check": self.check,
            "history": self.history,
            "deviation": self.deviation,
            "gain": self.gain,
            "epsilon": self.epsilon,
            "error_budget": self.budget,
            "verdict": self.verdict,
            "passed": self.passed,
            "nodes": self.nodes,
            "witness": _jsonable(self.witness),
            **self.details,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    return repr(obj)


def _describe(state) -> str:
    if hasattr(state, "__dataclass_fields__"):
        parts = ", ".join(f"{k}={getattr(state, k)!r}" for k in state.__dataclass_fields__)
        return f"{type(state).__name__}({parts})"
    return repr(state)


class _Engine:
    """Memoized value-space partitions of continuation play."""

    def __init__(self, game: Game):
        self.game = game
        self.top = float(np.nextafter(game.dist.high, math.inf))
        self.memo: dict[Any, Partition] = {}

    def part(self, state, rounds: int, first_price: float | None = None) -> Partition | None:
        if rounds <= 0:
            return None
        key = (state, rounds, first_price)
        got = self.memo.get(key)
        if got is None:
            g = self.game
            got = partition(g.seller, g.buyer, g.dist.low, self.top, rounds, g.discount,
                            start_state=state, first_price=first_price)
            self.memo[key] = got
        return got

    def utility(self, state, rounds, v, first_price=None) -> np.ndarray:
        p = self.part(state, rounds, first_price)
        if p is None:
            return np.zeros_like(v)
        return p.utility(v)

    def revenue_under_belief(self, state, rounds, first_price=None) -> float:
        """Seller's expected revenue from ``state`` given his own belief."""
        p = self.part(state, rounds, first_price)
        if p is None:
            return 0.0
        a, b = self.game.seller.belief(state)
        if b <= a or self.game.dist.mass(a, b) <= 0.0:
            return float(p.seller_revenue(b))
        return p.expected_revenue(self.game.dist, a, b)


def _branch_mass(game: Game, state, price: float) -> tuple[float, float]:
    """Probability (under the seller's belief) of accept and reject at ``price``."""
    tau = game.buyer.threshold(state, price)
    a, b = game.seller.belief(state)
    dist = game.dist
    if b <= a or dist.mass(a, b) <= 0.0:
        return (1.0, 0.0) if b >= tau else (0.0, 1.0)
    total = dist.mass(a, b)
    acc = dist.mass(max(a, tau), b) / total
    rej = dist.mass(a, min(b, tau)) / total
    return acc, rej


def on_path_states(game: Game, depth: int) -> list[tuple[Any, int]]:
    """Distinct states reachable with positive probability in at most ``depth`` rounds."""
    root = game.seller.initial_state()
    seen = {root}
    out = [(root, 0)]
    queue = deque([(root, 0)])
    while queue:
        state, d = queue.popleft()
        if d >= depth or game.horizon(state) <= 0:
            continue
        x = game.seller.price(state)
        acc, rej = _branch_mass(game, state, x)
        for accepted, mass in ((True, acc), (False, rej)):
            if mass <= 0.0:
                continue
            nxt = game.seller.update(state, x, accepted)
            if nxt not in seen and game.horizon(nxt) > 0:
                seen.add(nxt)
                out.append((nxt, d + 1))
                queue.append((nxt, d + 1))
    return out


def _probe_prices(game: Game, state, n_probe: int) -> list[float]:
    cap = min(game.dist.high, game.seller.price_cap(state))
    return [float(x) for x in np.linspace(0.0, cap, n_probe + 1)[1:]] if n_probe > 0 else []


# -- buyer ------------------------------------------------------------------------


def check_buyer_best_response(
    game: Game,
    grid_size: int = 1001,
    lookahead: int = 3,
    epsilon: float = DEFAULT_EPSILON,
    depth: int = 4,
    n_probe: int = 10,
) -> DeviationReport:
    """Largest gain any grid value gets from an ``L``-round accept/reject deviation."""
    if grid_size < 2 or lookahead < 1:
        raise ValueError("grid_size must be >= 2 and lookahead >= 1")
    eng = _Engine(game)
    seller = game.seller
    v = np.linspace(game.dist.low, game.dist.high, grid_size)
    disc = game.discount

    nodes: list[tuple[Any, float, str]] = []
    extra: list[Any] = []
    seen = set()
    for state, _ in on_path_states(game, depth):
        nodes.append((state, seller.price(state), "equilibrium price"))
        for x in _probe_prices(game, state, n_probe):
            nodes.append((state, x, "probe price"))
            for accepted in (True, False):
                nxt = seller.update(state, x, accepted)
                if game.horizon(nxt) > 0 and nxt not in seen:
                    seen.add(nxt)
                    extra.append(nxt)
    for state in extra:
        nodes.append((state, seller.price(state), "equilibrium price after a probe"))

    best_gain, best = -math.inf, None
    for state, x, kind in nodes:
        H = game.horizon(state)
        eq = eng.utility(state, H, v, first_price=x)
        L = min(lookahead, H)
        for acts in itertools.product((True, False), repeat=L):
            st, price, W, rev, w = state, x, 0.0, 0.0, 1.0
            for i, a in enumerate(acts):
                if i > 0:
                    price = seller.price(st)
                if a:
                    W += w
                    rev += w * price
                st = seller.update(st, price, a)
                w *= disc
            dev = W * v - rev + w * eng.utility(st, H - L, v)
            gain = dev - eq
            j = int(np.argmax(gain))
            if gain[j] > best_gain:
                best_gain = float(gain[j])
                best = {"state": state, "price": x, "kind": kind, "value": float(v[j]),
                        "actions": list(acts), "rounds": H}
    budget = 2.0 * game.tail + FLOAT_SLACK
    passed = best_gain <= epsilon + budget
    witness = None if passed else best
    return DeviationReport(
        role="buyer",
        check="best_response",
        history=_describe(best["state"]) if best else "",
        deviation=f"actions {['A' if a else 'R' for a in best['actions']]} at {best['kind']} {best['price']:.12g}" if best else "",
        gain=max(best_gain, 0.0),
        epsilon=epsilon,
        budget=budget,
        passed=passed,
        nodes=len(nodes),
        witness=witness,
        details={"grid_size": grid_size, "lookahead": lookahead, "truncation_tail": game.tail},
    )


# -- seller -----------------------------------------------------------------------


def check_seller_best_response(
    game: Game,
    grid_size: int = 2001,
    deviation_depth: int = 1,
    epsilon: float = DEFAULT_EPSILON,
    depth: int = 3,
    refine: bool = True,
) -> DeviationReport:
    """Largest revenue gain from replacing the next price with any grid price.

    ``deviation_depth`` > 1 also lets the seller re-optimize the following
    prices on a coarser grid, by backward induction over the reachable states.
    """
    if grid_size < 2 or deviation_depth < 1:
        raise ValueError("grid_size must be >= 2 and deviation_depth >= 1")
    eng = _Engine(game)
    best_gain, best = -math.inf, None
    resolution = 0.0
    states = on_path_states(game, depth)
    for state, _ in states:
        H = game.horizon(state)
        x0 = game.seller.price(state)
        base = eng.revenue_under_belief(state, H, first_price=x0)
        cap = min(game.dist.high, game.seller.price_cap(state))
        grid = np.linspace(0.0, cap, grid_size)
        if deviation_depth == 1:
            revs = np.array([eng.revenue_under_belief(state, H, first_price=float(y)) for y in grid])
        else:
            revs = np.array([_deep_revenue(game, eng, state, float(y), H, deviation_depth, max(33, grid_size // 32))
                             for y in grid])
        j = int(np.argmax(revs))
        y_best, r_best = float(grid[j]), float(revs[j])
        if len(grid) > 1:
            resolution = max(resolution, float(np.max(np.abs(np.diff(revs)))) / 2.0)
        if refine and len(grid) > 2:
            a, b = float(grid[max(j - 1, 0)]), float(grid[min(j + 1, len(grid) - 1)])
            y_ref, r_ref = golden_max(lambda y: eng.revenue_under_belief(state, H, first_price=y), a, b, tol=1e-9)
            if r_ref > r_best:
                y_best, r_best = y_ref, r_ref
        gain = r_best - base
        if gain > best_gain:
            best_gain = gain
            best = {"state": state, "price": y_best, "equilibrium_price": x0, "revenue": r_best,
                    "equilibrium_revenue": base, "rounds": H}
    budget = 2.0 * game.tail + FLOAT_SLACK
    passed = best_gain <= epsilon + budget
    return DeviationReport(
        role="seller",
        check="best_response",
        history=_describe(best["state"]),
        deviation=f"price {best['price']:.12g} instead of {best['equilibrium_price']:.12g}",
        gain=max(best_gain, 0.0),
        epsilon=epsilon,
        budget=budget,
        passed=passed,
        nodes=len(states),
        witness=None if passed else best,
        details={"grid_size": grid_size, "deviation_depth": deviation_depth,
                 "grid_resolution_bound": resolution, "truncation_tail": game.tail},
    )


def _deep_revenue(game: Game, eng: _Engine, state, y: float, H: int, depth: int, coarse: int) -> float:
    """Revenue of posting ``y`` now and then the best of ``coarse`` prices for ``depth - 1`` more rounds."""
    a, b = game.seller.belief(state)
    tau = game.buyer.threshold(state, y)
    acc, rej = _branch_mass(game, state, y)
    if depth <= 1 or H <= 1:
        return eng.revenue_under_belief(state, H, first_price=y)
    total = 0.0
    for accepted, mass in ((True, acc), (False, rej)):
        if mass <= 0.0:
            continue
        nxt = game.seller.update(state, y, accepted)
        cap = min(game.dist.high, game.seller.price_cap(nxt))
        cont = max(
            _deep_revenue(game, eng, nxt, float(z), H - 1, depth - 1, coarse)
            for z in np.append(np.linspace(0.0, cap, coarse), game.seller.price(nxt))
        )
        total += mass * ((y if accepted else 0.0) + game.discount * cont)
    return total


# -- beliefs ----------------------------------------------------------------------


def check_belief_consistency(game: Game, trace_length: int = 4, grid_size: int = 10_000) -> DeviationReport:
    """Posterior support must equal the set of values that take the observed action."""
    worst = None
    checked = 0
    dist = game.dist
    top = dist.high
    for state, _ in on_path_states(game, trace_length - 1):
        if game.horizon(state) <= 0:
            continue
        x = game.seller.price(state)
        a, b = game.seller.belief(state)
        acc, rej = _branch_mass(game, state, x)
        vals = np.linspace(a, b, grid_size) if b > a else np.array([b])
        for accepted, mass in ((True, acc), (False, rej)):
            nxt = game.seller.update(state, x, accepted)
            lo, hi = game.seller.belief(nxt)
            checked += 1
            if mass <= 0.0:
                if not (lo == top and hi == top):
                    worst = worst or {"state": state, "price": x, "accepted": accepted,
                                      "posterior": (lo, hi), "reason": "zero-probability action must lead to the point mass at the top"}
                continue
            takes = np.array([game.buyer.accepts(float(u), state, x) == accepted for u in vals])
            inside = (vals >= lo) & (vals <= hi)
            edge = np.isclose(vals, lo, rtol=0, atol=1e-12) | np.isclose(vals, hi, rtol=0, atol=1e-12)
            bad = (takes != inside) & ~edge
            if b <= a:
                bad = takes != inside
            if np.any(bad) and worst is None:
                k = int(np.argmax(bad))
                worst = {"state": state, "price": x, "accepted": accepted, "value": float(vals[k]),
                         "takes_action": bool(takes[k]), "posterior": (lo, hi),
                         "reason": "posterior support differs from the set of values taking the action"}
    passed = worst is None
    return DeviationReport(
        role="seller",
        check="belief_consistency",
        history=_describe(worst["state"]) if worst else "",
        deviation="" if passed else f"{'accept' if worst['accepted'] else 'reject'} at price {worst['price']:.12g}",
        gain=0.0 if passed else 1.0,
        epsilon=0.0,
        budget=0.0,
        passed=passed,
        nodes=checked,
        witness=worst,
        details={"grid_size": grid_size, "trace_length": trace_length},
    )


# -- revenue bound -----------------------------------------------------------------


def revenue_benchmark(dist: ValueDistribution, config: SimulationConfig) -> float:
    """Full-commitment revenue: the monopoly revenue every round."""
    _, r_star = dist.monopoly_price()
    if config.regime == "fixed_horizon":
        return config.n * r_star
    return r_star / config.delta


def check_revenue_upper_bound(revenue: float, dist: ValueDistribution, config: SimulationConfig) -> DeviationReport:
    bench = revenue_benchmark(dist, config)
    passed = revenue <= bench + 1e-9
    return DeviationReport(
        role="seller",
        check="revenue_upper_bound",
        history="root",
        deviation="",
        gain=revenue - bench,
        epsilon=1e-9,
        budget=0.0,
        passed=passed,
        details={"revenue": revenue, "benchmark": bench},
    )


def verify_all(game: Game, epsilon: float = DEFAULT_EPSILON, **kw) -> list[DeviationReport]:
    return [
        check_buyer_best_response(game, epsilon=epsilon, **kw.get("buyer", {})),
        check_seller_best_response(game, epsilon=epsilon, **kw.get("seller", {})),
        check_belief_consistency(game, **kw.get("beliefs", {})),
    ]


# -- witnesses ---------------------------------------------------------------------


def replay_witness(game: Game, report: DeviationReport) -> float:
    """Re-evaluate a failure witness through the simulator; returns the replayed gain."""
    w = report.witness
    if w is None:
        raise ValueError("report has no witness")
    if report.check == "best_response" and report.role == "buyer":
        kw = dict(start_state=w["state"], first_price=w["price"], rounds=w["rounds"])
        dev = playout(game.seller, game.buyer, w["value"], game.config, actions=w["actions"], **kw)
        eq = playout(game.seller, game.buyer, w["value"], game.config, **kw)
        return dev.utility - eq.utility
    if report.check == "best_response":
        state = w["state"]
        a, b = game.seller.belief(state)
        if game.config.regime == "fixed_horizon":
            cfg = replace(game.config, panels=game.config.panels)
            start_round = getattr(state, "round", 0)
        else:
            cfg = replace(game.config, truncation=w["rounds"])
            start_round = 0
        if b <= a or game.dist.mass(a, b) <= 0.0:
            run = lambda y: playout(game.seller, game.buyer, b, cfg, start_state=state, first_price=y,
                                    rounds=w["rounds"]).revenue
            return run(w["price"]) - run(w["equilibrium_price"])
        belief = game.dist.restrict(a, b)
        dev, _ = expected_revenue(game.seller, game.buyer, belief, cfg, start_state=state,
                                  start_round=start_round, first_price=w["price"])
        eq, _ = expected_revenue(game.seller, game.buyer, belief, cfg, start_state=state,
                                 start_round=start_round, first_price=w["equilibrium_price"])
        return dev - eq
    if report.check == "belief_consistency":
        state = w["state"]
        if "value" not in w:
            return 1.0
        tr = playout(game.seller, game.buyer, w["value"], game.config, start_state=state, rounds=1)
        lo, hi = game.seller.belief(tr.final_state)
        took = tr.rounds[0].accepted == w["accepted"]
        inside = lo <= w["value"] <= hi
        return 1.0 if took != inside else 0.0
    raise ValueError(f"cannot replay a {report.check} report")


# -- perturbations -----------------------------------------------------------------


class _SellerWrapper(SellerStrategy):
    def __init__(self, base: SellerStrategy):
        self.base = base
        self.stationary = base.stationary

    def __getattr__(self, name):
        return getattr(self.base, name)

    def initial_state(self):
        return self.base.initial_state()

    def price(self, state):
        return self.base.price(state)

    def update(self, state, price, accepted):
        return self.base.update(state, price, accepted)

    def belief(self, state):
        return self.base.belief(state)

    def price_cap(self, state):
        return self.base.price_cap(state)


class PerturbedSeller(_SellerWrapper):
    """Shift the seller's price at the initial state."""

    def __init__(self, base: SellerStrategy, shift: float = 0.05):
        super().__init__(base)
        self.shift = shift
        self.root = base.initial_state()

    def price(self, state):
        x = self.base.price(state)
        return x + self.shift if state == self.root else x


class SkipBeliefUpdate(_SellerWrapper):
    """Seller (and the buyer's inference) forgets to narrow the belief after a response."""

    def update(self, state, price, accepted):
        nxt = self.base.update(state, price, accepted)
        return replace(nxt, mu_begin=state.mu_begin, mu_end=state.mu_end)


class PerturbedBuyer(BuyerStrategy):
    """Shift the buyer's threshold at the initial state."""

    def __init__(self, base: BuyerStrategy, root, shift: float = -0.05):
        self.base = base
        self.root = root
        self.shift = shift

    def threshold(self, state, price):
        t = self.base.threshold(state, price)
        return t + self.shift if state == self.root else t


PERTURBATIONS = ("buyer-threshold", "root-price", "skip-belief")


def perturb(game: Game, kind: str) -> Game:
    if kind == "buyer-threshold":
        return replace(game, buyer=PerturbedBuyer(game.buyer, game.seller.initial_state()), name=f"{game.name}+{kind}")
    if kind == "root-price":
        return replace(game, seller=PerturbedSeller(game.seller), name=f"{game.name}+{kind}")
    if kind == "skip-belief":
        seller = SkipBeliefUpdate(game.seller)
        buyer = game.buyer
        if hasattr(buyer, "seller"):
            # the buyer infers beliefs with the seller's own update code
            buyer = type(buyer).__new__(type(buyer))
            buyer.__dict__.update(game.buyer.__dict__, seller=seller)
        return replace(game, seller=seller, buyer=buyer, name=f"{game.name}+{kind}")
    raise ValueError(f"unknown perturbation {kind!r}; expected one of {PERTURBATIONS}")
