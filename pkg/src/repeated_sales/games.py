"""Named equilibrium profiles, ready for simulation and verification."""

from __future__ import annotations

from .distributions import Uniform, ValueDistribution
from .finite_horizon import finite_partial_strategies
from .infinite_horizon import partial_strategies, zero_strategies
from .simulator import SimulationConfig
from .two_round import solve_two_round, two_round_strategies
from .verifier import Game

GAMES = ("two-round", "finite", "infinite-partial", "infinite-zero")


def build_game(
    name: str,
    *,
    dist: ValueDistribution | None = None,
    delta: float | None = None,
    n: int | None = None,
    k: int = 0,
    **config,
) -> Game:
    """Equilibrium profile ``name`` with its payoff regime.

    ``two-round`` uses ``dist`` (default U[0, 1]); ``finite`` is the
    ``n``-round partial-commitment game for the power law ``k``; the infinite
    games use U[0, 1] and discount ``delta``.
    """
    if name == "two-round":
        dist = Uniform(0.0, 1.0) if dist is None else dist
        seller, buyer = two_round_strategies(dist, solve_two_round(dist))
        return Game(seller, buyer, dist, SimulationConfig.fixed(2, **config), name)
    if name == "finite":
        if n is None:
            raise ValueError("the finite game needs n")
        seller, buyer, prior = finite_partial_strategies(n, k)
        return Game(seller, buyer, prior, SimulationConfig.fixed(n, **config), name)
    if name in ("infinite-partial", "infinite-zero"):
        if delta is None:
            raise ValueError(f"{name} needs delta")
        seller, buyer = partial_strategies(delta) if name == "infinite-partial" else zero_strategies(delta)
        return Game(seller, buyer, Uniform(0.0, 1.0), SimulationConfig.discounted(delta, **config), name)
    raise ValueError(f"unknown game {name!r}; expected one of {GAMES}")
