"""Finite-horizon games.

Without commitment a threshold equilibrium of three or more rounds exists
exactly when the two-round game opens at the bottom of the support
(:func:`threshold_pbe_exists`). With partial commitment (no price increases
after a purchase) a power-law prior ``F(x) = x**(k+1)`` on ``[0, 1]`` admits a
scale-invariant threshold equilibrium computed by a one-dimensional recursion.

Indexing convention: quantities are indexed by the number of rounds
*remaining*. ``p[m]``, ``t[m]``, ``R[m]`` and ``u[m]`` are the opening price,
opening threshold, expected revenue and top-type utility of the ``m``-round
game on ``[0, 1]``; the game on ``[0, a]`` is the same game scaled by ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beliefs import PartialCommitmentBuyer, PartialCommitmentSeller
from .distributions import PowerLaw, ValueDistribution
from .search import grid_golden_max
from .two_round import TwoRoundEquilibrium, solve_two_round


@dataclass(frozen=True)
class FiniteRecursionRow:
    n: int
    p: float
    t: float
    R: float
    u: float


@dataclass(frozen=True)
class FiniteRecursionTable:
    """Rows ``1..n`` of the partial-commitment recursion, stored as arrays.

    Index ``m`` of each array holds the ``m``-round value; index 0 is the empty
    game (``R = u = 0``).
    """

    k: int
    p: np.ndarray
    t: np.ndarray
    R: np.ndarray
    u: np.ndarray

    @property
    def n(self) -> int:
        return len(self.R) - 1

    def __len__(self) -> int:
        return self.n

    def row(self, m: int) -> FiniteRecursionRow:
        if not 1 <= m <= self.n:
            raise IndexError(f"row {m} outside 1..{self.n}")
        return FiniteRecursionRow(m, float(self.p[m]), float(self.t[m]), float(self.R[m]), float(self.u[m]))

    def __iter__(self):
        return (self.row(m) for m in range(1, self.n + 1))

    def rows(self) -> list[FiniteRecursionRow]:
        return list(self)

    @property
    def benchmark(self) -> np.ndarray:
        """Full-commitment revenue ``m * R(p*)`` for each horizon."""
        m = np.arange(self.n + 1, dtype=float)
        return m * (self.k + 1.0) / (self.k + 2.0) * (self.k + 2.0) ** (-1.0 / (self.k + 1))


def _allocate(n: int):
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return (np.zeros(n + 1) for _ in range(4))


def solve_partial_uniform(n: int) -> FiniteRecursionTable:
    """Four-variable recursion for U[0, 1]."""
    p, t, R, u = _allocate(n)
    p[1] = t[1] = 0.5
    R[1] = 0.25
    u[1] = 0.5
    r_prev, u_prev = 0.25, 0.5
    for m in range(2, n + 1):
        d = m - u_prev
        e = d - r_prev
        t[m] = d / (2.0 * e)
        pm = d * d / (2.0 * m * e)
        p[m] = pm
        r_prev = R[m] = d * d / (4.0 * e)
        u_prev = u[m] = m * (1.0 - pm)
    return FiniteRecursionTable(0, p, t, R, u)


def scalar_revenue(n: int) -> np.ndarray:
    """``R[1..n]`` from ``V_m = V_{m-1} + 1 / (4 V_{m-1})`` with ``V = R + 1``.

    Independent of :func:`solve_partial_uniform`; index 0 is unused (set to 0).
    """
    V = np.empty(n + 1)
    V[0] = 1.0
    v = 1.25
    V[1] = v
    for m in range(2, n + 1):
        v = v + 0.25 / v
        V[m] = v
    return V - 1.0


def revenue_recursion_direct(n: int) -> np.ndarray:
    """``R_m = (1 + 2 R_{m-1})^2 / (4 (1 + R_{m-1}))`` evaluated literally."""
    R = np.zeros(n + 1)
    r = R[1] = 0.25
    for m in range(2, n + 1):
        r = (1.0 + 2.0 * r) ** 2 / (4.0 * (1.0 + r))
        R[m] = r
    return R


def asymptotic_residuals(n: int) -> np.ndarray:
    """``V_m^2 - m/2 - ln(m)/8`` for ``m = 1..n`` (index 0 unused)."""
    V = scalar_revenue(n) + 1.0
    m = np.arange(n + 1, dtype=float)
    out = np.zeros(n + 1)
    out[1:] = V[1:] ** 2 - m[1:] / 2.0 - np.log(m[1:]) / 8.0
    return out


def asymptotic_gap(n: int) -> float:
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return float(asymptotic_residuals(n)[n])


def power_law_objective(t, m: int, k: int, r_prev: float, u_prev: float):
    """Revenue of the ``m``-round game when the opening threshold is ``t``."""
    t = np.asarray(t, dtype=float)
    return r_prev * t ** (k + 2) + (1.0 - t ** (k + 1)) * t * (m - u_prev)


def solve_partial_power_law(n: int, k: int, method: str = "closed_form", grid: int = 4097) -> FiniteRecursionTable:
    """Recursion for ``F(x) = x**(k+1)``.

    Each round maximizes :func:`power_law_objective`, which is concave in
    ``t``; ``closed_form`` uses its stationary point
    ``t**(k+1) = (m - u) / ((k + 2)(m - u - R))`` and ``golden`` searches
    numerically. The price follows from indifference of the threshold type,
    ``m (t - p) = t u_{m-1}``.
    """
    if k < 0 or int(k) != k:
        raise ValueError(f"k must be a nonnegative integer, got {k}")
    if method not in ("closed_form", "golden"):
        raise ValueError(f"unknown method {method!r}")
    k = int(k)
    p, t, R, u = _allocate(n)
    r_prev = u_prev = 0.0
    for m in range(1, n + 1):
        d = m - u_prev
        if method == "closed_form":
            tm = (d / ((k + 2.0) * (d - r_prev))) ** (1.0 / (k + 1))
        else:
            f = lambda z: float(power_law_objective(z, m, k, r_prev, u_prev))
            tm, _ = grid_golden_max(f, 0.0, 1.0, n_grid=grid, tol=1e-12,
                                    vectorized=lambda z: power_law_objective(z, m, k, r_prev, u_prev))
        pm = tm * d / m
        t[m], p[m] = tm, pm
        r_prev = R[m] = r_prev * tm ** (k + 2) + (1.0 - tm ** (k + 1)) * tm * d
        u_prev = u[m] = m * (1.0 - pm)
    return FiniteRecursionTable(k, p, t, R, u)


# -- strategies -----------------------------------------------------------------


class FinitePartialSeller(PartialCommitmentSeller):
    """Partial-commitment seller for the ``n``-round power-law game.

    With ``m`` rounds left and belief ``[0, a]`` the seller posts ``p[m] * a``.
    A price ``x`` is accepted by types above ``m x / (m - u[m-1])`` (the type
    indifferent between buying now and facing the scaled ``m - 1`` round
    game); if that overshoots ``a``, by types who prefer buying now to buying
    next round at ``p[m-1] * a``.
    """

    stationary = False

    def __init__(self, table: FiniteRecursionTable, n: int | None = None):
        self.table = table
        self.n = table.n if n is None else n
        if self.n > table.n:
            raise ValueError("table is shorter than the horizon")

    def remaining(self, state) -> int:
        m = self.n - state.round
        if m < 1:
            raise ValueError(f"the {self.n}-round game is over")
        return m

    def threshold_map(self, state, x):
        m = self.remaining(state)
        return m * x / (m - self.table.u[m - 1])

    def price_factor(self, state):
        return float(self.table.p[self.remaining(state)])

    def overpriced_threshold(self, state, x):
        m = self.remaining(state)
        return m * x - (m - 1) * self.table.p[m - 1] * state.mu_end


def finite_partial_strategies(n: int, k: int = 0):
    """Seller, buyer and prior of the ``n``-round partial-commitment game."""
    table = solve_partial_power_law(n, k)
    seller = FinitePartialSeller(table)
    return seller, PartialCommitmentBuyer(seller), PowerLaw(k)


# -- no commitment: existence of threshold equilibria ---------------------------


@dataclass(frozen=True)
class ThresholdExistenceReport:
    n: int
    exists: bool
    equilibrium_prices: tuple[float, ...] | None
    two_round_p1: float
    lower_support_in_argmax: bool
    two_round: TwoRoundEquilibrium = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "exists": self.exists,
            "equilibrium_prices": list(self.equilibrium_prices) if self.equilibrium_prices else None,
            "two_round_p1": self.two_round_p1,
            "lower_support_in_argmax": self.lower_support_in_argmax,
        }


def threshold_pbe_exists(dist: ValueDistribution, n: int, two_round: TwoRoundEquilibrium | None = None) -> ThresholdExistenceReport:
    """Whether the ``n``-round no-commitment game has a pure threshold equilibrium.

    For ``n <= 2`` one always exists. For longer games it exists iff the
    two-round opening price is the lower support end; the prices are then the
    lower end for ``n - 1`` rounds followed by the monopoly price. For
    ``n == 2`` the reported prices follow the acceptance branch.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    eq = solve_two_round(dist) if two_round is None else two_round
    p_star = eq.monopoly_price
    if n == 1:
        exists, prices = True, (p_star,)
    elif n == 2:
        exists, prices = True, (eq.p1, eq.p21)
    else:
        exists = abs(eq.p1 - dist.low) <= 1e-9
        prices = (dist.low,) * (n - 1) + (p_star,) if exists else None
    return ThresholdExistenceReport(n, exists, prices, eq.p1, eq.lower_support_in_argmax, eq)


def sweep_partial(n_max: int, k: int = 0) -> FiniteRecursionTable:
    return solve_partial_uniform(n_max) if k == 0 else solve_partial_power_law(n_max, k)


def table_residuals(table: FiniteRecursionTable) -> np.ndarray:
    """Asymptotic residual column aligned with ``table`` (uniform prior only)."""
    m = np.arange(table.n + 1, dtype=float)
    out = np.full(table.n + 1, math.nan)
    if table.k == 0:
        V = table.R[1:] + 1.0
        out[1:] = V**2 - m[1:] / 2.0 - np.log(m[1:]) / 8.0
    return out
