"""Buyer value priors and the one-round pricing primitives built on them.

Every distribution is atomless with bounded support ``[low, high]``. Four
concrete families exist:

* ``Uniform(low, high)``
* ``PowerLaw(k, scale)``: density ``(k+1) x**k / scale**(k+1)`` on ``[0, scale]``
* ``PiecewiseLinearCDF(knots)``: CDF interpolating ``(value, F(value))`` knots
* ``Truncated(parent, a, b)``: ``parent`` conditioned on ``a <= v <= b``

``restrict`` keeps a family closed whenever it can (uniform stays uniform,
``PowerLaw`` restricted to ``[0, b]`` stays a power law, piecewise-linear CDFs
stay piecewise linear) and falls back to ``Truncated`` otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DegenerateRestriction, DensityVanishes
from .search import grid_golden_max

MONOPOLY_GRID = 4097
MONOPOLY_TOL = 1e-10


def _out(x, y):
    """Return a Python float for scalar input, an array otherwise."""
    if np.ndim(x) == 0:
        return float(y)
    return y


class ValueDistribution:
    """Common interface. Subclasses implement ``cdf``, ``sf``, ``pdf``,
    ``inverse_cdf``, ``restrict`` and ``to_config``."""

    kind: str = "abstract"
    low: float
    high: float

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        """Survival function ``1 - F(x)``, computed without cancellation where possible."""
        return _out(x, 1.0 - np.asarray(self.cdf(x)))

    def pdf(self, x):
        raise NotImplementedError

    def inverse_cdf(self, u):
        raise NotImplementedError

    def restrict(self, a: float, b: float) -> "ValueDistribution":
        raise NotImplementedError

    def to_config(self) -> dict[str, Any]:
        raise NotImplementedError

    def mass(self, a: float, b: float) -> float:
        """Probability of ``a <= v <= b``."""
        if b <= a:
            return 0.0
        return max(0.0, float(self.sf(a)) - float(self.sf(b)))

    def revenue(self, p):
        """Single-round expected revenue ``p * (1 - F(p))`` of a posted price."""
        p_arr = np.asarray(p, dtype=float)
        return _out(p, p_arr * np.asarray(self.sf(p_arr)))

    def monopoly_price(self) -> tuple[float, float]:
        return self.monopoly_price_search()

    def monopoly_price_search(self, n_grid: int = MONOPOLY_GRID, tol: float = MONOPOLY_TOL) -> tuple[float, float]:
        """Grid-plus-golden argmax of the revenue curve over the support.

        Used directly for families without a closed form, and as the
        cross-check for families that have one.
        """
        return grid_golden_max(self.revenue, self.low, self.high, n_grid, tol, vectorized=self.revenue)

    def virtual_value(self, x: float) -> float:
        f = float(self.pdf(x))
        if not f > 0.0:
            raise DensityVanishes(f"density vanishes at x={x}")
        return float(x) - float(self.sf(x)) / f

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.inverse_cdf(rng.random(size)), dtype=float)

    def _check_restriction(self, a: float, b: float) -> tuple[float, float]:
        a = max(float(a), self.low)
        b = min(float(b), self.high)
        if not b > a or self.mass(a, b) <= 0.0:
            raise DegenerateRestriction(f"degenerate restriction to [{a}, {b}]")
        return a, b


@dataclass(frozen=True)
class Uniform(ValueDistribution):
    low: float = 0.0
    high: float = 1.0
    kind: str = field(default="uniform", init=False, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.low < self.high) or not math.isfinite(self.high):
            raise ValueError(f"uniform needs 0 <= low < high, got [{self.low}, {self.high}]")

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        return _out(x, np.clip((x_arr - self.low) / (self.high - self.low), 0.0, 1.0))

    def sf(self, x):
        x_arr = np.asarray(x, dtype=float)
        return _out(x, np.clip((self.high - x_arr) / (self.high - self.low), 0.0, 1.0))

    def pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        inside = (x_arr >= self.low) & (x_arr <= self.high)
        return _out(x, np.where(inside, 1.0 / (self.high - self.low), 0.0))

    def inverse_cdf(self, u):
        u_arr = np.asarray(u, dtype=float)
        return _out(u, self.low + u_arr * (self.high - self.low))

    def restrict(self, a, b):
        a, b = self._check_restriction(a, b)
        return Uniform(a, b)

    def monopoly_price(self):
        p = min(max(self.low, 0.5 * self.high), self.high)
        return p, float(self.revenue(p))

    def to_config(self):
        return {"type": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class PowerLaw(ValueDistribution):
    k: int = 0
    scale: float = 1.0
    kind: str = field(default="power_law", init=False, repr=False)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError(f"power law exponent must be a nonnegative integer, got {self.k}")
        if not self.scale > 0.0:
            raise ValueError(f"power law scale must be positive, got {self.scale}")

    @property
    def low(self) -> float:
        return 0.0

    @property
    def high(self) -> float:
        return self.scale

    def cdf(self, x):
        y = np.clip(np.asarray(x, dtype=float) / self.scale, 0.0, 1.0)
        return _out(x, y ** (self.k + 1))

    def sf(self, x):
        y = np.clip(np.asarray(x, dtype=float) / self.scale, 0.0, 1.0)
        with np.errstate(divide="ignore"):
            # 1 - y^(k+1) without cancellation near y = 1; log(0) = -inf gives sf = 1
            return _out(x, -np.expm1((self.k + 1) * np.log(y)))

    def pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        y = x_arr / self.scale
        inside = (y >= 0.0) & (y <= 1.0)
        return _out(x, np.where(inside, (self.k + 1) * np.clip(y, 0, 1) ** self.k / self.scale, 0.0))

    def inverse_cdf(self, u):
        u_arr = np.asarray(u, dtype=float)
        return _out(u, self.scale * u_arr ** (1.0 / (self.k + 1)))

    def restrict(self, a, b):
        a, b = self._check_restriction(a, b)
        if a == 0.0:
            return PowerLaw(self.k, b)
        return Truncated(self, a, b)

    def monopoly_price(self):
        # d/dp p(1 - p^(k+1)) = 0
        p = self.scale * (self.k + 2.0) ** (-1.0 / (self.k + 1))
        return p, p * (self.k + 1.0) / (self.k + 2.0)

    def to_config(self):
        cfg: dict[str, Any] = {"type": "power_law", "k": int(self.k)}
        if self.scale != 1.0:
            cfg["scale"] = self.scale
        return cfg


@dataclass(frozen=True)
class PiecewiseLinearCDF(ValueDistribution):
    knots: tuple[tuple[float, float], ...] = ((0.0, 0.0), (1.0, 1.0))
    kind: str = field(default="piecewise_linear_cdf", init=False, repr=False)

    def __post_init__(self):
        knots = tuple((float(v), float(c)) for v, c in self.knots)
        object.__setattr__(self, "knots", knots)
        vs = np.array([k[0] for k in knots])
        cs = np.array([k[1] for k in knots])
        if len(knots) < 2:
            raise ValueError("piecewise linear CDF needs at least two knots")
        if vs[0] < 0.0:
            raise ValueError("values must be nonnegative")
        if np.any(np.diff(vs) <= 0.0) or np.any(np.diff(cs) <= 0.0):
            raise ValueError("knots must be strictly increasing in value and CDF (atoms and gaps are rejected)")
        if cs[0] != 0.0 or cs[-1] != 1.0:
            raise ValueError("CDF must start at 0 and end at 1")
        object.__setattr__(self, "_vs", vs)
        object.__setattr__(self, "_cs", cs)
        object.__setattr__(self, "_slopes", np.diff(cs) / np.diff(vs))

    @property
    def low(self) -> float:
        return self.knots[0][0]

    @property
    def high(self) -> float:
        return self.knots[-1][0]

    def cdf(self, x):
        return _out(x, np.interp(np.asarray(x, dtype=float), self._vs, self._cs))

    def sf(self, x):
        return _out(x, np.interp(np.asarray(x, dtype=float), self._vs, 1.0 - self._cs))

    def pdf(self, x):
        # right derivative at knots; the last knot takes the final segment's slope
        x_arr = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._vs, x_arr, side="right") - 1, 0, len(self._slopes) - 1)
        inside = (x_arr >= self.low) & (x_arr <= self.high)
        return _out(x, np.where(inside, self._slopes[idx], 0.0))

    def inverse_cdf(self, u):
        return _out(u, np.interp(np.asarray(u, dtype=float), self._cs, self._vs))

    def restrict(self, a, b):
        a, b = self._check_restriction(a, b)
        fa, fb = float(self.cdf(a)), float(self.cdf(b))
        inner = [(v, c) for v, c in self.knots if a < v < b]
        pts = [(a, fa), *inner, (b, fb)]
        span = fb - fa
        knots = [(v, (c - fa) / span) for v, c in pts]
        knots[0] = (a, 0.0)
        knots[-1] = (b, 1.0)
        return PiecewiseLinearCDF(tuple(knots))

    def monopoly_price(self):
        # on each segment revenue is the concave quadratic p (A - s p)
        v0, c0, s = self._vs[:-1], self._cs[:-1], self._slopes
        vertex = np.clip((1.0 - c0 + s * v0) / (2.0 * s), v0, self._vs[1:])
        cands = np.concatenate([self._vs, vertex])
        revs = np.asarray(self.revenue(cands))
        best = revs.max()
        p = float(cands[revs >= best - 1e-15].min())
        return p, float(self.revenue(p))

    def to_config(self):
        return {"type": "piecewise_linear_cdf", "knots": [list(k) for k in self.knots]}


@dataclass(frozen=True)
class Truncated(ValueDistribution):
    parent: ValueDistribution = field(default_factory=Uniform)
    a: float = 0.0
    b: float = 1.0
    kind: str = field(default="truncated", init=False, repr=False)

    def __post_init__(self):
        m = self.parent.mass(self.a, self.b)
        if m <= 0.0:
            raise DegenerateRestriction(f"degenerate restriction to [{self.a}, {self.b}]")
        object.__setattr__(self, "_mass", m)
        object.__setattr__(self, "_sf_b", float(self.parent.sf(self.b)))
        object.__setattr__(self, "_cdf_a", float(self.parent.cdf(self.a)))

    @property
    def low(self) -> float:
        return self.a

    @property
    def high(self) -> float:
        return self.b

    def cdf(self, x):
        x_arr = np.clip(np.asarray(x, dtype=float), self.a, self.b)
        return _out(x, np.clip((np.asarray(self.parent.cdf(x_arr)) - self._cdf_a) / self._mass, 0.0, 1.0))

    def sf(self, x):
        x_arr = np.clip(np.asarray(x, dtype=float), self.a, self.b)
        return _out(x, np.clip((np.asarray(self.parent.sf(x_arr)) - self._sf_b) / self._mass, 0.0, 1.0))

    def pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        inside = (x_arr >= self.a) & (x_arr <= self.b)
        return _out(x, np.where(inside, np.asarray(self.parent.pdf(x_arr)) / self._mass, 0.0))

    def inverse_cdf(self, u):
        u_arr = np.asarray(u, dtype=float)
        return _out(u, np.clip(self.parent.inverse_cdf(self._cdf_a + u_arr * self._mass), self.a, self.b))

    def restrict(self, a, b):
        a, b = self._check_restriction(a, b)
        return self.parent.restrict(a, b)

    def monopoly_price(self):
        if isinstance(self.parent, PowerLaw):
            # p (b^(k+1) - p^(k+1)) is concave, so clip its stationary point
            k = self.parent.k
            p = min(max(self.b * (k + 2.0) ** (-1.0 / (k + 1)), self.a), self.b)
            return p, float(self.revenue(p))
        return self.monopoly_price_search()

    def to_config(self):
        return {"type": "truncated", "parent": self.parent.to_config(), "low": self.a, "high": self.b}


# -- functional surface ------------------------------------------------------


def cdf(dist: ValueDistribution, x):
    """F(x), clamped to 0 below the support and 1 above it."""
    return dist.cdf(x)


def restrict(dist: ValueDistribution, a: float, b: float) -> ValueDistribution:
    return dist.restrict(a, b)


def revenue_curve(dist: ValueDistribution, p):
    return dist.revenue(p)


def monopoly_price(dist: ValueDistribution) -> tuple[float, float]:
    """(price, revenue) maximizing p(1 - F(p)); the infimum of the argmax set on ties."""
    return dist.monopoly_price()


def virtual_value(dist: ValueDistribution, x: float) -> float:
    return dist.virtual_value(x)


def from_config(cfg: dict[str, Any]) -> ValueDistribution:
    kind = cfg.get("type")
    if kind == "uniform":
        return Uniform(float(cfg.get("low", 0.0)), float(cfg.get("high", 1.0)))
    if kind == "power_law":
        return PowerLaw(int(cfg["k"]), float(cfg.get("scale", 1.0)))
    if kind == "piecewise_linear_cdf":
        return PiecewiseLinearCDF(tuple(tuple(k) for k in cfg["knots"]))
    if kind == "truncated":
        return Truncated(from_config(cfg["parent"]), float(cfg["low"]), float(cfg["high"]))
    raise ValueError(f"unknown distribution type {kind!r}")


def load_distribution(source: str | Path | dict) -> ValueDistribution:
    """Build a distribution from a config dict, a JSON file path or an inline JSON string."""
    if isinstance(source, dict):
        return from_config(source)
    text = str(source)
    if text.lstrip().startswith("{"):
        return from_config(json.loads(text))
    return from_config(json.loads(Path(text).read_text()))
