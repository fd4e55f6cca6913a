"""Rank-based reward schedules and model parameters.

Two representations of a decreasing rank payment ``H: [0, 1] -> R``:

* :class:`RankRewardStep` -- levels ``R_1 >= ... >= R_{d+1}`` on right-open
  cells ``[r_{k-1}, r_k)`` with ``r_0 = 0`` and the last cell ``[r_d, 1]``.
* :class:`RankRewardSmooth` -- samples on a rank grid, linearly interpolated.

Both carry the incompletion floor ``R_inf`` paid after the deadline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "DELTA",
    "ModelParams",
    "RankRewardStep",
    "RankRewardSmooth",
    "RankReward",
    "eval_reward",
    "discretize",
    "reward_from_dict",
    "reward_to_dict",
    "constant_reward",
    "smooth_from_function",
]



class _Incomplete:
    """Completion "time" of a player who misses the deadline."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "DELTA"

    def __reduce__(self):
        return (_Incomplete, ())


DELTA = _Incomplete()


@dataclass(frozen=True)
class ModelParams:
    """Scalar game inputs: start distance, volatility, effort cost, deadline, floor."""

    x0: float = 1.0
    sigma: float = 0.25
    c: float = 1.0
    T: float = 1.0
    R_inf: float = 0.0

    def __post_init__(self):
        for name in ("x0", "sigma", "c", "T"):
            v = getattr(self, name)
            if not (v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if not math.isfinite(self.R_inf):
            raise ValueError("R_inf must be finite")

    @property
    def kappa(self) -> float:
        """Cole-Hopf scale ``2 c sigma^2``."""
        return 2.0 * self.c * self.sigma**2

    @property
    def y0(self) -> float:
        return self.x0 / self.sigma

    @property
    def finite(self) -> bool:
        return math.isfinite(self.T)

    def replace(self, **kw) -> "ModelParams":
        d = dict(x0=self.x0, sigma=self.sigma, c=self.c, T=self.T, R_inf=self.R_inf)
        d.update(kw)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return {"x0": self.x0, "sigma": self.sigma, "c": self.c,
                "T": "inf" if not self.finite else self.T, "R_inf": self.R_inf}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        if "T" in d:
            d["T"] = float(d["T"])
        return cls(**{k: float(v) for k, v in d.items()})


def _check_decreasing(values: np.ndarray, what: str, tol: float = 1e-12):
    if np.any(np.diff(values) > tol * max(1.0, float(np.max(np.abs(values))))):
        raise ValueError(f"{what} must be weakly decreasing")


@dataclass(frozen=True)
class RankRewardStep:
    """Piecewise constant rank reward.

    Parameters
    ----------
    thresholds : (d,) array
        Interior cut ranks ``0 < r_1 < ... < r_d < 1``.
    levels : (d+1,) array
        Payments ``R_1 >= ... >= R_{d+1}``.
    floor : float
        ``R_inf``; every level must be at least the floor.
    """

    thresholds: np.ndarray
    levels: np.ndarray
    floor: float = 0.0

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.thresholds, dtype=float))
        lv = np.atleast_1d(np.asarray(self.levels, dtype=float))
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "levels", lv)
        if lv.size != th.size + 1:
            raise ValueError("need len(levels) == len(thresholds) + 1")
        if th.size and (th[0] <= 0 or th[-1] >= 1 or np.any(np.diff(th) <= 0)):
            raise ValueError("thresholds must be strictly increasing inside (0, 1)")
        if not np.all(np.isfinite(lv)):
            raise ValueError("levels must be finite")
        _check_decreasing(lv, "levels")
        if lv[-1] < self.floor - 1e-12:
            raise ValueError("levels must be >= floor")

    @property
    def d(self) -> int:
        return int(self.thresholds.size)

    @property
    def edges(self) -> np.ndarray:
        """``[0, r_1, ..., r_d, 1]``."""
        return np.concatenate(([0.0], self.thresholds, [1.0]))

    def __call__(self, r):
        return eval_reward(self, r)

    def budget(self) -> float:
        """``int_0^1 H``."""
        return float(np.dot(np.diff(self.edges), self.levels))

    def cumulative_exp(self, r, kappa: float, R_inf: float | None = None):
        """Exact ``int_0^r exp((R_inf - H(z)) / kappa) dz``."""
        R_inf = self.floor if R_inf is None else R_inf
        e = self.edges
        w = np.exp((R_inf - self.levels) / kappa)
        cum = np.concatenate(([0.0], np.cumsum(np.diff(e) * w)))
        r = np.asarray(r, dtype=float)
        k = np.clip(np.searchsorted(e, r, side="right") - 1, 0, self.d)
        out = cum[k] + (r - e[k]) * w[k]
        return out if out.ndim else float(out)

    def scaled(self, factor: float) -> "RankRewardStep":
        return RankRewardStep(self.thresholds, factor * self.levels, self.floor)


@dataclass(frozen=True)
class RankRewardSmooth:
    """Rank reward sampled on ``0 = rho_0 < ... < rho_M = 1``, linear in between."""

    grid: np.ndarray
    values: np.ndarray
    floor: float = 0.0
    _slopes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if g.ndim != 1 or g.size < 2 or g.size != v.size:
            raise ValueError("grid and values must be 1-d of equal length >= 2")
        if abs(g[0]) > 0 or abs(g[-1] - 1) > 0 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must increase strictly from 0 to 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        _check_decreasing(v, "values")
        if v[-1] < self.floor - 1e-12:
            raise ValueError("values must be >= floor")
        object.__setattr__(self, "_slopes", np.diff(v) / np.diff(g))

    def __call__(self, r):
        return eval_reward(self, r)

    def budget(self) -> float:
        return float(np.sum(0.5 * (self.values[1:] + self.values[:-1]) * np.diff(self.grid)))

    def cell_integral_exp(self, kappa: float, R_inf: float | None = None) -> np.ndarray:
        """Per-cell ``int exp((R_inf - H) / kappa)``; exact for linear pieces."""
        R_inf = self.floor if R_inf is None else R_inf
        h = np.diff(self.grid)
        a = (R_inf - self.values[:-1]) / kappa
        b = (R_inf - self.values[1:]) / kappa
        diff = b - a
        out = np.empty_like(h)
        small = np.abs(diff) < 1e-6
        # exp(max(a, b)) * (1 - exp(-|diff|)) / |diff|, which cannot overflow
        top = np.maximum(a, b)[~small]
        ad = np.abs(diff[~small])
        out[~small] = h[~small] * np.exp(top) * -np.expm1(-ad) / ad
        ds = diff[small]
        out[small] = h[small] * np.exp(a[small]) * (1 + ds / 2 + ds * ds / 6)
        return out

    def scaled(self, factor: float) -> "RankRewardSmooth":
        return RankRewardSmooth(self.grid, factor * self.values, self.floor)


RankReward = Union[RankRewardStep, RankRewardSmooth]


def eval_reward(H: RankReward, r):
    """Payment at rank ``r``; step rewards use right-open cells ``[r_{k-1}, r_k)``."""
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > 1)) or np.any(np.isnan(r)):
        raise ValueError("rank outside [0, 1]")
    if isinstance(H, RankRewardStep):
        out = H.levels[np.searchsorted(H.thresholds, r, side="right")]
    else:
        out = np.interp(r, H.grid, H.values)
    return out if out.ndim else float(out)


def discretize(H: RankReward, d: int) -> RankRewardStep:
    """Uniform ``d``-cell step reward whose levels are cell averages of ``H``.

    Cell averages keep ``int_0^1 H`` unchanged, and the step function
    converges to ``H`` in L1 as ``d`` grows.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    edges = np.linspace(0.0, 1.0, d + 1)
    if isinstance(H, RankRewardSmooth):
        knots = np.union1d(H.grid, edges)
        vals = np.interp(knots, H.grid, H.values)
        seg = 0.5 * (vals[1:] + vals[:-1]) * np.diff(knots)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        at = np.interp(edges, knots, cum)
        levels = np.diff(at) * d
    else:
        cum_edges = H.edges
        cum = np.concatenate(([0.0], np.cumsum(np.diff(cum_edges) * H.levels)))
        at = np.interp(edges, cum_edges, cum)
        levels = np.diff(at) * d
    # averaging a decreasing function keeps order; clean up rounding
    levels = np.minimum.accumulate(levels)
    levels = np.maximum(levels, H.floor)
    return RankRewardStep(edges[1:-1], levels, H.floor)


def constant_reward(level: float, floor: float | None = None) -> RankRewardStep:
    return RankRewardStep(np.empty(0), np.array([level]), level if floor is None else floor)


def smooth_from_function(f: Callable, m: int = 2001, floor: float = 0.0) -> RankRewardSmooth:
    """Sample a decreasing function on a uniform rank grid of ``m`` points."""
    g = np.linspace(0.0, 1.0, m)
    return RankRewardSmooth(g, np.asarray(f(g), dtype=float) * np.ones_like(g), floor)


def reward_to_dict(H: RankReward) -> dict:
    if isinstance(H, RankRewardStep):
        return {"kind": "step", "thresholds": H.thresholds.tolist(),
                "levels": H.levels.tolist(), "floor": H.floor}
    return {"kind": "smooth", "grid": H.grid.tolist(), "values": H.values.tolist(),
            "floor": H.floor, "interpolation": "linear"}


def reward_from_dict(d: dict) -> RankReward:
    kind = d.get("kind")
    if kind == "step":
        return RankRewardStep(np.array(d["thresholds"], dtype=float),
                              np.array(d["levels"], dtype=float), float(d.get("floor", 0.0)))
    if kind == "smooth":
        if d.get("interpolation", "linear") != "linear":
            raise ValueError("only linear interpolation is supported")
        return RankRewardSmooth(np.array(d["grid"], dtype=float),
                                np.array(d["values"], dtype=float), float(d.get("floor", 0.0)))
    raise ValueError(f"unknown reward kind {kind!r}")
