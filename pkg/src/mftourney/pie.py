"""Completion-rate-dependent rewards and multiple equilibria.

When the payment depends on the aggregate completion rate ``beta`` as well as
on rank, the terminal rate solves

    F°(T) / (1 - F°(T)) = phi(beta)
    phi(beta) = 1/(1 - beta) int_0^beta exp((R_inf(beta) - H(z, beta)) / kappa) dz,

which can have several roots. Each root is an equilibrium with value
``R_inf(beta) + kappa ln((1 - F°(T)) / (1 - beta))``; the largest root is the
dominant one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .fpt import fpt_cdf, fpt_sf
from .reward import ModelParams

__all__ = [
    "PieReward",
    "PieEquilibriumSet",
    "BifurcationTable",
    "enumerate_pie_equilibria",
    "bifurcation_scan",
    "pie_critical_thresholds",
    "contribution_competition_family",
    "additive_pie",
    "log_phi",
]


@dataclass(frozen=True)
class PieReward:
    """Reward ``H(r, beta)`` with rate-dependent floor ``R_inf(beta)``.

    Parameters
    ----------
    H : callable
        ``H(r, beta)``, vectorized in ``r`` (and broadcasting in ``beta``).
    R_inf : callable
        ``R_inf(beta)``, vectorized.
    m : int
        Rank nodes per ``[0, beta]`` used for the cell-exact integral.
    rank_free : bool
        Set when ``H`` does not depend on ``r``; the integral is then exact.
    """

    H: Callable
    R_inf: Callable
    m: int = 1025
    rank_free: bool = False
    name: str = "pie"

    def validate(self, betas: Sequence[float] | None = None, n_r: int = 101, tol: float = 1e-12):
        """Check ``H(., beta)`` is decreasing and above ``R_inf(beta)`` on a grid."""
        betas = np.linspace(0.0, 1.0, 21) if betas is None else np.asarray(betas, dtype=float)
        r = np.linspace(0.0, 1.0, n_r)
        for b in betas:
            h = np.asarray(self.H(r, b), dtype=float) * np.ones_like(r)
            fl = float(self.R_inf(b))
            scale = max(1.0, float(np.max(np.abs(h))))
            if np.any(np.diff(h) > tol * scale):
                raise ValueError(f"H(., {b:g}) is not decreasing in rank")
            if np.any(h < fl - tol * scale):
                raise ValueError(f"H(., {b:g}) falls below R_inf({b:g})")
        return True


def additive_pie(R_inf: Callable | None = None) -> PieReward:
    """``H(r, beta) = R_inf(beta) + beta``: rank-free, the floor cancels in ``phi``."""
    R = R_inf if R_inf is not None else (lambda b: 0.0 * np.asarray(b, dtype=float))
    return PieReward(lambda r, b: R(b) + b + 0.0 * np.asarray(r, dtype=float), R,
                     rank_free=True, name="additive")


def contribution_competition_family(K: float, gamma: float = 0.5) -> Callable[[float], PieReward]:
    """``eps -> R(t, r, beta) = Pi(beta)[gamma + 1{t <= T}(1 - gamma) H_eps(r)]``.

    ``Pi(beta) = K (1 + beta)`` and ``H_eps(r) = 1 + eps (1 - 2 r)``; so
    ``R_inf(beta) = gamma Pi(beta)``.
    """

    def make(eps: float) -> PieReward:
        def H(r, b):
            return K * (1 + b) * (gamma + (1 - gamma) * (1 + eps * (1 - 2 * np.asarray(r, dtype=float))))

        def R(b):
            return gamma * K * (1 + np.asarray(b, dtype=float))

        return PieReward(H, R, name=f"contribution(K={K:g}, gamma={gamma:g}, eps={eps:g})")

    return make


def log_phi(params: ModelParams, pie: PieReward, betas) -> np.ndarray:
    """``ln phi(beta)``, vectorized over ``beta`` in ``(0, 1)``.

    For each ``beta`` the rank interval ``[0, beta]`` is split into ``m - 1``
    equal cells and ``H(., beta)`` is taken linear per cell, so the integral
    of ``exp`` is exact cell by cell.
    """
    b = np.atleast_1d(np.asarray(betas, dtype=float))
    kap = params.kappa
    Rb = np.asarray(pie.R_inf(b), dtype=float) * np.ones_like(b)
    if pie.rank_free:
        h = np.asarray(pie.H(np.zeros_like(b), b), dtype=float)
        out = np.log(b) + (Rb - h) / kap - np.log1p(-b)
        return out
    m = pie.m
    s = np.linspace(0.0, 1.0, m)
    z = b[:, None] * s[None, :]
    e = (Rb[:, None] - np.asarray(pie.H(z, b[:, None]), dtype=float)) / kap
    top = e.max(axis=1, keepdims=True)
    ea, eb = e[:, :-1] - top, e[:, 1:] - top
    d = eb - ea
    with np.errstate(divide="ignore", invalid="ignore"):
        cell = np.where(np.abs(d) > 1e-8, np.exp(ea) * np.expm1(d) / np.where(d == 0, 1, d),
                        np.exp(ea) * (1 + 0.5 * d))
    hcell = b / (m - 1)
    with np.errstate(divide="ignore"):
        out = np.log(cell.sum(axis=1)) + np.log(hcell) + top[:, 0] - np.log1p(-b)
    return out


@dataclass(frozen=True)
class PieEquilibriumSet:
    """All equilibria of a rate-dependent game, sorted by terminal rate."""

    roots: np.ndarray
    multiplicity: np.ndarray
    values: np.ndarray
    efforts: np.ndarray
    residuals: np.ndarray
    dominant: int
    notes: tuple = field(default_factory=tuple)

    @property
    def count(self) -> int:
        """Number of distinct equilibria."""
        return int(self.roots.size)

    @property
    def count_with_multiplicity(self) -> int:
        return int(self.multiplicity.sum())


def _target(params: ModelParams) -> float:
    return math.log(fpt_cdf(params.y0, params.T)) - math.log(fpt_sf(params.y0, params.T))


def _cleared_residual(params, pie, beta) -> float:
    """``F (1 - beta) - (1 - F) I(beta)`` scaled by ``1 / F``."""
    lp = float(log_phi(params, pie, beta)[0])
    return -math.expm1(lp - _target(params))


def enumerate_pie_equilibria(params: ModelParams, pie: PieReward, n_grid: int = 10_000,
                             dedup: float = 1e-8) -> PieEquilibriumSet:
    """Every root of the rate equation, by sign-change scan plus bisection.

    Tangential (double) roots are detected as near-zero local extrema of the
    scan and reported with multiplicity 2.
    """
    if not params.finite:
        raise ValueError("rate-dependent pies need a finite deadline")
    tgt = _target(params)
    grid = (np.arange(n_grid) + 0.5) / n_grid
    grid = np.concatenate(([1e-12], grid, [1 - 1e-12]))
    psi = log_phi(params, pie, grid) - tgt

    def f(b):
        return float(log_phi(params, pie, b)[0]) - tgt

    roots, mult, notes = [], [], []
    sc = np.flatnonzero(np.sign(psi[:-1]) * np.sign(psi[1:]) < 0)
    for k in sc:
        r = optimize.brentq(f, grid[k], grid[k + 1], xtol=1e-15, rtol=8.9e-16, maxiter=500)
        roots.append(r)
        mult.append(1)
    for k in np.flatnonzero(psi == 0):
        roots.append(float(grid[k]))
        mult.append(1)
    # tangencies: local extrema of psi that touch zero without crossing
    for k in range(1, grid.size - 1):
        left, mid, right = psi[k - 1], psi[k], psi[k + 1]
        is_min = mid <= left and mid <= right and mid > 0
        is_max = mid >= left and mid >= right and mid < 0
        if not (is_min or is_max):
            continue
        sgn = 1.0 if is_min else -1.0
        res = optimize.minimize_scalar(lambda b: sgn * f(b), bounds=(grid[k - 1], grid[k + 1]),
                                       method="bounded", options={"xatol": 1e-14})
        if abs(res.fun) < 1e-9:
            roots.append(float(res.x))
            mult.append(2)
            notes.append(f"tangency near beta={res.x:.6g}")
    order = np.argsort(roots)
    rs, ms = [], []
    for j in order:
        if rs and abs(roots[j] - rs[-1]) < dedup:
            ms[-1] = max(ms[-1], mult[j])
            continue
        rs.append(roots[j])
        ms.append(mult[j])
    rs = np.asarray(rs)
    if rs.size > 1 and np.min(np.diff(rs)) < 2.0 / n_grid:
        msg = "roots closer than two grid cells; refine n_grid"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    F = fpt_cdf(params.y0, params.T)
    S = fpt_sf(params.y0, params.T)
    kap = params.kappa
    vals = np.array([float(pie.R_inf(b)) + kap * (math.log(S) - math.log1p(-b)) for b in rs])
    eff = params.x0 * (rs - F) / S
    resid = np.array([_cleared_residual(params, pie, b) for b in rs])
    dom = int(rs.size - 1) if rs.size else -1
    return PieEquilibriumSet(rs, np.asarray(ms, dtype=int), vals, eff, resid, dom, tuple(notes))


@dataclass(frozen=True)
class BifurcationTable:
    """Equilibria along a one-parameter family.

    ``rows`` hold ``(eps, branch, root_index, beta, value)``; branch ids come
    from nearest-root matching between consecutive parameter values, a
    bookkeeping choice with no meaning through fold points.
    """

    eps: np.ndarray
    counts: np.ndarray
    rows: list

    @property
    def multivalued(self) -> np.ndarray:
        return self.counts > 1

    def multivalued_intervals(self):
        """Maximal runs of consecutive grid values with more than one equilibrium."""
        out, start = [], None
        for i, mv in enumerate(self.multivalued):
            if mv and start is None:
                start = i
            if not mv and start is not None:
                out.append((float(self.eps[start]), float(self.eps[i - 1])))
                start = None
        if start is not None:
            out.append((float(self.eps[start]), float(self.eps[-1])))
        return out

    def header(self):
        return ["eps", "branch", "root_index", "beta", "value", "n_roots"]

    def table(self):
        cnt = dict(zip(self.eps.tolist(), self.counts.tolist()))
        return [(e, b, i, be, v, cnt[e]) for (e, b, i, be, v) in self.rows]


def bifurcation_scan(params: ModelParams, family: Callable[[float], PieReward], eps_grid,
                     n_grid: int = 4000) -> BifurcationTable:
    """Root sets along ``eps`` with branch labels by nearest-neighbour matching."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    rows, counts = [], []
    prev: list[tuple[int, float]] = []
    next_id = 0
    for e in eps_grid:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            eqs = enumerate_pie_equilibria(params, family(float(e)), n_grid=n_grid)
        counts.append(eqs.count)
        used, cur = set(), []
        for i, (b, v) in enumerate(zip(eqs.roots, eqs.values)):
            best, bid = math.inf, None
            for pid, pb in prev:
                if pid in used:
                    continue
                if abs(pb - b) < best:
                    best, bid = abs(pb - b), pid
            if bid is None:
                bid = next_id
                next_id += 1
            used.add(bid)
            cur.append((bid, float(b)))
            rows.append((float(e), bid, i, float(b), float(v)))
        prev = cur
    return BifurcationTable(eps_grid, np.asarray(counts, dtype=int), rows)


def pie_critical_thresholds(params: ModelParams, pie: PieReward, lo: float = 1e-6,
                            hi: float = 0.5, n_scan: int = 400, tol: float = 1e-5,
                            n_grid: int = 4000):
    """Values of ``F°(T)`` at which the number of equilibria changes.

    The game is re-parameterized by ``F°(T)`` through the deadline; a log scan
    over ``[lo, hi]`` finds count changes, each refined by bisection on the
    root count to width ``tol``.
    """

    def count(F):
        T = params.x0 ** 2 / params.sigma ** 2 / (2 * _erfcinv(F) ** 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return enumerate_pie_equilibria(params.replace(T=T), pie, n_grid=n_grid).count

    Fs = np.geomspace(lo, hi, n_scan)
    cs = [count(F) for F in Fs]
    out = []
    for k in range(n_scan - 1):
        if cs[k] == cs[k + 1]:
            continue
        a, b, ca = Fs[k], Fs[k + 1], cs[k]
        while b - a > tol * 0.5:
            m = 0.5 * (a + b)
            if count(m) == ca:
                a = m
            else:
                b = m
        out.append(0.5 * (a + b))
    return out


def _erfcinv(p: float) -> float:
    from scipy.special import erfcinv

    return float(erfcinv(p))
