"""Homogeneous equilibrium in closed form.

With ``kappa = 2 c sigma^2`` and the cumulative weight

    I(r) = int_0^r exp((R_inf - H(z)) / kappa) dz,

the equilibrium quantile function is ``T_r = F°^{-1}(C I(r))`` where
``F°`` is the c.d.f. of the uncontrolled passage time from ``x0 / sigma`` and

* ``C = (1 - F°(T)) / (1 - beta)`` for a finite deadline, ``beta`` being the
  root of ``I(beta) / (1 - beta) = F°(T) / (1 - F°(T))``;
* ``C = 1 / I(1)`` and ``beta = 1`` without a deadline.

In both cases ``u(0, x0) = C exp(R_inf / kappa)`` and the game value is
``V = R_inf + kappa ln C``. The value and effort fields solve the heat
equation and are evaluated either as closed-form sums (step rewards) or by
half-normal quadrature (smooth rewards).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConvergenceError
from .fpt import FptLaw, fpt_cdf, fpt_expect, fpt_pdf, fpt_quantile, fpt_sf
from .reward import (
    DELTA,
    ModelParams,
    RankReward,
    RankRewardSmooth,
    RankRewardStep,
    eval_reward,
    reward_to_dict,
)

__all__ = [
    "CumulativeWeight",
    "HomEquilibrium",
    "StagedEquilibrium",
    "solve_beta",
    "solve_hom",
    "quantile",
    "expected_effort",
    "u_field",
    "value_field",
    "effort_field",
    "effort_grid",
    "solve_staged",
    "step_schedule",
    "smooth_schedule",
]


class CumulativeWeight:
    """Exact ``I(r) = int_0^r exp((R_inf - H) / kappa)`` and its inverse.

    Step rewards have constant weight per cell; smooth rewards are linear per
    grid cell, so the weight is exponential-linear and both ``I`` and
    ``I^{-1}`` have closed forms per cell. Queries cost ``O(log M)``.
    """

    def __init__(self, H: RankReward, kappa: float, R_inf: float | None = None):
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        self.H = H
        self.kappa = float(kappa)
        self.R_inf = H.floor if R_inf is None else float(R_inf)
        if isinstance(H, RankRewardStep):
            self.edges = H.edges
            la = (self.R_inf - H.levels) / self.kappa
            self._la = la
            self._slope = np.zeros_like(la)
            cells = np.diff(self.edges) * np.exp(la)
        else:
            self.edges = H.grid
            la = (self.R_inf - H.values[:-1]) / self.kappa
            lb = (self.R_inf - H.values[1:]) / self.kappa
            self._la = la
            # log-weight slope per unit rank inside each cell
            self._slope = (lb - la) / np.diff(self.edges)
            cells = H.cell_integral_exp(self.kappa, self.R_inf)
        self.cum = np.concatenate(([0.0], np.cumsum(cells)))
        self.total = float(self.cum[-1])

    def weight(self, r):
        """Integrand ``exp((R_inf - H(r)) / kappa)``."""
        return np.exp((self.R_inf - eval_reward(self.H, r)) / self.kappa)

    def _cell(self, r):
        n = self._la.size
        return np.clip(np.searchsorted(self.edges, r, side="right") - 1, 0, n - 1)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any((r < 0) | (r > 1)):
            raise ValueError("rank outside [0, 1]")
        k = self._cell(r)
        s = r - self.edges[k]
        sl = self._slope[k]
        la = self._la[k]
        # int_0^s exp(la + sl u) du = exp(top) (1 - exp(-|sl s|)) / |sl|, top the larger end
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            d = sl * s
            big = np.abs(d) > 1e-8
            ad = np.where(big, np.abs(d), 1.0)
            exact = np.exp(la + np.maximum(d, 0.0)) * -np.expm1(-ad) * s / ad
            series = np.exp(la) * s * (1.0 + 0.5 * d)
        out = self.cum[k] + np.where(big, exact, series)
        return out if out.ndim else float(out)

    def inverse(self, v):
        """Smallest ``r`` with ``I(r) = v`` for ``v`` in ``[0, I(1)]``."""
        v = np.asarray(v, dtype=float)
        if np.any(v < 0) or np.any(v > self.total * (1 + 1e-12)):
            raise ValueError("value outside [0, I(1)]")
        v = np.minimum(v, self.total)
        n = self._la.size
        k = np.clip(np.searchsorted(self.cum, v, side="left") - 1, 0, n - 1)
        w = np.maximum(v - self.cum[k], 0.0)
        la = self._la[k]
        sl = self._slope[k]
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            # s solves exp(la) expm1(sl s) / sl = w; log space keeps exp(-la) finite
            lw = np.log(w) - la
            delta = np.exp(lw)
            big = np.abs(sl) * delta > 1e-8
            safe = np.where(sl == 0, 1.0, sl)
            up = np.logaddexp(0.0, np.log(np.abs(safe)) + lw) / safe
            down = np.log1p(np.maximum(sl * delta, -1 + 1e-300)) / safe
            s = np.where(big, np.where(sl > 0, up, down), delta * (1.0 - 0.5 * sl * delta))
            s = np.where(w > 0, s, 0.0)
        r = np.clip(self.edges[k] + s, self.edges[k], self.edges[k + 1])
        r = np.where(v >= self.total, 1.0, r)
        return r if r.ndim else float(r)


def solve_beta(params: ModelParams, H: RankReward, weight: CumulativeWeight | None = None,
               tol: float = 1e-12) -> float:
    """Terminal completion rate for a finite deadline.

    Monotone bisection on ``phi(r) = I(r) / (1 - r)`` against
    ``F°(T) / (1 - F°(T))``, run to machine resolution.
    """
    if not params.finite:
        raise ValueError("solve_beta needs a finite deadline; beta = 1 when T = inf")
    if H.floor != params.R_inf:
        H = _with_floor(H, params.R_inf)
    I = weight if weight is not None else CumulativeWeight(H, params.kappa, params.R_inf)
    F = fpt_cdf(params.y0, params.T)
    Fs = fpt_sf(params.y0, params.T)
    if F <= 0.0:
        return 0.0
    # compare I(r) (1 - F) against F (1 - r) to avoid dividing near 1
    lo, hi = 0.0, 1.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if I(mid) * Fs < F * (1.0 - mid):
            lo = mid
        else:
            hi = mid
    beta = lo if abs(I(lo) * Fs - F * (1 - lo)) <= abs(I(hi) * Fs - F * (1 - hi)) else hi
    # residual of F(1 - beta) = (1 - F) I(beta), the cleared form of the rate equation
    res = F * (1.0 - beta) - Fs * I(beta)
    if not abs(res) < tol:
        raise ConvergenceError(f"beta bisection residual {res:.3e}", residual=res)
    return float(beta)


def _with_floor(H: RankReward, floor: float) -> RankReward:
    if isinstance(H, RankRewardStep):
        return RankRewardStep(H.thresholds, H.levels, floor)
    return RankRewardSmooth(H.grid, H.values, floor)


@dataclass(frozen=True)
class HomEquilibrium:
    """Closed-form homogeneous equilibrium.

    Attributes
    ----------
    params, reward
        Inputs.
    beta : float
        ``F_mu(T)``; 1 without a deadline.
    value : float
        Game value ``V``.
    scale : float
        ``C = u(0, x0) exp(-R_inf / kappa)``.
    weight : CumulativeWeight
        Precomputed ``I``.
    """

    params: ModelParams
    reward: RankReward
    beta: float
    value: float
    scale: float
    weight: CumulativeWeight = field(repr=False, compare=False)

    @property
    def kappa(self) -> float:
        return self.params.kappa

    @property
    def F_T(self) -> float:
        """``F°(T)`` of the uncontrolled law (1 without a deadline)."""
        return fpt_cdf(self.params.y0, self.params.T) if self.params.finite else 1.0

    def quantile(self, r):
        return quantile(self, r)

    def cdf(self, t):
        """Equilibrium c.d.f. ``F_mu(t)``; constant ``beta`` after a finite deadline."""
        t = np.asarray(t, dtype=float)
        tt = np.minimum(t, self.params.T) if self.params.finite else t
        p = fpt_cdf(self.params.y0, tt)
        out = self.weight.inverse(np.minimum(np.asarray(p) / self.scale, self.weight.total))
        out = np.minimum(out, self.beta)
        return out if np.ndim(out) else float(out)

    def zeta(self, t):
        """Density ratio ``f_mu / f°`` on ``[0, T]``."""
        r = self.cdf(t)
        H = eval_reward(self.reward, r)
        out = np.exp((H - self.params.R_inf) / self.kappa) / self.scale
        t = np.asarray(t, dtype=float)
        if self.params.finite:
            out = np.where(t > self.params.T, 0.0, out)
        return out if np.ndim(out) else float(out)

    def pdf(self, t):
        out = self.zeta(t) * fpt_pdf(self.params.y0, t)
        return out if np.ndim(out) else float(out)

    def reward_at_time(self, t):
        """``R_mu(t)``: payment for finishing at time ``t``."""
        t = np.asarray(t, dtype=float)
        out = eval_reward(self.reward, self.cdf(t))
        if self.params.finite:
            out = np.where(t > self.params.T, self.params.R_inf, out)
        return out if np.ndim(out) else float(out)

    def to_dict(self, ranks: Sequence[float] = (0.25, 0.5, 0.75)) -> dict:
        qs = [quantile(self, r) for r in ranks]
        return {
            "params": self.params.to_dict(),
            "reward": reward_to_dict(self.reward),
            "beta": self.beta,
            "value": self.value,
            "u0_scaled": self.scale,
            "quantiles": [{"rank": float(r), "time": q} for r, q in zip(ranks, qs)],
            "expected_effort": expected_effort(self) if self.params.finite else None,
        }


def solve_hom(params: ModelParams, H: RankReward) -> HomEquilibrium:
    """Equilibrium rate, value and quantile data for a homogeneous population."""
    if H.floor != params.R_inf:
        H = _with_floor(H, params.R_inf)
    I = CumulativeWeight(H, params.kappa, params.R_inf)
    if params.finite:
        beta = solve_beta(params, H, I)
        # both forms are exact at the root; 1 - beta loses digits near 1
        if beta > 0.5:
            C = fpt_cdf(params.y0, params.T) / float(I(beta))
        else:
            C = fpt_sf(params.y0, params.T) / (1.0 - beta)
    else:
        beta = 1.0
        C = 1.0 / I.total
    V = params.R_inf + params.kappa * math.log(C)
    return HomEquilibrium(params, H, float(beta), float(V), float(C), I)


def quantile(eq: HomEquilibrium, r):
    """Equilibrium ``r``-quantile of completion times.

    A scalar rank above ``beta`` under a deadline returns ``DELTA``; array
    queries mark those entries with ``inf``.
    """
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > 1)) or np.any(np.isnan(r)):
        raise ValueError("rank outside [0, 1]")
    out = np.full(r.shape, np.inf)
    ok = r <= eq.beta if eq.params.finite else r < 1
    if np.any(ok):
        p = eq.scale * np.asarray(eq.weight(r[ok]))
        out[ok] = fpt_quantile(eq.params.y0, np.clip(p, 0.0, 1.0))
    if scalar:
        if eq.params.finite and not ok:
            return DELTA
        return float(out)
    return out


def expected_effort(eq: HomEquilibrium) -> float:
    """Expected total effort ``x0 (beta - F°(T)) / (1 - F°(T))``."""
    if not eq.params.finite:
        raise ValueError("expected effort is only defined for a finite deadline")
    F = eq.F_T
    return eq.params.x0 * (eq.beta - F) / (1.0 - F)


# --------------------------------------------------------------------------
# value and effort fields
# --------------------------------------------------------------------------

def step_schedule(eq: HomEquilibrium):
    """Time-piecewise-constant form of ``R_mu`` for a step reward.

    Returns
    -------
    bounds : (K+1,) array
        ``0 = b_0 < ... < b_K``, with ``b_K = T`` (or ``inf``).
    levels : (K,) array
        Payment for finishing in ``(b_{j-1}, b_j]``.
    """
    H = eq.reward
    if not isinstance(H, RankRewardStep):
        raise TypeError("step_schedule needs a step reward")
    th = H.thresholds
    reached = th[th < eq.beta] if eq.params.finite else th
    times = np.asarray(quantile(eq, reached), dtype=float) if reached.size else np.empty(0)
    end = eq.params.T if eq.params.finite else np.inf
    bounds = np.concatenate(([0.0], times, [end]))
    levels = H.levels[: reached.size + 1].copy()
    return bounds, levels


def smooth_schedule(eq: HomEquilibrium, d: int = 400):
    """Step-in-time approximation of ``R_mu`` using ``d`` rank cells.

    Cell ``k`` spans equilibrium quantiles ``T_{(k-1)/d}`` to ``T_{k/d}`` and
    pays the average of ``H`` over its rank range, which keeps the exact
    equilibrium clock while flattening the reward inside each cell.
    """
    edges = np.linspace(0.0, 1.0, d + 1)
    top = eq.beta if eq.params.finite else 1.0
    inner = edges[1:-1][edges[1:-1] < top]
    times = np.asarray(quantile(eq, inner), dtype=float) if inner.size else np.empty(0)
    end = eq.params.T if eq.params.finite else np.inf
    bounds = np.concatenate(([0.0], times, [end]))
    H = eq.reward
    lo = edges[: inner.size + 1]
    hi = np.minimum(edges[1: inner.size + 2], top)
    levels = np.empty(inner.size + 1)
    for k in range(levels.size):
        a, b = lo[k], hi[k]
        if b <= a:
            levels[k] = eval_reward(H, a)
            continue
        zz = np.linspace(a, b, 33)
        levels[k] = np.trapezoid(eval_reward(H, zz), zz) / (b - a)
    return bounds, levels


def _top_level(eq: HomEquilibrium) -> float:
    # reference level for scaling u; u(0, x0) e^{-V/kappa} = 1
    return float(eq.value)


def _scaled_u_ux(eq: HomEquilibrium, t, x):
    """``u e^{-V/kappa}`` and ``u_x e^{-V/kappa}``."""
    p = eq.params
    kap = p.kappa
    M = _top_level(eq)
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    if p.finite and np.any(t > p.T):
        raise ValueError("t beyond the deadline")
    if isinstance(eq.reward, RankRewardStep):
        bounds, levels = step_schedule(eq)
        elev = np.exp((levels - M) / kap)
        etail = math.exp((p.R_inf - M) / kap)
        return kernels.sched_u_ux(t, x, p.sigma, bounds, elev, etail)
    # smooth reward: half-normal quadrature per point
    u = np.empty(t.shape)
    ux = np.empty(t.shape)
    for idx in np.ndindex(t.shape):
        ti, xi = float(t[idx]), float(x[idx])
        if xi <= 0:
            u[idx] = math.exp((eq.reward_at_time(ti) - M) / kap)
            ux[idx] = 0.0
            continue
        law = FptLaw(xi / p.sigma)

        def g(s, ti=ti):
            return math.exp((eq.reward_at_time(ti + s) - M) / kap)

        pts = [p.T - ti] if p.finite else None
        y2 = law.y ** 2
        u[idx] = fpt_expect(law, g, points=pts, epsabs=0.0, epsrel=1e-12)
        ux[idx] = fpt_expect(law, lambda s: g(s) * (1.0 - y2 / s), points=pts,
                             epsabs=0.0, epsrel=1e-12) / xi
    return u, ux


def u_field(eq: HomEquilibrium, t, x):
    """``u(t, x) = E exp(R_mu(t + tau°_{x/sigma}) / kappa)``."""
    us, _ = _scaled_u_ux(eq, t, x)
    out = us * math.exp(_top_level(eq) / eq.kappa)
    return out if np.ndim(out) else float(out)


def value_field(eq: HomEquilibrium, t, x):
    """``v = kappa ln u``, computed without overflow."""
    us, _ = _scaled_u_ux(eq, t, x)
    out = _top_level(eq) + eq.kappa * np.log(us)
    return out if np.ndim(out) else float(out)


def effort_field(eq: HomEquilibrium, t, x):
    """Optimal feedback effort ``-sigma^2 u_x / u`` (0 on the goal)."""
    us, uxs = _scaled_u_ux(eq, t, x)
    x = np.broadcast_to(np.asarray(x, dtype=float), us.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(x > 0, -eq.params.sigma ** 2 * uxs / us, 0.0)
    out = np.maximum(out, 0.0)
    return out if np.ndim(out) else float(out)


def effort_grid(eq: HomEquilibrium, t, x, d: int = 400):
    """Fast effort for grids: exact for step rewards, else a ``d``-cell schedule.

    Smooth rewards are replaced by :func:`smooth_schedule`, which keeps the
    equilibrium clock and averages ``H`` over each of ``d`` rank cells.
    """
    if isinstance(eq.reward, RankRewardStep):
        return effort_field(eq, t, x)
    p = eq.params
    if p.finite and np.any(np.asarray(t) > p.T):
        raise ValueError("t beyond the deadline")
    bounds, levels = smooth_schedule(eq, d=d)
    elev = np.exp((levels - eq.value) / p.kappa)
    etail = math.exp((p.R_inf - eq.value) / p.kappa)
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    u, ux = kernels.sched_u_ux(t, x, p.sigma, bounds, elev, etail)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0, -p.sigma ** 2 * ux / u, 0.0)
    out = np.maximum(np.nan_to_num(out), 0.0)
    return out if np.ndim(out) else float(out)


# --------------------------------------------------------------------------
# staged rewards
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StagedEquilibrium:
    """Equilibrium when stage ``k`` pays ``delta_k H(r)`` for finishing in ``(T_{k-1}, T_k]``."""

    params: ModelParams
    base: RankReward
    stage_times: np.ndarray
    multipliers: np.ndarray
    betas: np.ndarray
    value: float
    scale: float
    residual: float
    weights: tuple = field(repr=False, compare=False)

    @property
    def alphas(self) -> np.ndarray:
        return np.asarray(fpt_cdf(self.params.y0, self.stage_times[1:]))

    def quantile(self, r):
        r = float(r)
        if r > self.betas[-1]:
            return DELTA
        b = np.concatenate(([0.0], self.betas))
        a = np.concatenate(([0.0], self.alphas))
        k = int(np.clip(np.searchsorted(b, r, side="left"), 1, b.size - 1))
        I = self.weights[k - 1]
        p = a[k - 1] + self.scale * (I(r) - I(b[k - 1]))
        return float(fpt_quantile(self.params.y0, min(max(p, 0.0), 1.0)))


def solve_staged(params: ModelParams, base: RankReward, stage_times, multipliers,
                 tol: float = 1e-11, max_iter: int = 400) -> StagedEquilibrium:
    """Stage completion rates by outer bisection on ``beta_n`` and forward recursion.

    For a trial ``beta_n`` the constant ``C = (1 - alpha_n) / (1 - beta_n)`` is
    known and each stage equation fixes ``beta_k`` from ``beta_{k-1}``; the
    mismatch between the recursed and trial ``beta_n`` is decreasing.
    """
    if not params.finite:
        raise ValueError("staged rewards need a finite deadline")
    st = np.asarray(stage_times, dtype=float)
    dl = np.asarray(multipliers, dtype=float)
    if st.size < 2 or st[0] != 0 or np.any(np.diff(st) <= 0):
        raise ValueError("stage_times must start at 0 and increase")
    if abs(st[-1] - params.T) > 1e-12 * max(1.0, params.T):
        raise ValueError("last stage time must equal T")
    if dl.size != st.size - 1 or np.any(dl <= 0):
        raise ValueError("need one positive multiplier per stage")
    H = _with_floor(base, params.R_inf)
    weights = tuple(CumulativeWeight(H.scaled(float(d)), params.kappa, params.R_inf) for d in dl)
    alphas = np.asarray(fpt_cdf(params.y0, st))
    sf_n = fpt_sf(params.y0, params.T)

    def forward(bn):
        C = sf_n / (1.0 - bn)
        out = np.empty(dl.size)
        prev = 0.0
        for k, I in enumerate(weights):
            v = I(prev) + (alphas[k + 1] - alphas[k]) / C
            prev = 1.0 if v >= I.total else I.inverse(v)
            out[k] = prev
        return out

    lo, hi = 0.0, 1.0
    it = 0
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if forward(mid)[-1] >= mid:
            lo = mid
        else:
            hi = mid
    bn = lo
    betas = forward(bn)
    C = sf_n / (1.0 - bn)
    bprev = np.concatenate(([0.0], betas[:-1]))
    bnow = betas.copy()
    bnow[-1] = bn
    res = np.array([alphas[k + 1] - alphas[k] - C * (weights[k](bnow[k]) - weights[k](bprev[k]))
                    for k in range(dl.size)])
    r = float(np.max(np.abs(res)))
    if not r < tol * max(1.0, C):
        raise ConvergenceError(f"staged system residual {r:.3e} after {it + 1} bisection steps",
                               residual=res)
    V = params.R_inf + params.kappa * math.log(C)
    return StagedEquilibrium(params, H, st, dl, bnow, float(V), float(C), r, weights)
