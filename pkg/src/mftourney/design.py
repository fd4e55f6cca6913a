"""Reward design for homogeneous populations.

Two directions are covered:

* reverse engineering: the reward that makes a given completion-time law an
  equilibrium, for open-ended and deadline games;
* optimal schemes: fastest ``alpha``-quantile under a budget, the minimum
  budget and maximum completion rate at a deadline, welfare, and the net
  profit of a principal who values completion at time ``t`` by ``g(t)``.

The optimal-quantile and welfare problems reduce to minimizing
``J(h) = int_0^alpha h`` over increasing ``h`` with a log-budget constraint,
solved in closed form by :func:`lemma61_optimum`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import NotRealizableError
from .fpt import fpt_cdf, fpt_pdf, fpt_quantile, fpt_sf, norm_cdf, norm_pdf
from .reward import DELTA, ModelParams, RankReward, RankRewardSmooth, RankRewardStep, reward_to_dict

__all__ = [
    "TargetDistribution",
    "ReverseEngineered",
    "DesignSolution",
    "ProfitFunction",
    "reward_from_distribution_inf",
    "reward_from_distribution_fin",
    "min_quantile_reward",
    "min_budget",
    "max_completion_rate",
    "max_welfare_reward",
    "max_net_profit",
    "net_profit_bruteforce",
    "lemma61_optimum",
    "uniform_scheme",
    "uniform_scheme_cdf",
    "uniform_scheme_effort",
]

_MONO_TOL = 1e-9


# --------------------------------------------------------------------------
# reverse engineering
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetDistribution:
    """Completion-time law given on a time grid.

    Parameters
    ----------
    times : (n,) array
        Increasing, positive. With a deadline the grid must stay in ``(0, T]``.
    density : (n,) array
        ``f_mu`` at ``times``; strictly positive.
    cdf : (n,) array, optional
        ``F_mu`` at ``times``. When omitted it is built by cumulative
        trapezoid integration starting from 0 at ``t = 0``.
    T : float
        Deadline (``inf`` for the open-ended game). With a deadline the
        missing mass ``1 - F_mu(T)`` sits at the incompletion state.
    """

    times: np.ndarray
    density: np.ndarray
    cdf: np.ndarray | None = None
    T: float = math.inf

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.density, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "density", f)
        if t.ndim != 1 or t.size < 2 or t.size != f.size:
            raise ValueError("times and density must be 1-d of equal length >= 2")
        if t[0] <= 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be positive and increasing")
        if np.any(f <= 0) or not np.all(np.isfinite(f)):
            raise ValueError("density must be finite and strictly positive")
        if math.isfinite(self.T) and t[-1] > self.T * (1 + 1e-12):
            raise ValueError("time grid exceeds the deadline")
        if self.cdf is None:
            F = np.concatenate(([0.0], integrate.cumulative_trapezoid(f, t)))
            F += 0.5 * t[0] * f[0]
        else:
            F = np.asarray(self.cdf, dtype=float)
        if F.shape != t.shape or np.any(np.diff(F) < 0) or F[-1] > 1 + 1e-9:
            raise ValueError("cdf must be nondecreasing with values <= 1")
        object.__setattr__(self, "cdf", F)

    @classmethod
    def from_functions(cls, pdf: Callable, cdf: Callable, times, T: float = math.inf):
        times = np.asarray(times, dtype=float)
        return cls(times, np.asarray(pdf(times), dtype=float), np.asarray(cdf(times), dtype=float), T)


@dataclass(frozen=True)
class ReverseEngineered:
    """Reward realizing a target law.

    ``reward`` is the cheapest admissible member: ``H_mu`` shifted so its
    minimum equals ``R_inf`` (open-ended game) or the unique reward on
    ``[0, F_mu(T)]`` (deadline game). ``ranks``/``raw`` hold the unshifted
    ``kappa ln zeta_mu`` profile on the sample ranks.
    """

    reward: RankReward
    ranks: np.ndarray
    raw: np.ndarray
    min_shift: float
    budget_threshold: float
    beta: float

    def within_budget(self, K: float) -> bool:
        """Budget test: for the open-ended game ``shift <= K - kappa int ln zeta dmu``."""
        return bool(self.budget_threshold <= K + 1e-10)


def _validated_log_zeta(mu: TargetDistribution, params: ModelParams) -> np.ndarray:
    f0 = np.asarray(fpt_pdf(params.y0, mu.times))
    if np.any(f0 <= 0):
        raise NotRealizableError("reference density vanishes on the grid; shrink the grid")
    lz = np.log(mu.density) - np.log(f0)
    if not np.all(np.isfinite(lz)):
        raise NotRealizableError("ln zeta is not bounded on the grid")
    scale = max(1.0, float(np.max(np.abs(lz))))
    if np.any(np.diff(lz) > _MONO_TOL * scale):
        raise NotRealizableError("ln zeta is not decreasing: target is not an equilibrium law")
    return lz


_MIN_GAP = 1e-10


def _thin(r: np.ndarray, v: np.ndarray, lo: float, hi: float):
    """Drop knots outside ``(lo, hi)`` and knots closer than ``_MIN_GAP`` to a kept one."""
    keep = (r > lo + _MIN_GAP) & (r < hi - _MIN_GAP)
    r, v = r[keep], v[keep]
    if r.size == 0:
        return r, v
    out = [0]
    for j in range(1, r.size):
        if r[j] - r[out[-1]] >= _MIN_GAP:
            out.append(j)
    return r[out], v[out]


def _rank_profile(ranks: np.ndarray, values: np.ndarray, top: float, tail: float | None):
    """Piecewise-linear reward on ranks, constant outside the sampled range."""
    r, v = _thin(np.asarray(ranks, dtype=float), np.asarray(values, dtype=float), 0.0, top)
    g = np.concatenate(([0.0], r, [top]))
    vals = np.concatenate(([v[0] if v.size else values[0]], v, [v[-1] if v.size else values[-1]]))
    if top < 1.0:
        # jump to the floor just after the terminal rate
        step = min(_MIN_GAP, 0.5 * (1.0 - top))
        g = np.concatenate((g, [top + step, 1.0]))
        vals = np.concatenate((vals, [tail, tail]))
    vals = np.minimum.accumulate(vals)
    return g, vals


def reward_from_distribution_inf(mu: TargetDistribution, params: ModelParams) -> ReverseEngineered:
    """Reward ``H_mu(r) = kappa ln zeta_mu(F_mu^{-1}(r))`` for the open-ended game.

    The returned reward adds the minimal shift ``R_inf - kappa ln inf zeta``.
    """
    if math.isfinite(mu.T) or params.finite:
        raise ValueError("use reward_from_distribution_fin for a finite deadline")
    lz = _validated_log_zeta(mu, params)
    kap = params.kappa
    raw = kap * lz
    shift = params.R_inf - kap * float(lz.min())
    g, vals = _rank_profile(mu.cdf, raw + shift, 1.0, None)
    H = RankRewardSmooth(g, np.maximum(vals, params.R_inf), params.R_inf)
    # int ln zeta dmu by trapezoid in rank space
    mean_lz = float(np.trapezoid(lz, mu.cdf)) + lz[0] * mu.cdf[0] + lz[-1] * (1 - mu.cdf[-1])
    return ReverseEngineered(H, mu.cdf.copy(), raw, shift, shift + kap * mean_lz, 1.0)


def reward_from_distribution_fin(mu: TargetDistribution, params: ModelParams) -> ReverseEngineered:
    """Reward ``R_inf + kappa (ln zeta_mu - ln delta_mu)`` on ``[0, F_mu(T)]``, ``R_inf`` after."""
    if not params.finite or abs(mu.T - params.T) > 1e-12 * params.T:
        raise ValueError("target and params must share the same finite deadline")
    lz = _validated_log_zeta(mu, params)
    kap = params.kappa
    beta = float(mu.cdf[-1])
    if beta >= 1:
        raise NotRealizableError("a deadline game leaves positive mass unfinished")
    log_delta = math.log1p(-beta) - math.log(fpt_sf(params.y0, params.T))
    if float(lz.min()) < log_delta - _MONO_TOL * max(1.0, abs(log_delta)):
        raise NotRealizableError("inf zeta_mu < delta_mu: target is not an equilibrium law")
    raw = params.R_inf + kap * (lz - log_delta)
    g, vals = _rank_profile(mu.cdf, raw, beta, params.R_inf)
    H = RankRewardSmooth(g, np.maximum(vals, params.R_inf), params.R_inf)
    spent = float(np.trapezoid(raw, mu.cdf)) + raw[0] * mu.cdf[0] + (1 - beta) * params.R_inf
    return ReverseEngineered(H, mu.cdf.copy(), raw, 0.0, spent, beta)


# --------------------------------------------------------------------------
# optimal schemes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignSolution:
    """Optimal reward and its objective.

    ``auxiliary`` carries problem-specific outputs such as ``T_star``,
    ``alpha_max``, ``K_min``, ``z_star``, ``t_b``, ``b``.
    """

    problem: str
    reward: RankReward
    objective: float
    auxiliary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        aux = {k: v for k, v in self.auxiliary.items() if not callable(v)}
        return {"problem": self.problem, "objective": self.objective,
                "reward": reward_to_dict(self.reward), "auxiliary": aux,
                "budget": self.reward.budget()}


def _check_alpha(alpha: float):
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def _check_budget(K: float, params: ModelParams):
    if not (K >= params.R_inf) or not math.isfinite(K):
        raise ValueError(f"budget K={K!r} must be finite and >= R_inf={params.R_inf}")


def uniform_scheme(params: ModelParams, K: float, alpha: float) -> RankRewardStep:
    """``R_inf + (K - R_inf) / alpha`` on ranks ``[0, alpha)``, ``R_inf`` after."""
    _check_alpha(alpha)
    top = params.R_inf + (K - params.R_inf) / alpha
    return RankRewardStep(np.array([alpha]), np.array([top, params.R_inf]), params.R_inf)


def _boost(params: ModelParams, K: float, alpha: float) -> float:
    """``exp((K - R_inf) / (2 alpha c sigma^2))``."""
    return math.exp((K - params.R_inf) / (alpha * params.kappa))


def uniform_scheme_cdf(params: ModelParams, K: float, alpha: float, t):
    """Equilibrium c.d.f. under the uniform cutoff scheme (open-ended game)."""
    E = _boost(params, K, alpha)
    F0 = np.asarray(fpt_cdf(params.y0, t))
    Ts = fpt_quantile(params.y0, alpha / (alpha + (1 - alpha) * E))
    lo = (alpha + (1 - alpha) * E) * F0
    hi = F0 + alpha * (1 - F0) * (1 - 1 / E)
    out = np.where(np.asarray(t) <= Ts, lo, hi)
    return out if out.ndim else float(out)


def uniform_scheme_effort(params: ModelParams, K: float, alpha: float, t, x):
    """Closed-form feedback effort under the uniform cutoff scheme (zero after ``T*``)."""
    E = _boost(params, K, alpha)
    Ts = fpt_quantile(params.y0, alpha / (alpha + (1 - alpha) * E))
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    out = np.zeros(t.shape)
    m = (t < Ts) & (x > 0)
    s = np.sqrt(Ts - t[m])
    q = x[m] / (params.sigma * s)
    num = 2 * (E - 1) * norm_pdf(q) * params.sigma / s
    den = 1 + 2 * (E - 1) * (1 - norm_cdf(q))
    out[m] = num / den
    return out if out.ndim else float(out)


def min_quantile_reward(params: ModelParams, K: float, alpha: float) -> DesignSolution:
    """Budget-``K`` reward minimizing the time by which ``alpha`` of players finish.

    With a deadline shorter than the optimal time the target is infeasible
    and ``objective`` is ``DELTA``.
    """
    _check_alpha(alpha)
    _check_budget(K, params)
    E = _boost(params, K, alpha)
    p = alpha / (alpha + (1 - alpha) * E)
    Ts = float(fpt_quantile(params.y0, p))
    kap = params.kappa
    V = params.R_inf - kap * math.log(alpha / E + 1 - alpha)
    feasible = (not params.finite) or params.T >= Ts
    aux = {"T_star": Ts, "feasible": bool(feasible), "value": V, "alpha": alpha, "K": K}
    obj = Ts if feasible else DELTA
    return DesignSolution("quantile", uniform_scheme(params, K, alpha), obj, aux)


def min_budget(params: ModelParams, alpha: float, T: float | None = None) -> float:
    """Smallest budget making ``alpha`` of players finish by ``T``."""
    _check_alpha(alpha)
    T = params.T if T is None else T
    if not (0 < T < math.inf):
        raise ValueError("min_budget needs a finite positive deadline")
    F = fpt_cdf(params.y0, T)
    S = fpt_sf(params.y0, T)
    if F <= 0:
        return math.inf
    arg = math.log(alpha) - math.log1p(-alpha) + math.log(S) - math.log(F)
    return params.R_inf + alpha * params.kappa * max(arg, 0.0)


def max_completion_rate(params: ModelParams, K: float, T: float | None = None,
                        tol: float = 1e-15) -> float:
    """Largest completion rate reachable by ``T`` with budget ``K``.

    Bisection on ``ln(a / (1 - a)) - (K - R_inf) / (2 a c sigma^2) = ln C_T``,
    whose left side increases in ``a``.
    """
    _check_budget(K, params)
    T = params.T if T is None else T
    if not (0 < T < math.inf):
        raise ValueError("max_completion_rate needs a finite positive deadline")
    F = fpt_cdf(params.y0, T)
    S = fpt_sf(params.y0, T)
    target = math.log(F) - math.log(S)
    gap = (K - params.R_inf) / params.kappa

    def h(a):
        return math.log(a) - math.log1p(-a) - gap / a - target

    lo, hi = 0.0, 1.0
    for _ in range(4000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo < tol:
            break
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def max_welfare_reward(params: ModelParams, K: float) -> DesignSolution:
    """Welfare-maximizing reward under budget ``K``."""
    _check_budget(K, params)
    if not params.finite:
        H = RankRewardStep(np.empty(0), np.array([float(K)]), params.R_inf)
        return DesignSolution("welfare", H, float(K), {"K": K})
    a = max_completion_rate(params, K)
    val = params.R_inf + params.kappa * (math.log(fpt_sf(params.y0, params.T)) - math.log1p(-a))
    return DesignSolution("welfare", uniform_scheme(params, K, a), val, {"alpha_max": a, "K": K})


def lemma61_optimum(alpha: float, K: float, R_inf: float, c: float, sigma: float):
    """Minimizer of ``int_0^alpha h`` over increasing ``0 < h <= e^{-R_inf/kappa}``
    with ``int_0^alpha -ln h <= (K - R_inf (1 - alpha)) / kappa``.

    Returns
    -------
    h_star : float
        The optimal constant.
    J : float
        ``alpha * h_star``.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    if K < R_inf:
        raise ValueError("K must be >= R_inf")
    kap = 2.0 * c * sigma ** 2
    h = math.exp(-(K - R_inf * (1.0 - alpha)) / (alpha * kap))
    return h, alpha * h


# --------------------------------------------------------------------------
# net profit
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfitFunction:
    """Tabulated profit ``g(t)``: linear between knots, constant after the last."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.size < 2 or t.size != v.size:
            raise ValueError("g needs at least two (time, value) pairs")
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("g times must start at 0 and increase strictly")
        if not np.all(np.isfinite(v)):
            raise ValueError("g values must be finite")
        scale = max(1.0, float(np.max(np.abs(v))))
        if np.any(np.diff(v) > 1e-12 * scale):
            raise ValueError("g must be decreasing")
        if v[0] - v[-1] <= 1e-12 * scale:
            raise ValueError("g must not be constant")

    @classmethod
    def from_callable(cls, g: Callable, t_max: float, n: int = 4001, spacing: str = "log"):
        if spacing == "log":
            t = np.concatenate(([0.0], np.geomspace(t_max * 1e-8, t_max, n - 1)))
        else:
            t = np.linspace(0.0, t_max, n)
        return cls(t, np.asarray(g(t), dtype=float))

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    @property
    def g_inf(self) -> float:
        return float(self.values[-1])

    @property
    def g0(self) -> float:
        return float(self.values[0])


class _ProfitIntegrals:
    """Cumulative ``A(z) = int_0^z f° e^{(g - g0)/kappa}`` and ``B(z) = int_z^inf g f°``."""

    def __init__(self, params: ModelParams, g: ProfitFunction, n: int = 10_000):
        self.p = params
        self.g = g
        y = params.y0
        # erfc(27) ~ 1e-319: nothing completes before t_lo
        t_lo = y * y / (2 * 27.0 ** 2)
        t_hi = max(float(g.times[-1]), float(fpt_quantile(y, 1 - 1e-14)))
        grid = np.geomspace(t_lo, t_hi, n)
        grid = np.union1d(grid, g.times[(g.times > t_lo) & (g.times < t_hi)])
        self.grid = grid
        xs, ws = np.polynomial.legendre.leggauss(10)
        a, b = grid[:-1], grid[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid[:, None] + half[:, None] * xs[None, :]
        f0 = fpt_pdf(y, nodes)
        gv = g(nodes)
        kap = params.kappa
        ea = (f0 * np.exp((gv - g.g0) / kap)) @ ws * half
        eb = (f0 * gv) @ ws * half
        self.A = np.concatenate(([0.0], np.cumsum(ea)))
        # tail of B beyond t_hi where g is at its last value
        tail = g.g_inf * fpt_sf(y, t_hi)
        self.B = np.concatenate((np.cumsum(eb[::-1])[::-1], [0.0])) + tail
        self._xs, self._ws = xs, ws

    def _partial(self, z):
        """``(A(z), B(z))`` for a scalar ``z`` by completing the cell containing it."""
        grid = self.grid
        if z <= grid[0]:
            return 0.0, float(self.B[0])
        if z >= grid[-1]:
            return float(self.A[-1]), self.g.g_inf * fpt_sf(self.p.y0, z)
        k = int(np.searchsorted(grid, z, side="right") - 1)
        da, db = self._seg(grid[k], z)
        return float(self.A[k]) + da, float(self.B[k]) - db

    def _seg(self, a, b):
        if b <= a:
            return 0.0, 0.0
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid + half * self._xs
        f0 = fpt_pdf(self.p.y0, nodes)
        gv = self.g(nodes)
        ea = float(np.dot(f0 * np.exp((gv - self.g.g0) / self.p.kappa), self._ws) * half)
        eb = float(np.dot(f0 * gv, self._ws) * half)
        return ea, eb

    def u_tilde(self, z: float) -> float:
        """Profit objective ``U~(z)`` for a bonus deadline ``z``."""
        if math.isinf(z):
            return self.g.g_inf - self.p.R_inf
        A, B = self._partial(z)
        gz = float(self.g(z))
        e = math.exp((gz - self.g.g0) / self.p.kappa)
        num = gz * A + e * B
        den = A + e * fpt_sf(self.p.y0, z)
        return num / den - self.p.R_inf

    def u_tilde_grid(self) -> np.ndarray:
        gz = self.g(self.grid)
        e = np.exp((gz - self.g.g0) / self.p.kappa)
        num = gz * self.A + e * self.B
        den = self.A + e * fpt_sf(self.p.y0, self.grid)
        return num / den - self.p.R_inf

    def psi(self, z: float) -> float:
        """Normalizer ``b = psi(z)``."""
        A, _ = self._partial(z)
        gz = float(self.g(z))
        return 1.0 / (math.exp((self.g.g0 - gz) / self.p.kappa) * A + fpt_sf(self.p.y0, z))


def max_net_profit(params: ModelParams, g: ProfitFunction | Callable, *, n_grid: int = 10_000,
                   t_max: float | None = None, rel_tol: float = 1e-12) -> DesignSolution:
    """Net-profit-maximizing reward for the open-ended game.

    Maximizes ``U~(z)`` on a log grid, refines by golden section, maps the
    maximizer to the bonus deadline ``t_b = inf{z : g(z) = g(z*)}`` and the
    normalizer ``b = psi(t_b)``.
    """
    if params.finite:
        raise ValueError("net-profit design is only defined for T = inf")
    if not isinstance(g, ProfitFunction):
        tm = t_max if t_max is not None else 50.0 * params.y0 ** 2
        g = ProfitFunction.from_callable(g, tm)
    P = _ProfitIntegrals(params, g, n_grid)
    vals = P.u_tilde_grid()
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo = P.grid[max(i - 1, 0)]
    hi = P.grid[min(i + 1, P.grid.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda z: -P.u_tilde(z), bracket=None, bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12 * hi})
        z_star = float(res.x) if -res.fun >= best else float(P.grid[i])
    else:
        z_star = float(P.grid[i])
    U = P.u_tilde(z_star)
    if U < P.u_tilde(math.inf):
        z_star, U = math.inf, P.u_tilde(math.inf)
    maximizers = _distinct_maximizers(P.grid, vals, z_star, U, rel_tol)
    tb_all = [_bonus_deadline(g, z) for z in maximizers]
    t_b = min(tb_all)
    b = P.psi(t_b) if math.isfinite(t_b) else P.psi(P.grid[-1])
    gb = float(g(t_b)) if math.isfinite(t_b) else g.g_inf

    # equilibrium law f = b f° exp((g(t ^ t_b) - g(t_b)) / kappa) and the reward on ranks
    kap = params.kappa
    tt = P.grid[P.grid <= t_b] if math.isfinite(t_b) else P.grid
    Fm = b * math.exp((g.g0 - gb) / kap) * P.A[: tt.size]
    ranks = Fm
    vals_r = params.R_inf + g(tt) - gb
    top = float(min(Fm[-1], 1.0)) if tt.size else 0.0
    if tt.size and top > 0:
        r, v = _thin(ranks, vals_r, 0.0, top)
        grid = np.concatenate(([0.0], r, [top]))
        gvals = np.concatenate(([params.R_inf + g.g0 - gb], v, [params.R_inf]))
        if top < 1 - _MIN_GAP:
            grid = np.append(grid, 1.0)
            gvals = np.append(gvals, params.R_inf)
        else:
            grid[-1] = 1.0
        gvals = np.maximum(np.minimum.accumulate(gvals), params.R_inf)
        H = RankRewardSmooth(grid, gvals, params.R_inf)
    else:
        H = RankRewardStep(np.empty(0), np.array([params.R_inf]), params.R_inf)

    def density(t):
        t = np.asarray(t, dtype=float)
        return b * fpt_pdf(params.y0, t) * np.exp((g(np.minimum(t, t_b)) - gb) / kap)

    b0 = 1.0 / (math.exp((g.g0 - g.g_inf) / kap) * P.A[-1] + fpt_sf(params.y0, P.grid[-1]))
    aux = {"z_star": z_star, "t_b": t_b, "b": b, "b0": b0, "U": U,
           "maximizers": maximizers, "multiple_maximizers": len(maximizers) > 1,
           "density": density}
    return DesignSolution("profit", H, U, aux)


def _distinct_maximizers(grid, vals, z_star, U, rel_tol, dip=1e-6):
    """Representatives of separate near-optimal peaks of the grid profile.

    Grid points within ``rel_tol`` of the optimum are grouped into peaks; two
    peaks are distinct only if the profile between them drops by ``dip``.
    """
    scale = max(1.0, abs(U))
    near = np.flatnonzero(vals >= U - max(rel_tol, 1e3 * rel_tol) * scale)
    reps = [z_star]
    if near.size == 0:
        return reps
    groups = [[near[0]]]
    for j in near[1:]:
        prev = groups[-1][-1]
        if np.min(vals[prev:j + 1]) < U - dip * scale:
            groups.append([j])
        else:
            groups[-1].append(j)
    for grp in groups:
        z = float(grid[grp[int(np.argmax(vals[grp]))]])
        if not any(abs(z - r) <= 0.05 * max(r, 1e-300) or _same_peak(grid, vals, z, r, U, dip * scale)
                   for r in reps):
            reps.append(z)
    return sorted(reps)


def _same_peak(grid, vals, a, b, U, dip):
    lo, hi = sorted((a, b))
    m = (grid >= lo) & (grid <= hi)
    return not np.any(vals[m] < U - dip)


def _bonus_deadline(g: ProfitFunction, z: float) -> float:
    """``inf{s >= 0 : g(s) = g(z)}`` by scanning knots then bisecting."""
    if math.isinf(z):
        if np.all(g.values > g.g_inf):
            return math.inf
        k = int(np.argmax(g.values <= g.g_inf))
        z = float(g.times[k])
    level = float(g(z))
    scale = max(1.0, abs(level))
    hit = np.flatnonzero(np.abs(g.values - level) <= 1e-12 * scale)
    first = float(g.times[hit[0]]) if hit.size else z
    upper = min(first, z)
    below = g.times[g.times < upper]
    lo = float(below[-1]) if below.size else 0.0
    hi = upper
    if abs(float(g(lo)) - level) <= 1e-12 * scale:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if float(g(mid)) - level > 1e-12 * scale:
            lo = mid
        else:
            hi = mid
    return hi


def net_profit_bruteforce(params: ModelParams, g: ProfitFunction, n_b: int = 41,
                          panels: int = 4000):
    """Independent check of :func:`max_net_profit` by a Lagrangian search.

    For each normalizer ``b`` the best law is
    ``f = b f° exp([(g - lam) / kappa - 1]^+)`` with ``lam`` fixed by
    normalization; the net profit is then maximized over ``b`` on a grid and
    polished by a bounded scalar search. Expectations under ``f°`` use
    ``tau° = y^2 / Z^2`` with ``Z`` half-normal and composite Gauss-Legendre
    rules in ``Z``.

    Returns
    -------
    (b, U) : tuple of float
    """
    kap = params.kappa
    y = params.y0
    xg, wg = np.polynomial.legendre.leggauss(10)
    edges = np.linspace(0.0, 40.0, panels + 1)
    h = np.diff(edges)[:, None]
    z = (edges[:-1, None] + 0.5 * h * (xg[None, :] + 1)).ravel()
    w = (0.5 * h * wg[None, :]).ravel() * 2.0 * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    gt = g(y * y / (z * z))

    def U_of_b(b):
        def mass(lam):
            return b * float(np.dot(w, np.exp(np.maximum((gt - lam) / kap - 1.0, 0.0)))) - 1.0

        hi = g.g0 - kap
        if mass(hi) >= 0:
            lam = hi
        else:
            lo = hi - kap
            while mass(lo) < 0:
                lo -= 2 * (hi - lo)
            lam = optimize.brentq(mass, lo, hi, xtol=1e-14, rtol=1e-15)
        ex = np.maximum((gt - lam) / kap - 1.0, 0.0)
        return b * float(np.dot(w, (gt - kap * ex) * np.exp(ex)))

    bs = np.linspace(1e-3, 1.0, n_b)
    us = np.array([U_of_b(b) for b in bs])
    j = int(np.argmax(us))
    lo, hi = bs[max(j - 1, 0)], bs[min(j + 1, n_b - 1)]
    res = optimize.minimize_scalar(lambda b: -U_of_b(b), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    if -res.fun >= us[j]:
        return float(res.x), float(-res.fun)
    return float(bs[j]), float(us[j])
