"""Heterogeneous populations: discretized fixed point for step rewards.

Players differ in start distance ``x0_i`` and cost ``c_i`` (finite mixture,
shared ``sigma``). For a step reward with cut ranks ``r_1 < ... < r_d`` the
equilibrium is described by the quantile times ``T_1 <= ... <= T_k0 <= T``;
cells beyond ``k0`` are never reached (``DELTA``).

Each type's normalizer ``u_i = u(0, x0_i)`` couples the quantile equations.
For fixed normalizers the quantile equations are triangular and are solved
by a forward sweep over cells (:func:`mftourney.kernels.het_sweep`); the outer
problem is the ``n``-dimensional consistency ``u_i = u_i(T_[1:k0])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import kernels
from .errors import ConvergenceError
from .reward import DELTA, ModelParams, RankRewardStep

__all__ = [
    "PopulationMix",
    "HetEquilibrium",
    "compute_A_T",
    "solve_het",
    "het_u_field",
    "het_value_field",
    "het_effort_field",
    "het_residuals",
    "het_cdf",
]


@dataclass(frozen=True)
class PopulationMix:
    """Finite mixture of player types.

    Parameters
    ----------
    atoms : sequence of (x0, c, weight)
    sigma : float
        Shared volatility.
    """

    atoms: tuple
    sigma: float = 0.25

    def __post_init__(self):
        atoms = tuple((float(x), float(c), float(w)) for x, c, w in self.atoms)
        if not atoms:
            raise ValueError("need at least one atom")
        for x, c, w in atoms:
            if not (x > 0 and c > 0 and w > 0) or not all(map(math.isfinite, (x, c, w))):
                raise ValueError(f"invalid atom {(x, c, w)!r}")
        if abs(sum(a[2] for a in atoms) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def single(cls, x0: float = 1.0, c: float = 1.0, sigma: float = 0.25) -> "PopulationMix":
        return cls(((x0, c, 1.0),), sigma)

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def x0(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def c(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([a[2] for a in self.atoms])

    @property
    def y0(self) -> np.ndarray:
        return self.x0 / self.sigma

    @property
    def kappa(self) -> np.ndarray:
        return 2.0 * self.c * self.sigma**2

    def params(self, i: int, T: float) -> ModelParams:
        """Scalar parameters of type ``i``."""
        x, c, _ = self.atoms[i]
        return ModelParams(x0=x, sigma=self.sigma, c=c, T=T)

    def to_dict(self) -> dict:
        return {"atoms": [list(a) for a in self.atoms], "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "PopulationMix":
        return cls(tuple(tuple(a) for a in d["atoms"]), float(d.get("sigma", 0.25)))


@dataclass(frozen=True)
class HetEquilibrium:
    """Solution of the heterogeneous quantile system.

    ``quantiles`` has one entry per cut rank; entries past ``k0`` are
    ``inf`` (reported as ``DELTA``). Values are ``kappa_i ln u_i``.
    """

    mix: PopulationMix
    reward: RankRewardStep
    T: float
    quantiles: np.ndarray
    k0: int
    beta_type: np.ndarray
    values: np.ndarray
    log_u: np.ndarray
    A_T: float
    residual: float
    restarts_agree: bool = True
    notes: tuple = field(default_factory=tuple)

    @property
    def beta(self) -> float:
        """Aggregate completion rate by the deadline."""
        return float(np.dot(self.mix.weights, self.beta_type))

    @property
    def welfare(self) -> float:
        return float(np.dot(self.mix.weights, self.values))

    def quantile_list(self) -> list:
        return [float(q) if k < self.k0 else DELTA for k, q in enumerate(self.quantiles)]

    def to_dict(self) -> dict:
        return {
            "mix": self.mix.to_dict(),
            "T": self.T,
            "k0": self.k0,
            "quantiles": self.quantile_list(),
            "beta": self.beta,
            "beta_type": self.beta_type.tolist(),
            "values": self.values.tolist(),
            "welfare": self.welfare,
            "A_T": self.A_T,
            "residual": self.residual,
            "restarts_agree": self.restarts_agree,
            "notes": list(self.notes),
        }


def _fpt_cdf_vec(y, t):
    """``F°_y(t)`` for an array of ``y`` at scalar ``t`` (``t = inf`` gives 1)."""
    if not math.isfinite(t):
        return np.ones_like(y)
    return special.erfc(y / math.sqrt(2.0 * t))


def compute_A_T(mix: PopulationMix, reward: RankRewardStep, T: float) -> float:
    """Completion rate if nobody reaches the first cut before the deadline."""
    if not math.isfinite(T):
        raise ValueError("A_T needs a finite deadline")
    F = _fpt_cdf_vec(mix.y0, T)
    d = (reward.floor - reward.levels[0]) / mix.kappa  # <= 0
    ratio = F / (F + np.exp(d) * (1.0 - F))
    return float(np.dot(mix.weights, ratio))


def _scaled_levels(mix: PopulationMix, reward: RankRewardStep):
    """``exp((R_k - R_1) / kappa_i)`` and ``exp((R_inf - R_1) / kappa_i)``."""
    kap = mix.kappa[:, None]
    a = np.exp((reward.levels[None, :] - reward.levels[0]) / kap)
    a_inf = np.exp((reward.floor - reward.levels[0]) / mix.kappa)
    return a, a_inf


class _System:
    """Outer consistency map in log-normalizer coordinates."""

    def __init__(self, mix: PopulationMix, reward: RankRewardStep, T: float):
        self.mix, self.reward, self.T = mix, reward, T
        self.a, self.a_inf = _scaled_levels(mix, reward)
        self.w = mix.weights
        self.y = mix.y0
        self.edges = reward.edges
        lo = np.minimum(self.a.min(axis=1), self.a_inf if math.isfinite(T) else np.inf)
        self.log_lo = np.log(lo)

    def sweep(self, log_u):
        # trial points from hybr can leave the bracket; keep exp(log_u) a normal float
        log_u = np.clip(log_u, -700.0, 700.0)
        return kernels.het_sweep(np.exp(log_u), self.w, self.y, self.a, self.a_inf,
                                 self.edges, self.T)

    def F(self, log_u):
        """``ln(u_i implied) - ln u_i``; zero at the equilibrium."""
        _, _, _, mass, _ = self.sweep(log_u)
        with np.errstate(divide="ignore"):
            return np.log(mass)

    def coordinate(self, log_u, i):
        """Solve type ``i``'s consistency holding the others fixed."""
        def g(s):
            v = log_u.copy()
            v[i] = s
            return self.F(v)[i]

        lo, hi = self.log_lo[i] - 1e-9, 1e-9
        glo, ghi = g(lo), g(hi)
        if glo <= 0:
            return lo
        if ghi >= 0:
            return hi
        return optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)


def _solve_outer(sys: _System, x0: np.ndarray, tol: float, max_iter: int):
    n = x0.size
    if n == 1:
        x = np.array([sys.coordinate(x0.copy(), 0)])
        return x, float(np.max(np.abs(sys.F(x))))
    x = x0.copy()
    best, best_res = x.copy(), math.inf
    sol = optimize.root(sys.F, x, method="hybr", options={"xtol": 1e-14})
    if np.all(np.isfinite(sol.x)):
        r = float(np.max(np.abs(sys.F(sol.x))))
        if r < best_res:
            best, best_res = sol.x.copy(), r
    if best_res < tol:
        return best, best_res
    # nonlinear Gauss-Seidel with damping, then a final polish
    x = best.copy() if math.isfinite(best_res) else x0.copy()
    for _ in range(max_iter):
        prev = x.copy()
        for i in range(n):
            x[i] = 0.5 * x[i] + 0.5 * sys.coordinate(x, i)
        if np.max(np.abs(x - prev)) < 1e-15:
            break
        r = float(np.max(np.abs(sys.F(x))))
        if r < 1e-6:
            sol = optimize.root(sys.F, x, method="hybr", options={"xtol": 1e-15})
            rs = float(np.max(np.abs(sys.F(sol.x))))
            if rs < r:
                x, r = sol.x, rs
        if r < best_res:
            best, best_res = x.copy(), r
        if best_res < tol:
            break
    return best, best_res


def het_residuals(eq: HetEquilibrium) -> tuple[np.ndarray, float]:
    """Quantile-equation residuals and the cutoff-condition slack.

    Recomputes each type's ``u`` from the quantiles alone, then returns
    ``E[e^{R_k/kappa} (F(T_k) - F(T_{k-1})) / u] - (r_k - r_{k-1})`` for
    ``k = 1..k0`` and the cutoff quantity ``E[e^{R_{k0+1}/kappa} (F(T) - F(T_k0)) / u]``.
    """
    mix, H = eq.mix, eq.reward
    a, a_inf = _scaled_levels(mix, H)
    y = mix.y0
    k0 = eq.k0
    Fs = [np.zeros(mix.n)] + [_fpt_cdf_vec(y, q) for q in eq.quantiles[:k0]]
    F_T = _fpt_cdf_vec(y, eq.T)
    u = np.zeros(mix.n)
    for k in range(k0):
        u += a[:, k] * (Fs[k + 1] - Fs[k])
    u += a[:, k0] * (F_T - Fs[k0])
    if math.isfinite(eq.T):
        u += a_inf * (1.0 - F_T)
    w = mix.weights
    e = H.edges
    res = np.array([np.dot(w, a[:, k] * (Fs[k + 1] - Fs[k]) / u) - (e[k + 1] - e[k])
                    for k in range(k0)])
    tail = float(np.dot(w, a[:, k0] * (F_T - Fs[k0]) / u)) if k0 < H.d else 0.0
    return res, tail


def _uncontrolled_guess(sys: _System) -> np.ndarray:
    """``ln u`` when everyone plays the uncontrolled first-passage law."""
    F_T = _fpt_cdf_vec(sys.y, sys.T)
    u = sys.a[:, 0] * F_T + (sys.a_inf * (1 - F_T) if math.isfinite(sys.T) else 0.0)
    return np.log(np.maximum(u, np.exp(sys.log_lo)))


def solve_het(mix: PopulationMix, reward: RankRewardStep, T: float, *, tol: float = 1e-12,
              max_iter: int = 500, restarts: int = 5, seed: int = 0) -> HetEquilibrium:
    """Equilibrium quantiles, per-type completion rates and values.

    Raises
    ------
    ConvergenceError
        If the consistency residual stays above ``1e-9``.
    """
    if not isinstance(reward, RankRewardStep) or reward.d < 1:
        raise ValueError("solve_het needs a step reward with at least one cut")
    if not T > 0:
        raise ValueError("T must be positive")
    d = reward.d
    kap = mix.kappa
    R1 = reward.levels[0]
    notes = []
    A_T = compute_A_T(mix, reward, T) if math.isfinite(T) else 1.0
    sys = _System(mix, reward, T)

    if math.isfinite(T) and A_T < reward.thresholds[0]:
        F_T = _fpt_cdf_vec(mix.y0, T)
        u = sys.a[:, 0] * F_T + sys.a_inf * (1 - F_T)
        bt = sys.a[:, 0] * F_T / u
        return HetEquilibrium(mix, reward, T, np.full(d, np.inf), 0, bt, kap * np.log(u) + R1,
                              np.log(u) + R1 / kap, A_T, 0.0, True, ("no cut reached",))

    x, res = _solve_outer(sys, _uncontrolled_guess(sys), tol, max_iter)
    if res > 1e-9:
        raise ConvergenceError(f"heterogeneous solver stalled at residual {res:.3g}", residual=res)

    # restarts from random normalizers; flag disagreement
    agree = True
    if mix.n > 1 and restarts:
        rng = np.random.default_rng(seed)
        for _ in range(restarts):
            start = sys.log_lo + rng.random(mix.n) * (0.0 - sys.log_lo)
            xr, rr = _solve_outer(sys, start, tol, max_iter)
            if rr < 1e-9 and np.max(np.abs(xr - x)) > 1e-6:
                agree = False
                notes.append(f"restart converged elsewhere: ln u = {xr.tolist()}")

    quant, k0, bt, _, _ = sys.sweep(x)
    quant = np.where(np.arange(d) < k0, quant, np.inf)
    eq = HetEquilibrium(mix, reward, T, quant, int(k0), bt, kap * x + R1, x + R1 / kap,
                        A_T, res, agree, tuple(notes))
    eqres, tail = het_residuals(eq)
    worst = float(np.max(np.abs(eqres))) if eqres.size else 0.0
    if worst > 1e-9:
        raise ConvergenceError(f"quantile equations violated by {worst:.3g}", residual=worst)
    if k0 < d:
        gap = reward.edges[k0 + 1] - reward.edges[k0]
        if not (-1e-9 <= tail < gap + 1e-9):
            raise ConvergenceError("cutoff condition fails for the selected k0", residual=tail)
        if tail >= gap - 1e-9:
            notes.append("cutoff condition holds only at its boundary")
            eq = HetEquilibrium(**{**eq.__dict__, "notes": tuple(notes)})
    return HetEquilibrium(**{**eq.__dict__, "residual": max(res, worst)})


def het_cdf(eq: HetEquilibrium, t, i: int | None = None):
    """Equilibrium completion-time c.d.f. of type ``i`` (or of the whole mix)."""
    a, _ = _scaled_levels(eq.mix, eq.reward)
    t = np.asarray(t, dtype=float)
    if math.isfinite(eq.T):
        t = np.minimum(t, eq.T)
    u = np.exp(eq.log_u - eq.reward.levels[0] / eq.mix.kappa)
    bounds = np.concatenate(([0.0], eq.quantiles[: eq.k0], [eq.T]))
    types = range(eq.mix.n) if i is None else [i]
    out = np.zeros(t.shape)
    for j in types:
        y = eq.mix.y0[j]
        Fj = np.zeros(t.shape)
        for k in range(eq.k0 + 1):
            lo, hi = bounds[k], bounds[k + 1]
            F_lo = _fpt_cdf_vec(np.array([y]), lo)[0] if lo > 0 else 0.0
            with np.errstate(divide="ignore"):
                F_hi = special.erfc(y / np.sqrt(2.0 * np.clip(t, lo, hi)))
            Fj += a[j, k] * np.maximum(F_hi - F_lo, 0.0)
        Fj /= u[j]
        out += (eq.mix.weights[j] if i is None else 1.0) * Fj
    return out if out.ndim else float(out)


def _type_schedule(eq: HetEquilibrium, i: int):
    """Time bounds and ``exp((R - R_1) / kappa_i)`` levels seen by type ``i``."""
    a, a_inf = _scaled_levels(eq.mix, eq.reward)
    k0 = eq.k0
    times = eq.quantiles[:k0]
    end = eq.T if math.isfinite(eq.T) else np.inf
    bounds = np.concatenate(([0.0], times, [end]))
    return bounds, a[i, : k0 + 1], float(a_inf[i]) if math.isfinite(eq.T) else 0.0


def _u_ux(eq: HetEquilibrium, i: int, t, x):
    if not 0 <= i < eq.mix.n:
        raise IndexError("type index out of range")
    bounds, elev, etail = _type_schedule(eq, i)
    t = np.asarray(t, dtype=float)
    if math.isfinite(eq.T) and np.any(t > eq.T):
        raise ValueError("t beyond the deadline")
    return kernels.sched_u_ux(t, x, eq.mix.sigma, bounds, elev, etail)


def het_u_field(eq: HetEquilibrium, i: int, t, x):
    """``u e^{-R_1 / kappa_i}`` for type ``i``."""
    u, _ = _u_ux(eq, i, t, x)
    return u if np.ndim(u) else float(u)


def het_value_field(eq: HetEquilibrium, i: int, t, x):
    """Value ``kappa_i ln u`` of a type-``i`` player at ``(t, x)``."""
    u, _ = _u_ux(eq, i, t, x)
    out = eq.reward.levels[0] + eq.mix.kappa[i] * np.log(u)
    return out if np.ndim(out) else float(out)


def het_effort_field(eq: HetEquilibrium, i: int, t, x):
    """Effort rate ``-sigma^2 u_x / u`` of type ``i``."""
    u, ux = _u_ux(eq, i, t, x)
    out = np.maximum(-eq.mix.sigma**2 * ux / u, 0.0)
    return out if np.ndim(out) else float(out)


def table2_mix(case: int) -> PopulationMix:
    """Population of a case in the heterogeneous numerical study (cases 0 to 10)."""
    if case == 0:
        return PopulationMix.single(1.0, 1.0)
    if case == 5:
        return PopulationMix.single(2.0, 1.0)
    if case == 10:
        return PopulationMix.single(1.0, 4.0)
    k = {1: 4, 2: 3, 3: 2, 4: 1, 6: 4, 7: 3, 8: 2, 9: 1}[case]
    other = (2.0, 1.0) if case < 5 else (1.0, 4.0)
    return PopulationMix(((1.0, 1.0, k / 5), (other[0], other[1], 1 - k / 5)))


def table2_reward(d: int = 400) -> RankRewardStep:
    """``15 (1 - r)^2`` as a ``d``-cell step reward (cell averages)."""
    e = np.linspace(0.0, 1.0, d + 1)
    # exact cell averages of 15(1-r)^2
    lv = 5.0 * ((1 - e[:-1]) ** 3 - (1 - e[1:]) ** 3) * d
    return RankRewardStep(e[1:-1], np.minimum.accumulate(lv), 0.0)


__all__ += ["table2_mix", "table2_reward"]
