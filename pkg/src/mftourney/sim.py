"""Monte Carlo N-player game under the mean-field feedback strategy.

Each player runs ``dX = -a(t, X) dt + sigma dB`` until absorption at 0, with
``a`` the mean-field equilibrium effort of its type, read from a tabulated
grid in ``(t, x)``. Rewards come from the empirical rank among the ``N``
players. Deviation gains use common random numbers: a deviating player
reuses its own noise, and since strategies are feedback in the player's own
state the other ``N - 1`` paths are unchanged, so every player's unilateral
deviation is evaluated from one extra set of paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import kernels
from .errors import ConfigError
from .fpt import fpt_cdf
from .het import HetEquilibrium, PopulationMix, het_cdf, het_effort_field
from .hom import HomEquilibrium, effort_grid
from .reward import eval_reward

__all__ = [
    "Deviation",
    "SimConfig",
    "SimReport",
    "GainEstimate",
    "DEFAULT_DEVIATIONS",
    "simulate_nplayer",
    "estimate_deviation_gain",
    "rate_regression",
]


@dataclass(frozen=True)
class Deviation:
    """Feedback strategy ``max(scale * a_eq(t, x) + const, 0)``."""

    name: str
    scale: float = 1.0
    const: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "Deviation":
        """``equilibrium``, ``zero``, ``scale:<l>`` or ``const:<a>``."""
        text = text.strip()
        if text == "equilibrium":
            return cls("equilibrium")
        if text == "zero":
            return cls("zero", 0.0, 0.0)
        kind, _, val = text.partition(":")
        try:
            v = float(val)
        except ValueError:
            raise ConfigError(f"bad deviation {text!r}") from None
        if kind == "scale":
            return cls(text, v, 0.0)
        if kind == "const":
            return cls(text, 0.0, v)
        raise ConfigError(f"bad deviation {text!r}")


DEFAULT_DEVIATIONS = (
    Deviation("zero", 0.0, 0.0),
    Deviation("scale:0.5", 0.5),
    Deviation("scale:0.9", 0.9),
    Deviation("scale:1.1", 1.1),
    Deviation("scale:1.5", 1.5),
)


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``dt`` defaults to ``T / 800``; ``nx`` is the effort-table resolution in
    space and ``effort`` forces ``"zero"`` effort for validation runs.
    """

    N: int = 1024
    dt: float | None = None
    seed: int = 0
    replications: int = 8
    deviations: tuple = DEFAULT_DEVIATIONS
    bridge: bool = True
    effort: str = "equilibrium"
    nx: int = 801
    smooth_cells: int = 400

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError("N must be at least 2")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.effort not in ("equilibrium", "zero"):
            raise ConfigError("effort must be 'equilibrium' or 'zero'")


@dataclass(frozen=True)
class GainEstimate:
    """Batch-mean estimate of a deviation gain."""

    name: str
    mean: float
    half_width: float
    upper99: float
    significant_positive: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SimReport:
    """Outcome of :func:`simulate_nplayer`."""

    N: int
    replications: int
    dt: float
    completion_rate: float
    completion_se: float
    mean_payoff: float
    payoff_half_width: float
    payoff_by_type: list
    mean_field_value: list
    mean_field_rate: float
    ecdf_times: np.ndarray
    ecdf: np.ndarray
    ks_distance: float
    gains: list
    max_gain: GainEstimate | None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "replications": self.replications,
            "dt": self.dt,
            "completion_rate": self.completion_rate,
            "completion_se": self.completion_se,
            "mean_payoff": self.mean_payoff,
            "payoff_half_width": self.payoff_half_width,
            "payoff_by_type": self.payoff_by_type,
            "mean_field_value": self.mean_field_value,
            "mean_field_rate": self.mean_field_rate,
            "ecdf": {"t": self.ecdf_times.tolist(), "F": self.ecdf.tolist()},
            "ks_distance": self.ks_distance,
            "deviation_gains": [g.to_dict() for g in self.gains],
            "max_gain": None if self.max_gain is None else self.max_gain.to_dict(),
            "metadata": self.metadata,
        }


# --------------------------------------------------------------------------
# game adapters
# --------------------------------------------------------------------------

class _Game:
    """Uniform view of a homogeneous or heterogeneous equilibrium."""

    def __init__(self, eq, mix: PopulationMix | None):
        self.eq = eq
        if isinstance(eq, HomEquilibrium):
            p = eq.params
            self.mix = mix or PopulationMix.single(p.x0, p.c, p.sigma)
            if self.mix.n != 1 or abs(self.mix.x0[0] - p.x0) > 0 or abs(self.mix.c[0] - p.c) > 0:
                raise ConfigError("mix does not match the homogeneous equilibrium")
            self.T, self.sigma, self.R_inf = p.T, p.sigma, p.R_inf
            self.reward = eq.reward
            self.values = [eq.value]
            self.rate = eq.beta
        elif isinstance(eq, HetEquilibrium):
            self.mix = eq.mix
            self.T, self.sigma, self.R_inf = eq.T, eq.mix.sigma, eq.reward.floor
            self.reward = eq.reward
            self.values = eq.values.tolist()
            self.rate = eq.beta
        else:
            raise TypeError("unsupported equilibrium type")
        if not math.isfinite(self.T):
            raise ConfigError("simulation needs a finite deadline")

    def cdf(self, t):
        if isinstance(self.eq, HomEquilibrium):
            return self.eq.cdf(t)
        return het_cdf(self.eq, t)

    def effort_table(self, times, xs, cells: int):
        """``(types, len(times), len(xs))`` effort values."""
        tt, xx = np.meshgrid(times, xs, indexing="ij")
        out = np.empty((self.mix.n, times.size, xs.size))
        eq = self.eq
        if isinstance(eq, HetEquilibrium):
            for i in range(self.mix.n):
                out[i] = het_effort_field(eq, i, tt, xx)
        else:
            out[0] = effort_grid(eq, tt, xx, d=cells)
        return out

    def pay(self, ranks, finished):
        got = np.asarray(eval_reward(self.reward, np.clip(ranks, 0.0, 1.0)), dtype=float)
        return np.where(finished, got, self.R_inf)


def _assign_types(weights: np.ndarray, N: int) -> np.ndarray:
    """Largest-remainder allocation of ``N`` players to types."""
    raw = weights * N
    cnt = np.floor(raw).astype(int)
    rem = N - cnt.sum()
    order = np.argsort(-(raw - cnt), kind="stable")
    cnt[order[:rem]] += 1
    return np.repeat(np.arange(weights.size), cnt)


def _rng(seed: int, rep: int, N: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, rep, N])))


class _Setup:
    def __init__(self, game: _Game, cfg: SimConfig):
        self.game, self.cfg = game, cfg
        T = game.T
        self.dt = cfg.dt if cfg.dt is not None else T / 800
        self.steps = int(math.ceil(T / self.dt - 1e-12))
        self.dt = T / self.steps
        mix = game.mix
        self.ptype = _assign_types(mix.weights, cfg.N)
        self.x0 = mix.x0[self.ptype]
        self.cost = mix.c[self.ptype]
        self.xmax = float(mix.x0.max() + 8 * mix.sigma * math.sqrt(T))
        self.times = np.arange(self.steps) * self.dt
        xs = np.linspace(0.0, self.xmax, cfg.nx)
        if cfg.effort == "zero":
            self.table = np.zeros((mix.n, self.steps, cfg.nx))
        else:
            self.table = game.effort_table(self.times, xs, cfg.smooth_cells)
        a0 = np.array([np.interp(x, xs, self.table[i, 0]) for i, x in enumerate(mix.x0)])
        if np.any(a0 * self.dt > mix.x0 / 10):
            raise ConfigError("dt too large: effort * dt exceeds x0 / 10 at the start")

    def paths(self, normals, uniforms, scale=1.0, const=0.0):
        tau, cost = kernels.simulate_paths(self.x0, self.ptype, self.cost, self.table, self.xmax,
                                           self.dt, self.game.sigma, scale, const, normals,
                                           uniforms, self.cfg.bridge)
        return tau, cost

    def noise(self, rep: int):
        g = _rng(self.cfg.seed, rep, self.cfg.N)
        return (g.standard_normal((self.cfg.N, self.steps)),
                g.random((self.cfg.N, self.steps)))


def _ranks(tau: np.ndarray) -> np.ndarray:
    """Empirical rank ``k / N`` of each finished player, ties by index."""
    N = tau.size
    order = np.argsort(tau, kind="stable")
    r = np.empty(N)
    r[order] = (np.arange(N) + 1) / N
    return r


def _deviant_ranks(tau: np.ndarray, tau_dev: np.ndarray) -> np.ndarray:
    """Rank of each player's deviating time against the other players' times.

    Ties are broken by player index as in :func:`_ranks`, so a player whose
    deviation reproduces its own time keeps its own rank.
    """
    N = tau.size
    order = np.argsort(tau, kind="stable")
    srt = tau[order]
    lo = np.searchsorted(srt, tau_dev, side="left")
    hi = np.searchsorted(srt, tau_dev, side="right")
    # sorted key (first position of the tie block, index) counts lower-index ties
    block = np.searchsorted(srt, srt, side="left")
    key = block * N + order
    ties = np.where(hi > lo, np.searchsorted(key, lo * N + np.arange(N), side="left") - lo, 0)
    below = lo + ties - (tau < tau_dev)
    return (below + 1) / N


def _batch(x: np.ndarray, level: float = 0.95):
    """Batch mean, half-width and one-sided 99% upper bound."""
    R = x.size
    m = float(x.mean())
    if R < 2:
        return m, math.inf, math.inf
    se = float(x.std(ddof=1)) / math.sqrt(R)
    hw = float(stats.t.ppf(0.5 + level / 2, R - 1)) * se
    up = m + float(stats.t.ppf(0.99, R - 1)) * se
    return m, hw, up


def _gain_estimate(name, per_rep):
    m, hw, up = _batch(np.asarray(per_rep))
    lo99 = m - (up - m)
    return GainEstimate(name, m, hw, up, bool(lo99 > 0))


def simulate_nplayer(mix: PopulationMix | None, eq, cfg: SimConfig,
                     ecdf_points: int = 101) -> SimReport:
    """Simulate the ``N``-player game ``cfg.replications`` times."""
    game = _Game(eq, mix)
    st = _Setup(game, cfg)
    T, N = game.T, cfg.N
    tgrid = np.linspace(0.0, T, ecdf_points)
    rate, pay, ecdfs = [], [], []
    pay_type = [[] for _ in range(game.mix.n)]
    gains = {d.name: [] for d in cfg.deviations}
    for rep in range(cfg.replications):
        normals, uniforms = st.noise(rep)
        tau, cost = st.paths(normals, uniforms)
        fin = tau <= T
        J = game.pay(_ranks(tau), fin) - cost
        rate.append(fin.mean())
        pay.append(J.mean())
        for i in range(game.mix.n):
            pay_type[i].append(J[st.ptype == i].mean())
        ecdfs.append(np.searchsorted(np.sort(tau), tgrid, side="right") / N)
        for d in cfg.deviations:
            tau_d, cost_d = st.paths(normals, uniforms, d.scale, d.const)
            Jd = game.pay(_deviant_ranks(tau, tau_d), tau_d <= T) - cost_d
            gains[d.name].append(float((Jd - J).mean()))
    rate = np.asarray(rate)
    pm, phw, _ = _batch(np.asarray(pay))
    ecdf = np.mean(ecdfs, axis=0)
    ks = float(np.max(np.abs(ecdf - np.asarray(game.cdf(tgrid)))))
    ests = [_gain_estimate(k, v) for k, v in gains.items()]
    best = max(ests, key=lambda g: g.mean) if ests else None
    meta = {
        "steps": st.steps,
        "bridge": cfg.bridge,
        "effort": cfg.effort,
        "seed": cfg.seed,
        "backend": kernels.BACKEND,
        "nx": cfg.nx,
        "uncontrolled_rate": float(np.dot(game.mix.weights,
                                          [fpt_cdf(y, T) for y in game.mix.y0])),
    }
    se_rate = float(rate.std(ddof=1) / math.sqrt(rate.size)) if rate.size > 1 else math.nan
    return SimReport(N, cfg.replications, st.dt, float(rate.mean()), se_rate, pm, phw,
                     [float(np.mean(v)) for v in pay_type], list(game.values), game.rate,
                     tgrid, ecdf, ks, ests, best, meta)


def estimate_deviation_gain(mix: PopulationMix | None, eq, cfg: SimConfig, player: int | None,
                            deviation: Deviation) -> GainEstimate:
    """Common-random-numbers estimate of ``J^{N, dev}_i - J^N_i``.

    ``player=None`` averages the unilateral gain over all players, each
    deviating alone against the unchanged others.
    """
    game = _Game(eq, mix)
    st = _Setup(game, cfg)
    if player is not None and not 0 <= player < cfg.N:
        raise ConfigError("player index out of range")
    T = game.T
    per_rep = []
    for rep in range(cfg.replications):
        normals, uniforms = st.noise(rep)
        tau, cost = st.paths(normals, uniforms)
        J = game.pay(_ranks(tau), tau <= T) - cost
        tau_d, cost_d = st.paths(normals, uniforms, deviation.scale, deviation.const)
        Jd = game.pay(_deviant_ranks(tau, tau_d), tau_d <= T) - cost_d
        diff = Jd - J
        per_rep.append(float(diff.mean() if player is None else diff[player]))
    return _gain_estimate(deviation.name, per_rep)


def rate_regression(Ns: Sequence[int], gains: Sequence[float]):
    """Least-squares slope and intercept of ``log gain`` on ``log N``.

    Non-positive gains have no logarithm; the fit then returns ``nan``.
    """
    g = np.asarray(gains, dtype=float)
    n = np.asarray(Ns, dtype=float)
    if np.any(g <= 0):
        return math.nan, math.nan
    slope, icpt = np.polyfit(np.log(n), np.log(g), 1)
    return float(slope), float(icpt)
