import math

import numpy as np
import pytest

from mftourney.fpt import fpt_pdf, fpt_sf
from mftourney.hom import quantile, solve_hom
from mftourney.reward import ModelParams, RankRewardStep, smooth_from_function


@pytest.fixture
def bench():
    """Benchmark homogeneous game: x0=1, sigma=0.25, c=1, T=1, R_inf=0."""
    return ModelParams(x0=1.0, sigma=0.25, c=1.0, T=1.0, R_inf=0.0)


@pytest.fixture
def quad6():
    """``6 (1 - r)^2`` on a fine linear grid."""
    return smooth_from_function(lambda r: 6.0 * (1.0 - r) ** 2, m=4001)


def random_step_reward(rng, d_max=6, top=5.0):
    d = int(rng.integers(1, d_max + 1))
    th = np.sort(rng.uniform(0.02, 0.98, d))
    while np.any(np.diff(th) < 1e-3):
        th = np.sort(rng.uniform(0.02, 0.98, d))
    lv = np.sort(rng.uniform(0.0, top, d + 1))[::-1]
    return RankRewardStep(th, lv, 0.0)


def fixed_point_gap(params, H, n=1000):
    """Max gap between the equilibrium c.d.f. and the best response to it.

    The best response to ``mu`` has density ``f° exp(R_mu / kappa) / u0``.
    Its c.d.f. is re-integrated with 20-point Gauss-Legendre on every
    segment between grid points and reward jumps, where the integrand is smooth.
    """
    eq = solve_hom(params, H)
    kap, T, y = params.kappa, params.T, params.y0
    grid = np.linspace(0.0, T, n + 1)[1:]
    jumps = np.empty(0)
    if isinstance(H, RankRewardStep):
        jumps = np.asarray(quantile(eq, H.thresholds[H.thresholds < eq.beta]), dtype=float)
    knots = np.union1d(np.concatenate(([0.0], grid)), jumps)
    xg, wg = np.polynomial.legendre.leggauss(20)
    a, b = knots[:-1], knots[1:]
    s = 0.5 * (b - a)[:, None] * xg[None, :] + 0.5 * (a + b)[:, None]
    R = np.asarray(eq.reward_at_time(s.ravel())).reshape(s.shape)
    seg = 0.5 * (b - a) * np.sum(wg * fpt_pdf(y, s) * np.exp(R / kap), axis=1)
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    u0 = cum[-1] + fpt_sf(y, T) * math.exp(params.R_inf / kap)
    best = np.interp(grid, knots, cum / u0)
    return float(np.max(np.abs(best - eq.cdf(grid))))


# acceptance outcomes, filled by test_acceptance.py and echoed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
