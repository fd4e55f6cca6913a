import math

import numpy as np
import pytest

from mftourney.design import (ProfitFunction, TargetDistribution, lemma61_optimum,
                              max_completion_rate, max_net_profit, max_welfare_reward,
                              min_budget, min_quantile_reward, net_profit_bruteforce,
                              reward_from_distribution_fin, reward_from_distribution_inf,
                              uniform_scheme, uniform_scheme_cdf)
from mftourney.errors import NotRealizableError
from mftourney.fpt import fpt_cdf, fpt_pdf, fpt_quantile, fpt_sf
from mftourney.hom import quantile, solve_hom
from mftourney.reward import DELTA, ModelParams, RankRewardStep, smooth_from_function

OPEN = ModelParams(T=math.inf)


def _budget_ok(H, K):
    assert H.budget() <= K + 1e-10
    assert np.all(np.diff(H(np.linspace(0, 1, 1001))) <= 1e-12)


def _random_scheme(rng, K, R_inf=0.0, d_max=4):
    """Random decreasing step reward spending exactly ``K``."""
    d = int(rng.integers(1, d_max + 1))
    th = np.sort(rng.uniform(0.02, 0.98, d))
    lv = np.sort(rng.exponential(1.0, d + 1))[::-1]
    H = RankRewardStep(th, lv, 0.0)
    return RankRewardStep(th, R_inf + lv * (K - R_inf) / H.budget(), R_inf)


# ---------------------------------------------------------------- reverse engineering

def test_uncontrolled_law_needs_no_incentive():
    t = np.geomspace(0.05, 500, 2000)
    mu = TargetDistribution.from_functions(lambda s: fpt_pdf(4.0, s), lambda s: fpt_cdf(4.0, s), t)
    out = reward_from_distribution_inf(mu, OPEN)
    assert np.allclose(out.raw, 0.0, atol=1e-12)
    assert np.allclose(out.reward.values, 0.0, atol=1e-12)


def test_round_trip_open_ended():
    H = smooth_from_function(lambda r: 3 * (1 - r) ** 1.5 + 1 - r, m=2001)
    eq = solve_hom(OPEN, H)
    # sample at the reward's rank knots so the profile is recovered exactly
    t = np.asarray(quantile(eq, np.clip(H.grid, 1e-9, 1 - 1e-9)))
    mu = TargetDistribution.from_functions(eq.pdf, eq.cdf, t)
    out = reward_from_distribution_inf(mu, OPEN)
    # kappa ln zeta = H(F(t)) - V
    assert np.max(np.abs(out.raw - (H(mu.cdf) - eq.value))) < 1e-6
    # the shifted reward reproduces the law
    eq2 = solve_hom(OPEN, out.reward)
    r = np.linspace(0.01, 0.99, 50)
    assert np.max(np.abs(quantile(eq2, r) - quantile(eq, r))) < 1e-6
    assert out.within_budget(H.budget())


def test_round_trip_deadline():
    p = ModelParams(T=1.0)
    H = smooth_from_function(lambda r: 6 * (1 - r) ** 2, m=4001)
    eq = solve_hom(p, H)
    t = np.linspace(0.05, 1.0, 1500)
    mu = TargetDistribution.from_functions(eq.pdf, eq.cdf, t, T=1.0)
    out = reward_from_distribution_fin(mu, p)
    assert np.max(np.abs(out.raw - H(mu.cdf))) < 1e-6
    eq2 = solve_hom(p, out.reward)
    assert eq2.beta == pytest.approx(eq.beta, abs=1e-6)
    r = np.linspace(0.01, 0.6, 40)
    assert np.max(np.abs(quantile(eq2, r) - quantile(eq, r))) < 1e-6


def test_truncated_uncontrolled_law():
    p = ModelParams(T=2.0, R_inf=0.5)
    t = np.linspace(0.05, 2.0, 500)
    mu = TargetDistribution.from_functions(lambda s: fpt_pdf(4.0, s), lambda s: fpt_cdf(4.0, s),
                                           t, T=2.0)
    out = reward_from_distribution_fin(mu, p)
    assert np.allclose(out.raw, 0.5, atol=1e-10)


def test_non_monotone_zeta_rejected():
    t = np.geomspace(0.05, 100, 800)
    bump = 1 + 0.5 * np.exp(-((t - 5.0) ** 2))
    f = fpt_pdf(4.0, t) * bump
    with pytest.raises(NotRealizableError):
        reward_from_distribution_inf(TargetDistribution(t, f / np.trapezoid(f, t)), OPEN)


def test_deadline_zeta_below_delta_rejected():
    p = ModelParams(T=1.0)
    t = np.linspace(0.05, 1.0, 300)
    # a law finishing less than the uncontrolled one has zeta < delta
    f = 0.5 * fpt_pdf(4.0, t)
    with pytest.raises(NotRealizableError):
        reward_from_distribution_fin(TargetDistribution(t, f, 0.5 * fpt_cdf(4.0, t), T=1.0), p)


# ---------------------------------------------------------------- quantile design

def test_zero_budget_quantile():
    sol = min_quantile_reward(OPEN, 0.0, 0.5)
    assert sol.objective == pytest.approx(fpt_quantile(4.0, 0.5), rel=1e-12)
    assert np.allclose(sol.reward.levels, 0.0)


def test_quantile_formula_example():
    sol = min_quantile_reward(OPEN, 1.0, 0.5)
    want = fpt_quantile(4.0, 0.5 / (0.5 + 0.5 * math.exp(16.0)))
    assert sol.objective == pytest.approx(want, rel=1e-12)
    _budget_ok(sol.reward, 1.0)
    # the uniform scheme realizes the stated optimum
    assert quantile(solve_hom(OPEN, sol.reward), 0.5) == pytest.approx(want, rel=1e-8)


def test_quantile_optimality_random_schemes():
    rng = np.random.default_rng(1)
    K, alpha = 1.0, 0.5
    best = min_quantile_reward(OPEN, K, alpha).objective
    for _ in range(200):
        H = _random_scheme(rng, K)
        assert quantile(solve_hom(OPEN, H), alpha) >= best * (1 - 1e-9)


def test_uniform_scheme_cdf_matches_solver():
    K, alpha = 1.0, 0.4
    eq = solve_hom(OPEN, uniform_scheme(OPEN, K, alpha))
    t = np.geomspace(1e-3, 50, 300)
    assert np.max(np.abs(eq.cdf(t) - uniform_scheme_cdf(OPEN, K, alpha, t))) < 1e-10


def test_quantile_infeasible_deadline():
    sol = min_quantile_reward(ModelParams(T=0.05), 1.0, 0.9)
    assert sol.objective is DELTA
    assert not sol.auxiliary["feasible"]


def test_domain_errors():
    with pytest.raises(ValueError):
        min_quantile_reward(OPEN, 1.0, 1.0)
    with pytest.raises(ValueError):
        min_quantile_reward(OPEN.replace(R_inf=2.0), 1.0, 0.5)


# ---------------------------------------------------------------- budget and rate

def test_min_budget_at_uncontrolled_rate():
    p = ModelParams(T=1.0, R_inf=0.3)
    F = fpt_cdf(4.0, 1.0)
    assert min_budget(p, F) == pytest.approx(0.3, abs=1e-12)
    assert min_budget(p, 1 - 1e-12) > min_budget(p, 0.99) > min_budget(p, 0.9)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_min_budget_inverts_quantile(alpha):
    p = ModelParams(T=1.0)
    K = min_budget(p, alpha)
    assert min_quantile_reward(p, K, alpha).auxiliary["T_star"] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("K", [0.0, 0.1, 1.0, 2.0])
def test_max_rate_inverts_min_budget(K):
    p = ModelParams(T=1.0)
    a = max_completion_rate(p, K)
    if K == 0.0:
        assert a == pytest.approx(fpt_cdf(4.0, 1.0), rel=1e-9)
    else:
        assert min_budget(p, a) == pytest.approx(K, abs=1e-8)


def test_max_rate_newton_oracle():
    # Newton on ln(a / (1 - a)) - g / a = ln C_T, independent of the bisection
    p = ModelParams(T=2.0)
    F, S = fpt_cdf(4.0, 2.0), fpt_sf(4.0, 2.0)
    for K in (0.2, 1.0, 3.0):
        g = K / p.kappa
        a = 0.5
        for _ in range(200):
            h = math.log(a / (1 - a)) - g / a - math.log(F / S)
            dh = 1 / a + 1 / (1 - a) + g / a**2
            a = min(max(a - h / dh, 1e-300), 1 - 1e-16)
        assert max_completion_rate(p, K) == pytest.approx(a, abs=1e-10)


def test_max_rate_increasing_in_budget():
    p = ModelParams(T=1.0)
    rates = np.array([max_completion_rate(p, K) for K in np.linspace(0, 6, 25)])
    assert np.all(np.diff(rates) >= 0)
    # strictly increasing until the rate is 1 to double precision
    below = rates < 1 - 1e-12
    assert np.all(np.diff(rates[below]) > 0)


# ---------------------------------------------------------------- welfare

def test_open_ended_welfare_is_budget():
    sol = max_welfare_reward(OPEN, 2.0)
    assert sol.objective == 2.0
    assert solve_hom(OPEN, sol.reward).value == pytest.approx(2.0, abs=1e-14)


def test_deadline_welfare_zero_budget():
    p = ModelParams(T=1.0, R_inf=0.2)
    assert max_welfare_reward(p, 0.2).objective == pytest.approx(0.2, abs=1e-12)


def test_welfare_optimality_random_schemes():
    rng = np.random.default_rng(2)
    p = ModelParams(T=1.0)
    K = 1.0
    sol = max_welfare_reward(p, K)
    _budget_ok(sol.reward, K)
    assert solve_hom(p, sol.reward).value == pytest.approx(sol.objective, abs=1e-9)
    for _ in range(200):
        assert solve_hom(p, _random_scheme(rng, K)).value <= sol.objective + 1e-9


# ---------------------------------------------------------------- lemma

def test_lemma61_limits():
    kap = 2 * 1.0 * 0.25**2
    h, J = lemma61_optimum(0.5, 0.3, 0.3, 1.0, 0.25)
    assert h == pytest.approx(math.exp(-0.3 / kap))
    h, J = lemma61_optimum(1.0, 0.7, 0.0, 1.0, 0.25)
    assert h == pytest.approx(math.exp(-0.7 / kap))
    assert J == pytest.approx(h)


def test_lemma61_beats_random_feasible():
    rng = np.random.default_rng(3)
    alpha, K, R_inf, c, sigma = 0.6, 0.4, 0.1, 1.0, 0.5
    kap = 2 * c * sigma**2
    h_star, J_star = lemma61_optimum(alpha, K, R_inf, c, sigma)
    cap = -R_inf / kap
    budget = (K - R_inf * (1 - alpha)) / kap
    found = 0
    while found < 500:
        lh = np.sort(rng.uniform(cap - 4 * rng.random() * budget / alpha - 1e-3, cap, 100))
        if alpha * np.mean(-lh) > budget:
            continue
        found += 1
        assert alpha * np.mean(np.exp(lh)) >= J_star * (1 - 1e-12)


# ---------------------------------------------------------------- net profit

def test_profit_open_ended_limit():
    g = ProfitFunction.from_callable(lambda t: np.exp(-t), 60.0)
    sol = max_net_profit(ModelParams(T=math.inf, sigma=1.0), g)
    # never paying a bonus earns g(inf) - R_inf, which the optimum beats
    assert sol.objective > g.g_inf
    assert sol.auxiliary["t_b"] == pytest.approx(sol.auxiliary["z_star"], rel=1e-9)


def test_profit_against_bruteforce():
    p = ModelParams(T=math.inf, sigma=1.0)
    g = ProfitFunction.from_callable(lambda t: np.exp(-t), 60.0)
    sol = max_net_profit(p, g)
    b, U = net_profit_bruteforce(p, g)
    assert sol.objective == pytest.approx(U, abs=1e-6)
    assert sol.auxiliary["b"] == pytest.approx(b, abs=1e-3)


def test_profit_reward_reproduces_density():
    p = ModelParams(T=math.inf, sigma=1.0)
    g = ProfitFunction.from_callable(lambda t: 2 * np.exp(-t), 60.0)
    sol = max_net_profit(p, g)
    _budget_ok(sol.reward, sol.reward.budget())
    eq = solve_hom(p, sol.reward)
    t = np.geomspace(0.05, 0.9 * sol.auxiliary["t_b"], 60)
    assert np.max(np.abs(eq.pdf(t) - sol.auxiliary["density"](t))) < 1e-4


def test_profit_rejects_deadline_and_bad_g():
    with pytest.raises(ValueError):
        max_net_profit(ModelParams(T=1.0), lambda t: np.exp(-t))
    with pytest.raises(ValueError):
        ProfitFunction([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        ProfitFunction([0.0, 1.0], [1.0, 1.0])
