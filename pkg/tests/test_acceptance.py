"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The lines are printed inline and repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy import special

from conftest import ACCEPTANCE, fixed_point_gap, random_step_reward
from mftourney.design import (TargetDistribution, lemma61_optimum, max_completion_rate,
                              max_welfare_reward, min_budget, min_quantile_reward,
                              reward_from_distribution_fin, reward_from_distribution_inf)
from mftourney.fpt import fpt_cdf
from mftourney.golden import FIG5_THRESHOLDS, TABLE1, TABLE2, TOL
from mftourney.het import solve_het, table2_mix, table2_reward
from mftourney.hom import quantile, solve_hom, u_field
from mftourney.pie import (additive_pie, bifurcation_scan, contribution_competition_family,
                           enumerate_pie_equilibria, pie_critical_thresholds)
from mftourney.reward import (DELTA, ModelParams, RankRewardStep, constant_reward,
                              smooth_from_function)
from mftourney.sim import SimConfig, rate_regression, simulate_nplayer

BENCH = ModelParams(x0=1.0, sigma=0.25, c=1.0, T=1.0, R_inf=0.0)


def _record(n, ok, detail, capsys):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def _close(got, want, tol):
    if want is None:
        return got is None or got is DELTA
    return got is not None and got is not DELTA and abs(float(got) - want) <= tol


def test_criterion_1_table1(capsys):
    t0 = time.perf_counter()
    H = smooth_from_function(lambda r: 6 * (1 - r) ** 2, m=4001)
    bad = []
    for T, (q1, q2, q3, b, v) in TABLE1.items():
        eq = solve_hom(BENCH.replace(T=T), H)
        qs = [quantile(eq, r) for r in (0.25, 0.5, 0.75)]
        for name, got, want in zip(("q1", "q2", "q3"), qs, (q1, q2, q3)):
            if not _close(got, want, TOL["table1_quantile"]):
                bad.append(f"T={T:g} {name}={got}")
        if not _close(eq.beta, b, TOL["table1_beta"]):
            bad.append(f"T={T:g} beta={eq.beta:.4f}")
        if not _close(eq.value, v, TOL["table1_value"]):
            bad.append(f"T={T:g} V={eq.value:.4f}")
    dt = time.perf_counter() - t0
    ok = not bad and dt < 1.0
    _record(1, ok, f"Table 1, {len(TABLE1)} deadlines, {dt:.2f} s; misses: {bad or 'none'}", capsys)


def test_criterion_2_table2(capsys):
    t0 = time.perf_counter()
    bad = []
    H = table2_reward(400)
    for case, (b, b_ad, b_da, v_ad, v_da, w) in TABLE2.items():
        mix = table2_mix(case)
        eq = solve_het(mix, H, 1.0)
        adv = [i for i, a in enumerate(mix.atoms) if a[:2] == (1.0, 1.0)]
        dis = [i for i, a in enumerate(mix.atoms) if a[:2] != (1.0, 1.0)]
        got = {
            "beta": (eq.beta, b, TOL["table2_beta"]),
            "beta_AD": (eq.beta_type[adv[0]] if adv else None, b_ad, TOL["table2_beta"]),
            "beta_DA": (eq.beta_type[dis[0]] if dis else None, b_da, TOL["table2_beta"]),
            "V_AD": (eq.values[adv[0]] if adv else None, v_ad, TOL["table2_value"]),
            "V_DA": (eq.values[dis[0]] if dis else None, v_da, TOL["table2_value"]),
            "welfare": (eq.welfare, w, TOL["table2_value"]),
        }
        bad += [f"case {case} {k}={g}" for k, (g, want, tol) in got.items()
                if not _close(g, want, tol)]
        if mix.n == 1:
            x0, c, _ = mix.atoms[0]
            heq = solve_hom(ModelParams(x0=x0, sigma=0.25, c=c, T=1.0),
                            smooth_from_function(lambda r: 15 * (1 - r) ** 2, m=4001))
            if not _close(heq.beta, b, TOL["table1_beta"]):
                bad.append(f"case {case} closed-form beta={heq.beta:.4f}")
            if not _close(heq.value, w, TOL["table1_value"]):
                bad.append(f"case {case} closed-form V={heq.value:.4f}")
    dt = time.perf_counter() - t0
    ok = not bad and dt < 120.0
    _record(2, ok, f"Table 2, 11 cases at d=400 plus closed form for 0/5/10, {dt:.1f} s; "
                   f"misses: {bad or 'none'}", capsys)


def _params_at(F):
    """Benchmark parameters with the deadline set so that ``F_tau°(T) = F``."""
    return BENCH.replace(T=16.0 / (2 * special.erfcinv(F) ** 2))


def test_criterion_3_fig5_thresholds(capsys):
    th = pie_critical_thresholds(ModelParams(), additive_pie(), lo=1e-4, hi=0.3, n_scan=200)
    ok = len(th) == 2 and all(abs(a - b) <= TOL["fig5_threshold"]
                              for a, b in zip(th, FIG5_THRESHOLDS))
    probes = (th[0] / 2, math.sqrt(th[0] * th[1]), 2 * th[1]) if len(th) == 2 else ()
    counts = [enumerate_pie_equilibria(_params_at(F), additive_pie()).count for F in probes]
    ok = ok and counts == [1, 3, 1]
    _record(3, ok, f"thresholds {[round(float(t), 5) for t in th]} vs {list(FIG5_THRESHOLDS)}; "
                   f"root counts {counts}", capsys)


def test_criterion_4_fig6(capsys):
    eps = np.linspace(0.0, 1.0, 201)
    multi = {}
    for K in (0.5, 1.5, 3.0):
        tab = bifurcation_scan(ModelParams(), contribution_competition_family(K), eps, n_grid=2000)
        multi[K] = tab.multivalued_intervals()
    ok = bool(multi[1.5]) and not multi[0.5] and not multi[3.0]
    _record(4, ok, f"multi-valued eps-intervals: {multi}", capsys)


def test_criterion_5_design(capsys):
    p_open, p = ModelParams(T=math.inf), ModelParams(T=1.0)
    errs = {}
    sol = max_welfare_reward(p_open, 2.0)
    flat = isinstance(sol.reward, RankRewardStep) and np.all(sol.reward.levels == 2.0)
    welfare_ok = sol.objective == 2.0 and flat
    errs["budget(rate(K))"] = max(abs(min_budget(p, max_completion_rate(p, K)) - K)
                                  for K in (0.1, 0.5, 1.0, 2.0))
    errs["quantile(budget(a))"] = max(
        abs(min_quantile_reward(p, min_budget(p, a), a).auxiliary["T_star"] - p.T)
        for a in (0.1, 0.5, 0.9))
    rng = np.random.default_rng(3)
    alpha, K, R_inf, c, sigma = 0.6, 0.4, 0.1, 1.0, 0.5
    kap = 2 * c * sigma**2
    _, J_star = lemma61_optimum(alpha, K, R_inf, c, sigma)
    cap, budget = -R_inf / kap, (K - R_inf * (1 - alpha)) / kap
    beaten, found = 0, 0
    while found < 500:
        lh = rng.uniform(cap - 4 * rng.random() * budget / alpha - 1e-3, cap, 100)
        if alpha * np.mean(-lh) > budget:
            continue
        found += 1
        beaten += alpha * np.mean(np.exp(lh)) < J_star * (1 - 1e-12)
    ok = welfare_ok and max(errs.values()) < 1e-8 and beaten == 0
    _record(5, ok, f"open-ended welfare == K: {welfare_ok}; inversion errors "
                   f"{ {k: f'{v:.1e}' for k, v in errs.items()} }; "
                   f"lemma61 optimum counterexamples {beaten}/500", capsys)


def test_criterion_6_properties(capsys):
    rng = np.random.default_rng(7)
    fp = max(fixed_point_gap(BENCH.replace(T=float(rng.choice([0.5, 1.0, 3.0]))),
                             random_step_reward(rng)) for _ in range(20))

    eq = solve_hom(BENCH, RankRewardStep([0.2, 0.5], [3.0, 1.0, 0.5]))
    res = []
    for h in (4e-3, 2e-3):
        t, x = 0.4, 0.5
        ut = (u_field(eq, t + h, x) - u_field(eq, t - h, x)) / (2 * h)
        uxx = (u_field(eq, t, x + h) - 2 * u_field(eq, t, x) + u_field(eq, t, x - h)) / h**2
        res.append(abs(ut + 0.5 * BENCH.sigma**2 * uxx) / u_field(eq, t, x))
    heat_ok = 3.5 < res[0] / res[1] < 4.5

    H = smooth_from_function(lambda r: 6 * (1 - r) ** 2, m=4001)
    b_T = [solve_hom(BENCH.replace(T=T), H).beta for T in (0.25, 0.5, 1, 2, 5, 10)]
    b_x = [solve_hom(BENCH.replace(x0=x), H).beta for x in (0.5, 0.8, 1.0, 1.2, 1.5)]
    b_c = [solve_hom(BENCH.replace(c=c), H).beta for c in (1e-6, 0.25, 1, 4, 1e4)]
    v_c = [solve_hom(BENCH.replace(T=math.inf, c=c), H).value for c in (1e-3, 0.1, 1, 100, 1e5)]
    mono_ok = (np.all(np.diff(b_T) > 0) and np.all(np.diff(b_x) < 0)
               and np.all(np.diff(b_c) < 0) and np.all(np.diff(v_c) > 0))
    lim = max(abs(b_c[0] - 1.0), abs(b_c[-1] - fpt_cdf(BENCH.y0, 1.0)),
              abs(v_c[0]), abs(v_c[-1] - 2.0))

    p_open = ModelParams(T=math.inf)
    H2 = smooth_from_function(lambda r: 3 * (1 - r) ** 1.5 + 1 - r, m=2001)
    e_open = solve_hom(p_open, H2)
    mu = TargetDistribution.from_functions(
        e_open.pdf, e_open.cdf, np.asarray(quantile(e_open, np.clip(H2.grid, 1e-9, 1 - 1e-9))))
    rt_open = np.max(np.abs(reward_from_distribution_inf(mu, p_open).raw
                            - (H2(mu.cdf) - e_open.value)))
    e_fin = solve_hom(BENCH, H)
    mu = TargetDistribution.from_functions(e_fin.pdf, e_fin.cdf, np.linspace(0.05, 1.0, 1500),
                                           T=1.0)
    rt_fin = np.max(np.abs(reward_from_distribution_fin(mu, BENCH).raw - H(mu.cdf)))

    ok = fp < 1e-8 and heat_ok and mono_ok and lim < 1e-3 and max(rt_open, rt_fin) < 1e-6
    _record(6, ok, f"fixed point {fp:.1e}; heat residual ratio {res[0] / res[1]:.2f}; "
                   f"monotone {bool(mono_ok)}, limit error {lim:.1e}; "
                   f"round trips {rt_open:.1e}/{rt_fin:.1e}", capsys)


@pytest.mark.slow
def test_criterion_7_epsilon_nash(capsys):
    t0 = time.perf_counter()
    eq = solve_hom(BENCH, smooth_from_function(lambda r: 6 * (1 - r) ** 2))
    Ns, paths = [64, 256, 1024, 4096], 100_000
    gains, sig = [], []
    for N in Ns:
        rep = simulate_nplayer(None, eq, SimConfig(N=N, replications=max(4, paths // (4 * N)),
                                                   seed=11))
        gains.append(rep.max_gain.mean)
        sig += [g.name for g in rep.gains if g.significant_positive]
    slope, _ = rate_regression(Ns, gains)

    # the benchmark rate is tiny, so also validate at a larger volatility
    zero_lines, zero_ok = [], True
    for p in (BENCH, BENCH.replace(sigma=0.5)):
        zr = simulate_nplayer(None, solve_hom(p, constant_reward(0.0)),
                              SimConfig(N=4096, replications=4, deviations=(), effort="zero",
                                        seed=1))
        F = fpt_cdf(p.y0, p.T)
        se = math.sqrt(F * (1 - F) / (4096 * 4))
        zero_ok = zero_ok and abs(zr.completion_rate - F) <= 3 * se
        zero_lines.append(f"{zr.completion_rate:.2e} vs {F:.2e} (3 SE {3 * se:.1e})")
    dt = time.perf_counter() - t0

    slope_ok = math.isfinite(slope) and abs(slope + 0.5) <= 0.2
    ok = slope_ok and not sig and zero_ok and dt < 600
    _record(7, ok, f"max gains {[round(g, 4) for g in gains]} at N={Ns}; slope {slope}; "
                   f"significant positive: {sig or 'none'}; zero effort "
                   f"{'; '.join(zero_lines)}; {dt:.0f} s", capsys)
