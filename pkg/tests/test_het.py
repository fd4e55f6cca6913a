import math

import numpy as np
import pytest

from conftest import random_step_reward
from mftourney.golden import TABLE2, TOL
from mftourney.het import (PopulationMix, compute_A_T, het_cdf, het_effort_field,
                           het_residuals, het_u_field, het_value_field, solve_het, table2_mix,
                           table2_reward)
from mftourney.hom import effort_field, quantile, solve_hom, u_field
from mftourney.reward import DELTA, ModelParams, RankRewardStep


@pytest.fixture(scope="module")
def reward400():
    return table2_reward(400)


@pytest.mark.parametrize("case", sorted(TABLE2))
def test_table2(case, reward400):
    beta, b_ad, b_da, v_ad, v_da, welfare = TABLE2[case]
    mix = table2_mix(case)
    eq = solve_het(mix, reward400, 1.0)
    assert eq.beta == pytest.approx(beta, abs=TOL["table2_beta"])
    assert eq.welfare == pytest.approx(welfare, abs=TOL["table2_value"])
    # the (1, 1) type is listed first whenever present
    first_is_base = mix.x0[0] == 1.0 and mix.c[0] == 1.0
    if mix.n == 2:
        assert eq.beta_type[0] == pytest.approx(b_ad, abs=TOL["table2_beta"])
        assert eq.beta_type[1] == pytest.approx(b_da, abs=TOL["table2_beta"])
        assert eq.values[0] == pytest.approx(v_ad, abs=TOL["table2_value"])
        assert eq.values[1] == pytest.approx(v_da, abs=TOL["table2_value"])
    elif first_is_base and case == 0:
        assert eq.values[0] == pytest.approx(v_ad, abs=TOL["table2_value"])
    else:
        assert eq.values[0] == pytest.approx(v_da, abs=TOL["table2_value"])
    res, _ = het_residuals(eq)
    assert np.max(np.abs(res)) < 1e-9
    assert eq.restarts_agree


def test_degenerate_mix_matches_closed_form():
    rng = np.random.default_rng(11)
    p = ModelParams()
    mix = PopulationMix.single(1.0, 1.0, 0.25)
    for _ in range(20):
        H = random_step_reward(rng)
        T = float(rng.choice([0.5, 1.0, 2.0]))
        het = solve_het(mix, H, T)
        hom = solve_hom(p.replace(T=T), H)
        assert het.beta == pytest.approx(hom.beta, abs=1e-10)
        assert het.values[0] == pytest.approx(hom.value, abs=1e-9)
        reached = H.thresholds < hom.beta
        assert het.k0 == int(reached.sum())
        if reached.any():
            want = np.asarray(quantile(hom, H.thresholds[reached]), dtype=float)
            assert np.allclose(het.quantiles[: het.k0], want, rtol=1e-9, atol=1e-12)
        assert all(q is DELTA for q in het.quantile_list()[het.k0:])


def test_split_type_is_the_same_game():
    H = RankRewardStep([0.3, 0.6], [3.0, 1.0, 0.2])
    one = solve_het(PopulationMix.single(1.0, 1.0), H, 1.0)
    two = solve_het(PopulationMix(((1.0, 1.0, 0.3), (1.0, 1.0, 0.7))), H, 1.0)
    assert two.beta == pytest.approx(one.beta, abs=1e-10)
    assert np.allclose(two.values, one.values[0], atol=1e-9)
    assert np.allclose(two.quantiles[: two.k0], one.quantiles[: one.k0], atol=1e-10)


def test_no_cut_reached_branch():
    H = RankRewardStep([0.5], [1.0, 0.0])
    mix = PopulationMix.single(1.0, 1.0)
    eq = solve_het(mix, H, 0.2)
    A = compute_A_T(mix, H, 0.2)
    assert A < 0.5
    assert eq.k0 == 0
    assert eq.beta == pytest.approx(A, rel=1e-12)
    assert eq.beta == pytest.approx(solve_hom(ModelParams(T=0.2), H).beta, rel=1e-9)


def test_cdf_matches_closed_form():
    H = RankRewardStep([0.2, 0.4, 0.7], [4.0, 2.0, 1.0, 0.0])
    het = solve_het(PopulationMix.single(), H, 2.0)
    hom = solve_hom(ModelParams(T=2.0), H)
    t = np.linspace(0.0, 2.5, 200)
    assert np.allclose(het_cdf(het, t), hom.cdf(t), atol=1e-10)


def test_cdf_consistent_with_type_rates(reward400):
    eq = solve_het(table2_mix(3), reward400, 1.0)
    for i in range(2):
        assert het_cdf(eq, 1.0, i) == pytest.approx(eq.beta_type[i], abs=1e-10)
    assert het_cdf(eq, 1.0) == pytest.approx(eq.beta, abs=1e-10)
    t = np.linspace(0, 1, 101)
    assert np.all(np.diff(het_cdf(eq, t)) >= -1e-14)


def test_fields_match_closed_form():
    H = RankRewardStep([0.2, 0.4, 0.7], [4.0, 2.0, 1.0, 0.0])
    het = solve_het(PopulationMix.single(), H, 1.0)
    hom = solve_hom(ModelParams(T=1.0), H)
    tt, xx = np.meshgrid(np.linspace(0, 0.95, 12), np.linspace(0.05, 2, 12))
    assert np.allclose(het_effort_field(het, 0, tt, xx), effort_field(hom, tt, xx),
                       rtol=1e-8, atol=1e-12)
    scale = math.exp(-4.0 / hom.kappa)
    assert np.allclose(het_u_field(het, 0, tt, xx), u_field(hom, tt, xx) * scale, rtol=1e-9)
    assert het_value_field(het, 0, 0.0, 1.0) == pytest.approx(hom.value, abs=1e-9)


def test_open_ended_mix():
    H = RankRewardStep([0.5], [2.0, 0.0])
    eq = solve_het(PopulationMix(((1.0, 1.0, 0.5), (2.0, 1.0, 0.5))), H, math.inf)
    assert eq.beta == pytest.approx(1.0)
    assert eq.k0 == 1
    res, _ = het_residuals(eq)
    assert np.max(np.abs(res)) < 1e-9


def test_mix_validation_and_dict():
    with pytest.raises(ValueError):
        PopulationMix(((1.0, 1.0, 0.5),))
    with pytest.raises(ValueError):
        PopulationMix(((1.0, -1.0, 1.0),))
    mix = table2_mix(7)
    assert PopulationMix.from_dict(mix.to_dict()) == mix
    with pytest.raises(ValueError):
        solve_het(mix, RankRewardStep([], [1.0]), 1.0)
