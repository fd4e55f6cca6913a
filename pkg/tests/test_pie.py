import math
import warnings

import numpy as np
import pytest
from scipy import integrate, special

from mftourney.golden import FIG5_THRESHOLDS, TOL
from mftourney.hom import solve_beta
from mftourney.pie import (PieReward, additive_pie, bifurcation_scan,
                           contribution_competition_family, enumerate_pie_equilibria,
                           log_phi, pie_critical_thresholds)
from mftourney.reward import ModelParams, smooth_from_function


def _params_at(F, x0=1.0, sigma=0.25, c=1.0):
    """Parameters whose uncontrolled completion rate by the deadline is ``F``."""
    T = x0**2 / sigma**2 / (2 * special.erfcinv(F) ** 2)
    return ModelParams(x0=x0, sigma=sigma, c=c, T=T)


def test_log_phi_against_quadrature():
    p = ModelParams()
    pie = contribution_competition_family(1.5)(0.4)
    for b in (0.1, 0.5, 0.9):
        ref, _ = integrate.quad(lambda z: math.exp((pie.R_inf(b) - pie.H(z, b)) / p.kappa), 0, b,
                                epsabs=0, epsrel=1e-12)
        assert log_phi(p, pie, [b])[0] == pytest.approx(math.log(ref / (1 - b)), abs=1e-9)


def test_fixed_pie_matches_closed_form():
    p = ModelParams()
    H = smooth_from_function(lambda r: 6 * (1 - r) ** 2, m=4001)
    pie = PieReward(lambda r, b: 6 * (1 - np.asarray(r)) ** 2, lambda b: 0.0 * np.asarray(b))
    eqs = enumerate_pie_equilibria(p, pie)
    assert eqs.count == 1
    assert eqs.roots[0] == pytest.approx(solve_beta(p, H), abs=1e-6)


@pytest.mark.parametrize("F,count", [(0.003, 1), (0.02, 3), (0.06, 1)])
def test_additive_root_counts(F, count):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        eqs = enumerate_pie_equilibria(_params_at(F), additive_pie())
    assert eqs.count == count
    assert np.all(np.diff(eqs.roots) > 0)
    assert np.all(np.abs(eqs.residuals) < 1e-10)
    assert eqs.dominant == eqs.count - 1


def test_values_increase_with_root_when_floor_increases():
    R = lambda b: 0.5 * np.asarray(b, dtype=float)
    eqs = enumerate_pie_equilibria(_params_at(0.02), additive_pie(R))
    assert eqs.count == 3
    assert np.all(np.diff(eqs.values) > 0)


def test_thresholds():
    th = pie_critical_thresholds(ModelParams(), additive_pie(), lo=1e-3, hi=0.2, n_scan=120)
    assert len(th) == 2
    for got, want in zip(th, FIG5_THRESHOLDS):
        assert got == pytest.approx(want, abs=TOL["fig5_threshold"])
    # root counts 1 / 3 / 1 across the bracket
    counts = [enumerate_pie_equilibria(_params_at(F), additive_pie()).count
              for F in (0.5 * th[0], 0.5 * (th[0] + th[1]), 1.5 * th[1])]
    assert counts == [1, 3, 1]


def test_fixed_pie_has_no_thresholds():
    pie = PieReward(lambda r, b: 2 * (1 - np.asarray(r)), lambda b: 0.0 * np.asarray(b))
    assert pie_critical_thresholds(ModelParams(), pie, lo=1e-3, hi=0.3, n_scan=40) == []


def test_odd_counts_away_from_tangency():
    for F in np.geomspace(1e-3, 0.3, 25):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert enumerate_pie_equilibria(_params_at(F), additive_pie()).count % 2 == 1


def test_bifurcation_multivalued_for_middle_budget():
    p = ModelParams()
    mid = bifurcation_scan(p, contribution_competition_family(1.5), np.linspace(0, 0.4, 41),
                           n_grid=2000)
    assert mid.multivalued.any()
    eps = np.linspace(0, 1, 21)
    for K in (0.5, 3.0):
        assert not bifurcation_scan(p, contribution_competition_family(K), eps,
                                    n_grid=2000).multivalued.any()


def test_bifurcation_consistent_with_enumeration():
    p = ModelParams()
    fam = contribution_competition_family(1.5)
    tab = bifurcation_scan(p, fam, [0.0], n_grid=4000)
    eqs = enumerate_pie_equilibria(p, fam(0.0), n_grid=4000)
    assert tab.counts[0] == eqs.count
    assert np.allclose([r[3] for r in tab.rows], eqs.roots)


def test_fixed_pie_single_flat_branch():
    p = ModelParams()
    fam = lambda e: PieReward(lambda r, b: 1.0 + 0.0 * np.asarray(r), lambda b: 0.0 * np.asarray(b))
    tab = bifurcation_scan(p, fam, np.linspace(0, 1, 11), n_grid=1000)
    assert np.all(tab.counts == 1)
    betas = [r[3] for r in tab.rows]
    assert np.ptp(betas) < 1e-12
    assert len({r[1] for r in tab.rows}) == 1


def test_validate_rejects_increasing():
    pie = PieReward(lambda r, b: np.asarray(r, dtype=float), lambda b: 0.0)
    with pytest.raises(ValueError):
        pie.validate()
