"""Mean-field rank-based tournaments: equilibria, design, multiplicity and simulation."""

from .fpt import FptLaw, fpt_cdf, fpt_cdf_dx, fpt_expect, fpt_pdf, fpt_quantile, fpt_sf
from .reward import (
    DELTA,
    ModelParams,
    RankRewardSmooth,
    RankRewardStep,
    constant_reward,
    discretize,
    eval_reward,
    smooth_from_function,
)
from .hom import (
    HomEquilibrium,
    StagedEquilibrium,
    effort_field,
    expected_effort,
    quantile,
    solve_beta,
    solve_hom,
    solve_staged,
    u_field,
    value_field,
)
from .design import (
    DesignSolution,
    ProfitFunction,
    TargetDistribution,
    lemma61_optimum,
    max_completion_rate,
    max_net_profit,
    max_welfare_reward,
    min_budget,
    min_quantile_reward,
    reward_from_distribution_fin,
    reward_from_distribution_inf,
)
from .pie import PieReward, bifurcation_scan, enumerate_pie_equilibria, pie_critical_thresholds
from .het import HetEquilibrium, PopulationMix, compute_A_T, het_effort_field, solve_het
from .sim import Deviation, SimConfig, SimReport, estimate_deviation_gain, simulate_nplayer

__version__ = "0.1.0"
