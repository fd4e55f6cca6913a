"""Command-line front end: ``mft <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 convergence failure or a
reproduction outside its golden tolerance. Output files are staged and only
moved into ``--out`` once a command has fully succeeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import golden
from .design import (
    ProfitFunction,
    max_completion_rate,
    max_net_profit,
    max_welfare_reward,
    min_budget,
    min_quantile_reward,
    net_profit_bruteforce,
)
from .errors import ConfigError, ConvergenceError, NotRealizableError
from .het import PopulationMix, het_effort_field, het_value_field, solve_het, table2_mix, table2_reward
from .hom import effort_grid, quantile, solve_hom
from .io import commit_files, csv_text, dumps_json
from .pie import (
    additive_pie,
    bifurcation_scan,
    contribution_competition_family,
    log_phi,
    pie_critical_thresholds,
)
from .reward import (
    DELTA,
    ModelParams,
    RankRewardStep,
    constant_reward,
    discretize,
    reward_from_dict,
    smooth_from_function,
)
from .sim import DEFAULT_DEVIATIONS, Deviation, SimConfig, rate_regression, simulate_nplayer

__all__ = ["main", "build_parser", "parse_reward"]

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 2, 3

PRESETS = {
    "table1": {"params": {"x0": 1.0, "sigma": 0.25, "c": 1.0, "T": 1.0, "R_inf": 0.0},
               "reward": "power:6:2"},
    "table2": {"params": {"x0": 1.0, "sigma": 0.25, "c": 1.0, "T": 1.0, "R_inf": 0.0},
               "reward": "power:15:2"},
}


# --------------------------------------------------------------------------
# parsing helpers
# --------------------------------------------------------------------------

def _float(text: str) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "+inf"):
        return math.inf
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_reward(spec, floor: float = 0.0):
    """Reward from a spec string or a JSON-style dict.

    Strings: ``constant:<v>``, ``power:<A>:<p>`` for ``A (1 - r)^p``,
    ``budget:<K>:<p>`` for ``K (1 + p)(1 - r)^p`` and
    ``step:<r1,...,rd>:<R1,...,R(d+1)>``.
    """
    if isinstance(spec, dict):
        try:
            return reward_from_dict({"floor": floor, **spec})
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad reward object: {exc}") from None
    parts = str(spec).split(":")
    kind = parts[0]
    try:
        if kind == "constant" and len(parts) == 2:
            return constant_reward(_float(parts[1]), floor)
        if kind == "power" and len(parts) == 3:
            A, p = _float(parts[1]), _float(parts[2])
            return smooth_from_function(lambda r: floor + A * (1 - r) ** p, floor=floor)
        if kind == "budget" and len(parts) == 3:
            K, p = _float(parts[1]), _float(parts[2])
            return smooth_from_function(lambda r: floor + K * (1 + p) * (1 - r) ** p, floor=floor)
        if kind == "step" and len(parts) == 3:
            th = [_float(v) for v in parts[1].split(",") if v]
            lv = [_float(v) for v in parts[2].split(",") if v]
            return RankRewardStep(np.array(th), np.array(lv), floor)
    except ValueError as exc:
        raise ConfigError(f"bad reward {spec!r}: {exc}") from None
    raise ConfigError(f"unknown reward spec {spec!r}")


def _key_line(text: str, key: str) -> int | None:
    for n, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return n
    return None


def _load_config(path: str | None, allowed: dict) -> dict:
    """Read a JSON config and check keys against ``allowed`` (key -> subkeys or None)."""
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}:1: top level must be an object")
    for k, v in cfg.items():
        if k not in allowed:
            raise ConfigError(f"{path}:{_key_line(text, k)}: unknown key {k!r}")
        sub = allowed[k]
        if sub is not None and isinstance(v, dict):
            for kk in v:
                if kk not in sub:
                    raise ConfigError(f"{path}:{_key_line(text, kk)}: unknown key {k}.{kk}")
    return cfg


_PARAM_KEYS = {"x0", "sigma", "c", "T", "R_inf"}


def _params(base: dict, args) -> ModelParams:
    d = dict(base)
    for name in ("x0", "sigma", "c", "T", "R_inf"):
        v = getattr(args, name, None)
        if v is not None:
            d[name] = v
    try:
        return ModelParams(**{k: _float(v) for k, v in d.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model parameters: {exc}") from None


def _preset(name: str | None) -> dict:
    if name is None:
        return PRESETS["table1"]
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]


def _time_grid(eq, n: int = 201):
    end = eq.params.T if eq.params.finite else float(quantile(eq, 0.99))
    return np.linspace(end / n, end, n)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _hom_outputs(eq) -> dict:
    ranks = np.round(np.linspace(0.01, 0.99, 99), 10)
    q = quantile(eq, ranks)
    rows_q = [(r, t) for r, t in zip(ranks, q)]
    tg = _time_grid(eq)
    rows_d = [(t, c, f) for t, c, f in zip(tg, np.atleast_1d(eq.cdf(tg)), np.atleast_1d(eq.pdf(tg)))]
    te = np.linspace(0.0, tg[-1], 21)[:-1] if eq.params.finite else np.linspace(0.0, tg[-1], 21)
    xe = np.linspace(0.05, 2.0 * eq.params.x0, 40)
    tt, xx = np.meshgrid(te, xe, indexing="ij")
    ef = np.asarray(effort_grid(eq, tt, xx))
    rows_e = [(t, x, a) for t, x, a in zip(tt.ravel(), xx.ravel(), ef.ravel())]
    return {
        "equilibrium.json": dumps_json(eq.to_dict()),
        "quantiles.csv": csv_text(["rank", "time"], rows_q),
        "density.csv": csv_text(["t", "cdf", "pdf"], rows_d),
        "effort.csv": csv_text(["t", "x", "effort"], rows_e),
    }


def cmd_solve_hom(args) -> dict:
    cfg = _load_config(args.config, {"params": _PARAM_KEYS, "reward": None})
    pre = _preset(args.preset)
    params = _params({**pre["params"], **cfg.get("params", {})}, args)
    spec = args.reward or cfg.get("reward") or pre["reward"]
    H = parse_reward(spec, params.R_inf)
    eq = solve_hom(params, H)
    q = [quantile(eq, r) for r in (0.25, 0.5, 0.75)]
    qs = "/".join("-" if v is DELTA else f"{v:.3f}" for v in q)
    print(f"T={params.T:g} quartiles={qs} beta={eq.beta:.4f} V={eq.value:.4f}")
    return _hom_outputs(eq)


def cmd_solve_het(args) -> dict:
    cfg = _load_config(args.config, {"atoms": None, "sigma": None, "T": None, "reward": None, "d": None})
    if args.case is not None:
        mix = table2_mix(args.case)
    elif "atoms" in cfg:
        try:
            mix = PopulationMix.from_dict(cfg)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad mixture: {exc}") from None
    else:
        raise ConfigError("solve-het needs --case or a config with 'atoms'")
    T = _float(args.T if args.T is not None else cfg.get("T", 1.0))
    d = int(cfg.get("d", args.d))
    spec = cfg.get("reward")
    if spec is None:
        H = table2_reward(d)
    else:
        H = parse_reward(spec, 0.0)
        if not isinstance(H, RankRewardStep):
            H = discretize(H, d)
    eq = solve_het(mix, H, T)
    print(f"beta={eq.beta:.4f} per-type={np.round(eq.beta_type, 4).tolist()} "
          f"V={np.round(eq.values, 4).tolist()} welfare={eq.welfare:.4f} k0={eq.k0}")
    te = np.linspace(0.0, T if math.isfinite(T) else 3.0, 21)[:-1]
    xe = np.linspace(0.05, 2.0 * float(mix.x0.max()), 40)
    tt, xx = np.meshgrid(te, xe, indexing="ij")
    rows = []
    for i in range(mix.n):
        v = het_value_field(eq, i, tt, xx)
        a = het_effort_field(eq, i, tt, xx)
        rows += [(i, t, x, vv, aa) for t, x, vv, aa in zip(tt.ravel(), xx.ravel(), v.ravel(), a.ravel())]
    return {"equilibrium.json": dumps_json(eq.to_dict()),
            "type_fields.csv": csv_text(["type", "t", "x", "value", "effort"], rows)}


def _check(report: list, name: str, got, want, tol: float):
    if want is None:
        ok = got is None or got is DELTA
        report.append({"item": name, "got": got, "want": None, "tol": tol, "ok": ok})
        return ok
    ok = got is not None and got is not DELTA and abs(float(got) - want) <= tol + 1e-12
    report.append({"item": name, "got": got, "want": want, "tol": tol, "ok": bool(ok)})
    return ok


def _reproduce_table1(tol):
    base = PRESETS["table1"]
    rows, report = [], []
    for T, (g1, g2, g3, gb, gv) in golden.TABLE1.items():
        p = ModelParams(**{**base["params"], "T": T})
        eq = solve_hom(p, parse_reward(base["reward"]))
        q = [quantile(eq, r) for r in (0.25, 0.5, 0.75)]
        rows.append((T, *[math.nan if v is DELTA else v for v in q], eq.beta, eq.value))
        for name, got, want in zip(("q1", "q2", "q3"), q, (g1, g2, g3)):
            _check(report, f"T={T:g} {name}", got, want, tol or golden.TOL["table1_quantile"])
        _check(report, f"T={T:g} beta", eq.beta, gb, tol or golden.TOL["table1_beta"])
        _check(report, f"T={T:g} V", eq.value, gv, tol or golden.TOL["table1_value"])
    return {"table1.csv": csv_text(["T", "q1", "median", "q3", "beta", "V"], rows)}, report


def _reproduce_table2(tol, d: int = 400):
    H = table2_reward(d)
    rows, closed, report = [], [], []
    tb = tol or golden.TOL["table2_beta"]
    tv = tol or golden.TOL["table2_value"]
    for case, gold in golden.TABLE2.items():
        mix = table2_mix(case)
        eq = solve_het(mix, H, 1.0)
        # advantaged type is (1, 1); the other one is disadvantaged
        adv = [i for i, a in enumerate(mix.atoms) if a[:2] == (1.0, 1.0)]
        dis = [i for i, a in enumerate(mix.atoms) if a[:2] != (1.0, 1.0)]
        bad = float(eq.beta_type[adv[0]]) if adv else None
        bda = float(eq.beta_type[dis[0]]) if dis else None
        vad = float(eq.values[adv[0]]) if adv else None
        vda = float(eq.values[dis[0]]) if dis else None
        got = (eq.beta, bad, bda, vad, vda, eq.welfare)
        rows.append((case, *[math.nan if v is None else v for v in got]))
        for name, gv, wv, t in zip(("beta", "beta_AD", "beta_DA", "V_AD", "V_DA", "welfare"),
                                   got, gold, (tb, tb, tb, tv, tv, tv)):
            _check(report, f"case {case} {name}", gv, wv, t)
        if mix.n == 1:
            x0, c, _ = mix.atoms[0]
            p = ModelParams(x0=x0, sigma=0.25, c=c, T=1.0)
            heq = solve_hom(p, parse_reward("power:15:2"))
            closed.append((case, heq.beta, heq.value))
            _check(report, f"case {case} closed-form beta", heq.beta, gold[0],
                   tol or golden.TOL["table1_beta"])
            _check(report, f"case {case} closed-form V", heq.value, gold[5],
                   tol or golden.TOL["table1_value"])
    hdr = ["case", "beta", "beta_AD", "beta_DA", "V_AD", "V_DA", "welfare"]
    return {"table2.csv": csv_text(hdr, rows),
            "table2_closed_form.csv": csv_text(["case", "beta", "V"], closed)}, report


def _reproduce_fig3():
    base = ModelParams(T=1.0)
    dens, vals = [], []
    tg = np.linspace(0.005, 1.0, 200)
    for K in (0.5, 1.0, 2.0, 4.0):
        for p in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
            eq = solve_hom(base, parse_reward(f"budget:{K}:{p}"))
            vals.append((K, p, eq.beta, eq.value))
            if K in (0.5, 2.0):
                dens += [(K, p, t, f) for t, f in zip(tg, eq.pdf(tg))]
    return {"fig3_density.csv": csv_text(["K", "p", "t", "pdf"], dens),
            "fig3_value.csv": csv_text(["K", "p", "beta", "V"], vals)}, []


def _reproduce_fig4():
    rows = []
    H = parse_reward("power:6:2")
    for T in (1.0, math.inf):
        for c in np.geomspace(0.05, 20.0, 61):
            eq = solve_hom(ModelParams(c=float(c), T=T), H)
            rows.append((T, float(c), eq.beta, eq.value))
    return {"fig4.csv": csv_text(["T", "c", "beta", "V"], rows)}, []


def _reproduce_fig5(tol):
    pie = additive_pie()
    p = ModelParams()
    b = np.linspace(0.0005, 0.9995, 1999)
    curve = [(bb, math.exp(v)) for bb, v in zip(b, log_phi(p, pie, b))]
    th = pie_critical_thresholds(p, pie, lo=1e-4, hi=0.3, n_scan=200)
    report = []
    t = tol or golden.TOL["fig5_threshold"]
    for k, want in enumerate(golden.FIG5_THRESHOLDS):
        _check(report, f"threshold {k + 1}", th[k] if k < len(th) else None, want, t)
    report.append({"item": "threshold count", "got": len(th), "want": 2, "tol": 0, "ok": len(th) == 2})
    return {"fig5_curve.csv": csv_text(["beta", "phi"], curve),
            "fig5_thresholds.csv": csv_text(["index", "F"], list(enumerate(th, 1)))}, report


def _reproduce_fig6():
    p = ModelParams()
    eps = np.linspace(0.0, 1.0, 201)
    rows, report = [], []
    for K in (0.5, 1.5, 3.0):
        tab = bifurcation_scan(p, contribution_competition_family(K), eps, n_grid=2000)
        rows += [(K, *r) for r in tab.table()]
        iv = tab.multivalued_intervals()
        report.append({"item": f"K={K:g} multivalued intervals", "got": iv,
                       "want": "non-empty" if K == 1.5 else "empty",
                       "ok": bool(iv) == (K == 1.5)})
    return {"fig6.csv": csv_text(["K", "eps", "branch", "root_index", "beta", "V", "n_roots"],
                                 rows)}, report


def cmd_reproduce(args) -> dict:
    tol = args.tolerance
    target = args.target
    if target == "table1":
        files, report = _reproduce_table1(tol)
    elif target == "table2":
        files, report = _reproduce_table2(tol, args.d)
    elif target == "fig3":
        files, report = _reproduce_fig3()
    elif target == "fig4":
        files, report = _reproduce_fig4()
    elif target == "fig5":
        files, report = _reproduce_fig5(tol)
    elif target == "fig6":
        files, report = _reproduce_fig6()
    else:
        raise ConfigError(f"unknown target {target!r}")
    failed = [r for r in report if not r["ok"]]
    for r in report:
        print(f"{'PASS' if r['ok'] else 'FAIL'} {r['item']}: got {r['got']} want {r['want']}")
    files[f"{target}_report.json"] = dumps_json({"target": target, "passed": not failed,
                                                  "checks": report})
    if failed:
        args._golden_failed = True
    return files


def cmd_design(args) -> dict:
    cfg = _load_config(args.config, {"params": _PARAM_KEYS, "K": None, "alpha": None})
    pre = _preset(args.preset)
    params = _params({**pre["params"], **cfg.get("params", {})}, args)
    K_text = args.K if args.K is not None else cfg.get("K")
    alpha = args.alpha if args.alpha is not None else cfg.get("alpha")

    def need_K():
        if K_text is None:
            raise ConfigError("--K is required")
        return params.R_inf if str(K_text) in ("R_inf", "Rinf") else _float(K_text)

    def need_alpha():
        if alpha is None:
            raise ConfigError("--alpha is required")
        return _float(alpha)

    prob = args.problem
    out = {}
    if prob == "quantile":
        sol = min_quantile_reward(params, need_K(), need_alpha())
        out = sol.to_dict()
    elif prob == "budget":
        out = {"problem": "budget", "alpha": need_alpha(), "T": params.T,
               "objective": min_budget(params, need_alpha())}
    elif prob == "rate":
        out = {"problem": "rate", "K": need_K(), "T": params.T,
               "objective": max_completion_rate(params, need_K())}
    elif prob == "welfare":
        out = max_welfare_reward(params, need_K()).to_dict()
    elif prob == "profit":
        if not args.g:
            raise ConfigError("--g <csv with columns t,g> is required")
        g = _read_profit(args.g)
        params = params.replace(T=math.inf)
        sol = max_net_profit(params, g)
        out = sol.to_dict()
        if args.check:
            b, U = net_profit_bruteforce(params, g)
            ok = abs(U - sol.objective) <= 1e-6 * max(1.0, abs(U))
            out["oracle"] = {"b": b, "U": U, "agrees": bool(ok)}
            if not ok:
                args._golden_failed = True
    else:
        raise ConfigError(f"unknown design problem {prob!r}")
    print(f"{prob}: objective = {out['objective']}")
    return {"design.json": dumps_json(out)}


def _read_profit(path: str) -> ProfitFunction:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"profit table not found: {path}")
    try:
        data = np.genfromtxt(p, delimiter=",", names=True)
        t, g = np.asarray(data["t"], dtype=float), np.asarray(data["g"], dtype=float)
        return ProfitFunction(np.atleast_1d(t), np.atleast_1d(g))
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _sim_game(args):
    if args.case is not None:
        mix = table2_mix(args.case)
        return mix, solve_het(mix, table2_reward(400), 1.0)
    pre = _preset(args.preset)
    params = _params(pre["params"], args)
    return None, solve_hom(params, parse_reward(args.reward or pre["reward"], params.R_inf))


def cmd_simulate(args) -> dict:
    mix, eq = _sim_game(args)
    devs = tuple(Deviation.parse(s) for s in args.deviations.split(",")) if args.deviations \
        else DEFAULT_DEVIATIONS
    if args.sweep:
        key, _, vals = args.sweep.partition("=")
        if key.strip() != "N":
            raise ConfigError("only --sweep N=... is supported")
        Ns = [int(v) for v in vals.split(",") if v]
        rows, reports = [], []
        for N in Ns:
            reps = args.reps or max(4, args.paths // (len(Ns) * N))
            cfg = SimConfig(N=N, dt=args.dt, seed=args.seed, replications=reps,
                            deviations=devs, effort=args.effort)
            rep = simulate_nplayer(mix, eq, cfg)
            g = rep.max_gain
            rows.append((N, reps, g.name, g.mean, g.half_width, rep.completion_rate,
                         rep.mean_payoff, rep.ks_distance))
            reports.append(rep.to_dict())
        slope, icpt = rate_regression(Ns, [r[3] for r in rows])
        print(f"max-gain slope on log-log: {slope}")
        summary = {"slope": slope, "intercept": icpt, "N": Ns,
                   "scope": "out of theorem scope" if isinstance(eq.reward, RankRewardStep)
                   else "Lipschitz reward", "reports": reports}
        return {"sweep.csv": csv_text(["N", "replications", "max_gain_deviation", "max_gain",
                                       "half_width", "completion_rate", "mean_payoff", "ks"], rows),
                "sweep.json": dumps_json(summary)}
    cfg = SimConfig(N=args.N, dt=args.dt, seed=args.seed, replications=args.reps or 8,
                    deviations=devs if args.effort == "equilibrium" else (), effort=args.effort)
    rep = simulate_nplayer(mix, eq, cfg)
    print(f"completion={rep.completion_rate:.4f} (mean field {rep.mean_field_rate:.4f}) "
          f"payoff={rep.mean_payoff:.4f}+-{rep.payoff_half_width:.4f}")
    return {"simreport.json": dumps_json(rep.to_dict())}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", default="mft-out", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (u64)")
    p.add_argument("--preset", help="named parameter set (table1, table2)")
    p.add_argument("--tolerance", type=float, help="override golden tolerances")


def _add_params(p: argparse.ArgumentParser):
    p.add_argument("--T", type=_float)
    p.add_argument("--x0", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--R-inf", dest="R_inf", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mft", description="Mean-field rank-based tournaments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-hom", help="homogeneous equilibrium")
    _add_common(p)
    _add_params(p)
    p.add_argument("--reward", help="constant:v | power:A:p | budget:K:p | step:r..:R..")
    p.set_defaults(func=cmd_solve_hom)

    p = sub.add_parser("solve-het", help="heterogeneous equilibrium (step reward)")
    _add_common(p)
    p.add_argument("--case", type=int, choices=range(11), help="population of a reference case")
    p.add_argument("--T", type=_float)
    p.add_argument("--d", type=int, default=400, help="rank cells")
    p.set_defaults(func=cmd_solve_het)

    p = sub.add_parser("reproduce", help="regenerate a reference table or figure data")
    _add_common(p)
    p.add_argument("target", choices=["table1", "table2", "fig3", "fig4", "fig5", "fig6"])
    p.add_argument("--d", type=int, default=400)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("design", help="optimal reward design")
    _add_common(p)
    _add_params(p)
    p.add_argument("problem", choices=["quantile", "budget", "rate", "welfare", "profit"])
    p.add_argument("--K", help="budget (number or R_inf)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--g", help="CSV with columns t,g for the profit problem")
    p.add_argument("--check", action="store_true", help="cross-check profit with the oracle")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="N-player Monte Carlo")
    _add_common(p)
    _add_params(p)
    p.add_argument("--reward")
    p.add_argument("--case", type=int, choices=range(11))
    p.add_argument("--N", type=int, default=1024)
    p.add_argument("--reps", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--effort", choices=["equilibrium", "zero"], default="equilibrium")
    p.add_argument("--deviations", help="comma list: zero, scale:<l>, const:<a>")
    p.add_argument("--sweep", help="N=64,256,1024,4096")
    p.add_argument("--paths", type=int, default=100_000, help="path budget for sweeps")
    p.set_defaults(func=cmd_simulate)
    return ap


def _threads():
    v = os.environ.get("MFT_THREADS")
    if v is None:
        return
    try:
        n = int(v)
    except ValueError:
        raise ConfigError(f"MFT_THREADS must be a positive integer, got {v!r}") from None
    if n < 1:
        raise ConfigError("MFT_THREADS must be >= 1")
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args._golden_failed = False
    try:
        _threads()
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        files = args.func(args)
        commit_files(args.out, files)
    except (ConfigError, NotRealizableError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args._golden_failed:
        print("reference check failed; see report", file=sys.stderr)
        return EXIT_CONVERGENCE
    print(f"wrote {len(files)} file(s) to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
