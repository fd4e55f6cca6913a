"""Time the numba and numpy versions of each hot kernel on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat 3]

Both versions are imported directly from ``mftourney.kernels``, so the
``MFT_BACKEND`` setting does not matter here. The first numba call (JIT
compile, or cache load) is timed separately from the steady state.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mftourney import kernels
from mftourney.het import _scaled_levels, solve_het, table2_mix, table2_reward


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _max_diff(a, b):
    out = 0.0
    for x, y in zip(a, b):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        same = x == y  # covers matching infinities
        d = np.abs(np.subtract(x, y, out=np.zeros(x.shape), where=~same))
        out = max(out, float(np.max(d)) if d.size else 0.0)
    return out


def cases():
    mix = table2_mix(3)
    H = table2_reward(400)
    eq = solve_het(mix, H, 1.0)
    a, a_inf = _scaled_levels(mix, H)
    ut = np.exp(eq.log_u - H.levels[0] / mix.kappa)
    sweep_args = (ut, mix.weights, mix.y0, a, a_inf, H.edges, 1.0)

    bounds = np.concatenate(([0.0], eq.quantiles[: eq.k0], [1.0]))
    elev, etail = a[0, : eq.k0 + 1], float(a_inf[0])
    tt, xx = np.meshgrid(np.linspace(0, 0.99, 100), np.linspace(0.01, 2, 100), indexing="ij")
    u_args = (tt.ravel(), xx.ravel(), 0.25, bounds, elev, etail)

    rng = np.random.default_rng(0)
    N, steps, nx = 2048, 400, 401
    xs = np.linspace(0, 3, nx)
    table = np.broadcast_to(0.5 * np.exp(-xs), (2, steps, nx)).copy()
    ptype = np.repeat([0, 1], N // 2).astype(np.int64)
    sim_args = (np.where(ptype == 0, 1.0, 2.0), ptype, np.ones(N), table, 3.0, 1.0 / steps,
                0.25, 1.0, 0.0, rng.standard_normal((N, steps)), rng.random((N, steps)), True)
    return {
        "het_sweep (d=400, 2 types)": (kernels.het_sweep_numba, kernels.het_sweep_numpy, sweep_args),
        "sched_u_ux (10^4 points)": (kernels.sched_u_ux_numba, kernels.sched_u_ux_numpy, u_args),
        "simulate_paths (2048 x 400)": (kernels.simulate_paths_numba, kernels.simulate_paths_numpy,
                                        sim_args),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'kernel':30s} {'numba first':>12s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, (fast, slow, a) in cases().items():
        t_first, _ = _time(lambda: fast(*a), 1)
        t_fast, out_fast = _time(lambda: fast(*a), args.repeat)
        t_slow, out_slow = _time(lambda: slow(*a), args.repeat)
        diff = _max_diff(out_fast, out_slow)
        print(f"{name:30s} {t_first:12.4f} {t_fast:10.4f} {t_slow:10.4f} {t_slow / t_fast:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
