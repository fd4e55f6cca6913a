"""Hot inner loops, each with a numba kernel and a numpy/scipy fallback.

Backend is chosen once at import from ``MFT_BACKEND`` (``numba`` or
``numpy``); ``numba`` is the default when it can be imported. Both paths are
importable directly (``*_numba`` / ``*_numpy``) so they can be cross-checked
and benchmarked against each other.

Kernels
-------
het_sweep
    Forward sweep over rank cells of the discretized fixed-point system:
    given per-type normalizers, solve each cell's quantile equation in turn.
sched_u_ux
    ``u(t, x)`` and ``u_x(t, x)`` for a reward that is piecewise constant in
    time (closed-form sums of first-passage c.d.f.s and their x-derivatives).
simulate_paths
    Euler-Maruyama for ``dX = -a dt + sigma dB`` absorbed at 0, effort read
    from a per-step table, with Brownian-bridge crossing correction.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy import optimize, special

__all__ = [
    "BACKEND",
    "het_sweep",
    "het_sweep_numba",
    "het_sweep_numpy",
    "sched_u_ux",
    "sched_u_ux_numba",
    "sched_u_ux_numpy",
    "simulate_paths",
    "simulate_paths_numba",
    "simulate_paths_numpy",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)
# erfc(_ZCAP) underflows to 0 in double precision
_ZCAP = 27.5


def _pick_backend() -> str:
    want = os.environ.get("MFT_BACKEND", "numba").strip().lower()
    if want not in ("numba", "numpy"):
        raise ValueError(f"MFT_BACKEND must be 'numba' or 'numpy', got {want!r}")
    if want == "numba":
        try:
            import numba  # noqa: F401
        except ImportError:  # pragma: no cover - numba is a declared dependency
            return "numpy"
    return want


BACKEND = _pick_backend()

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# --------------------------------------------------------------------------
# het_sweep
# --------------------------------------------------------------------------

@njit(cache=True)
def _mass_z(coef, yv, z, z_prev_vals):
    # sum_i coef_i * (erfc(y_i z) - F_i(prev))
    s = 0.0
    for i in range(coef.shape[0]):
        s += coef[i] * (math.erfc(yv[i] * z) - z_prev_vals[i])
    return s


@njit(cache=True)
def het_sweep_numba(ut, w, yv, a, a_inf, edges, T):
    n = w.shape[0]
    d = edges.shape[0] - 2
    quant = np.full(d, np.inf)
    F_prev = np.zeros(n)
    F_T = np.ones(n)
    z_T = 0.0
    if math.isfinite(T):
        z_T = 1.0 / math.sqrt(2.0 * T)
        for i in range(n):
            F_T[i] = math.erfc(yv[i] * z_T)
    y_min = yv[0]
    for i in range(n):
        if yv[i] < y_min:
            y_min = yv[i]
    z_prev = _ZCAP / y_min
    done = np.zeros(n)  # per-type completed mass (scaled by 1/ut) by T
    cum = 0.0
    k0 = d
    coef = np.empty(n)
    for k in range(d):
        for i in range(n):
            coef[i] = w[i] * a[i, k] / ut[i]
        target = edges[k + 1] - cum
        cap = 0.0
        for i in range(n):
            cap += coef[i] * (F_T[i] - F_prev[i])
        if cap < target:
            k0 = k
            for i in range(n):
                done[i] += a[i, k] * (F_T[i] - F_prev[i])
            cum += cap
            break
        lo = z_T
        hi = z_prev
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _mass_z(coef, yv, mid, F_prev) >= target:
                lo = mid
            else:
                hi = mid
        z_k = lo
        zz = 2.0 * z_k * z_k
        quant[k] = math.inf if zz <= 0.0 else 1.0 / zz
        for i in range(n):
            Fk = math.erfc(yv[i] * z_k)
            done[i] += a[i, k] * (Fk - F_prev[i])
            F_prev[i] = Fk
        cum = edges[k + 1]
        z_prev = z_k
    if k0 == d:
        for i in range(n):
            done[i] += a[i, d] * (F_T[i] - F_prev[i])
            cum += w[i] * a[i, d] / ut[i] * (F_T[i] - F_prev[i])
    beta_type = np.empty(n)
    mass = np.empty(n)
    for i in range(n):
        beta_type[i] = done[i] / ut[i]
        tail = 0.0
        if math.isfinite(T):
            tail = a_inf[i] * (1.0 - F_T[i])
        mass[i] = (done[i] + tail) / ut[i]
    return quant, k0, beta_type, mass, cum


def het_sweep_numpy(ut, w, yv, a, a_inf, edges, T):
    n = w.shape[0]
    d = edges.shape[0] - 2
    quant = np.full(d, np.inf)
    F_prev = np.zeros(n)
    finite = math.isfinite(T)
    F_T = special.erfc(yv / math.sqrt(2.0 * T)) if finite else np.ones(n)
    z_T = 1.0 / math.sqrt(2.0 * T) if finite else 0.0
    z_prev = _ZCAP / yv.min()
    done = np.zeros(n)
    cum = 0.0
    k0 = d
    for k in range(d):
        coef = w * a[:, k] / ut
        target = edges[k + 1] - cum
        cap = float(np.dot(coef, F_T - F_prev))
        if cap < target:
            k0 = k
            done += a[:, k] * (F_T - F_prev)
            cum += cap
            break
        if n == 1:
            # single type: invert the c.d.f. directly
            p = min(F_prev[0] + target / coef[0], 1.0)
            z_k = float(special.erfcinv(p)) / yv[0] if p > 0 else z_prev
            z_k = min(max(z_k, z_T), z_prev)
        else:
            def g(z):
                return float(np.dot(coef, special.erfc(yv * z) - F_prev)) - target
            if g(z_prev) >= 0:
                z_k = z_prev
            elif g(z_T) <= 0:
                z_k = z_T
            else:
                z_k = optimize.brentq(g, z_T, z_prev, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                      maxiter=500)
        zz = 2.0 * z_k * z_k
        quant[k] = math.inf if zz <= 0 else 1.0 / zz
        Fk = special.erfc(yv * z_k)
        done += a[:, k] * (Fk - F_prev)
        F_prev = Fk
        cum = edges[k + 1]
        z_prev = z_k
    if k0 == d:
        done += a[:, d] * (F_T - F_prev)
        cum += float(np.dot(w * a[:, d] / ut, F_T - F_prev))
    beta_type = done / ut
    tail = a_inf * (1.0 - F_T) if finite else np.zeros(n)
    mass = (done + tail) / ut
    return quant, k0, beta_type, mass, cum


# --------------------------------------------------------------------------
# sched_u_ux
# --------------------------------------------------------------------------

@njit(cache=True)
def sched_u_ux_numba(t, x, sigma, bounds, elev, etail):
    m = t.shape[0]
    K = elev.shape[0]
    u = np.empty(m)
    ux = np.empty(m)
    last = bounds[K]
    for p in range(m):
        tp = t[p]
        xp = x[p]
        if xp <= 0.0:
            # on the goal: reward currently paid
            val = etail
            for j in range(K):
                if tp <= bounds[j + 1]:
                    val = elev[j]
                    break
            u[p] = val
            ux[p] = 0.0
            continue
        su = 0.0
        sx = 0.0
        F_lo = 0.0
        D_lo = 0.0
        for j in range(K):
            s = bounds[j + 1] - tp
            if s <= 0.0:
                continue
            if math.isinf(s):
                F_hi = 1.0
                D_hi = 0.0
            else:
                sd = sigma * math.sqrt(s)
                q = xp / sd
                F_hi = math.erfc(q / _SQRT2)
                D_hi = -2.0 * _INV_SQRT2PI * math.exp(-0.5 * q * q) / sd
            su += elev[j] * (F_hi - F_lo)
            sx += elev[j] * (D_hi - D_lo)
            F_lo = F_hi
            D_lo = D_hi
        if math.isfinite(last):
            su += etail * (1.0 - F_lo)
            sx -= etail * D_lo
        u[p] = su
        ux[p] = sx
    return u, ux


def sched_u_ux_numpy(t, x, sigma, bounds, elev, etail):
    t = np.asarray(t, dtype=float)[:, None]
    x = np.asarray(x, dtype=float)[:, None]
    s = bounds[None, 1:] - t
    pos = s > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        sd = sigma * np.sqrt(np.where(pos, s, 1.0))
        q = np.where(np.isinf(s), 0.0, x / sd)
        F = np.where(pos, special.erfc(q / _SQRT2), 0.0)
        F = np.where(np.isinf(s), 1.0, F)
        D = np.where(pos & ~np.isinf(s), -2.0 * _INV_SQRT2PI * np.exp(-0.5 * q * q) / sd, 0.0)
    Fl = np.concatenate([np.zeros((F.shape[0], 1)), F[:, :-1]], axis=1)
    Dl = np.concatenate([np.zeros((D.shape[0], 1)), D[:, :-1]], axis=1)
    u = ((F - Fl) * elev[None, :]).sum(axis=1)
    ux = ((D - Dl) * elev[None, :]).sum(axis=1)
    if math.isfinite(bounds[-1]):
        u += etail * (1.0 - F[:, -1])
        ux -= etail * D[:, -1]
    x0 = x[:, 0] <= 0
    if np.any(x0):
        idx = np.searchsorted(bounds[1:], t[x0, 0], side="left")
        lv = np.append(elev, etail)
        u[x0] = lv[np.minimum(idx, elev.size)]
        ux[x0] = 0.0
    return u, ux


# --------------------------------------------------------------------------
# simulate_paths
# --------------------------------------------------------------------------

@njit(cache=True)
def _interp_row(row, xmax, x):
    nx = row.shape[0]
    if x >= xmax:
        return row[nx - 1]
    h = xmax / (nx - 1)
    pos = x / h
    j = int(pos)
    if j >= nx - 1:
        return row[nx - 1]
    f = pos - j
    return row[j] * (1.0 - f) + row[j + 1] * f


@njit(cache=True)
def simulate_paths_numba(x0, ptype, cost_c, table, xmax, dt, sigma, scale, const,
                         normals, uniforms, bridge):
    N = x0.shape[0]
    steps = normals.shape[1]
    tau = np.full(N, np.inf)
    cost = np.zeros(N)
    sq = math.sqrt(dt)
    for i in range(N):
        x = x0[i]
        ty = ptype[i]
        acc = 0.0
        for n in range(steps):
            a = scale * _interp_row(table[ty, n], xmax, x) + const
            if a < 0.0:
                a = 0.0
            xn = x - a * dt + sigma * sq * normals[i, n]
            if xn <= 0.0:
                # effort is paid only up to the crossing
                f = x / (x - xn)
                acc += a * a * f * dt
                tau[i] = (n + f) * dt
                break
            if bridge and uniforms[i, n] < math.exp(-2.0 * x * xn / (sigma * sigma * dt)):
                acc += 0.5 * a * a * dt
                tau[i] = (n + 0.5) * dt
                break
            acc += a * a * dt
            x = xn
        cost[i] = cost_c[i] * acc
    return tau, cost


def simulate_paths_numpy(x0, ptype, cost_c, table, xmax, dt, sigma, scale, const,
                         normals, uniforms, bridge):
    N = x0.shape[0]
    steps = normals.shape[1]
    nx = table.shape[2]
    grid = np.linspace(0.0, xmax, nx)
    tau = np.full(N, np.inf)
    acc = np.zeros(N)
    x = x0.astype(float).copy()
    alive = np.ones(N, dtype=bool)
    sq = math.sqrt(dt)
    for n in range(steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        xi = x[idx]
        a = np.empty(idx.size)
        for ty in np.unique(ptype[idx]):
            m = ptype[idx] == ty
            a[m] = np.interp(xi[m], grid, table[ty, n])
        a = np.maximum(scale * a + const, 0.0)
        xn = xi - a * dt + sigma * sq * normals[idx, n]
        hit = xn <= 0.0
        frac = np.ones(idx.size)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac[hit] = xi[hit] / (xi[hit] - xn[hit])
        tau[idx[hit]] = (n + frac[hit]) * dt
        if bridge:
            with np.errstate(over="ignore"):
                pb = np.exp(-2.0 * xi * xn / (sigma * sigma * dt))
            bh = ~hit & (uniforms[idx, n] < pb)
            frac[bh] = 0.5
            tau[idx[bh]] = (n + 0.5) * dt
            hit = hit | bh
        acc[idx] += a * a * frac * dt
        alive[idx[hit]] = False
        x[idx] = xn
    return tau, cost_c * acc


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def het_sweep(ut, w, yv, a, a_inf, edges, T):
    """Forward sweep; returns ``(quantiles, k0, beta_type, mass_type, beta)``."""
    args = (np.ascontiguousarray(ut, dtype=float), np.ascontiguousarray(w, dtype=float),
            np.ascontiguousarray(yv, dtype=float), np.ascontiguousarray(a, dtype=float),
            np.ascontiguousarray(a_inf, dtype=float), np.ascontiguousarray(edges, dtype=float),
            float(T))
    if BACKEND == "numba":
        q, k0, bt, m, b = het_sweep_numba(*args)
        return q, int(k0), bt, m, float(b)
    return het_sweep_numpy(*args)


def sched_u_ux(t, x, sigma, bounds, elev, etail):
    """``u`` and ``u_x`` (both in the caller's exponential scale) at points ``(t, x)``."""
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    shape = t.shape
    args = (np.ascontiguousarray(t.ravel()), np.ascontiguousarray(x.ravel()), float(sigma),
            np.ascontiguousarray(bounds, dtype=float), np.ascontiguousarray(elev, dtype=float),
            float(etail))
    if BACKEND == "numba":
        u, ux = sched_u_ux_numba(*args)
    else:
        u, ux = sched_u_ux_numpy(*args)
    return u.reshape(shape), ux.reshape(shape)


def simulate_paths(x0, ptype, cost_c, table, xmax, dt, sigma, scale, const,
                   normals, uniforms, bridge=True):
    """Absorbed Euler-Maruyama paths; returns ``(tau, running_cost)``."""
    args = (np.ascontiguousarray(x0, dtype=float), np.ascontiguousarray(ptype, dtype=np.int64),
            np.ascontiguousarray(cost_c, dtype=float), np.ascontiguousarray(table, dtype=float),
            float(xmax), float(dt), float(sigma), float(scale), float(const),
            np.ascontiguousarray(normals, dtype=float), np.ascontiguousarray(uniforms, dtype=float),
            bool(bridge))
    if BACKEND == "numba":
        return simulate_paths_numba(*args)
    return simulate_paths_numpy(*args)
