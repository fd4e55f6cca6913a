"""First passage time of a driftless Brownian motion to level zero.

A player at distance ``x`` with volatility ``sigma`` and no effort completes at
``tau = first hit of 0``, whose law only depends on ``y = x / sigma``:

    P(tau <= t) = 2 (1 - Phi(y / sqrt(t))) = erfc(y / sqrt(2 t)).

Everything downstream (equilibrium rates, values, design formulas) is a
composition of these primitives, so they are evaluated through ``erfc`` /
``erfcinv`` to keep full double precision in both tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "FptLaw",
    "fpt_pdf",
    "fpt_cdf",
    "fpt_sf",
    "fpt_quantile",
    "fpt_cdf_dx",
    "fpt_expect",
    "norm_cdf",
    "norm_pdf",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def norm_cdf(z):
    """Standard normal c.d.f. through ``erfc`` (accurate in the lower tail)."""
    return 0.5 * special.erfc(-np.asarray(z, dtype=float) / _SQRT2)


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return _INV_SQRT2PI * np.exp(-0.5 * z * z)


@dataclass(frozen=True)
class FptLaw:
    """Law of the passage time to 0 started from ``y`` (distance / volatility)."""

    y: float

    def __post_init__(self):
        if not (self.y > 0 and math.isfinite(self.y)):
            raise ValueError(f"FptLaw needs a finite y > 0, got {self.y!r}")

    @classmethod
    def from_distance(cls, x: float, sigma: float) -> "FptLaw":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls(x / sigma)

    def pdf(self, s):
        return fpt_pdf(self, s)

    def cdf(self, t):
        return fpt_cdf(self, t)

    def sf(self, t):
        return fpt_sf(self, t)

    def quantile(self, p):
        return fpt_quantile(self, p)

    def expect(self, g, **kw):
        return fpt_expect(self, g, **kw)


def _y(law) -> float:
    return law.y if isinstance(law, FptLaw) else float(law)


def fpt_pdf(law, s):
    """Density ``y / (s sqrt(2 pi s)) exp(-y^2 / (2 s))``; zero for ``s <= 0``."""
    y = _y(law)
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = y / (sp * np.sqrt(2.0 * np.pi * sp)) * np.exp(-y * y / (2.0 * sp))
    return out if out.ndim else float(out)


def fpt_cdf(law, t):
    """``2 (1 - Phi(y / sqrt(t)))``; 0 at ``t = 0`` and 1 at ``t = inf``."""
    y = _y(law)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(divide="ignore"):
        out[pos] = special.erfc(y / np.sqrt(2.0 * t[pos]))
    return out if out.ndim else float(out)


def fpt_sf(law, t):
    """Survival ``1 - cdf`` computed as ``erf`` to avoid cancellation."""
    y = _y(law)
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    pos = t > 0
    with np.errstate(divide="ignore"):
        out[pos] = special.erf(y / np.sqrt(2.0 * t[pos]))
    return out if out.ndim else float(out)


def fpt_quantile(law, p):
    """Inverse c.d.f. ``t = y^2 / (2 erfcinv(p)^2)``, one Newton polish step.

    ``p = 1`` maps to ``inf``; ``p`` outside ``[0, 1]`` raises ``ValueError``.
    """
    y = _y(law)
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("probability outside [0, 1]")
    out = np.zeros_like(p)
    mid = (p > 0) & (p < 1)
    out[p == 1] = np.inf
    pm = p[mid]
    z = special.erfcinv(pm)
    # Newton on erfc(z) = p in z; erfcinv is already near machine precision
    z = z + (special.erfc(z) - pm) / (2.0 * _INV_SQRT2PI * _SQRT2 * np.exp(-z * z))
    out[mid] = y * y / (2.0 * z * z)
    return out if out.ndim else float(out)


def fpt_cdf_dx(x, sigma, s):
    """Derivative in the start distance of ``P(tau_{x/sigma} <= s)``.

    Equals ``-2 phi(x / (sigma sqrt(s))) / (sigma sqrt(s))``; zero for ``s <= 0``.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    x, s = np.broadcast_arrays(x, s)
    out = np.zeros(x.shape)
    pos = s > 0
    sd = sigma * np.sqrt(s[pos])
    out[pos] = -2.0 * norm_pdf(x[pos] / sd) / sd
    return out if out.ndim else float(out)


def fpt_expect(law, g, *, points=None, epsabs=1e-13, epsrel=1e-11, limit=200):
    """``E[g(tau_y)]`` via ``tau_y = y^2 / Z^2`` with ``Z`` half-normal.

    ``points`` are times at which ``g`` may jump; they are mapped to
    breakpoints in ``z`` so the quadrature never straddles a discontinuity.
    """
    y = _y(law)

    def integrand(z):
        if z <= 0.0:
            return 0.0
        return 2.0 * g(y * y / (z * z)) * _INV_SQRT2PI * math.exp(-0.5 * z * z)

    zmax = 40.0
    cuts = [0.0]
    if points is not None:
        for t in sorted(points, reverse=True):
            if t > 0 and math.isfinite(t):
                zc = y / math.sqrt(t)
                if 0.0 < zc < zmax:
                    cuts.append(zc)
    cuts = sorted(set(cuts)) + [zmax]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit)
        total += val
    return total
