"""Free resolvent of the gauged fiber operator on the infinite lattice.

In the gauged frame the free symbol is ``c - sum_j r_j cos p_j``.  At a
distance ``gap > 0`` outside the band both the resolvent below the band,
``(h0 - E)^-1``, and (after the staggering sign) the one above the band
reduce to

    g(n) = (2 pi)^-d  int exp(i p.n) / (gap + sum_j r_j (1 - cos p_j)) dp
         = int_0^inf exp(-gap t) prod_j ive(n_j, r_j t) dt.

Axes with ``r_j = 0`` contribute a Kronecker delta.  One active axis has the
closed form ``g(n) = rho^|n| / sqrt(gap (gap + 2 r))``; more active axes are
integrated numerically in the variable ``s = log t``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

__all__ = ["lattice_green", "resolvent_on_sites"]


def _green_1d(n: np.ndarray, r: float, gap: float) -> np.ndarray:
    s = math.sqrt(gap * (gap + 2.0 * r))
    rho = r / (gap + r + s)
    return rho ** np.abs(n) / s


def _ive(n: int, x: float) -> float:
    # scipy's ive returns nan for x beyond ~1e9; use the Hankel expansion there
    if x < 1e8:
        return float(special.ive(n, x))
    mu4 = 4.0 * n * n
    term, total = 1.0, 1.0
    for k in range(1, 8):
        term *= -(mu4 - (2 * k - 1) ** 2) / (k * 8.0 * x)
        total += term
    return total / math.sqrt(2.0 * math.pi * x)


def _green_quad(n: tuple, amps: tuple, gap: float, rtol: float) -> float:
    def integrand(s):
        t = math.exp(s)
        val = t * math.exp(-gap * t)
        for nj, rj in zip(n, amps):
            val *= _ive(nj, rj * t)
        return val

    upper = math.log(60.0 / gap)
    lower = -40.0
    # split at the crossover scales so quad sees smooth pieces
    marks = sorted({lower, upper, *(min(max(math.log(1.0 / rj), lower), upper) for rj in amps),
                    min(max(math.log(1.0 / gap), lower), upper)})
    total = 0.0
    for a, b in zip(marks[:-1], marks[1:]):
        if b > a:
            val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol, limit=400)
            total += val
    return total


def lattice_green(offsets, amplitudes, gap: float, rtol: float = 1e-11) -> np.ndarray:
    """Evaluate ``g(n)`` for an ``(M, d)`` array of lattice offsets."""
    if not gap > 0:
        raise ValueError("gap must be positive")
    offsets = np.abs(np.asarray(offsets, dtype=int))
    if offsets.ndim == 1:
        offsets = offsets[:, None]
    amps = np.asarray(amplitudes, dtype=float)
    active = amps > 0
    out = np.zeros(offsets.shape[0])
    # offsets along inactive axes must vanish
    alive = np.all(offsets[:, ~active] == 0, axis=1)
    act_off = offsets[:, active]
    act_amp = amps[active]
    if act_amp.size == 0:
        out[alive] = 1.0 / gap
        return out
    if act_amp.size == 1:
        out[alive] = _green_1d(act_off[alive, 0], float(act_amp[0]), gap)
        return out
    cache = {}
    for i in np.flatnonzero(alive):
        key = tuple(int(c) for c in act_off[i])
        if key not in cache:
            cache[key] = _green_quad(key, tuple(act_amp), gap, rtol)
        out[i] = cache[key]
    return out


def resolvent_on_sites(sites: np.ndarray, amplitudes, gap: float, side: str) -> np.ndarray:
    """Compressed free resolvent on a list of sites (gauged frame).

    ``side='below'`` gives ``(h0 - E)^-1`` with ``E = band_min - gap``;
    ``side='above'`` gives ``(E - h0)^-1`` with ``E = band_max + gap``.  Both
    are positive definite.
    """
    sites = np.asarray(sites, dtype=int)
    m = sites.shape[0]
    diff = (sites[:, None, :] - sites[None, :, :]).reshape(-1, sites.shape[1])
    uniq, inverse = np.unique(np.abs(diff), axis=0, return_inverse=True)
    vals = lattice_green(uniq, amplitudes, gap)[np.ravel(inverse)].reshape(m, m)
    if side == "above":
        parity = np.where(diff.sum(axis=1).reshape(m, m) % 2 == 0, 1.0, -1.0)
        vals = vals * parity
    elif side != "below":
        raise ValueError(f"side must be 'below' or 'above', got {side!r}")
    return (vals + vals.T) / 2.0
