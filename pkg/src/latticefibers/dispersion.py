"""Fourier symbol of the two-particle fiber Hamiltonian and its band data.

The free fiber operator at total quasi-momentum ``k`` is a Laurent-Toeplitz
operator with symbol

    E_k(p) = eps(p) / m1 + eps(k - p) / m2,   eps(p) = sum_j (1 - cos p_j),

which can be rewritten as a shifted cosine sum
``E_k(p + phase) = d * mu(0) - sum_j r_j cos p_j`` with ``r_j = |mu(k_j)|``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "MassPair",
    "QuasiMomentum",
    "BandParams",
    "SandwichResult",
    "reduce_angle",
    "mu",
    "epsilon",
    "dispersion_value",
    "band_params",
    "sandwich_check",
]

TWO_PI = 2.0 * math.pi


def reduce_angle(y: float) -> float:
    """Reduce an angle into the half-open interval (-pi, pi]."""
    y = float(y)
    if not math.isfinite(y):
        raise ValueError(f"angle must be finite, got {y!r}")
    r = math.remainder(y, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class MassPair:
    """Masses of the two particles."""

    m1: float
    m2: float

    def __post_init__(self):
        for name in ("m1", "m2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite real, got {value!r}")
        object.__setattr__(self, "m1", float(self.m1))
        object.__setattr__(self, "m2", float(self.m2))

    @property
    def equal(self) -> bool:
        # exact comparison on purpose: A(k) = 0 is a measure-zero event
        return self.m1 == self.m2

    @property
    def r0(self) -> float:
        """``mu(0) = 1/m1 + 1/m2``."""
        return 1.0 / self.m1 + 1.0 / self.m2


@dataclass(frozen=True, init=False)
class QuasiMomentum:
    """A point of the torus ``(-pi, pi]^d``.

    Components are reduced on construction, so ``QuasiMomentum([-pi])`` and
    ``QuasiMomentum([pi])`` compare equal.
    """

    components: tuple

    def __init__(self, components: Sequence[float]):
        comps = tuple(reduce_angle(c) for c in np.atleast_1d(np.asarray(components, dtype=float)))
        if len(comps) < 1:
            raise ValueError("quasi-momentum needs at least one component")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __add__(self, other):
        other = other if isinstance(other, QuasiMomentum) else QuasiMomentum(other)
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return QuasiMomentum([a + b for a, b in zip(self, other)])

    def __neg__(self):
        return QuasiMomentum([-a for a in self])

    def __sub__(self, other):
        other = other if isinstance(other, QuasiMomentum) else QuasiMomentum(other)
        return self + (-other)

    def as_array(self) -> np.ndarray:
        return np.array(self.components)

    @property
    def pi_directions(self) -> tuple:
        """1-based indices of the components that equal pi exactly."""
        return tuple(j + 1 for j, c in enumerate(self.components) if c == math.pi)

    @classmethod
    def zero(cls, dim: int) -> "QuasiMomentum":
        return cls([0.0] * dim)

    @classmethod
    def corner(cls, dim: int) -> "QuasiMomentum":
        """The point ``(pi, ..., pi)``."""
        return cls([math.pi] * dim)


def _as_qm(k) -> QuasiMomentum:
    return k if isinstance(k, QuasiMomentum) else QuasiMomentum(k)


@dataclass(frozen=True)
class BandParams:
    """Shifted-cosine data of ``E_k`` and the essential-spectrum edges.

    Attributes
    ----------
    amplitudes : tuple of float
        ``r_j = |mu(k_j)|``.
    phases : tuple of float
        ``p_j`` such that ``E_k(p + phases) = center - sum_j r_j cos p_j``.
    band_min, band_max : float
        ``center -/+ sum_j r_j``.
    ratio : float
        ``A(k) = min_j r_j / mu(0)``; zero exactly when some hopping vanishes.
    center : float
        ``d * mu(0)``.
    """

    amplitudes: tuple
    phases: tuple
    band_min: float
    band_max: float
    ratio: float
    center: float

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    @property
    def width(self) -> float:
        return self.band_max - self.band_min

    def to_dict(self) -> dict:
        return {
            "amplitudes": list(self.amplitudes),
            "phases": list(self.phases),
            "band_min": self.band_min,
            "band_max": self.band_max,
            "ratio": self.ratio,
            "center": self.center,
        }


def mu(masses: MassPair, y: float) -> complex:
    """``mu(y) = 1/m1 + exp(-i y)/m2``.

    ``y = pi`` and ``y = 0`` are evaluated exactly so that equal masses give
    ``mu(pi) == 0`` with no rounding residue.
    """
    y = float(y)
    if not math.isfinite(y):
        raise ValueError(f"y must be finite, got {y!r}")
    ry = reduce_angle(y)
    if ry == math.pi:
        return complex((masses.m2 - masses.m1) / (masses.m1 * masses.m2), 0.0)
    if ry == 0.0:
        return complex(masses.r0, 0.0)
    return 1.0 / masses.m1 + cmath.exp(-1j * ry) / masses.m2


def epsilon(p) -> float:
    """``sum_i (1 - cos p_i)``; lies in ``[0, 2d]``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return float(np.sum(1.0 - np.cos(p)))


def dispersion_value(masses: MassPair, k, p) -> float:
    """Evaluate ``E_k(p)``."""
    k = _as_qm(k)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape[-1] != k.dim:
        raise ValueError(f"dimension mismatch: k has {k.dim} components, p has {p.shape[-1]}")
    return epsilon(p) / masses.m1 + epsilon(k.as_array() - p) / masses.m2


def dispersion_grid(masses: MassPair, k, points: np.ndarray) -> np.ndarray:
    """Vectorized ``E_k`` over an ``(n, d)`` array of momenta."""
    k = _as_qm(k)
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[1] != k.dim:
        raise ValueError(f"dimension mismatch: k has {k.dim} components, points have {points.shape[1]}")
    kk = k.as_array()
    return (np.sum(1.0 - np.cos(points), axis=1) / masses.m1
            + np.sum(1.0 - np.cos(kk - points), axis=1) / masses.m2)


def band_params(masses: MassPair, k) -> BandParams:
    """Amplitudes, phases, band edges and the ratio ``A(k)``."""
    k = _as_qm(k)
    mus = [mu(masses, kj) for kj in k]
    amps = tuple(abs(m) for m in mus)
    # p_j = -arg mu(k_j); zero amplitude gets phase 0 (the cosine term vanishes).
    # math.atan2 rather than cmath.phase, which raises on subnormal imaginary parts
    phases = tuple(0.0 if a == 0.0 else reduce_angle(-math.atan2(m.imag, m.real)) for m, a in zip(mus, amps))
    r0 = masses.r0
    center = math.fsum([r0] * k.dim)
    total = math.fsum(amps)
    return BandParams(
        amplitudes=amps,
        phases=phases,
        band_min=center - total,
        band_max=center + total,
        ratio=min(amps) / r0,
        center=center,
    )


@dataclass(frozen=True)
class SandwichResult:
    lower_ok: bool
    upper_ok: bool | None  # None: A(k) = 0, bound not applicable
    lower_slack: float
    upper_slack: float | None

    @property
    def slack(self) -> tuple:
        return (self.lower_slack, self.upper_slack)


def sandwich_check(masses: MassPair, k, p, tol: float = 1e-12) -> SandwichResult:
    """Check ``E_k(p + p(k)) - E_min <= E_0(p) <= (E_k(p + p(k)) - E_min) / A(k)``.

    Both sides are evaluated independently from the symbol; slacks are the
    right-hand side minus the left-hand side.  A bound holds when its slack is
    at least ``-tol`` times the size of the compared terms (the upper bound
    divides by ``A(k)``, which amplifies rounding near the degenerate set).  With ``A(k) = 0`` the upper bound is reported as not
    applicable (``None``).
    """
    k = _as_qm(k)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    band = band_params(masses, k)
    e_shift = dispersion_value(masses, k, p + np.asarray(band.phases))
    shifted = e_shift - band.band_min
    free = dispersion_value(masses, QuasiMomentum.zero(k.dim), p)
    lower = free - shifted
    lower_ok = lower >= -tol * max(1.0, free)
    if band.ratio == 0.0:
        return SandwichResult(lower_ok, None, lower, None)
    # absolute rounding of `shifted` is O(eps * |E|); dividing by A(k) scales it up
    scale = max(1.0, free, (abs(e_shift) + abs(band.band_min)) / band.ratio)
    upper = shifted / band.ratio - free
    return SandwichResult(lower_ok, upper >= -tol * scale, lower, upper)
