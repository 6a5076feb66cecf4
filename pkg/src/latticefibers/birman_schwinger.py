"""Birman-Schwinger operator on periodic boxes.

On a periodic box the free resolvent is diagonal in the plane-wave basis
``q = 2 pi m / N``, so the compressed operator

    K(z) = |v|^1/2 (h0(k) - z)^-1 |v|^1/2      (v <= 0, z below the band)
    K(z) = v^1/2 (z - h0(k))^-1 v^1/2          (v >= 0, z above the band)

is exact on the support of ``v``.  The number of eigenvalues of ``K(z)``
greater than one equals the number of eigenvalues of ``h(k)`` beyond ``z``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .assembly import LatticeBox, _product, momentum_grid
from .dispersion import MassPair, QuasiMomentum, band_params, dispersion_grid
from .errors import DegenerateThresholdError
from .potential import Potential

__all__ = ["BSOperator", "bs_matrix", "bs_count"]

THRESHOLD_TOL = 1e-10


@dataclass(frozen=True)
class BSOperator:
    z: float
    matrix: np.ndarray
    side: str
    sites: tuple
    masses: MassPair
    k: QuasiMomentum
    box: LatticeBox

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        if self.size == 0:
            return np.zeros(0)
        return la.eigvalsh(self.matrix, check_finite=False)

    def norm(self) -> float:
        ev = self.eigenvalues()
        return float(np.max(np.abs(ev), initial=0.0))


def bs_matrix(masses: MassPair, k, v: Potential, z: float, box: LatticeBox,
              side: str | None = None) -> BSOperator:
    """Compressed Birman-Schwinger matrix of a single-sign finitely supported ``v``.

    ``side`` defaults to ``'below'`` for ``v <= 0`` and ``'above'`` for ``v >= 0``.
    """
    k = k if isinstance(k, QuasiMomentum) else QuasiMomentum(k)
    if box.boundary != "periodic":
        raise ValueError("Birman-Schwinger matrix is implemented on periodic boxes only")
    if k.dim != box.dimension or v.dimension != box.dimension:
        raise ValueError("dimension mismatch between k, potential and box")
    if not v.is_finite:
        raise ValueError("Birman-Schwinger matrix needs a finitely supported potential")
    sgn = v.sign()
    if sgn is None:
        raise ValueError("principle not implemented for indefinite v")
    if side is None:
        side = "above" if sgn > 0 else "below"
    if side not in ("below", "above"):
        raise ValueError(f"side must be 'below' or 'above', got {side!r}")
    if (side == "below" and sgn > 0) or (side == "above" and sgn < 0):
        raise ValueError(f"potential sign does not match side={side!r}")
    band = band_params(masses, k)
    if side == "below" and not z < band.band_min:
        raise ValueError(f"z={z} is not below the band [{band.band_min}, {band.band_max}]")
    if side == "above" and not z > band.band_max:
        raise ValueError(f"z={z} is not above the band [{band.band_min}, {band.band_max}]")
    sites = tuple(x for x in v.support if max((abs(c) for c in x), default=0) <= box.radius)
    if len(sites) != len(v.support):
        raise ValueError("potential support does not fit in the box")
    if not sites:
        return BSOperator(float(z), np.zeros((0, 0)), side, (), masses, k, box)
    n = box.side
    q = _product(momentum_grid(n), box.dimension)
    energies = dispersion_grid(masses, k, q)
    weight = 1.0 / (energies - z) if side == "below" else 1.0 / (z - energies)
    xs = np.array(sites, dtype=float)
    amp = np.sqrt(np.abs(np.array([v.table[x] for x in sites])))
    # plane waves restricted to the support, scaled by |v|^1/2
    f = np.exp(-1j * q @ xs.T) * amp[None, :] / n ** (box.dimension / 2.0)
    mat = (f.conj().T * weight) @ f
    mat = (mat + mat.conj().T) / 2.0
    return BSOperator(float(z), mat, side, sites, masses, k, box)


def bs_count(bs: BSOperator) -> int:
    """Number of Birman-Schwinger eigenvalues >= 1, i.e. eigenvalues of ``h(k)`` beyond ``z``.

    Raises
    ------
    DegenerateThresholdError
        If an eigenvalue lies within ``1e-10`` of one (``z`` is, to working
        precision, an eigenvalue of ``h(k)``).
    """
    ev = bs.eigenvalues()
    if np.any(np.abs(ev - 1.0) < THRESHOLD_TOL):
        raise DegenerateThresholdError("counting threshold degenerate; perturb z")
    return int(np.sum(ev >= 1.0))
