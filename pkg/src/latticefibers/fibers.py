"""Fiber decomposition at degenerate quasi-momenta and the finite/infinite dichotomy.

For equal masses and ``k_j = pi`` on a direction set ``alpha`` the hopping
``mu(pi)`` vanishes, so ``h(k)`` splits into a direct sum over the
``alpha``-coordinates ``x_hat`` of ``(d - l)``-dimensional operators
``l mu(0) + h0(k_tilde) + v_{x_hat}``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .assembly import LatticeBox, assemble
from .dispersion import MassPair, QuasiMomentum, band_params, mu
from .errors import DecompositionError, HypothesisUncertifiedError, NoClosedFormError
from .potential import (
    Potential,
    classify_quasimomentum,
    containment_radius,
    hypothesis_certificate,
    restrict_to_fiber,
)
from .spectral import eigenvalues

__all__ = [
    "FiberFamily",
    "DichotomyVerdict",
    "decompose",
    "verify_block_structure",
    "fiber_spectrum",
    "rank_one_bound_state",
    "classify_dichotomy",
    "predicted_counts",
    "fiber_bound_states",
]


def _as_qm(k) -> QuasiMomentum:
    return k if isinstance(k, QuasiMomentum) else QuasiMomentum(k)


def _require_degenerate(masses: MassPair, k: QuasiMomentum):
    cls = classify_quasimomentum(k)
    if not (masses.equal and cls.l >= 1):
        raise DecompositionError("decomposition requires A(k)=0 (equal masses and some k_j = pi)")
    return cls


@dataclass(frozen=True)
class FiberFamily:
    """Fibers of ``h(k)`` for ``k`` on the boundary set of ``alpha``."""

    masses: MassPair
    k: QuasiMomentum
    alpha: tuple
    offset: float
    reduced_k: QuasiMomentum | None
    potential: Potential
    window: int

    @property
    def l(self) -> int:
        return len(self.alpha)

    @property
    def fiber_dim(self) -> int:
        return self.k.dim - self.l

    def fiber(self, x_hat) -> Potential:
        return restrict_to_fiber(self.potential, self.alpha, x_hat)

    def indices(self, window: int | None = None):
        """Fiber labels ``x_hat`` with ``|x_hat|_inf <= window``, lexicographic."""
        w = self.window if window is None else window
        return itertools.product(range(-w, w + 1), repeat=self.l)

    @property
    def fibers(self) -> dict:
        """Nonzero fiber potentials inside the working window."""
        out = {}
        for x_hat in self.indices():
            f = self.fiber(x_hat)
            if not f.is_zero:
                out[x_hat] = f
        return out

    def fiber_band(self) -> tuple:
        """Essential band of every fiber, shifted by the offset."""
        if self.reduced_k is None:
            return (self.offset, self.offset)
        b = band_params(self.masses, self.reduced_k)
        return (self.offset + b.band_min, self.offset + b.band_max)


def decompose(masses: MassPair, k, v: Potential, window: int = 10) -> FiberFamily:
    """Split ``h(k)`` into fibers; requires ``A(k) = 0``."""
    k = _as_qm(k)
    cls = _require_degenerate(masses, k)
    rest = [c for j, c in enumerate(k, start=1) if j not in cls.alpha]
    reduced = QuasiMomentum(rest) if rest else None
    offset = math.fsum([masses.r0] * cls.l)
    return FiberFamily(masses, k, cls.alpha, offset, reduced, v, window)


def _fiber_labels(box: LatticeBox, alpha: tuple) -> np.ndarray:
    pts = box.points
    cols = [j - 1 for j in alpha]
    # one integer label per x_hat
    return np.ravel_multi_index((pts[:, cols] + box.radius).T, (box.side,) * len(cols))


def verify_block_structure(masses: MassPair, k, v: Potential, radius: int) -> float:
    """Largest entry of the open-box ``h(k)`` coupling two different fibers.

    The box is reordered by fiber label; the returned value is exactly zero
    when the decomposition holds at matrix level.
    """
    k = _as_qm(k)
    cls = _require_degenerate(masses, k)
    op = assemble(masses, k, v, LatticeBox(k.dim, radius, "open"))
    labels = _fiber_labels(op.box, cls.alpha)
    perm = np.argsort(labels, kind="stable")
    mat = op.matrix[perm][:, perm].tocoo()
    lab = labels[perm]
    off = lab[mat.row] != lab[mat.col]
    return float(np.max(np.abs(mat.data[off]), initial=0.0))


def fiber_spectrum(family: FiberFamily, radius: int) -> np.ndarray:
    """Sorted union of ``offset + spec(fiber)`` over all fibers of the open box of radius ``R``.

    Each fiber is assembled on its own ``(d - l)``-dimensional open box.
    """
    vals = []
    for x_hat in family.indices(radius):
        f = family.fiber(x_hat)
        if family.reduced_k is None:
            vals.append(np.array([family.offset + f(())]))
            continue
        op = assemble(family.masses, family.reduced_k, f, LatticeBox(family.fiber_dim, radius, "open"))
        vals.append(family.offset + eigenvalues(op))
    return np.sort(np.concatenate(vals))


def rank_one_bound_state(center: float, amplitude: float, strength: float) -> float:
    """Eigenvalue of the 1D chain ``c - r cos p`` plus ``strength * delta_0`` outside its band.

    Equals ``c + sign(strength) * sqrt(r^2 + strength^2)``.
    """
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    if strength == 0:
        raise ValueError("strength must be nonzero")
    return center + math.copysign(math.hypot(amplitude, strength), strength)


def _displacement(r: float, lam: float) -> float:
    # sqrt(r^2 + lam^2) - r without cancellation
    return lam * lam / (math.hypot(r, lam) + r)


@dataclass(frozen=True)
class DichotomyVerdict:
    verdict: str
    regime: str
    witness: dict
    reason: str = ""

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "regime": self.regime, "witness": self.witness,
                "reason": self.reason}


def classify_dichotomy(masses: MassPair, k, v: Potential) -> DichotomyVerdict:
    """Finite or infinite discrete spectrum of ``h(k)`` under the decay hypothesis.

    ``A(k) != 0`` yields ``Finite`` with a reason instead of an error, so
    that whole k-grids can be swept.
    """
    k = _as_qm(k)
    band = band_params(masses, k)
    if band.ratio != 0.0:
        return DichotomyVerdict("Finite", "A(k)!=0", {"ratio": band.ratio}, "A(k)!=0")
    cert = hypothesis_certificate(v)
    if not (cert.holds_A and cert.holds_B):
        raise HypothesisUncertifiedError(f"hypothesis uncertified: {cert.reason}")
    cls = classify_quasimomentum(k)
    d, l = k.dim, cls.l
    if l < d - 2:
        return DichotomyVerdict("Finite", "l<d-2", {"alpha": list(cls.alpha), "l": l},
                                "fibers of dimension >= 3 carry finitely many eigenvalues in total")
    regime = "l=d" if l == d else "d-l in {1,2}"
    n = containment_radius(v, cls.alpha)
    if n is None:
        return DichotomyVerdict("Infinite", regime,
                                {"alpha": list(cls.alpha), "support_projection": "unbounded"},
                                "support escapes every strip over alpha")
    return DichotomyVerdict("Finite", regime, {"alpha": list(cls.alpha), "containment_radius": n},
                            f"support lies in the strip of half-width {n}")


def fiber_bound_states(family: FiberFamily, window: int) -> dict:
    """Closed-form discrete eigenvalue of every nonzero solvable fiber in the window.

    Returns a mapping ``x_hat -> eigenvalue`` (offset included).
    """
    out = {}
    if family.reduced_k is not None and family.fiber_dim != 1:
        raise NoClosedFormError("no closed form; use spectral-engine")
    r = abs(mu(family.masses, family.reduced_k[0])) if family.reduced_k is not None else 0.0
    for x_hat in family.indices(window):
        f = family.fiber(x_hat)
        if f.is_zero:
            continue
        if family.reduced_k is None:
            out[x_hat] = family.offset + f(())
            continue
        if not f.is_finite or len(f.table) != 1:
            raise NoClosedFormError(f"fiber {x_hat} is not a single-site potential; no closed form; "
                                    "use spectral-engine")
        (lam,) = f.table.values()
        out[x_hat] = family.offset + rank_one_bound_state(family.masses.r0, r, lam)
    return out


def predicted_counts(family: FiberFamily, delta: float, window: int) -> int:
    """Exact number of discrete eigenvalues at distance more than ``delta`` from the band.

    Only fibers with ``|x_hat|_inf <= window`` are counted; every such fiber
    must be 0-dimensional or a 1D chain with a single-site potential.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    count = 0
    if family.reduced_k is None:
        for x_hat in family.indices(window):
            if abs(family.fiber(x_hat)(())) > delta:
                count += 1
        return count
    if family.fiber_dim != 1:
        raise NoClosedFormError("no closed form; use spectral-engine")
    r = abs(mu(family.masses, family.reduced_k[0]))
    for x_hat in family.indices(window):
        f = family.fiber(x_hat)
        if f.is_zero:
            continue
        if not f.is_finite or len(f.table) != 1:
            raise NoClosedFormError(f"fiber {x_hat} is not a single-site potential; no closed form; "
                                    "use spectral-engine")
        (lam,) = f.table.values()
        if _displacement(r, lam) > delta:
            count += 1
    return count
