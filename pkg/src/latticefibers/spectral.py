"""Eigenvalues, discrete-spectrum counts and finite-volume convergence studies.

Two counting methods are available.

``open``
    Diagonalize ``h(k)`` on the open box ``{-R..R}^d`` and classify the
    eigenvalues against the analytic band.  Bound states whose localization
    length exceeds the box are lost, since truncation pulls the continuum
    edges inward.

``embedded``
    Keep the infinite lattice but truncate the potential to the box.  The
    number of eigenvalues beyond ``E`` then follows from the inertia of a
    small matrix on the potential's support (generalized Birman-Schwinger
    counting with the exact lattice resolvent), so weakly bound states
    next to the band edge are counted exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .assembly import DENSE_LIMIT, FiberOperator, LatticeBox, assemble, gauge_shift
from .dispersion import BandParams, MassPair, QuasiMomentum, band_params
from .errors import ConvergenceError
from .greens import resolvent_on_sites
from .potential import Potential

__all__ = [
    "SpectrumResult",
    "ConvergenceVerdict",
    "eigenvalues",
    "extremal_eigenvalues",
    "count_discrete",
    "count_beyond",
    "convergence_study",
    "DENSE_EIG_LIMIT",
    "EMBEDDED_SITE_LIMIT",
]

DENSE_EIG_LIMIT = 5000
EMBEDDED_SITE_LIMIT = 4000
# inertia eigenvalues within this of zero count as "on the threshold" (not past it)
INERTIA_TOL = 1e-12


@dataclass(frozen=True)
class SpectrumResult:
    """Eigenvalues classified against the band ``[band_min, band_max]`` with margin ``delta``.

    For the open method ``eigenvalues`` lists every computed eigenvalue
    (the whole spectrum on the dense path).  For the embedded method it lists
    the located discrete eigenvalues only, or is empty when location was
    skipped; the counts are exact either way.
    """

    eigenvalues: tuple
    band: BandParams
    margin: float
    below: tuple
    above: tuple
    n_below: int
    n_above: int
    method: str = "open"
    radius: int | None = None

    @property
    def counts(self) -> tuple:
        return (self.n_below, self.n_above)

    @property
    def total(self) -> int:
        return self.n_below + self.n_above

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "radius": self.radius,
            "margin": self.margin,
            "band_min": self.band.band_min,
            "band_max": self.band.band_max,
            "n_below": self.n_below,
            "n_above": self.n_above,
            "below": list(self.below),
            "above": list(self.above),
        }


def _classify(values, band: BandParams, delta: float, method: str, radius) -> SpectrumResult:
    values = tuple(sorted(float(x) for x in values))
    below = tuple(x for x in values if x < band.band_min - delta)
    above = tuple(x for x in values if x > band.band_max + delta)
    return SpectrumResult(values, band, delta, below, above, len(below), len(above), method, radius)


def _real_form(op: FiberOperator) -> FiberOperator:
    if op.gauge == "raw" and op.basis == "position" and op.box is not None:
        if op.box.boundary == "open" or not any(op.band.phases):
            return gauge_shift(op)
    return op


def _check_finite(op: FiberOperator) -> None:
    data = op.matrix.data
    if data.size and not np.all(np.isfinite(data)):
        raise ValueError("operator has non-finite entries")


def eigenvalues(op: FiberOperator) -> np.ndarray:
    """All eigenvalues, ascending, by dense diagonalization.

    Open position-space operators are gauged to real symmetric form first.
    """
    _check_finite(op)
    if op.size > DENSE_EIG_LIMIT:
        raise ValueError(f"operator of size {op.size} exceeds the dense limit {DENSE_EIG_LIMIT}; "
                         "use extremal_eigenvalues")
    op = _real_form(op)
    mat = op.dense()
    if not op.is_real:
        return la.eigvalsh(mat, check_finite=False)
    return la.eigvalsh(mat.real, check_finite=False)


def extremal_eigenvalues(op: FiberOperator, side: str, how_many: int, tol: float = 1e-10,
                         maxiter: int | None = None) -> np.ndarray:
    """The ``how_many`` lowest (``side='below'``) or highest (``'above'``) eigenvalues.

    Returned ordered from the most extreme inward.  Uses implicitly restarted
    Lanczos on the sparse matrix; tiny problems fall back to the dense path.
    """
    if how_many < 1:
        raise ValueError("how_many must be at least 1")
    if side not in ("below", "above"):
        raise ValueError(f"side must be 'below' or 'above', got {side!r}")
    _check_finite(op)
    op = _real_form(op)
    n = op.size
    if how_many >= n - 1 or n <= 64:
        vals = eigenvalues(op)
        vals = vals[:how_many] if side == "below" else vals[::-1][:how_many]
        return np.asarray(vals)
    mat = op.matrix if not op.is_real else op.matrix.real
    which = "SA" if side == "below" else "LA"
    ncv = min(n, max(2 * how_many + 1, how_many + 32))
    try:
        vals = spla.eigsh(mat, k=how_many, which=which, tol=tol, ncv=ncv, maxiter=maxiter,
                          return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        resid = float("nan")
        if exc.eigenvectors is not None and len(exc.eigenvalues):
            r = mat @ exc.eigenvectors - exc.eigenvectors * exc.eigenvalues
            resid = float(np.max(np.linalg.norm(r, axis=0)))
        raise ConvergenceError("Lanczos iteration did not converge", resid) from exc
    vals = np.sort(vals)
    return vals if side == "below" else vals[::-1]


def _open_eigs(op: FiberOperator, band: BandParams, delta: float) -> np.ndarray:
    if op.size <= DENSE_LIMIT:
        return eigenvalues(op)
    # grow the extremal window on each side until it reaches into the band
    found = []
    for side, edge in (("below", band.band_min - delta), ("above", band.band_max + delta)):
        how_many = 8
        while True:
            vals = extremal_eigenvalues(op, side, min(how_many, op.size - 2))
            inside = vals[-1] >= edge if side == "below" else vals[-1] <= edge
            if inside or how_many >= op.size - 2:
                found.extend(vals.tolist())
                break
            how_many *= 2
    return np.array(sorted(found))


# -------------------------------------------------------------------------
# embedded counting

@dataclass
class _Embedded:
    """Support data of ``v`` truncated to the box, in the gauged frame."""

    sites: np.ndarray
    values: np.ndarray
    band: BandParams

    @classmethod
    def build(cls, masses: MassPair, k: QuasiMomentum, v: Potential, radius: int) -> "_Embedded":
        band = band_params(masses, k)
        if v.is_finite:
            pts = [x for x in v.support if max((abs(c) for c in x), default=0) <= radius]
            vals = np.array([v.table[x] for x in pts])
            sites = np.array(pts, dtype=int).reshape(-1, v.dimension)
        else:
            box = LatticeBox(v.dimension, radius, "open")
            pts = box.points
            vals = v.values_at(pts)
            keep = vals != 0
            sites, vals = pts[keep], vals[keep]
        if sites.shape[0] > EMBEDDED_SITE_LIMIT:
            raise ValueError(f"{sites.shape[0]} support sites exceed the embedded limit {EMBEDDED_SITE_LIMIT}")
        return cls(sites, vals, band)

    def count(self, side: str, gap: float) -> int:
        """Eigenvalues below ``band_min - gap`` or above ``band_max + gap``."""
        if self.values.size == 0:
            return 0
        res = resolvent_on_sites(self.sites, self.band.amplitudes, gap, side)
        w = np.sqrt(np.abs(self.values))
        sgn = np.sign(self.values)
        m = w[:, None] * res * w[None, :]
        if side == "above":
            # n_+(H - E) = n_+(W R W - J) - n_-(V)
            ev = la.eigvalsh(m - np.diag(sgn), check_finite=False)
            return int(np.sum(ev > INERTIA_TOL)) - int(np.sum(sgn < 0))
        # n_-(H - E) = n_+(J + W G W) - n_+(V)
        ev = la.eigvalsh(m + np.diag(sgn), check_finite=False)
        return int(np.sum(ev > INERTIA_TOL)) - int(np.sum(sgn > 0))

    def bound(self) -> float:
        """Upper bound on ``|E - center|`` over the whole spectrum."""
        return self.band.band_max - self.band.center + float(np.max(np.abs(self.values), initial=0.0)) + 1.0

    def locate(self, side: str, delta: float, xtol: float = 1e-14) -> list:
        """Eigenvalues beyond the margin, by bisection on the counting function."""
        far = self.bound() + (self.band.band_max - self.band.band_min)
        out = []

        def rec(lo, hi, n_lo, n_hi):
            # gaps lo < hi with n(lo) >= n(hi) eigenvalues beyond each
            if n_lo == n_hi:
                return
            if hi - lo <= xtol * max(1.0, hi):
                out.extend([0.5 * (lo + hi)] * (n_lo - n_hi))
                return
            mid = 0.5 * (lo + hi)
            n_mid = self.count(side, mid)
            rec(lo, mid, n_lo, n_mid)
            rec(mid, hi, n_mid, n_hi)

        rec(delta, far, self.count(side, delta), 0)
        if side == "below":
            return [self.band.band_min - g for g in out]
        return [self.band.band_max + g for g in out]


def count_beyond(masses: MassPair, k, v: Potential, radius: int, side: str, gap: float) -> int:
    """Exact number of eigenvalues of ``h0(k) + v 1_box`` beyond ``band edge -/+ gap``."""
    k = k if isinstance(k, QuasiMomentum) else QuasiMomentum(k)
    return _Embedded.build(masses, k, v, radius).count(side, gap)


def count_discrete(masses: MassPair, k, v: Potential, radius: int, delta: float,
                   method: str = "open", locate: bool = True) -> SpectrumResult:
    """Classify the spectrum of ``h(k)`` truncated at radius ``R`` against the band.

    Parameters
    ----------
    method : {'open', 'embedded'}
        See the module docstring.
    locate : bool
        Embedded method only: also locate the discrete eigenvalues by
        bisection (counts are exact regardless).
    """
    if not delta > 0:
        raise ValueError("margin delta must be positive")
    k = k if isinstance(k, QuasiMomentum) else QuasiMomentum(k)
    if method == "open":
        op = assemble(masses, k, v, LatticeBox(k.dim, radius, "open"))
        vals = _open_eigs(op, op.band, delta)
        return _classify(vals, op.band, delta, "open", radius)
    if method != "embedded":
        raise ValueError(f"unknown method {method!r}")
    emb = _Embedded.build(masses, k, v, radius)
    n_below = emb.count("below", delta)
    n_above = emb.count("above", delta)
    if not locate:
        return SpectrumResult((), emb.band, delta, (), (), n_below, n_above, "embedded", radius)
    below = tuple(sorted(emb.locate("below", delta))) if n_below else ()
    above = tuple(sorted(emb.locate("above", delta))) if n_above else ()
    return SpectrumResult(tuple(sorted(below + above)), emb.band, delta, below, above,
                          n_below, n_above, "embedded", radius)


@dataclass(frozen=True)
class ConvergenceVerdict:
    """Counts along a refinement ladder of ``(radius, margin)`` pairs.

    ``verdict`` is a heuristic label: ``Growing`` when the total count
    increases strictly over the last three rungs, else ``Stable`` when the last
    two totals agree, else ``Inconclusive``.
    """

    radii: tuple
    margins: tuple
    counts: tuple
    verdict: str
    method: str
    grid: dict = field(default_factory=dict)
    spectra: tuple = ()

    @property
    def totals(self) -> tuple:
        return tuple(a + b for a, b in self.counts)

    @property
    def stable_count(self) -> int | None:
        return self.totals[-1] if self.verdict == "Stable" else None

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "margins": list(self.margins),
            "counts": [list(c) for c in self.counts],
            "totals": list(self.totals),
            "verdict": self.verdict,
            "stable_count": self.stable_count,
            "method": self.method,
            "heuristic": True,
            "grid": [{"radius": r, "margin": dl, "n_below": c[0], "n_above": c[1]}
                     for (r, dl), c in sorted(self.grid.items())],
        }


def _verdict(totals: Sequence[int]) -> str:
    if len(totals) >= 3 and totals[-3] < totals[-2] < totals[-1]:
        return "Growing"
    if totals[-1] == totals[-2]:
        return "Stable"
    return "Inconclusive"


def convergence_study(masses: MassPair, k, v: Potential, radii: Sequence[int], margins,
                      method: str = "embedded", grid: bool = False, locate: bool = False
                      ) -> ConvergenceVerdict:
    """Run :func:`count_discrete` along a ladder of radii and margins.

    ``margins`` is either one value used at every radius or a sequence paired
    with ``radii`` (refining the box and shrinking the margin together, which
    is how accumulation at a band edge shows up).  With ``grid=True`` every
    radius is also combined with every distinct margin.
    """
    radii = tuple(int(r) for r in radii)
    if len(radii) < 3:
        raise ValueError("convergence study needs at least three radii")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    if np.ndim(margins) == 0:
        margins = (float(margins),) * len(radii)
    margins = tuple(float(m) for m in margins)
    if len(margins) != len(radii):
        raise ValueError("margins must be a scalar or match the radii in length")
    cache = {}

    def run(r, dl):
        if (r, dl) not in cache:
            cache[(r, dl)] = count_discrete(masses, k, v, r, dl, method=method, locate=locate)
        return cache[(r, dl)]

    spectra = tuple(run(r, dl) for r, dl in zip(radii, margins))
    if grid:
        for r in radii:
            for dl in sorted(set(margins)):
                run(r, dl)
    counts = tuple(s.counts for s in spectra)
    table = {key: res.counts for key, res in cache.items()}
    return ConvergenceVerdict(radii, margins, counts, _verdict([a + b for a, b in counts]),
                              method, table, spectra)
