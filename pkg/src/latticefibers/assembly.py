"""Finite matrix representations of the fiber Hamiltonian ``h(k) = h0(k) + v``.

Position-space assembly on a box ``{-R..R}^d`` uses

    h0(k) = 1/2 sum_j (2 mu(0) - mu(k_j) T(e_j) - conj(mu(k_j)) T(e_j)^*),

so the diagonal is ``d mu(0) + v(x)`` and the entry ``(x, x + e_j)`` is
``-mu(k_j) / 2``.  Open boxes drop hops that leave the box; periodic boxes
wrap them with the same coefficient and no extra phase.

The momentum-space (Friedrichs) form is the discrete Fourier conjugate of
the periodic box: multiplication by ``E_k`` on the grid ``q = 2 pi m / N``
plus the convolution kernel built from ``v``.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .dispersion import BandParams, MassPair, QuasiMomentum, band_params, dispersion_grid, mu
from .potential import Potential

__all__ = [
    "LatticeBox",
    "FiberOperator",
    "assemble",
    "assemble_friedrichs",
    "momentum_grid",
    "gauge_shift",
    "stagger_signs",
    "staggering_mirror",
    "MirrorResult",
    "dump_operator",
    "DENSE_LIMIT",
]

# below this size the dense path is used by default
DENSE_LIMIT = 2000


@dataclass(frozen=True)
class LatticeBox:
    """The box ``{-R..R}^d`` with lexicographic enumeration (last axis fastest)."""

    dimension: int
    radius: int
    boundary: str = "open"

    def __post_init__(self):
        if self.dimension < 0:
            raise ValueError("dimension must be nonnegative")
        if self.radius < 1:
            raise ValueError(f"box radius must be at least 1, got {self.radius}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def size(self) -> int:
        return self.side ** self.dimension

    @property
    def points(self) -> np.ndarray:
        """``(size, d)`` integer array of box points in index order."""
        axis = np.arange(-self.radius, self.radius + 1)
        if self.dimension == 0:
            return np.zeros((1, 0), dtype=int)
        grids = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def index(self, x) -> int:
        x = np.atleast_1d(np.asarray(x, dtype=int))
        if x.shape != (self.dimension,):
            raise ValueError(f"point {x} has wrong dimension")
        if np.any(np.abs(x) > self.radius):
            raise IndexError(f"point {tuple(x)} outside box of radius {self.radius}")
        idx = 0
        for c in x:
            idx = idx * self.side + int(c) + self.radius
        return idx

    def point(self, index: int) -> tuple:
        if not 0 <= index < self.size:
            raise IndexError(index)
        coords = []
        for _ in range(self.dimension):
            index, rem = divmod(index, self.side)
            coords.append(rem - self.radius)
        return tuple(reversed(coords))

    def neighbor_pairs(self, axis: int):
        """Index arrays ``(i, j)`` with ``point(j) = point(i) + e_axis`` (0-based axis).

        Periodic boxes include the wrapped pairs.
        """
        side = self.side
        stride = side ** (self.dimension - 1 - axis)
        idx = np.arange(self.size)
        coord = (idx // stride) % side
        inner = coord < side - 1
        i = idx[inner]
        j = i + stride
        if self.boundary == "periodic":
            wrap = idx[~inner]
            i = np.concatenate([i, wrap])
            j = np.concatenate([j, wrap - (side - 1) * stride])
        return i, j


@dataclass(frozen=True)
class FiberOperator:
    """Hermitian matrix of ``h(k)`` on a finite box or momentum grid.

    The free part and the interaction are stored separately;
    :attr:`matrix` is their sum.
    """

    box: LatticeBox | None
    free: sp.csr_matrix
    interaction: sp.csr_matrix
    band: BandParams
    masses: MassPair
    k: QuasiMomentum
    potential: Potential
    gauge: str = "raw"
    basis: str = "position"
    grid_points: int | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def matrix(self) -> sp.csr_matrix:
        if "matrix" not in self._cache:
            self._cache["matrix"] = (self.free + self.interaction).tocsr()
        return self._cache["matrix"]

    @property
    def size(self) -> int:
        return self.free.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.free.data) and not np.iscomplexobj(self.interaction.data)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def potential_id(self) -> str:
        return self.potential.name or repr(self.potential)

    def metadata(self) -> dict:
        return {
            "masses": [self.masses.m1, self.masses.m2],
            "k": list(self.k.components),
            "band": self.band.to_dict(),
            "gauge": self.gauge,
            "basis": self.basis,
            "boundary": self.box.boundary if self.box is not None else None,
            "radius": self.box.radius if self.box is not None else None,
            "grid_points": self.grid_points,
            "potential": self.potential_id,
        }


def _hermitian_from_upper(n: int, rows, cols, vals, dtype) -> sp.csr_matrix:
    # lower triangle is the exact conjugate mirror of the stored entries
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    vals = np.asarray(vals, dtype=dtype)
    all_rows = np.concatenate([rows, cols])
    all_cols = np.concatenate([cols, rows])
    all_vals = np.concatenate([vals, np.conj(vals)])
    return sp.csr_matrix((all_vals, (all_rows, all_cols)), shape=(n, n), dtype=dtype)


def _check_dims(k: QuasiMomentum, v: Potential, dim: int) -> None:
    if k.dim != dim or v.dimension != dim:
        raise ValueError(f"dimension mismatch: k has {k.dim}, potential {v.dimension}, box {dim}")


def assemble(masses: MassPair, k, v: Potential, box: LatticeBox) -> FiberOperator:
    """Assemble ``h0(k) + v`` on a position-space box (raw gauge, complex)."""
    k = k if isinstance(k, QuasiMomentum) else QuasiMomentum(k)
    _check_dims(k, v, box.dimension)
    band = band_params(masses, k)
    n = box.size
    rows, cols, vals = [], [], []
    for axis, kj in enumerate(k):
        # zero hops (mu(pi) with equal masses) stay as explicit entries
        hop = -mu(masses, kj) / 2.0
        i, j = box.neighbor_pairs(axis)
        rows.append(i)
        cols.append(j)
        vals.append(np.full(i.size, hop, dtype=complex))
    if rows:
        hops = _hermitian_from_upper(n, np.concatenate(rows), np.concatenate(cols),
                                     np.concatenate(vals), complex)
    else:
        hops = sp.csr_matrix((n, n), dtype=complex)
    free = (hops + sp.identity(n, dtype=complex, format="csr") * band.center).tocsr()
    vdiag = v.values_at(box.points)
    interaction = sp.diags(vdiag.astype(complex), format="csr")
    return FiberOperator(box, free, interaction, band, masses, k, v)


def momentum_grid(n_points: int) -> np.ndarray:
    """Momenta ``2 pi m / N`` reduced into ``(-pi, pi]``, ascending."""
    m = np.arange(-((n_points - 1) // 2), n_points // 2 + 1)
    return 2.0 * np.pi * m / n_points


def _grid_sites(n_points: int) -> np.ndarray:
    return np.arange(-((n_points - 1) // 2), n_points // 2 + 1)


def _product(axis: np.ndarray, dim: int) -> np.ndarray:
    if dim == 0:
        return np.zeros((1, 0))
    return np.array(list(itertools.product(axis, repeat=dim)))


def assemble_friedrichs(masses: MassPair, k, v: Potential, n_points: int) -> FiberOperator:
    """Momentum-grid matrix: ``diag(E_k(q))`` plus ``N^-d sum_x v(x) exp(-i (q - q', x))``.

    For odd ``N = 2R + 1`` this is unitarily equivalent to
    ``assemble(..., LatticeBox(d, R, 'periodic'))``.
    """
    k = k if isinstance(k, QuasiMomentum) else QuasiMomentum(k)
    if n_points < 2:
        raise ValueError("need at least two grid points per axis")
    if not v.is_finite:
        raise ValueError("momentum-space assembly needs a finitely supported potential")
    d = k.dim
    _check_dims(k, v, d)
    if n_points % 2 == 0:
        warnings.warn("even grid size: no matching position-space box, momentum grid is asymmetric",
                      stacklevel=2)
    sites = _grid_sites(n_points)
    lo, hi = sites[0], sites[-1]
    for x in v.support:
        if any(c < lo or c > hi for c in x):
            raise ValueError(f"support point {x} lies outside the dual box [{lo}, {hi}]^{d}")
    band = band_params(masses, k)
    q = _product(momentum_grid(n_points), d)
    n = q.shape[0]
    free = sp.diags(dispersion_grid(masses, k, q).astype(complex), format="csr")
    if v.is_zero:
        interaction = sp.csr_matrix((n, n), dtype=complex)
    else:
        xs = np.array(v.support, dtype=float)
        vals = np.array([v.table[x] for x in v.support])
        f = np.exp(-1j * q @ xs.T) / n_points ** (d / 2.0)
        kern = (f * vals) @ f.conj().T
        kern = (kern + kern.conj().T) / 2.0
        interaction = sp.csr_matrix(kern)
    box = LatticeBox(d, (n_points - 1) // 2, "periodic") if n_points % 2 == 1 else None
    return FiberOperator(box, free, interaction, band, masses, k, v, basis="momentum",
                         grid_points=n_points)


def _phase_vector(op: FiberOperator) -> np.ndarray:
    return np.exp(1j * (op.box.points @ np.asarray(op.band.phases)))


def gauge_shift(op: FiberOperator, check_tol: float = 1e-12) -> FiberOperator:
    """Conjugate by ``diag(exp(i (x, p(k))))`` so every hop becomes ``-r_j / 2``.

    The result is real symmetric.  Periodic boxes are accepted only when all
    phases vanish, since the wrapped hop would otherwise pick up a phase.
    """
    if op.gauge != "raw":
        raise ValueError("operator is already phase-gauged")
    if op.basis != "position":
        raise ValueError("gauge shift applies to position-space operators")
    if op.box.boundary == "periodic" and any(op.band.phases):
        raise ValueError("gauge shift on a periodic box breaks the wrap-around hop")
    u = sp.diags(_phase_vector(op), format="csr")
    free = (u.conj().T @ op.free @ u).tocsr()
    scale = max(1.0, abs(free).max())
    if free.nnz and np.abs(free.data.imag).max() > check_tol * scale:
        raise ArithmeticError("gauged free part is not real; phase data inconsistent")
    free = free.real.tocsr()
    free = ((free + free.T) / 2.0).tocsr()
    interaction = op.interaction.real.tocsr()
    return replace(op, free=free, interaction=interaction, gauge="phase-gauged", _cache={})


def stagger_signs(box: LatticeBox) -> np.ndarray:
    """``(-1)^(x_1 + ... + x_d)`` on the box points."""
    return np.where(box.points.sum(axis=1) % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True)
class MirrorResult:
    """Mirrored operator and the affine map ``lambda -> offset + scale * lambda``."""

    operator: FiberOperator
    scale: float
    offset: float

    def map(self, values):
        return self.offset + self.scale * np.asarray(values)


def staggering_mirror(op: FiberOperator) -> MirrorResult:
    """Operator for ``-v`` together with the spectral reflection about ``d mu(0)``.

    With ``U`` the diagonal sign matrix, ``U (h0 + v) U^-1 = 2 d mu(0) - (h0 - v)``
    entrywise.  Periodic boxes have an odd side and break the sign pattern, so
    only open boxes are accepted.
    """
    if op.basis != "position" or op.box.boundary != "open":
        raise ValueError("staggering mirror needs an open position-space box")
    mirrored = replace(op, interaction=(-op.interaction).tocsr(), potential=-op.potential, _cache={})
    return MirrorResult(mirrored, -1.0, 2.0 * op.band.center)


def dump_operator(op: FiberOperator, path) -> tuple:
    """Write ``<path>.mtx`` (Matrix Market coordinate) and ``<path>.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mtx = path.with_suffix(".mtx")
    side = path.with_suffix(".json")
    scipy.io.mmwrite(str(mtx), op.matrix.tocoo(), field="complex" if not op.is_real else "real",
                     symmetry="hermitian" if not op.is_real else "symmetric")
    with open(side, "w") as fh:
        json.dump(op.metadata(), fh, indent=1, sort_keys=True)
    return mtx, side
