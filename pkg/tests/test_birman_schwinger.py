"""Birman-Schwinger matrices and counting on periodic boxes."""
import math

import numpy as np
import pytest

from latticefibers import (
    DegenerateThresholdError,
    LatticeBox,
    MassPair,
    Potential,
    assemble,
    band_params,
    bs_count,
    bs_matrix,
    eigenvalues,
    staggering_mirror,
)

EQUAL = MassPair(1.0, 1.0)


def test_single_site_matrix_tends_to_green_function():
    k, z = [0.7], -0.3
    b = band_params(EQUAL, k)
    box = LatticeBox(1, 1000, "periodic")
    bs = bs_matrix(EQUAL, k, Potential.delta(1, -1.0), z, box)
    assert bs.size == 1
    exact = 1 / math.sqrt((b.center - z) ** 2 - b.amplitudes[0] ** 2)
    assert bs.matrix[0, 0].real == pytest.approx(exact, abs=1e-6)


def test_counts_examples():
    box = LatticeBox(1, 30, "periodic")
    v = Potential.delta(1, -1.0)
    assert bs_count(bs_matrix(EQUAL, [0.0], v, -0.5, box)) == 0
    assert bs_count(bs_matrix(EQUAL, [0.0], v, -0.1, box)) == 1
    empty = bs_matrix(EQUAL, [0.0], Potential.zero(1), -0.1, box)
    assert empty.size == 0 and bs_count(empty) == 0


def test_far_z_gives_small_matrix():
    box = LatticeBox(2, 4, "periodic")
    v = Potential(2, {(0, 0): -1.0, (1, 0): -2.0})
    norms = [bs_matrix(EQUAL, [0.3, 0.1], v, z, box).norm() for z in (-1e2, -1e4, -1e6)]
    assert norms[0] > norms[1] > norms[2] and norms[2] < 1e-5


def test_eigenvalues_nonnegative_and_hermitian():
    rng = np.random.default_rng(0)
    box = LatticeBox(2, 4, "periodic")
    v = Potential(2, {tuple(rng.integers(-3, 4, 2)): -float(rng.uniform(0.1, 2)) for _ in range(5)})
    bs = bs_matrix(MassPair(0.8, 1.7), [1.0, -2.0], v, -0.5, box)
    np.testing.assert_allclose(bs.matrix, bs.matrix.conj().T, atol=1e-15)
    assert bs.eigenvalues().min() > -1e-14


def test_errors():
    box = LatticeBox(1, 5, "periodic")
    with pytest.raises(ValueError, match="indefinite"):
        bs_matrix(EQUAL, [0.0], Potential(1, {(0,): -1.0, (1,): 1.0}), -1.0, box)
    with pytest.raises(ValueError):
        bs_matrix(EQUAL, [0.0], Potential.delta(1, -1.0), 1.0, box)
    with pytest.raises(ValueError):
        bs_matrix(EQUAL, [0.0], Potential.delta(1, -1.0), -1.0, LatticeBox(1, 5))
    with pytest.raises(ValueError):
        bs_matrix(EQUAL, [0.0], Potential.delta(1, -1.0, (9,)), -1.0, box)


def test_degenerate_threshold():
    box = LatticeBox(1, 6, "periodic")
    v = Potential.delta(1, -1.0)
    z = eigenvalues(assemble(EQUAL, [0.2], v, box))[0]
    with pytest.raises(DegenerateThresholdError):
        bs_count(bs_matrix(EQUAL, [0.2], v, z, box))


def test_oracle_equivalence_and_monotonicity():
    rng = np.random.default_rng(1)
    for trial in range(10):
        d = 1 + trial % 2
        n = int(rng.choice([5, 9, 13]))
        box = LatticeBox(d, (n - 1) // 2, "periodic")
        m = MassPair(*rng.uniform(0.5, 2.0, 2))
        k = rng.uniform(-math.pi, math.pi, d)
        v = Potential(d, {tuple(rng.integers(-2, 3, d)): -float(rng.uniform(0.2, 3)) for _ in range(4)})
        direct = eigenvalues(assemble(m, k, v, box))
        band = band_params(m, k)
        zs = np.sort(rng.uniform(direct[0] - 1, band.band_min - 1e-6, 5))
        counts = [bs_count(bs_matrix(m, k, v, z, box)) for z in zs]
        assert counts == [int(np.sum(direct < z)) for z in zs]
        assert counts == sorted(counts)


def test_repulsive_side_matches_mirror():
    rng = np.random.default_rng(2)
    box = LatticeBox(1, 6, "periodic")
    open_box = LatticeBox(1, 6)
    v = Potential(1, {(0,): 1.5, (2,): 0.8})
    k = [0.9]
    band = band_params(EQUAL, k)
    for z in rng.uniform(band.band_max + 0.01, band.band_max + 1.5, 5):
        above = bs_count(bs_matrix(EQUAL, k, v, z, box))
        assert above == int(np.sum(eigenvalues(assemble(EQUAL, k, v, box)) > z))
    # same count as the attractive problem reflected through the open-box mirror
    op = assemble(EQUAL, k, v, open_box)
    mir = staggering_mirror(op)
    z = band.band_max + 0.2
    assert np.sum(eigenvalues(op) > z) == np.sum(eigenvalues(mir.operator) < mir.map(z))
