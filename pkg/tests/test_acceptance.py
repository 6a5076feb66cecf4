"""Acceptance criteria, each at its stated tolerance and runtime budget."""
import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from latticefibers import (
    LatticeBox,
    MassPair,
    Potential,
    QuasiMomentum,
    appendix_potential,
    assemble,
    assemble_friedrichs,
    band_params,
    bs_count,
    bs_matrix,
    convergence_study,
    count_discrete,
    decompose,
    eigenvalues,
    fiber_bound_states,
    fiber_spectrum,
    predicted_counts,
    rank_one_bound_state,
    sandwich_check,
    stagger_signs,
    staggering_mirror,
    verify_block_structure,
)
from latticefibers.dispersion import dispersion_grid

EQUAL = MassPair(1.0, 1.0)
# mpmath enumeration (60 digits) of #{|x1| <= R : sqrt(r^2 + exp(-2|x1|)) - r > delta}, r = 2 cos(1/2)
APPENDIX_LADDER = {(10, 1e-4): 7, (20, 1e-8): 17, (40, 1e-12): 27}


def random_table(rng, dim, radius, n_sites, low=-2.0, high=2.0):
    table = {}
    n_sites = min(n_sites, (2 * radius + 1) ** dim)
    while len(table) < n_sites:
        table[tuple(int(c) for c in rng.integers(-radius, radius + 1, dim))] = float(rng.uniform(low, high))
    return table


def separable_grid_extrema(masses, k, axis):
    # E_k is a sum of per-axis terms, so the full product grid is an outer sum
    terms = [(1 - np.cos(axis)) / masses.m1 + (1 - np.cos(kj - axis)) / masses.m2 for kj in k]
    total = terms[0]
    for t in terms[1:]:
        total = np.add.outer(total, t)
    flat_min, flat_max = np.argmin(total), np.argmax(total)
    return (total.min(), np.unravel_index(flat_min, total.shape),
            total.max(), np.unravel_index(flat_max, total.shape))


def refined_extrema(masses, k, n=201):
    coarse = np.linspace(-math.pi, math.pi, n)
    h = coarse[1] - coarse[0]
    lo, i_lo, hi, i_hi = separable_grid_extrema(masses, k, coarse)
    out = []
    for centers, pick in ((i_lo, np.min), (i_hi, np.max)):
        # one refinement level: n points per axis across the neighbouring cells
        axes = [np.linspace(coarse[i] - h, coarse[i] + h, n) for i in centers]
        terms = [(1 - np.cos(a)) / masses.m1 + (1 - np.cos(kj - a)) / masses.m2 for a, kj in zip(axes, k)]
        total = terms[0]
        for t in terms[1:]:
            total = np.add.outer(total, t)
        out.append(pick(total))
    return lo, hi, out[0], out[1], h


def test_criterion_01_band_formulas(criterion):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_refined, worst_bound_excess = 0.0, -np.inf
    for i in range(200):
        d = 1 + i % 3
        m = MassPair(*rng.uniform(0.5, 2.0, 2))
        k = QuasiMomentum(rng.uniform(-math.pi, math.pi, d))
        b = band_params(m, k)
        lo, hi, lo_ref, hi_ref, h = refined_extrema(m, k.components)
        worst_refined = max(worst_refined, abs(lo_ref - b.band_min), abs(hi_ref - b.band_max))
        # coarse grid: never beyond the edges, and within the cell bound sum_j r_j h^2 / 8
        bound = sum(b.amplitudes) * h * h / 8
        worst_bound_excess = max(worst_bound_excess, lo - b.band_min - bound, b.band_max - hi - bound,
                                 b.band_min - lo - 1e-12, hi - b.band_max - 1e-12)
    worst_identity = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        m = MassPair(*rng.uniform(0.5, 2.0, 2))
        k = rng.uniform(-math.pi, math.pi, d)
        b = band_params(m, k)
        p = rng.uniform(-math.pi, math.pi, (100, d))
        lhs = dispersion_grid(m, k, p + np.array(b.phases))
        rhs = b.center - np.cos(p) @ np.array(b.amplitudes)
        worst_identity = max(worst_identity, float(np.max(np.abs(lhs - rhs))))
    elapsed = time.perf_counter() - t0
    ok = worst_refined <= 1e-4 and worst_bound_excess <= 0 and worst_identity <= 1e-12 and elapsed < 30
    criterion(1, ok, f"grid err {worst_refined:.1e} <= 1e-4, identity err {worst_identity:.1e} <= 1e-12, "
                     f"{elapsed:.1f}s < 30s")


def test_criterion_02_sandwich(criterion):
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    worst, checked, degenerate_ok = np.inf, 0, True
    while checked < 10_000:
        d = int(rng.integers(1, 4))
        equal = rng.random() < 0.3
        m1 = float(rng.uniform(0.3, 3.0))
        m = MassPair(m1, m1 if equal else float(rng.uniform(0.3, 3.0)))
        k = rng.uniform(-math.pi, math.pi, d)
        if rng.random() < 0.2:
            k[rng.integers(d)] = math.pi
        p = rng.uniform(-math.pi, math.pi, d)
        res = sandwich_check(m, k, p)
        ratio = band_params(m, k).ratio
        expect_zero = m.equal and any(x == math.pi for x in k)
        degenerate_ok &= (ratio == 0.0) == expect_zero
        if ratio == 0.0:
            degenerate_ok &= res.upper_ok is None and res.lower_ok
            continue
        checked += 1
        if not (res.lower_ok and res.upper_ok):
            worst = -1.0
        worst = min(worst, res.lower_slack / max(1.0, abs(res.lower_slack)))
    elapsed = time.perf_counter() - t0
    ok = worst >= -1e-12 and degenerate_ok and elapsed < 5
    criterion(2, ok, f"{checked} samples with A(k)>0 hold, A(k)=0 detection exact={degenerate_ok}, "
                     f"{elapsed:.1f}s < 5s")


def test_criterion_03_fourier_duality(criterion):
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    worst = 0.0
    for d in (1, 2):
        for n in (5, 9, 13):
            r = (n - 1) // 2
            for _ in range(10):
                m = MassPair(*rng.uniform(0.5, 2.0, 2))
                k = rng.uniform(-math.pi, math.pi, d)
                v = Potential(d, random_table(rng, d, r, int(rng.integers(1, 6))))
                a = eigenvalues(assemble(m, k, v, LatticeBox(d, r, "periodic")))
                b = eigenvalues(assemble_friedrichs(m, k, v, n))
                worst = max(worst, float(np.max(np.abs(a - b))))
    elapsed = time.perf_counter() - t0
    criterion(3, worst <= 1e-10 and elapsed < 60, f"max eigenvalue gap {worst:.1e} <= 1e-10, {elapsed:.1f}s < 60s")


def test_criterion_04_staggering_mirror(criterion):
    rng = np.random.default_rng(104)
    t0 = time.perf_counter()
    worst_entry, worst_eig = 0.0, 0.0
    for d in (1, 2):
        for radius in (1, 4, 7, 10):
            m = MassPair(*rng.uniform(0.5, 2.0, 2))
            k = rng.uniform(-math.pi, math.pi, d)
            v = Potential(d, random_table(rng, d, radius, 4))
            op = assemble(m, k, v, LatticeBox(d, radius))
            mir = staggering_mirror(op)
            s = stagger_signs(op.box)
            lhs = (s[:, None] * op.dense()) * s[None, :]
            rhs = 2 * op.band.center * np.eye(op.size) - mir.operator.dense()
            worst_entry = max(worst_entry, float(np.max(np.abs(lhs - rhs))))
            mapped = np.sort(mir.map(eigenvalues(mir.operator)))
            worst_eig = max(worst_eig, float(np.max(np.abs(eigenvalues(op) - mapped))))
    elapsed = time.perf_counter() - t0
    ok = worst_entry == 0.0 and worst_eig <= 1e-10 and elapsed < 30
    criterion(4, ok, f"entrywise residual {worst_entry:g} == 0, eigen mirror {worst_eig:.1e} <= 1e-10, "
                     f"{elapsed:.1f}s < 30s")


def test_criterion_05_rank_one_oracle(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for kval in (0.0, 1.0, 2.0):
        for lam in (1.0, -1.0, math.exp(-1), -math.exp(-1), math.exp(-2), -math.exp(-2)):
            op = assemble(EQUAL, [kval], Potential.delta(1, lam), LatticeBox(1, 200))
            ev = eigenvalues(op)
            got = ev[0] if lam < 0 else ev[-1]
            want = rank_one_bound_state(op.band.center, op.band.amplitudes[0], lam)
            worst = max(worst, abs(got - want))
    elapsed = time.perf_counter() - t0
    criterion(5, worst <= 1e-8 and elapsed < 10, f"max deviation {worst:.1e} <= 1e-8, {elapsed:.1f}s < 10s")


def test_criterion_06_appendix_dichotomy(criterion):
    t0 = time.perf_counter()
    v = appendix_potential()
    radii, margins = (10, 20, 40), (1e-4, 1e-8, 1e-12)

    # (a) k = (pi, 1.0): growing ladder, counts equal to the fiber oracle
    ka = [math.pi, 1.0]
    grow = convergence_study(EQUAL, ka, v, radii, margins, locate=True)
    fam = decompose(EQUAL, ka, v, window=max(radii))
    oracle = [predicted_counts(fam, dl, r) for r, dl in zip(radii, margins)]
    frozen = [APPENDIX_LADDER[(r, dl)] for r, dl in zip(radii, margins)]
    band_max = band_params(EQUAL, ka).band_max
    above = sorted(grow.spectra[-1].above, reverse=True)
    distinct = sorted(set(above), reverse=True)
    states = fiber_bound_states(fam, 13)
    located_ok = np.allclose(distinct, sorted(set(states.values()), reverse=True), rtol=0, atol=1e-12)
    approach = (all(e > band_max for e in above) and all(a > b for a, b in zip(distinct, distinct[1:]))
                and distinct[-1] - band_max < 1e-9)
    ok_a = (grow.verdict == "Growing" and list(grow.totals) == oracle == frozen
            and all(c[0] == 0 for c in grow.counts) and approach and located_ok
            and band_max == pytest.approx(4 + 2 * abs(math.cos(0.5)), abs=1e-15))

    # (b) k = (1.0, pi): one bound state from the x2 = 0 fiber, stable in R and delta
    kb = [1.0, math.pi]
    stable = convergence_study(EQUAL, kb, v, radii, margins, grid=True, locate=True)
    g = stable.grid
    same = {g[(r, dl)] for r in (20, 40) for dl in (1e-8, 1e-12)}
    chain = assemble(EQUAL, [1.0], Potential(1, {(x,): math.exp(-abs(x)) for x in range(-60, 61)}),
                     LatticeBox(1, 200))
    reference = 2.0 + eigenvalues(chain)[-1]
    located = stable.spectra[-1].above
    ok_b = (stable.verdict == "Stable" and len(same) == 1 and located == pytest.approx([reference], abs=1e-9))
    elapsed = time.perf_counter() - t0
    criterion(6, ok_a and ok_b and elapsed < 300,
              f"(a) {grow.verdict} totals {list(grow.totals)} oracle {oracle}, above band_max={band_max:.7f}; "
              f"(b) {stable.verdict} count {stable.totals[-1]}, E={located[0]:.9f}; {elapsed:.1f}s < 300s")


def test_criterion_07_block_structure(criterion):
    rng = np.random.default_rng(107)
    t0 = time.perf_counter()
    worst_block = 0.0
    for i in range(20):
        d = 2 + i % 2
        k = rng.uniform(-math.pi, math.pi, d)
        alpha = rng.random(d) < 0.5
        alpha[rng.integers(d)] = True
        k[alpha] = math.pi
        m = float(rng.uniform(0.5, 2.0))
        radius = int(rng.integers(2, 7)) if d == 2 else int(rng.integers(2, 5))
        v = Potential(d, random_table(rng, d, radius, 6))
        worst_block = max(worst_block, verify_block_structure(MassPair(m, m), k, v, radius))
    worst_union = 0.0
    for radius in (4, 8, 12):
        k = [math.pi, float(rng.uniform(-math.pi, math.pi))]
        v = Potential(2, random_table(rng, 2, radius, 8))
        full = eigenvalues(assemble(EQUAL, k, v, LatticeBox(2, radius)))
        union = fiber_spectrum(decompose(EQUAL, k, v), radius)
        worst_union = max(worst_union, float(np.max(np.abs(full - union))))
    elapsed = time.perf_counter() - t0
    ok = worst_block == 0.0 and worst_union <= 1e-12 and elapsed < 120
    criterion(7, ok, f"off-block max {worst_block:g} == 0, spectral union {worst_union:.1e} <= 1e-12, "
                     f"{elapsed:.1f}s < 120s")


def test_criterion_08_birman_schwinger(criterion):
    rng = np.random.default_rng(108)
    t0 = time.perf_counter()
    mismatches, total = 0, 0
    for i in range(30):
        d = 1 + i % 2
        n = int(rng.choice([5, 9, 13]))
        box = LatticeBox(d, (n - 1) // 2, "periodic")
        m = MassPair(*rng.uniform(0.5, 2.0, 2))
        k = rng.uniform(-math.pi, math.pi, d)
        v = Potential(d, random_table(rng, d, box.radius, int(rng.integers(1, 5)), -3.0, -0.1))
        direct = eigenvalues(assemble(m, k, v, box))
        band_min = band_params(m, k).band_min
        zs = []
        while len(zs) < 5:
            z = float(rng.uniform(direct[0] - 0.5, band_min))
            if np.min(np.abs(direct - z)) > 1e-6 and z < band_min:
                zs.append(z)
        for z in zs:
            total += 1
            mismatches += bs_count(bs_matrix(m, k, v, z, box)) != int(np.sum(direct < z))
    elapsed = time.perf_counter() - t0
    criterion(8, mismatches == 0 and elapsed < 120,
              f"{total - mismatches}/{total} counts agree exactly, {elapsed:.1f}s < 120s")


def test_criterion_09_corner_spectrum(criterion):
    rng = np.random.default_rng(109)
    worst, count_ok = 0.0, True
    for i in range(20):
        d = 2 + i % 2
        mass = float(rng.uniform(0.5, 2.0))
        masses = MassPair(mass, mass)
        v = Potential(d, random_table(rng, d, 2, int(rng.integers(1, 6))))
        delta = 1e-6
        res = count_discrete(masses, [math.pi] * d, v, 3, delta)
        expected = sorted(d * masses.r0 + val for val in v.table.values() if abs(val) > delta)
        got = sorted(res.below + res.above)
        count_ok &= len(got) == len(expected)
        if count_ok:
            worst = max(worst, max((abs(a - b) for a, b in zip(got, expected)), default=0.0))
    criterion(9, count_ok and worst <= 1e-12, f"all nonzero sites counted={count_ok}, max error {worst:.1e} <= 1e-12")


def test_criterion_10_bound_state_existence(criterion):
    rng = np.random.default_rng(110)
    t0 = time.perf_counter()
    empty = 0
    for i in range(50):
        d = 1 + i % 2
        m = MassPair(*rng.uniform(0.5, 2.0, 2))
        k = rng.uniform(-math.pi, math.pi, d)
        assert band_params(m, k).ratio > 0
        sign = rng.choice([-1.0, 1.0])
        v = Potential(d, {x: sign * abs(val) for x, val in
                          random_table(rng, d, 2, int(rng.integers(1, 5)), 0.5, 2.0).items()})
        res = count_discrete(m, k, v, 60, 1e-10, method="embedded", locate=False)
        empty += res.total < 1
    elapsed = time.perf_counter() - t0
    criterion(10, empty == 0 and elapsed < 180,
              f"{50 - empty}/50 potentials bind at R=60, delta=1e-10, {elapsed:.1f}s < 180s")


def test_criterion_11_cli_determinism(criterion, tmp_path):
    exe = shutil.which("latticefibers")
    cmd = [exe] if exe else [sys.executable, "-m", "latticefibers.cli"]
    blobs = []
    for sub in ("first", "second"):
        subprocess.run(cmd + ["dichotomy", "--config", "appendix.json", "--stable-output",
                              "--out", str(tmp_path / sub)], check=True, capture_output=True)
        blobs.append((tmp_path / sub / "report.json").read_bytes())
    criterion(11, blobs[0] == blobs[1], f"report.json byte-identical across runs ({len(blobs[0])} bytes)")
