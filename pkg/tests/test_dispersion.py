"""Symbol, band edges, shifted-cosine form and the sandwich bounds."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticefibers import (
    MassPair,
    QuasiMomentum,
    band_params,
    dispersion_value,
    epsilon,
    mu,
    reduce_angle,
    sandwich_check,
)
from latticefibers.dispersion import dispersion_grid

angles = st.floats(-10.0, 10.0, allow_nan=False)
masses_st = st.tuples(st.floats(0.1, 10.0), st.floats(0.1, 10.0)).map(lambda t: MassPair(*t))


def test_mu_examples():
    assert mu(MassPair(1, 1), 0.0) == 2 + 0j
    assert mu(MassPair(1, 1), math.pi) == 0j
    assert mu(MassPair(1, 2), math.pi) == 0.5 + 0j


@given(masses_st, angles)
def test_mu_modulus_is_amplitude(masses, y):
    m = mu(masses, y)
    direct = 1 / masses.m1 + np.exp(-1j * y) / masses.m2
    assert abs(m - direct) < 1e-12
    assert abs(abs(m) - band_params(masses, [y]).amplitudes[0]) < 1e-15


def test_epsilon_examples():
    assert epsilon([0.0, 0.0]) == 0.0
    assert epsilon([math.pi, math.pi]) == 4.0
    assert epsilon([math.pi / 2, math.pi / 3]) == pytest.approx(1.5, abs=1e-15)


@given(st.lists(angles, min_size=1, max_size=4))
def test_epsilon_range(p):
    assert 0.0 <= epsilon(p) <= 2 * len(p)


def test_dispersion_examples():
    assert dispersion_value(MassPair(1, 1), [0.0, 0.0], [math.pi, math.pi]) == 8.0
    assert dispersion_value(MassPair(1, 2), [0.0], [math.pi]) == 3.0
    rng = np.random.default_rng(0)
    for p in rng.uniform(-math.pi, math.pi, size=(50, 2)):
        assert dispersion_value(MassPair(1, 1), [math.pi, math.pi], p) == pytest.approx(4.0, abs=1e-13)


def test_dispersion_dimension_mismatch():
    with pytest.raises(ValueError):
        dispersion_value(MassPair(1, 1), [0.0, 0.0], [0.1])


def test_band_params_examples():
    b = band_params(MassPair(1, 1), [math.pi / 2])
    assert b.amplitudes[0] == pytest.approx(math.sqrt(2), abs=1e-15)
    assert (b.band_min, b.band_max) == pytest.approx((2 - math.sqrt(2), 2 + math.sqrt(2)), abs=1e-15)

    b = band_params(MassPair(1, 1), [math.pi, 0.0])
    assert b.amplitudes == (0.0, 2.0)
    assert b.ratio == 0.0
    assert (b.band_min, b.band_max) == (2.0, 6.0)

    b = band_params(MassPair(1, 2), [math.pi, 0.0])
    assert b.amplitudes == pytest.approx((0.5, 1.5), abs=1e-15)
    assert b.ratio == pytest.approx(1 / 3, abs=1e-15)


def test_band_edges_against_grid_scan():
    rng = np.random.default_rng(1)
    for _ in range(10):
        d = int(rng.integers(1, 3))
        m = MassPair(*rng.uniform(0.3, 3.0, 2))
        k = QuasiMomentum(rng.uniform(-math.pi, math.pi, d))
        axis = np.linspace(-math.pi, math.pi, 401)
        grid = np.array(list(itertools.product(axis, repeat=d)))
        vals = dispersion_grid(m, k, grid)
        b = band_params(m, k)
        assert vals.min() == pytest.approx(b.band_min, abs=1e-4)
        assert vals.max() == pytest.approx(b.band_max, abs=1e-4)
        assert vals.min() >= b.band_min - 1e-12
        assert vals.max() <= b.band_max + 1e-12


@settings(max_examples=200)
@given(masses_st, st.lists(angles, min_size=1, max_size=3), st.data())
def test_shifted_cosine_identity(masses, k, data):
    b = band_params(masses, k)
    p = np.array(data.draw(st.lists(angles, min_size=len(k), max_size=len(k))))
    lhs = dispersion_value(masses, k, p + np.array(b.phases))
    rhs = b.center - sum(r * math.cos(x) for r, x in zip(b.amplitudes, p))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, b.center)


def test_phases_lie_in_torus():
    rng = np.random.default_rng(2)
    for _ in range(100):
        b = band_params(MassPair(*rng.uniform(0.1, 5, 2)), rng.uniform(-4, 4, 3))
        assert all(-math.pi < p <= math.pi for p in b.phases)


def test_ratio_zero_iff_equal_masses_and_pi_component():
    rng = np.random.default_rng(3)
    for _ in range(300):
        equal = rng.random() < 0.5
        m1 = float(rng.uniform(0.2, 4))
        m = MassPair(m1, m1 if equal else m1 * float(rng.uniform(1.01, 3)))
        k = rng.uniform(-math.pi, math.pi, 3)
        if rng.random() < 0.5:
            k[rng.integers(3)] = rng.choice([math.pi, -math.pi])
        has_pi = any(reduce_angle(x) == math.pi for x in k)
        b = band_params(m, k)
        assert (b.ratio == 0.0) == (equal and has_pi)
        assert 0.0 <= b.ratio <= 1.0


def test_quasimomentum_wraps():
    k = QuasiMomentum([-math.pi, 3 * math.pi / 2])
    assert k.components[0] == math.pi
    assert k.components[1] == pytest.approx(-math.pi / 2)
    assert QuasiMomentum([-math.pi]) == QuasiMomentum([math.pi])
    s = QuasiMomentum([3.0]) + QuasiMomentum([3.0])
    assert s.components[0] == pytest.approx(6.0 - 2 * math.pi)
    assert k.pi_directions == (1,)


def test_mass_validation():
    for bad in [(0, 1), (-1, 1), (1, math.inf), (1, math.nan)]:
        with pytest.raises(ValueError):
            MassPair(*bad)


def test_sandwich_examples():
    rng = np.random.default_rng(4)
    for p in rng.uniform(-math.pi, math.pi, size=(20, 2)):
        res = sandwich_check(MassPair(1, 1), [0.0, 0.0], p)
        assert res.lower_ok and res.upper_ok
        assert res.slack == (0.0, 0.0)
    res = sandwich_check(MassPair(1, 2), [math.pi], [1.3])
    assert res.lower_ok and res.upper_ok
    res = sandwich_check(MassPair(1, 1), [math.pi, 0.0], rng.uniform(-3, 3, 2))
    assert res.lower_ok and res.upper_ok is None and res.upper_slack is None


@settings(max_examples=300)
@given(masses_st, st.lists(angles, min_size=1, max_size=3), st.data())
def test_sandwich_property(masses, k, data):
    p = data.draw(st.lists(angles, min_size=len(k), max_size=len(k)))
    res = sandwich_check(masses, k, p)
    assert res.lower_ok
    if band_params(masses, k).ratio > 0:
        assert res.upper_ok


def test_subnormal_quasimomentum_has_finite_phase():
    b = band_params(MassPair(1.0, 1.0), [5e-324])
    assert b.phases == (0.0,)
    assert b.band_min == 0.0 and b.band_max == 4.0
