from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlmimo_gan.channel_model import (
    LoSGeometry, NLoSPath, SystemGeometry, element_offsets, field_boundaries, full_channel,
    los_channel, los_pairwise_distance, los_pairwise_distance_expanded, nlos_channel,
    scatterer_distance, steering_vector,
)
from xlmimo_gan.errors import GeometryError, ParameterError

mp.mp.dps = 50


def mp_scatterer_distance(dc, theta, k, n, ds):
    delta = mp.mpf(2 * k - n - 1) / 2
    dc, ds = mp.mpf(dc), mp.mpf(ds)
    return mp.sqrt(dc**2 + ds**2 * delta**2 - 2 * ds * dc * delta * mp.sin(mp.mpf(theta)))


def mp_phase(length, lam):
    """2 pi * frac(length / lam) in extended precision."""
    cycles = mp.mpf(length) / mp.mpf(lam)
    return float(2 * mp.pi * (cycles - mp.floor(cycles)))


def wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


# -- geometry -----------------------------------------------------------------

def test_geometry_defaults():
    g = SystemGeometry(n_t=8, n_r=4, f_c=50e9)
    assert g.wavelength == pytest.approx(2.998e8 / 50e9, rel=1e-15)
    assert g.d == g.wavelength / 2


def test_geometry_rejects_inconsistent_wavelength():
    SystemGeometry(f_c=50e9, wavelength=0.006)  # 0.07% off nominal, accepted
    with pytest.raises(ParameterError):
        SystemGeometry(f_c=50e9, wavelength=0.0061)


@pytest.mark.parametrize("kw", [dict(n_t=1), dict(n_r=0), dict(f_c=-1.0), dict(d=0.0)])
def test_geometry_rejects_invalid(kw):
    with pytest.raises(ParameterError):
        SystemGeometry(**kw)


def test_path_and_los_validation():
    with pytest.raises(GeometryError):
        NLoSPath(0.1, 0.1, -1.0, 5.0, 1.0)
    with pytest.raises(GeometryError):
        NLoSPath(np.pi / 2, 0.1, 1.0, 5.0, 1.0)
    with pytest.raises(GeometryError):
        LoSGeometry(r=0.0)


# -- scatterer distance --------------------------------------------------------

def test_scatterer_distance_center_element_exact():
    for theta in np.linspace(-1.5, 1.5, 31):
        assert scatterer_distance(20.0, theta, 129, 257, 0.003) == 20.0


def test_scatterer_distance_collinear():
    # delta = 3 for element 7 of n = 7
    assert scatterer_distance(20.0, np.pi / 2, 7, 7, 0.003) == pytest.approx(19.991, abs=1e-12)


def test_scatterer_distance_extended_precision_oracle():
    got = scatterer_distance(20.0, 0.1, 138, 256, 0.003)
    want = mp_scatterer_distance(20.0, 0.1, 138, 256, 0.003)
    assert abs(got - float(want)) <= 1e-15 * float(want)


def test_scatterer_distance_errors():
    with pytest.raises(GeometryError):
        scatterer_distance(0.0, 0.1, 1, 4, 0.003)
    with pytest.raises(IndexError):
        scatterer_distance(1.0, 0.1, 5, 4, 0.003)
    with pytest.raises(IndexError):
        scatterer_distance(1.0, 0.1, 0, 4, 0.003)


# -- steering vectors ---------------------------------------------------------

def test_steering_unit_norm_many():
    rng = np.random.default_rng(1)
    g = SystemGeometry.full()
    for _ in range(1000):
        n = int(rng.integers(2, 300))
        b = steering_vector(rng.uniform(-1.5, 1.5), rng.uniform(0.5, 500.0), g, n=n)
        assert abs(np.linalg.norm(b) - 1) < 1e-12


def test_steering_matches_extended_precision_phase():
    g = SystemGeometry.desk()
    theta, dc = 0.37, 23.456
    b = steering_vector(theta, dc, g, side="tx")
    n = g.n_t
    for k in range(1, n + 1):
        dk = mp_scatterer_distance(dc, theta, k, n, g.d)
        want = mp_phase(dk - dc, g.wavelength)
        assert abs(wrap(np.angle(b[k - 1]) - want)) < 1e-9


def test_steering_side_selects_length():
    g = SystemGeometry.desk()
    assert steering_vector(0.1, 5.0, g, "tx").shape == (64,)
    assert steering_vector(0.1, 5.0, g, "rx").shape == (32,)


def test_steering_two_elements_broadside_equal():
    g = SystemGeometry.desk()
    b = steering_vector(0.0, 3.3, g, n=2)
    assert b[0] == b[1]


@pytest.mark.parametrize("factor", [1e4, 1e6])
def test_steering_far_field_limit(factor):
    g = SystemGeometry.full()
    dc = factor * field_boundaries(g).rd
    for theta in np.linspace(-1.2, 1.2, 9):
        b = steering_vector(theta, dc, g, n=g.n_t)
        planar = np.exp(-1j * np.pi * element_offsets(g.n_t) * np.sin(theta))
        assert np.max(np.abs(wrap(np.angle(b * np.sqrt(g.n_t)) - np.angle(planar)))) < 1e-3


# -- LoS ----------------------------------------------------------------------

@given(st.floats(0.5, 100), st.floats(-1.4, 1.4), st.floats(-1.4, 1.4))
@settings(max_examples=100, deadline=None)
def test_los_reference_pair_is_r(r, theta, phi):
    assert los_pairwise_distance(LoSGeometry(r, theta, phi), 1, 1, SystemGeometry.desk()) == \
        pytest.approx(r, rel=1e-15)


def test_los_equal_offsets_broadside():
    g = SystemGeometry.desk()
    los = LoSGeometry(7.0)
    for u in (1, 5, 17, 32):
        assert los_pairwise_distance(los, u, u, g) == pytest.approx(7.0, rel=1e-15)


def test_los_two_forms_agree():
    rng = np.random.default_rng(2)
    g = SystemGeometry.full()
    for _ in range(1000):
        los = LoSGeometry(rng.uniform(2, 200), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2))
        u, v = int(rng.integers(1, g.n_t + 1)), int(rng.integers(1, g.n_r + 1))
        a = los_pairwise_distance(los, u, v, g)
        b = los_pairwise_distance_expanded(los, u, v, g)
        assert abs(a - b) <= 1e-12 * a


def test_los_overlap_rejected():
    g = SystemGeometry.desk()
    with pytest.raises(GeometryError):
        los_pairwise_distance(LoSGeometry(0.01), 1, 1, g)
    with pytest.raises(GeometryError):
        los_channel(LoSGeometry(0.05, theta=np.pi / 2), g)


def test_los_channel_magnitude_and_shape():
    g = SystemGeometry.desk()
    los = LoSGeometry(5.0, 0.3, -0.2)
    H = los_channel(los, g)
    assert H.shape == (g.n_r, g.n_t)
    for v in (1, 9, 32):
        for u in (1, 30, 64):
            assert abs(H[v - 1, u - 1]) == pytest.approx(1 / los_pairwise_distance(los, u, v, g),
                                                       rel=1e-13)


def test_los_channel_reference_entry_oracle():
    g = SystemGeometry.full()
    H = los_channel(LoSGeometry(40.0), g)
    want = complex(mp.exp(-1j * mp.mpf(mp_phase(40, g.wavelength))) / 40)
    assert abs(H[0, 0] - want) < 1e-15


def test_los_channel_phase_oracle_random_entries():
    g = SystemGeometry.desk()
    los = LoSGeometry(9.5, 0.4, 0.1)
    H = los_channel(los, g)
    rng = np.random.default_rng(3)
    for _ in range(20):
        u, v = int(rng.integers(1, 65)), int(rng.integers(1, 33))
        d1, d2 = mp.mpf(u - 1) * mp.mpf(g.d), mp.mpf(v - 1) * mp.mpf(g.d)
        r, th, ph = mp.mpf(los.r), mp.mpf(los.theta), mp.mpf(los.phi)
        dist = mp.sqrt((r * mp.cos(th) - d2 * mp.sin(ph))**2 + (r * mp.sin(th) + d2 * mp.cos(ph) - d1)**2)
        want = complex(mp.exp(-1j * mp.mpf(mp_phase(dist, g.wavelength))) / dist)
        assert abs(H[v - 1, u - 1] - want) < 1e-12 * abs(want)


# -- NLoS and full channel ----------------------------------------------------

def brute_force_nlos(paths, g):
    H = np.zeros((g.n_r, g.n_t), dtype=complex)
    for p in paths:
        for v in range(1, g.n_r + 1):
            for u in range(1, g.n_t + 1):
                dr = mp_scatterer_distance(p.d_r, p.theta_r, v, g.n_r, g.d)
                dt = mp_scatterer_distance(p.d_t, p.theta_t, u, g.n_t, g.d)
                ph_r = mp_phase(dr - p.d_r, g.wavelength)
                ph_t = mp_phase(dt - p.d_t, g.wavelength)
                H[v - 1, u - 1] += p.alpha * np.exp(1j * (ph_r - ph_t)) / math.sqrt(g.n_r * g.n_t)
    return H


def random_paths(rng, L):
    return [NLoSPath(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(10, 130),
                     rng.uniform(10, 130), complex(rng.normal(), rng.normal()) / math.sqrt(2))
            for _ in range(L)]


def test_nlos_matches_triple_loop_oracle():
    g = SystemGeometry(n_t=16, n_r=8, f_c=50e9, wavelength=0.006)
    paths = random_paths(np.random.default_rng(4), 3)
    H = nlos_channel(paths, g)
    ref = brute_force_nlos(paths, g)
    assert np.max(np.abs(H - ref)) < 1e-12
    assert abs(np.linalg.norm(H) - np.linalg.norm(ref)) < 1e-12 * np.linalg.norm(ref)


def test_nlos_single_unit_path_rank_one_unit_norm():
    g = SystemGeometry.desk()
    H = nlos_channel([NLoSPath(0.2, -0.3, 20.0, 30.0, 1.0)], g)
    assert np.linalg.norm(H) == pytest.approx(1.0, abs=1e-12)
    s = np.linalg.svd(H, compute_uv=False)
    assert s[1] < 1e-12


def test_nlos_empty_is_zero():
    g = SystemGeometry.desk()
    assert not np.any(nlos_channel([], g))


def test_full_channel_additivity_and_recompute():
    g = SystemGeometry.desk()
    rng = np.random.default_rng(5)
    los = LoSGeometry(6.0, 0.2, 0.0)
    paths = random_paths(rng, 3)
    inst = full_channel(los, paths, g)
    H_los = los_channel(los, g)
    assert np.max(np.abs(inst.H - H_los - nlos_channel(paths, g))) <= 1e-12 * np.max(np.abs(inst.H))
    assert np.linalg.norm(inst.recompute() - inst.H) <= 1e-12 * np.linalg.norm(inst.H)
    assert np.array_equal(full_channel(los, [], g).H, H_los)


# -- field boundaries ----------------------------------------------------------

def test_field_boundaries_canonical():
    fb = field_boundaries(SystemGeometry.full())
    assert fb.ard == pytest.approx(196.608, rel=1e-12)
    assert fb.rd == pytest.approx(442.368, rel=1e-12)
    assert abs(fb.ard - 197) / 197 < 0.005


def test_field_boundaries_square_arrays():
    g = SystemGeometry(n_t=40, n_r=40, f_c=50e9)
    assert field_boundaries(g).ard == pytest.approx(g.wavelength * 40**2, rel=1e-12)


@given(st.integers(2, 2048), st.integers(2, 2048), st.floats(1e9, 3e11))
@settings(max_examples=100, deadline=None)
def test_ard_below_rd(n_t, n_r, f_c):
    fb = field_boundaries(SystemGeometry(n_t=n_t, n_r=n_r, f_c=f_c))
    assert fb.ard < fb.rd


def test_region_classification():
    fb = field_boundaries(SystemGeometry.full())
    assert fb.region(40.0) == "mixed"
    assert fb.region(300.0) == "nlos_near"
    assert fb.region(500.0) == "far"
