"""Array response, near-field distance expansions, and cascaded-channel assembly."""
from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import small_config
from fieldlab import (
    UserPlacement,
    block_columns,
    block_permutation,
    block_pieces,
    cascaded,
    centered_offsets,
    element_position,
    ff_channel_g,
    nf_channel,
    nf_distance_exact,
    nf_distance_taylor,
    plan_for,
    upa_steering,
    user_position,
)


def steering_entry(az, el, iy, iz, dy, dz, wavelength):
    """Independent per-element oracle for the planar steering phase."""
    k0 = 2.0 * math.pi / wavelength
    return np.exp(1j * k0 * (dy * iy * math.sin(az) * math.cos(el)
                             + dz * iz * math.sin(el)))


# ---------------------------------------------------------------- steering

def test_steering_boresight_is_all_ones():
    vec = upa_steering(0.0, 0.0, 5, 4, 0.004, 0.004, 0.01).entries
    np.testing.assert_allclose(vec, np.ones(20), atol=1e-15)


def test_steering_half_wavelength_endfire_entry():
    wavelength = 0.01
    vec = upa_steering(math.pi / 2, 0.0, 3, 1, wavelength / 2, wavelength / 2,
                       wavelength).entries
    # entry at offset iy=+1: exp(j*pi) = -1
    assert vec[2] == pytest.approx(-1.0, abs=1e-12)


def test_steering_matches_elementwise_oracle():
    az, el = 0.7, -0.4
    ny, nz, dy, dz, wl = 4, 3, 0.0041, 0.0052, 0.0107
    vec = upa_steering(az, el, ny, nz, dy, dz, wl).entries
    idx = 0
    for iy in centered_offsets(ny):
        for iz in centered_offsets(nz):
            expected = steering_entry(az, el, iy, iz, dy, dz, wl)
            assert vec[idx] == pytest.approx(expected, rel=1e-12)
            idx += 1


def test_steering_entries_unit_modulus():
    vec = upa_steering(1.1, 0.3, 6, 5, 0.005, 0.005, 0.0107).entries
    np.testing.assert_allclose(np.abs(vec), 1.0, rtol=1e-12)


def test_surface_link_is_rank_one_with_expected_norm():
    cfg = small_config()
    eta = 0.3 - 0.4j
    g = ff_channel_g(cfg, eta, 0.2, -0.1, 0.5, 0.3)
    m, n = cfg.m_antennas, cfg.n_elements
    assert g.matrix_g.shape == (m, n)
    assert np.linalg.matrix_rank(g.matrix_g) == 1
    assert np.linalg.norm(g.matrix_g) == pytest.approx(abs(eta) * math.sqrt(m * n),
                                                       rel=1e-12)


# ------------------------------------------------------- distance expansions

def test_taylor_distance_matches_stated_expansion():
    cfg = small_config(n_y=5, n_z=5, q1=25)
    placement = UserPlacement(r_m=7.0, azimuth_rad=0.6, elevation_rad=-0.35,
                              path_gain=1.0)
    r = placement.r_m
    sa, sb = math.sin(placement.azimuth_rad), math.sin(placement.elevation_rad)
    cb = math.cos(placement.elevation_rad)
    for iy in centered_offsets(cfg.n_y):
        for iz in centered_offsets(cfg.n_z):
            term_y = -iy * cfg.d_ya * sa * cb + iy**2 * cfg.d_ya**2 * (1 - sa**2 * cb**2) / (2 * r)
            term_z = -iz * cfg.d_za * sb + iz**2 * cfg.d_za**2 * cb**2 / (2 * r)
            assert nf_distance_taylor(placement, iy, iz, cfg) == pytest.approx(
                r + term_y + term_z, rel=1e-14)


def test_taylor_boresight_reduces_to_pure_quadratic():
    cfg = small_config(n_y=7, n_z=5, q1=35)
    placement = UserPlacement(r_m=6.0, azimuth_rad=0.0, elevation_rad=0.0,
                              path_gain=1.0)
    for iy in centered_offsets(cfg.n_y):
        for iz in centered_offsets(cfg.n_z):
            expected = placement.r_m + (iy**2 * cfg.d_ya**2 + iz**2 * cfg.d_za**2) / (2 * placement.r_m)
            assert nf_distance_taylor(placement, iy, iz, cfg) == pytest.approx(
                expected, rel=1e-14)


def test_taylor_tracks_exact_distance_across_large_aperture():
    cfg = small_config(n_y=21, n_z=21, q1=441)
    placement = UserPlacement(r_m=10.0, azimuth_rad=0.4, elevation_rad=-0.3,
                              path_gain=1.0)
    user = user_position(placement)
    worst = 0.0
    for iy in centered_offsets(cfg.n_y):
        for iz in centered_offsets(cfg.n_z):
            exact = nf_distance_exact(user, element_position(cfg, iy, iz))
            taylor = nf_distance_taylor(placement, iy, iz, cfg)
            worst = max(worst, abs(taylor - exact))
    assert worst < 1e-4 * placement.r_m


def test_taylor_distances_are_axis_separable():
    cfg = small_config(n_y=9, n_z=9, q1=81)
    placement = UserPlacement(r_m=5.0, azimuth_rad=0.8, elevation_rad=0.5,
                              path_gain=1.0)
    k0 = 2.0 * math.pi / cfg.wavelength_m
    base = nf_distance_taylor(placement, 0, 0, cfg)
    for iy in centered_offsets(cfg.n_y):
        ry = nf_distance_taylor(placement, iy, 0, cfg)
        for iz in centered_offsets(cfg.n_z):
            rz = nf_distance_taylor(placement, 0, iz, cfg)
            ryz = nf_distance_taylor(placement, iy, iz, cfg)
            assert abs(k0 * (ryz - ry - rz + base)) < 1e-9


def test_taylor_channel_entry_phase_formula():
    cfg = small_config(n_y=3, n_z=3, q1=9)
    placement = UserPlacement(r_m=5.5, azimuth_rad=0.45, elevation_rad=0.2,
                              path_gain=1.0)
    f = nf_channel(placement, cfg, "taylor").vector_f
    r = placement.r_m
    sa, cb = math.sin(placement.azimuth_rad), math.cos(placement.elevation_rad)
    k0 = 2.0 * math.pi / cfg.wavelength_m
    expected = -k0 * (-cfg.d_ya * sa * cb
                      + cfg.d_ya**2 * (1 - sa**2 * cb**2) / (2 * r))
    entry = f.reshape(cfg.n_y, cfg.n_z)[2, 1]       # offsets (iy, iz) = (+1, 0)
    assert np.angle(entry) == pytest.approx(expected, abs=1e-12)


def test_exact_channel_matches_brute_force():
    cfg = small_config(n_y=5, n_z=3, q1=15)
    placement = UserPlacement(r_m=4.0, azimuth_rad=-0.5, elevation_rad=0.3,
                              path_gain=0.2 - 0.7j)
    vec = nf_channel(placement, cfg, "exact-distance").vector_f
    user = user_position(placement)
    k0 = 2.0 * math.pi / cfg.wavelength_m
    idx = 0
    for iy in centered_offsets(cfg.n_y):
        for iz in centered_offsets(cfg.n_z):
            dist = nf_distance_exact(user, element_position(cfg, iy, iz))
            expected = placement.path_gain * np.exp(-1j * k0 * (dist - placement.r_m))
            assert vec[idx] == pytest.approx(expected, rel=1e-12)
            idx += 1


# --------------------------------------------------------------- block model

def test_single_element_blocks_reproduce_exact_up_to_range_constant():
    cfg = small_config(n_y=5, n_z=5, q1=25)
    placement = UserPlacement(r_m=6.0, azimuth_rad=0.3, elevation_rad=-0.2,
                              path_gain=1.0 + 0.5j)
    plan = plan_for(cfg, cfg.n_y, cfg.n_z)     # S = 1
    f_block = nf_channel(placement, cfg, "block-ff", plan=plan).vector_f
    f_exact = nf_channel(placement, cfg, "exact-distance").vector_f
    k0 = 2.0 * math.pi / cfg.wavelength_m
    perm = block_permutation(cfg, plan)
    restored = f_exact[perm] * np.exp(-1j * k0 * placement.r_m)
    np.testing.assert_allclose(f_block, restored, atol=1e-9 * np.abs(restored).max())


def test_whole_array_block_equals_planar_wave_from_center():
    cfg = small_config(n_y=4, n_z=6, q1=24)
    placement = UserPlacement(r_m=9.0, azimuth_rad=0.25, elevation_rad=0.15,
                              path_gain=0.8)
    plan = plan_for(cfg, 1, 1)
    f_block = nf_channel(placement, cfg, "block-ff", plan=plan).vector_f
    # one block centered at the origin: local angles equal the global ones
    k0 = 2.0 * math.pi / cfg.wavelength_m
    sa, se = math.sin(placement.azimuth_rad), math.sin(placement.elevation_rad)
    ce = math.cos(placement.elevation_rad)
    idx = 0
    for iy in centered_offsets(cfg.n_y):
        for iz in centered_offsets(cfg.n_z):
            r_lin = placement.r_m - iy * cfg.d_ya * sa * ce - iz * cfg.d_za * se
            expected = placement.path_gain * np.exp(-1j * k0 * r_lin)
            assert f_block[idx] == pytest.approx(expected, rel=1e-12)
            idx += 1


def test_block_phase_gap_shrinks_along_square_ladder():
    cfg = small_config(n_y=15, n_z=15, q1=225)
    placement = UserPlacement(r_m=8.0, azimuth_rad=0.5, elevation_rad=0.2,
                              path_gain=1.0)
    user = user_position(placement)
    k0 = 2.0 * math.pi / cfg.wavelength_m
    exact_abs = np.array([
        np.exp(-1j * k0 * nf_distance_exact(user, element_position(cfg, iy, iz)))
        for iy in centered_offsets(cfg.n_y) for iz in centered_offsets(cfg.n_z)])
    gaps = []
    for count in (1, 3, 5, 15):
        plan = plan_for(cfg, count, count)
        f_block = nf_channel(placement, cfg, "block-ff", plan=plan).vector_f
        perm = block_permutation(cfg, plan)
        gaps.append(np.max(np.abs(np.angle(f_block * np.conj(exact_abs[perm])))))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-9


# ------------------------------------------------------------ cascaded channel

def test_cascaded_columns_and_norm():
    cfg = small_config()
    eta_g = 0.6 + 0.2j
    g = ff_channel_g(cfg, eta_g, 0.1, 0.2, -0.3, 0.4)
    placement = UserPlacement(r_m=5.0, azimuth_rad=0.3, elevation_rad=-0.1,
                              path_gain=0.05 - 0.02j)
    f = nf_channel(placement, cfg, "exact-distance")
    h = cascaded(g, f).matrix_h
    for j in range(cfg.n_elements):
        np.testing.assert_array_equal(h[:, j], g.matrix_g[:, j] * f.vector_f[j])
    expected_norm = abs(eta_g) * abs(placement.path_gain) * math.sqrt(
        cfg.m_antennas * cfg.n_elements)
    assert np.linalg.norm(h) == pytest.approx(expected_norm, rel=1e-12)


def test_block_permutation_is_a_bijection():
    cfg = small_config(n_y=6, n_z=4, q1=24)
    for plan in (plan_for(cfg, 2, 2), plan_for(cfg, 3, 4), plan_for(cfg, 6, 1)):
        perm = block_permutation(cfg, plan)
        np.testing.assert_array_equal(np.sort(perm), np.arange(cfg.n_elements))


def test_block_pieces_concatenate_to_cascaded_channel():
    cfg = small_config(n_y=6, n_z=6, q1=36)
    eta_g = 1.0 - 0.3j
    g = ff_channel_g(cfg, eta_g, 0.15, -0.25, 0.35, 0.05)
    placement = UserPlacement(r_m=7.5, azimuth_rad=-0.4, elevation_rad=0.25,
                              path_gain=0.4j)
    f = nf_channel(placement, cfg, "exact-distance")
    h = cascaded(g, f).matrix_h
    plan = plan_for(cfg, 3, 2)
    for k in range(plan.k_total):
        g_k, f_k, h_k = block_pieces(g, f, cfg, plan, k)
        cols = block_columns(cfg, plan, k)
        np.testing.assert_array_equal(h_k, h[:, cols])
        np.testing.assert_array_equal(h_k, g_k * f_k[None, :])


def test_cascaded_accepts_block_major_vectors():
    cfg = small_config(n_y=6, n_z=6, q1=36)
    g = ff_channel_g(cfg, 0.9, 0.1, 0.1, 0.2, -0.2)
    placement = UserPlacement(r_m=6.5, azimuth_rad=0.2, elevation_rad=0.1,
                              path_gain=1.0)
    plan = plan_for(cfg, 2, 3)
    f_block = nf_channel(placement, cfg, "block-ff", plan=plan)
    h = cascaded(g, f_block).matrix_h
    perm = block_permutation(cfg, plan)
    f_global = np.empty(cfg.n_elements, dtype=complex)
    f_global[perm] = f_block.vector_f
    np.testing.assert_allclose(h, g.matrix_g * f_global[None, :], rtol=1e-12)
