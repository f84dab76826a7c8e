"""Spectral decomposition: projectors, energy norm, coercivity, tube fit."""

import numpy as np
import pytest

from helpers import band_limited_field, gamma_sample, soliton_field
from zkline.decomp import (
    coercivity_constant,
    d_coefficients,
    decompose,
    energy_norm,
    energy_norm_kappa,
    energy_report,
    fit_modulation,
    project,
    reconstruct,
)
from zkline.errors import OutsideTubeError
from zkline.grid import Field2D, translate
from zkline.spectral import mode_field

COERCIVITY_128 = 0.01746865


def _random_field(grid, seed=2, amp=0.3):
    return band_limited_field(grid, np.random.default_rng(seed), amp=amp)


def test_decompose_reconstruct_roundtrip(spec128, grid128):
    u = _random_field(grid128)
    dec = decompose(u, spec128)
    back = reconstruct(dec, spec128)
    assert np.max(np.abs(back.values - u.values)) < 1e-13


def test_projectors_partition_the_field(spec128, grid128):
    u = _random_field(grid128)
    pd = project(u, "P_d", spec128).values
    pg = project(u, "P_gamma", spec128).values
    assert np.max(np.abs(pd + pg - u.values)) < 1e-13
    blocks = sum(
        project(u, name, spec128).values
        for name in ("P_plus", "P_minus", "P1", "P2")
    )
    assert np.max(np.abs(blocks - pd)) < 1e-13
    p0 = project(u, "P0", spec128).values
    p1 = project(u, "P1", spec128).values
    p2 = project(u, "P2", spec128).values
    assert np.max(np.abs(p0 - p1 - p2)) < 1e-14


def test_projectors_are_idempotent(spec128, grid128):
    u = _random_field(grid128)
    for name in ("P_plus", "P_minus", "P0", "P_gamma", "P_d"):
        once = project(u, name, spec128)
        twice = project(once, name, spec128)
        assert np.max(np.abs(twice.values - once.values)) < 1e-12


def test_unknown_projector_rejected(spec128, grid128):
    with pytest.raises(ValueError):
        project(_random_field(grid128), "P_bogus", spec128)


def test_coefficient_layout_is_biorthonormal(spec128, grid128):
    # synthesize a field with known coefficients in every discrete block
    vals = (
        0.3 * mode_field(spec128, 1, +1, 0)
        + 0.7 * mode_field(spec128, 1, -1, 1)
        + 0.2 * spec128.profile.dq_dx.values[:, None]
        + 0.5 * spec128.profile.dq_dc.values[:, None]
    )
    dec = decompose(Field2D(grid128, vals), spec128)
    coeffs = d_coefficients(dec)
    want = np.array([0.3, 0.0, 0.0, 0.7, 0.2, 0.5])
    assert np.max(np.abs(coeffs - want)) < 1e-10
    assert np.max(np.abs(dec.gamma.values)) < 1e-10


def test_energy_norm_splits_into_blocks(spec128, grid128):
    u = _random_field(grid128)
    rep = energy_report(u, spec128)
    assert abs(rep.value**2 - rep.d_part_sq - rep.gamma_part_sq) < 1e-12
    dec = decompose(u, spec128)
    d_sq = float(np.sum(d_coefficients(dec) ** 2))
    assert abs(rep.d_part_sq - d_sq) < 1e-12
    # a ready decomposition is accepted in place of the field
    assert energy_norm(dec, spec128) == rep.value


def test_weighted_energy_norm(spec128, grid128):
    u = _random_field(grid128)
    assert energy_norm_kappa(u, spec128, 1.0) == energy_norm(u, spec128)
    # pure translation data scales linearly with kappa
    w = Field2D(grid128, spec128.profile.dq_dx.values[:, None] * np.ones(8))
    e1 = energy_norm(w, spec128)
    e_half = energy_norm_kappa(w, spec128, 0.5)
    assert abs(e_half - 0.5 * e1) < 1e-12 * e1
    for bad in (0.0, -0.3, 1.5):
        with pytest.raises(ValueError):
            energy_norm_kappa(u, spec128, bad)


def test_gamma_block_is_coercive(spec128, grid128):
    rng = np.random.default_rng(9)
    for _ in range(5):
        gam = gamma_sample(spec128, rng, amp=0.5)
        rep = energy_report(gam, spec128)
        assert rep.gamma_part_sq >= 0.0
        assert rep.d_part_sq < 1e-18


def test_coercivity_constant_converges(spec128, spec256):
    c1 = coercivity_constant(spec128)
    assert abs(c1 - COERCIVITY_128) < 1e-7
    c2 = coercivity_constant(spec256)
    assert abs(c1 - c2) / c1 < 1e-6


def test_modulation_fit_recovers_the_frame(spec128, grid128):
    rng = np.random.default_rng(4)
    v = gamma_sample(spec128, rng, amp=0.02)
    c_true, rho_true = 1.004, 0.37
    u_vals = soliton_field(grid128, c_true).values + v.values
    u = translate(Field2D(grid128, u_vals), rho_true)
    c_fit, rho_fit, v_fit = fit_modulation(u, spec128)
    assert abs(c_fit - c_true) < 1e-8
    assert abs(rho_fit - rho_true) < 1e-8
    # the remainder keeps only the band-limited part of the seeded field
    gap = translate(u, -rho_fit).values - soliton_field(grid128, c_fit).values
    assert np.max(np.abs(v_fit.values - gap)) < 1e-10


def test_modulation_fit_rejects_far_states(spec128, grid128):
    far = Field2D(grid128, 2.0 * soliton_field(grid128, 1.0).values)
    with pytest.raises(OutsideTubeError):
        fit_modulation(far, spec128)
