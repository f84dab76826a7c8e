"""Transverse eigenstructure: rates, normalization, symmetry, edge cases."""

import math

import numpy as np
import pytest

from zkline.errors import EigensolveError, ResonantSpeedError
from zkline.grid import Grid2D
from zkline.spectral import apply_l_x, check_pairing_sign, lambda_of, unstable_modes

LAM1_128 = 0.061063957192679291  # growth rate at c=1, a=1 on the 128-point grid


def test_growth_rate_of_the_first_mode(spec128, grid128):
    assert abs(spec128.modes[0].rate - LAM1_128) < 1e-10
    # the scalar eigenvalue path sees the same pencil
    lam = lambda_of(1.0, 1.0, grid128)
    assert abs(lam - spec128.modes[0].rate) < 1e-12


def test_rate_scaling_law():
    # lambda(sc, sa) = s^{3/2} lambda(c, a); x-rescaling maps the grids
    # onto each other exactly, so the discrete values obey the law too.
    lam_base = lambda_of(1.0, 1.0 / 9.0, Grid2D(24.0, 512, 1.0, 8))
    lam_scaled = lambda_of(4.0, 4.0 / 9.0, Grid2D(12.0, 512, 1.0, 8))
    assert abs(lam_scaled - 8.0 * lam_base) < 1e-10 * lam_scaled


def test_no_growth_beyond_the_band_edge(grid128):
    assert lambda_of(1.0, 1.3, grid128) is None
    assert lambda_of(1.0, 2.0, grid128) is None


def test_exact_edge_returns_the_kernel_eigenvalue(grid128):
    # at a = 5c/4 the pencil has the localized kernel profile Q_c^{3/2};
    # the discretized kernel eigenvalue is the rate limit, which vanishes
    lam = lambda_of(1.0, 1.25, grid128)
    assert lam is not None
    assert abs(lam) < 1e-8
    lam512 = lambda_of(2.0, 2.5, Grid2D(24.0, 512, 1.0, 8))
    assert abs(lam512) < 1e-8


def test_interior_band_without_isolated_mode_is_reported(grid128):
    # approaching the edge the eigenfunction delocalizes; on this box the
    # solver refuses to pick a candidate rather than return tail noise
    with pytest.raises(EigensolveError):
        lambda_of(1.0, 1.1, Grid2D(24.0, 512, 1.0, 8))


def test_resonant_speed_propagates(grid128):
    with pytest.raises(ResonantSpeedError):
        unstable_modes(0.8, grid128)


def test_mode_normalization_pairing(spec128, grid128):
    mode = spec128.modes[0]
    a = (mode.k / grid128.torus_scale) ** 2
    lf_minus = apply_l_x(1.0, a, grid128, mode.f_minus.values)
    pair = math.pi * grid128.torus_scale * grid128.dx * float(
        np.dot(mode.f_plus.values, lf_minus)
    )
    assert abs(pair - 1.0) < 1e-12


def test_pairing_signs(spec128, grid128):
    self_pair, cross_pair = check_pairing_sign(spec128.modes[0], 1.0, grid128)
    assert abs(self_pair) < 1e-9
    assert cross_pair < 0.0


def test_mode_symmetry_and_residual(spec128, grid128):
    mode = spec128.modes[0]
    fp, fm = mode.f_plus.values, mode.f_minus.values
    assert np.array_equal(fm, -fp[grid128.reflect_idx])
    a = (mode.k / grid128.torus_scale) ** 2
    res = grid128.ddx_values(apply_l_x(1.0, a, grid128, fm)) + mode.rate * fm
    assert np.linalg.norm(res) / np.linalg.norm(fm) < 1e-10


def test_three_mode_torus_ordering(spec_l3, spec256):
    assert spec_l3.n0 == 3
    assert [m.k for m in spec_l3.modes] == [1, 2, 3]
    r1, r2, r3 = (m.rate for m in spec_l3.modes)
    # the middle wavenumber grows fastest; the near-edge mode is slowest
    assert r2 > r1 > r3
    assert abs(r1 - 0.14954866660761881) < 1e-6
    assert abs(r2 - 0.20861474556588985) < 1e-6
    # k=3 at L=3 solves the same x-problem as k=1 at L=1
    assert abs(r3 - spec256.modes[0].rate) < 1e-12
    assert abs(spec_l3.k_star_max - r2) == 0.0
    assert abs(spec_l3.k_star_min - r3) == 0.0
    assert np.array_equal(spec_l3.rates(), [r1, r2, r3])


def test_stable_regime_has_empty_spectrum():
    spec = unstable_modes(0.5, Grid2D(36.0, 128, 1.0, 8))
    assert spec.n0 == 0
    assert len(spec.modes) == 0
    assert spec.k_star_max is None and spec.k_star_min is None
    assert spec.rates().size == 0
