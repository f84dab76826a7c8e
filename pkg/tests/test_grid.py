"""Grid construction, spectral calculus, and the closed-form functionals."""

import math

import numpy as np
import pytest

from helpers import soliton_field
from zkline.decomp import decompose
from zkline.errors import GridMismatchError
from zkline.grid import (
    Field1D,
    Field2D,
    Grid2D,
    ddx,
    energy,
    h1_norm_sq,
    inner_product,
    mass,
    reflect_x,
    translate,
)

TWO_PI = 2.0 * math.pi


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid2D(24.0, 100, 1.0, 8)  # nx not a power of two
    with pytest.raises(ValueError):
        Grid2D(24.0, 16, 1.0, 8)  # nx below the floor
    with pytest.raises(ValueError):
        Grid2D(24.0, 128, 1.0, 4)  # ny below the floor
    with pytest.raises(ValueError):
        Grid2D(-1.0, 128, 1.0, 8)
    with pytest.raises(ValueError):
        Grid2D(24.0, 128, 0.0, 8)


def test_grid_axes(grid128):
    assert grid128.x.shape == (128,)
    assert grid128.y.shape == (8,)
    assert grid128.x[0] == -24.0
    assert abs(grid128.dx - 48.0 / 128) < 1e-15
    assert abs(grid128.y[-1] + grid128.dy - TWO_PI) < 1e-12


def test_ddx_exact_on_band_limited_wave(grid128):
    f = Field2D(grid128, np.sin(math.pi * grid128.x / 24.0)[:, None] * np.ones(8))
    want = (math.pi / 24.0) * np.cos(math.pi * grid128.x / 24.0)
    got = ddx(f).values
    assert np.max(np.abs(got - want[:, None])) < 1e-13


def test_translate_matches_analytic_shift(grid128):
    f = Field2D(grid128, np.sin(math.pi * grid128.x / 24.0)[:, None] * np.ones(8))
    q = 5.0
    got = translate(f, q).values
    want = np.sin(math.pi * (grid128.x - q) / 24.0)
    assert np.max(np.abs(got - want[:, None])) < 1e-12


def test_translate_on_grid_multiple_is_a_roll(grid128):
    rng = np.random.default_rng(0)
    vals = np.zeros((128, 8))
    # band-limited data (no Nyquist content) so the shift is exact
    for m in range(1, 20):
        vals += rng.standard_normal() * np.cos(
            m * math.pi * grid128.x / 24.0 + rng.uniform(0, TWO_PI)
        )[:, None]
    f = Field2D(grid128, vals)
    got = translate(f, 8 * grid128.dx).values
    assert np.max(np.abs(got - np.roll(vals, 8, axis=0))) < 1e-11


def test_reflect_is_an_involution_fixing_even_profiles(grid128):
    u = soliton_field(grid128, 1.0)
    assert np.array_equal(reflect_x(u).values, u.values)
    rng = np.random.default_rng(1)
    f = Field2D(grid128, rng.standard_normal((128, 8)))
    assert np.array_equal(reflect_x(reflect_x(f)).values, f.values)


def test_field_shape_and_finiteness_guards(grid128):
    with pytest.raises(ValueError):
        Field2D(grid128, np.zeros((64, 8)))
    with pytest.raises(ValueError):
        Field1D(grid128, np.zeros(64))
    bad = np.zeros((128, 8))
    bad[0, 0] = np.inf
    with pytest.raises(ValueError):
        Field2D(grid128, bad)


def test_soliton_functionals_match_closed_forms(grid128):
    u = soliton_field(grid128, 1.0)
    assert abs(mass(u) - 6.0 * TWO_PI) < 1e-10          # 12 pi
    assert abs(energy(u) + 1.8 * TWO_PI) < 1e-10
    assert abs(h1_norm_sq(u) - 7.2 * TWO_PI) < 1e-9
    v = soliton_field(grid128, 2.0)
    assert abs(mass(v) - 6.0 * math.sqrt(2.0) * TWO_PI) < 1e-9


def test_inner_product_weighting(grid128):
    ones = Field2D(grid128, np.ones((128, 8)))
    # int over [-24,24) x [0,2pi) of 1 = 48 * 2pi
    assert abs(inner_product(ones, ones) - 48.0 * TWO_PI) < 1e-9


def test_cross_grid_operations_raise(grid128, grid256, spec128):
    u = Field2D(grid256, np.zeros((256, 16)))
    with pytest.raises(GridMismatchError):
        decompose(u, spec128)
    with pytest.raises(GridMismatchError):
        inner_product(u, Field2D(grid128, np.zeros((128, 8))))
