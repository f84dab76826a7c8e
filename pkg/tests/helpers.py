"""Shared sample builders for the test modules."""

import math

import numpy as np

from zkline.decomp import energy_report, project
from zkline.grid import Field2D
from zkline.soliton import q_values


def soliton_field(grid, c):
    """The line solitary wave as a y-independent 2D field."""
    return Field2D(grid, np.repeat(q_values(c, grid.x)[:, None], grid.ny, axis=1))


def band_limited_field(grid, rng, amp=1.0, n_terms=4):
    """Smooth random data confined to the dealias-coupled y-band.

    Transverse wavenumbers above ny/3 fall outside the 2/3 dealias band,
    where the stepper cannot couple them back through the soliton
    potential; conservation checks need data inside the band.
    """
    x, y = grid.x[:, None], grid.y[None, :]
    ky_max = grid.ny // 3
    vals = np.zeros((grid.nx, grid.ny))
    for _ in range(n_terms):
        ky = int(rng.integers(0, ky_max + 1))
        vals = vals + rng.standard_normal() * (
            np.exp(-0.3 * (x - rng.uniform(-6.0, 6.0)) ** 2)
            * np.cos(ky * y / grid.torus_scale + rng.uniform(0.0, 2.0 * math.pi))
        )
    return Field2D(grid, vals * (amp / float(np.max(np.abs(vals)))))


def graph_sample(spec, rng, radius):
    """A graph base point: driven-free data of energy norm 0.6*radius plus
    a comparable speed offset (mirrors the shoot CLI sampler)."""
    grid = spec.grid
    if radius == 0.0:
        return Field2D(grid, np.zeros((grid.nx, grid.ny))), spec.c_star
    x, y = np.meshgrid(grid.x, grid.y, indexing="ij")
    ky = 1 + int(rng.integers(0, 2))
    vals = rng.standard_normal() * (
        np.exp(-0.3 * (x - rng.uniform(-4.0, 4.0)) ** 2)
        * np.cos(ky * y / grid.torus_scale)
    )
    for i, mode in enumerate(spec.modes):
        pair = rng.standard_normal(2)
        trig = pair[0] * spec.cos_k[i] + pair[1] * spec.sin_k[i]
        vals = vals + mode.f_minus.values[:, None] * trig[None, :]
    clean = vals - project(Field2D(grid, vals), "P_plus", spec).values
    e = energy_report(Field2D(grid, clean), spec).value
    w = Field2D(grid, clean * (0.6 * radius / e))
    c = spec.c_star * math.exp(rng.uniform(-0.2, 0.2) * radius)
    return w, c


def tube_sample(spec, rng, scale):
    """A random tube state of energy norm ~scale with a matching speed
    offset (mirrors the distance CLI sampler)."""
    grid = spec.grid
    x, y = np.meshgrid(grid.x, grid.y, indexing="ij")
    ky = 1 + int(rng.integers(0, 2))
    vals = rng.standard_normal() * (
        np.exp(-0.3 * (x - rng.uniform(-4.0, 4.0)) ** 2)
        * np.cos(ky * y / grid.torus_scale + rng.uniform(0.0, 2.0 * math.pi))
    )
    for i, mode in enumerate(spec.modes):
        pair = 0.5 * rng.standard_normal(2)
        trig = pair[0] * spec.cos_k[i] + pair[1] * spec.sin_k[i]
        vals = vals + mode.f_minus.values[:, None] * trig[None, :]
    e = energy_report(Field2D(grid, vals), spec).value
    v = Field2D(grid, vals * (scale * rng.uniform(0.3, 1.0) / e))
    c = spec.c_star * math.exp(rng.uniform(-0.5, 0.5) * scale)
    return v, c


def gamma_sample(spec, rng, amp=1.0):
    """A random field with the whole discrete block projected out."""
    grid = spec.grid
    raw = band_limited_field(grid, rng, amp=amp)
    return project(raw, "P_gamma", spec)
