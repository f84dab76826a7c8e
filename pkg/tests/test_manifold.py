"""Tube geometry, growth measurement, and the shooting realization of the
center-stable graph."""

import math

import numpy as np
import pytest

from helpers import graph_sample, soliton_field
from zkline.decomp import decompose, energy_report, project
from zkline.dynamics import ModulatedState, evolve_frame, make_reference
from zkline.errors import DomainError, NumericsError
from zkline.grid import Field2D, h1_norm, translate
from zkline.manifold import (
    exit_time,
    lipschitz_probe,
    mass_based_c,
    measure_growth,
    shoot_graph,
    tangent_dichotomy,
    tube_distance,
)
from zkline.spectral import mode_field

TWO_PI = 2.0 * math.pi


# -- tube geometry -----------------------------------------------------------


def test_tube_distance_of_the_orbit_itself(grid128):
    d, q = tube_distance(soliton_field(grid128, 1.0), 1.0)
    assert d < 1e-7
    shifted = translate(soliton_field(grid128, 1.0), 5.3)
    d2, q2 = tube_distance(shifted, 1.0)
    assert d2 < 1e-7
    assert abs(q2 - 5.3) < 1e-2


def test_tube_distance_of_the_zero_field(grid128):
    d, _ = tube_distance(Field2D(grid128, np.zeros((128, 8))), 1.0)
    # ||Q||_{H1}^2 = 7.2 * 2 pi L
    assert abs(d - math.sqrt(7.2 * TWO_PI)) < 1e-9


def test_tube_distance_grows_with_the_perturbation(grid128):
    bump = np.exp(-0.3 * grid128.x[:, None] ** 2) * np.cos(grid128.y[None, :])
    base = soliton_field(grid128, 1.0).values
    dists = []
    for amp in (1e-3, 1e-2, 1e-1):
        d, _ = tube_distance(Field2D(grid128, base + amp * bump), 1.0)
        dists.append(d)
        assert d <= amp * h1_norm(Field2D(grid128, bump)) + 1e-10
    assert dists[0] < dists[1] < dists[2]


def test_mass_based_speed(grid128):
    for c in (0.7, 1.3):
        got = mass_based_c(soliton_field(grid128, c))
        assert abs(got - c) < 1e-12 * c
    with pytest.raises(DomainError):
        mass_based_c(Field2D(grid128, np.zeros((128, 8))))
    with pytest.raises(DomainError):
        mass_based_c(Field2D(grid128, -soliton_field(grid128, 1.0).values))


# -- exit time ----------------------------------------------------------------


def test_exit_time_none_on_the_soliton(grid128):
    assert exit_time(soliton_field(grid128, 1.0), 1.0, 1e-2, 5.0, dt=0.02) is None


def test_exit_time_requires_starting_inside(grid128):
    with pytest.raises(DomainError):
        exit_time(Field2D(grid128, np.zeros((128, 8))), 1.0, 1e-2, 5.0)


def test_exit_time_finite_off_the_graph(grid128, spec128):
    u0 = Field2D(
        grid128,
        soliton_field(grid128, 1.0).values + 3e-3 * mode_field(spec128, 1, +1, 0),
    )
    t = exit_time(u0, 1.0, 1e-2, 40.0, dt=0.02)
    assert t is not None
    assert 0.0 < t < 40.0


# -- growth measurement ---------------------------------------------------------


def test_measure_growth_recovers_a_synthetic_rate(grid128, spec128):
    fp = mode_field(spec128, 1, +1, 0)
    states = [
        ModulatedState(Field2D(grid128, 1e-4 * math.exp(0.05 * t) * fp), 1.0, 0.0, t)
        for t in np.linspace(0.0, 40.0, 30)
    ]
    rate = measure_growth(states, spec128)
    assert abs(rate - 0.05) < 1e-10


def test_measure_growth_needs_samples_in_the_window(grid128, spec128):
    fp = mode_field(spec128, 1, +1, 0)
    states = [
        ModulatedState(Field2D(grid128, 0.5 * fp), 1.0, 0.0, t) for t in (0.0, 1.0)
    ]
    with pytest.raises(NumericsError):
        measure_growth(states, spec128)


# -- shooting -------------------------------------------------------------------


def test_shoot_at_the_soliton_itself(spec128, grid128):
    zero = Field2D(grid128, np.zeros((128, 8)))
    res = shoot_graph(zero, 1.0, spec128, 1e-2, 10.01, dt=0.0175)
    assert res.converged
    assert res.persist_time >= 10.0
    assert np.max(np.abs(res.a_plus)) < 1e-8


def test_shoot_rejects_driven_data(spec128, grid128):
    w = Field2D(grid128, 1e-4 * mode_field(spec128, 1, +1, 0))
    with pytest.raises(ValueError):
        shoot_graph(w, 1.0, spec128, 1e-2, 10.01)


def test_shoot_rejects_large_offsets(spec128):
    rng = np.random.default_rng(13)
    w, c = graph_sample(spec128, rng, 1.5e-2)  # energy norm 9e-3 > 0.75 epsilon
    with pytest.raises(DomainError):
        shoot_graph(w, c, spec128, 1e-2, 10.01)


def test_lipschitz_probe_needs_enough_samples(spec128):
    with pytest.raises(ValueError):
        lipschitz_probe(5, 1e-3, 1e-2, 10.0, spec128)


@pytest.fixture(scope="module")
def base_shot(spec128, grid128):
    """A certified graph point reused by the invariance tests."""
    bump = np.exp(-0.3 * (grid128.x[:, None] - 1.2) ** 2) * np.cos(grid128.y[None, :])
    fm = spec128.modes[0].f_minus.values[:, None] * (
        0.7 * spec128.cos_k[0][None, :] - 0.4 * spec128.sin_k[0][None, :]
    )
    vals = bump + fm
    clean = vals - project(Field2D(grid128, vals), "P_plus", spec128).values
    nrm = energy_report(Field2D(grid128, clean), spec128).value
    w = Field2D(grid128, clean * (8e-4 / nrm))
    c0 = spec128.c_star * math.exp(2e-4)
    res = shoot_graph(w, c0, spec128, 1e-2, 240.0, dt=0.0175)
    assert res.converged
    return w, c0, res


def test_shoot_translation_equivariance(base_shot, spec128, grid128):
    # rolling the data around the torus rotates each (cos, sin) coefficient
    # pair by the mode phase k*b/L
    w, c0, res = base_shot
    s = 3
    b = s * grid128.dy
    w2 = Field2D(grid128, np.roll(w.values, s, axis=1))
    res2 = shoot_graph(w2, c0, spec128, 1e-2, 240.0, dt=0.0175)
    ang = spec128.modes[0].k * b / grid128.torus_scale
    rot = np.array(
        [[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]]
    )
    pred = rot @ res.a_plus
    assert res2.converged
    assert np.max(np.abs(res2.a_plus - pred)) < 1e-6


def test_shoot_forward_invariance(base_shot, spec128, grid128):
    # evolving an on-graph point and re-shooting from its non-driven part
    # must reproduce the evolved driven coefficients
    w, c0, res = base_shot
    vals = w.values + res.a_plus[0] * mode_field(spec128, 1, +1, 0)
    vals = vals + res.a_plus[1] * mode_field(spec128, 1, +1, 1)
    t_fwd = 572 * 0.0175  # ~10 time units on the step lattice
    st = evolve_frame(
        ModulatedState(Field2D(grid128, vals), c0, 0.0, 0.0),
        spec128,
        t_fwd,
        0.0175,
        mode="modulated",
    )
    evolved = decompose(st.v, spec128).lam_plus.ravel()
    wp = Field2D(grid128, st.v.values - project(st.v, "P_plus", spec128).values)
    res2 = shoot_graph(wp, st.c, spec128, 1e-2, 150.0, dt=0.0175)
    assert res2.converged
    assert np.max(np.abs(res2.a_plus - evolved)) < 1e-4


def test_shoot_backward_direction_at_the_soliton(spec128, grid128):
    zero = Field2D(grid128, np.zeros((128, 8)))
    res = shoot_graph(zero, 1.0, spec128, 1e-2, 10.01, dt=0.0175, direction=-1)
    assert res.converged
    assert np.max(np.abs(res.a_plus)) < 1e-8


# -- tangent dichotomy -----------------------------------------------------------


@pytest.fixture(scope="module")
def trivial_reference(spec128, grid128):
    zero = ModulatedState(Field2D(grid128, np.zeros((128, 8))), 1.0, 0.0, 0.0)
    return make_reference(zero, spec128, 12.0, 0.005)


def test_dichotomy_triggers_on_driven_data(trivial_reference, spec128, grid128):
    fpc = spec128.modes[0].f_plus.values[:, None] * spec128.cos_k[0][None, :]
    rep = tangent_dichotomy(
        Field2D(grid128, fpc), 0.0, trivial_reference, kappa=1e-3, k0=1.0
    )
    assert rep.triggered
    assert rep.t0 == 0.0
    assert rep.growth_ok
    assert rep.growth_margin > 1.0


def test_dichotomy_bounds_non_driven_data(trivial_reference, spec128, grid128):
    bump = np.exp(-0.3 * (grid128.x[:, None] - 2.0) ** 2) * np.cos(grid128.y[None, :])
    fms = spec128.modes[0].f_minus.values[:, None] * spec128.sin_k[0][None, :]
    raw = Field2D(grid128, 0.7 * fms + 0.4 * bump)
    clean = Field2D(
        grid128, raw.values - project(raw, "P_plus", spec128).values
    )
    eta = Field2D(grid128, clean.values / energy_report(clean, spec128).value)
    rep = tangent_dichotomy(eta, 1e-3, trivial_reference, kappa=1e-3, k0=1.0)
    assert not rep.triggered
    assert rep.bounded_ratio < 1e-3
    assert rep.k1_estimate is not None


def test_dichotomy_on_a_nonlinear_reference(spec128, grid128):
    bump = np.exp(-0.3 * (grid128.x[:, None] - 2.0) ** 2) * np.cos(grid128.y[None, :])
    fms = spec128.modes[0].f_minus.values[:, None] * spec128.sin_k[0][None, :]
    raw = Field2D(grid128, 0.7 * fms + 0.4 * bump)
    clean = Field2D(
        grid128, raw.values - project(raw, "P_plus", spec128).values
    )
    e = energy_report(clean, spec128).value
    w = Field2D(grid128, 6e-4 / e * clean.values)
    ref = make_reference(
        ModulatedState(w, 1.002, 0.0, 0.0), spec128, 16.0, 0.005
    )
    eta = Field2D(grid128, clean.values / e)
    rep = tangent_dichotomy(eta, 1e-3, ref, kappa=1e-9, k0=1.0)
    assert rep.triggered
    assert 0.3 < rep.t0 < 1.1
    assert rep.growth_ok
    assert rep.growth_margin > 1.5


def test_dichotomy_rejects_bad_constants(trivial_reference, grid128):
    zero = Field2D(grid128, np.zeros((128, 8)))
    with pytest.raises(ValueError):
        tangent_dichotomy(zero, 0.0, trivial_reference, kappa=0.0, k0=1.0)
    with pytest.raises(ValueError):
        tangent_dichotomy(zero, 0.0, trivial_reference, kappa=1e-3, k0=-1.0)
