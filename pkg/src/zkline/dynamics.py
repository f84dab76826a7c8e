"""Time evolution of the flow and its soliton-frame reductions.

Four systems share this module:

* the full flow  u_t + dx(Laplace u + u^2) = 0, advanced by ETDRK4 with the
  exact dispersive propagator in Fourier space;
* the soliton-frame family for v = tau_{-rho} u - Q_c, where the modulation
  scalars (rho_dot, c_dot) are resolved each stage so that the pairings
  (v, Q_{c*}) and (v, dQ_{c*}/dx) are conserved identically.  A cutoff
  factor chi multiplies every nonlinear block: chi = 1 is the exact frame
  change of the full flow, chi = chi_delta(v, c - c*) is the localized
  system, chi = 0 is the linear system (whose code path is literally the
  same arithmetic with chi = 0.0, so the two coincide bitwise);
* the frozen-coefficient semigroup e^{tA}, exact exponentials on the
  discrete block plus the chi = 0 stepper on the gamma block;
* the tangent flow (eta, a1) along a stored reference trajectory, together
  with the perturbed family that generates its difference quotients.

The stiff x-dispersion is always handled by an integrating factor; the
remaining terms go through classical RK4 stages.  Steppers are pure maps
and cache their propagators per (grid, speed, dt).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .decomp import Decomposition, d_part_values, decompose, gamma_quadratic
from .errors import BlowupError, ModulationError, NumericsError
from .grid import Field2D, Grid2D, h1_norm
from .soliton import (
    d2q_dc2_values,
    d2q_dcdx_values,
    dq_dc_values,
    dq_dx_values,
    q_values,
)
from .spectral import SpectralData

#: amplitude cap that converts runaway growth into a clean error
DEFAULT_BLOWUP_CAP = 1e6


# -- states ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FullState:
    """Lab-frame snapshot of the full flow."""

    u: Field2D
    t: float


@dataclass(frozen=True, eq=False)
class ModulatedState:
    """Soliton-frame state: u = tau_rho (Q_c + v) at time t."""

    v: Field2D
    c: float
    rho: float
    t: float

    def __post_init__(self) -> None:
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError("modulated speed must be positive and finite")


def smoothstep(theta: float) -> float:
    """Quintic ramp: 0 below 0, 1 above 1, C^2 monotone in between."""
    if theta <= 0.0:
        return 0.0
    if theta >= 1.0:
        return 1.0
    return theta * theta * theta * (10.0 + theta * (-15.0 + 6.0 * theta))


def chi_profile(r: float) -> float:
    """The fixed cutoff bump: 1 on [0, 1], 0 beyond 2, quintic in between."""
    if r <= 1.0:
        return 1.0
    if r >= 2.0:
        return 0.0
    return 1.0 - smoothstep(r - 1.0)


@dataclass(frozen=True)
class CutoffParams:
    """Radius and profile of the localization; carries the anchor speed.

    chi_delta(v, c) = chi((||v||_H1^2 + |c - c*|^2) / delta^2).
    """

    delta: float
    c_star: float
    chi: Callable[[float], float] = chi_profile

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ValueError("cutoff radius must be positive")


def chi_delta(v: Field2D, c: float, params: CutoffParams) -> float:
    """Cutoff factor of the localized system at the state (v, c)."""
    arg = (h1_norm(v) ** 2 + (c - params.c_star) ** 2) / params.delta**2
    return params.chi(arg)


# -- ETDRK4 for the full flow -------------------------------------------------

_ETDRK4_CACHE: dict[tuple, tuple] = {}


def _etdrk4_coeffs(grid: Grid2D, dt: float) -> tuple:
    key = (grid.key(), float(dt))
    hit = _ETDRK4_CACHE.get(key)
    if hit is not None:
        return hit
    sym = 1j * grid.xi_odd[:, None] * (
        grid.xi[:, None] ** 2 + grid.eta[None, :] ** 2
    )
    lh = dt * sym
    e_full = np.exp(lh)
    e_half = np.exp(lh / 2.0)
    # phi-function weights by the contour trick: mean over a circle of
    # radius 1 around each (possibly zero) symbol point
    m = 32
    r = np.exp(2j * np.pi * (np.arange(1, m + 1) - 0.5) / m)
    lr = lh[..., None] + r
    q = dt * np.mean((np.exp(lr / 2.0) - 1.0) / lr, axis=-1)
    f1 = dt * np.mean(
        (-4.0 - lr + np.exp(lr) * (4.0 - 3.0 * lr + lr**2)) / lr**3, axis=-1
    )
    f2 = dt * np.mean((2.0 + lr + np.exp(lr) * (-2.0 + lr)) / lr**3, axis=-1)
    f3 = dt * np.mean(
        (-4.0 - 3.0 * lr - lr**2 + np.exp(lr) * (4.0 - lr)) / lr**3, axis=-1
    )
    coeffs = (e_full, e_half, q, f1, f2, f3)
    _ETDRK4_CACHE[key] = coeffs
    return coeffs


def _full_nonlinear(grid: Grid2D, vhat: np.ndarray) -> np.ndarray:
    u = np.fft.irfft2(vhat, s=(grid.nx, grid.ny))
    prod = np.fft.rfft2(u * u)
    return -1j * grid.xi_odd[:, None] * (prod * grid.dealias_mask)


def _step_full_hat(grid: Grid2D, vhat: np.ndarray, coeffs: tuple) -> np.ndarray:
    e_full, e_half, q, f1, f2, f3 = coeffs
    n1 = _full_nonlinear(grid, vhat)
    a = e_half * vhat + q * n1
    n2 = _full_nonlinear(grid, a)
    b = e_half * vhat + q * n2
    n3 = _full_nonlinear(grid, b)
    c = e_half * a + q * (2.0 * n3 - n1)
    n4 = _full_nonlinear(grid, c)
    return e_full * vhat + f1 * n1 + 2.0 * f2 * (n2 + n3) + f3 * n4


def step_full(u: Field2D, dt: float, cap: float = DEFAULT_BLOWUP_CAP) -> Field2D:
    """One ETDRK4 step of the full flow (dealised quadratic term)."""
    grid = u.grid
    vhat = grid.fft2(u.values)
    out = grid.ifft2(_step_full_hat(grid, vhat, _etdrk4_coeffs(grid, dt)))
    amp = float(np.max(np.abs(out)))
    if not math.isfinite(amp) or amp > cap:
        raise BlowupError(f"amplitude {amp:.3e} exceeded the cap {cap:.3e}")
    return Field2D(grid, out)


def evolve_full(
    u0: Field2D,
    t_final: float,
    dt: float,
    observer: Callable[[int, float, Field2D], None] | None = None,
    observe_every: int = 1,
    cap: float = DEFAULT_BLOWUP_CAP,
) -> Field2D:
    """Advance the full flow to t_final; the observer sees every
    observe_every-th state (including the initial and final ones)."""
    grid = u0.grid
    steps = int(round(t_final / dt))
    if abs(steps * dt - t_final) > 1e-9 * max(1.0, abs(t_final)):
        raise ValueError("t_final must be an integer number of steps")
    coeffs = _etdrk4_coeffs(grid, dt)
    vhat = grid.fft2(u0.values) * grid.dealias_mask
    if observer is not None:
        observer(0, 0.0, Field2D(grid, grid.ifft2(vhat)))
    for k in range(1, steps + 1):
        vhat = _step_full_hat(grid, vhat, coeffs)
        if k % 64 == 0 or k == steps:
            amp = float(np.max(np.abs(vhat)))
            if not math.isfinite(amp) or amp > cap * grid.nx * grid.ny:
                raise BlowupError(f"spectral amplitude blew up at t={k*dt:.3f}")
        if observer is not None and (k % observe_every == 0 or k == steps):
            observer(k, k * dt, Field2D(grid, grid.ifft2(vhat)))
    out = grid.ifft2(vhat)
    if not np.all(np.isfinite(out)):
        raise BlowupError("non-finite values in the final state")
    return Field2D(grid, out)


# -- soliton-frame stepper -----------------------------------------------------


class _FrameCache:
    """Per-(spec, dt) precomputations for the soliton-frame systems."""

    def __init__(self, spec: SpectralData, dt: float):
        grid = spec.grid
        self.spec = spec
        self.dt = dt
        sym = 1j * grid.xi_odd[:, None] * (
            grid.xi[:, None] ** 2 + grid.eta[None, :] ** 2 + spec.c_star
        )
        self.phi_full = np.exp(dt * sym)
        self.phi_half = np.exp(0.5 * dt * sym)
        self.ixi = 1j * grid.xi_odd[:, None]
        prof = spec.profile
        self.q = prof.q.values
        self.dxq = prof.dq_dx.values
        self.dcq = prof.dq_dc.values
        self.dxxq = grid.ddx_values(self.dxq)
        self.l_dxx_q = spec.l_dxx_q
        self.dxq_sq_2d = spec.dxq_sq_2d
        self.dcq_q_2d = spec.dcq_q_2d
        # pairing weight turning a y-mean profile into a 2D inner product
        self.pair_w = grid.dx * spec.two_pi_l


_FRAME_CACHE: dict[tuple, _FrameCache] = {}


def _frame_cache(spec: SpectralData, dt: float) -> _FrameCache:
    key = (spec.grid.key(), spec.c_star, float(dt))
    hit = _FRAME_CACHE.get(key)
    if hit is None or hit.spec is not spec:
        hit = _FrameCache(spec, dt)
        _FRAME_CACHE[key] = hit
    return hit


def _h1_sq_hat(grid: Grid2D, vhat: np.ndarray) -> float:
    sym = 1.0 + grid.xi[:, None] ** 2 + grid.eta[None, :] ** 2
    mult = np.full(grid.ny // 2 + 1, 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    scale = grid.weight / (grid.nx * grid.ny)
    return float(np.sum(sym * (vhat.real**2 + vhat.imag**2) * mult[None, :]) * scale)


def _frame_rhs(
    cache: _FrameCache, vhat: np.ndarray, c: float, chi: float
) -> tuple[np.ndarray, float, float]:
    """Nonstiff right-hand side and modulation scalars at one RK stage.

    Returns (nhat, c_dot, rho_dot).  The stiff symbol i xi (|k|^2 + c*) is
    excluded (it rides on the integrating factor).
    """
    spec = cache.spec
    grid = spec.grid
    c_star = spec.c_star
    x = grid.x
    v = np.fft.irfft2(vhat, s=(grid.nx, grid.ny))
    vbar = v.mean(axis=1)
    w = cache.pair_w

    # modulation scalars: conservation of (v, dxQ*) fixes rho_dot, then
    # conservation of (v, Q*) fixes c_dot (the c_dot column drops out of the
    # first row because (dQ/dc, dxQ) vanishes by parity)
    pair_l_dxxq = w * float(np.dot(cache.l_dxx_q, vbar))
    if chi != 0.0:
        qc = q_values(c, x)
        dq = cache.q - qc  # Q_{c*} - Q_c
        v2bar = (v * v).mean(axis=1)
        pair_dxv_dxq = -w * float(np.dot(cache.dxxq, vbar))
        num1 = pair_l_dxxq + chi * (
            -(c - c_star) * pair_dxv_dxq
            - w * float(np.dot(cache.dxxq, v2bar))
            + 2.0 * w * float(np.dot(dq * cache.dxxq, vbar))
        )
        dqc_dx = dq_dx_values(c, x)
        den1 = cache.dxq_sq_2d + chi * (
            pair_dxv_dxq + w * float(np.dot(dqc_dx - cache.dxq, cache.dxq))
        )
    else:
        num1 = pair_l_dxxq
        den1 = cache.dxq_sq_2d
    if abs(den1) < 1e-8 * cache.dxq_sq_2d:
        raise ModulationError("degenerate modulation matrix (rho row)")
    rho_dot = c + num1 / den1

    if chi != 0.0:
        dqc_dc = dq_dc_values(c, x)
        num2 = (
            -w * float(np.dot(cache.dxq, v2bar))
            + (rho_dot - c_star) * w * float(np.dot(cache.dxq, vbar))
            + 2.0 * w * float(np.dot(dq * cache.dxq, vbar))
        )
        den2 = cache.dcq_q_2d + chi * w * float(np.dot(dqc_dc - cache.dcq, cache.q))
        if abs(den2) < 1e-8 * abs(cache.dcq_q_2d):
            raise ModulationError("degenerate modulation matrix (c row)")
        c_dot = -chi * num2 / den2
    else:
        c_dot = 0.0

    # transported quadratic + potential block, one product field
    if chi != 0.0:
        b = -2.0 * cache.q + (2.0 * chi) * dq + (chi * (rho_dot - c_star))
        wfield = (b[:, None] - chi * v) * v
    else:
        wfield = (-2.0 * cache.q)[:, None] * v
    nhat = cache.ixi * (np.fft.rfft2(wfield) * grid.dealias_mask)

    # y-independent forcing
    g = (rho_dot - c) * cache.dxq - c_dot * cache.dcq
    if chi != 0.0:
        g = g + (chi * (rho_dot - c)) * (dqc_dx - cache.dxq)
        g = g - (chi * c_dot) * (dqc_dc - cache.dcq)
    nhat[:, 0] += np.fft.fft(g) * grid.ny
    return nhat, c_dot, rho_dot


def _chi_of(
    mode: str, params: CutoffParams | None, grid: Grid2D, vhat: np.ndarray, c: float
) -> float:
    if mode == "modulated":
        return 1.0
    if mode == "linear":
        return 0.0
    arg = (_h1_sq_hat(grid, vhat) + (c - params.c_star) ** 2) / params.delta**2
    return params.chi(arg)


def _step_frame_hat(
    cache: _FrameCache,
    vhat: np.ndarray,
    c: float,
    rho: float,
    mode: str,
    params: CutoffParams | None,
) -> tuple[np.ndarray, float, float]:
    """One integrating-factor RK4 step of the (v, c, rho) system."""
    spec = cache.spec
    grid = spec.grid
    h = cache.dt
    ph, pf = cache.phi_half, cache.phi_full

    chi1 = _chi_of(mode, params, grid, vhat, c)
    n1, dc1, dr1 = _frame_rhs(cache, vhat, c, chi1)

    v2 = ph * (vhat + (0.5 * h) * n1)
    c2 = c + 0.5 * h * dc1
    chi2 = _chi_of(mode, params, grid, v2, c2)
    n2, dc2, dr2 = _frame_rhs(cache, v2, c2, chi2)

    v3 = ph * vhat + (0.5 * h) * n2
    c3 = c + 0.5 * h * dc2
    chi3 = _chi_of(mode, params, grid, v3, c3)
    n3, dc3, dr3 = _frame_rhs(cache, v3, c3, chi3)

    v4 = pf * vhat + h * (ph * n3)
    c4 = c + h * dc3
    chi4 = _chi_of(mode, params, grid, v4, c4)
    n4, dc4, dr4 = _frame_rhs(cache, v4, c4, chi4)

    v_new = pf * vhat + (h / 6.0) * (pf * n1 + 2.0 * ph * (n2 + n3) + n4)
    c_new = c + (h / 6.0) * (dc1 + 2.0 * (dc2 + dc3) + dc4)
    rho_new = rho + (h / 6.0) * (dr1 + 2.0 * (dr2 + dr3) + dr4)
    if not (math.isfinite(c_new) and c_new > 0.05 * spec.c_star):
        raise BlowupError(f"modulated speed degenerated to {c_new!r}")
    return v_new, c_new, rho_new


def rhs_modulated(
    state: ModulatedState, spec: SpectralData
) -> tuple[Field2D, float, float]:
    """Full right-hand side of the exact soliton-frame system (chi = 1)."""
    cache = _frame_cache(spec, 0.0)  # propagators unused for a bare evaluation
    grid = spec.grid
    vhat = grid.fft2(state.v.values)
    nhat, c_dot, rho_dot = _frame_rhs(cache, vhat, state.c, 1.0)
    sym = 1j * grid.xi_odd[:, None] * (
        grid.xi[:, None] ** 2 + grid.eta[None, :] ** 2 + spec.c_star
    )
    dv = grid.ifft2(sym * vhat + nhat)
    return Field2D(grid, dv), c_dot, rho_dot


def _step_state(
    state: ModulatedState,
    spec: SpectralData,
    dt: float,
    mode: str,
    params: CutoffParams | None,
) -> ModulatedState:
    grid = spec.grid
    cache = _frame_cache(spec, dt)
    vhat = grid.fft2(state.v.values)
    v_new, c_new, rho_new = _step_frame_hat(cache, vhat, state.c, state.rho, mode, params)
    return ModulatedState(
        Field2D(grid, grid.ifft2(v_new)), c_new, rho_new, state.t + dt
    )


def step_modulated(state: ModulatedState, spec: SpectralData, dt: float) -> ModulatedState:
    """One step of the exact frame change of the full flow (chi identically 1)."""
    return _step_state(state, spec, dt, "modulated", None)


def step_localized(
    state: ModulatedState, params: CutoffParams, spec: SpectralData, dt: float
) -> ModulatedState:
    """One step of the localized system (chi_delta evaluated at every stage)."""
    return _step_state(state, spec, dt, "localized", params)


def step_linear(
    state: ModulatedState, spec: SpectralData, dt: float, c0: float | None = None
) -> ModulatedState:
    """One step of the linear system; c is frozen at c0 (default: the state's)."""
    if c0 is not None and c0 != state.c:
        state = ModulatedState(state.v, c0, state.rho, state.t)
    return _step_state(state, spec, dt, "linear", None)


def evolve_frame(
    state0: ModulatedState,
    spec: SpectralData,
    t_final: float,
    dt: float,
    mode: str = "modulated",
    params: CutoffParams | None = None,
    observer: Callable[[int, ModulatedState], None] | None = None,
    observe_every: int = 1,
) -> ModulatedState:
    """Drive any of the soliton-frame systems from state0.t to t_final."""
    span = t_final - state0.t
    steps = int(round(span / dt))
    if abs(steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError("time span must be an integer number of steps")
    grid = spec.grid
    cache = _frame_cache(spec, dt)
    vhat = grid.fft2(state0.v.values)
    c, rho, t = state0.c, state0.rho, state0.t
    if observer is not None:
        observer(0, state0)
    for k in range(1, steps + 1):
        vhat, c, rho = _step_frame_hat(cache, vhat, c, rho, mode, params)
        t = state0.t + k * dt
        if observer is not None and (k % observe_every == 0 or k == steps):
            observer(k, ModulatedState(Field2D(grid, grid.ifft2(vhat)), c, rho, t))
    return ModulatedState(Field2D(grid, grid.ifft2(vhat)), c, rho, t)


# -- frozen-coefficient semigroup ---------------------------------------------


def semigroup_d_coefficients(
    dec: Decomposition, spec: SpectralData, t: float
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Exact action of e^{tA} on the discrete block: growth/decay on the
    F-modes, identity on the dQ/dx and dQ/dc directions."""
    rates = spec.rates()
    gp = np.exp(rates * t)[:, None]
    return dec.lam_plus * gp, dec.lam_minus / gp, dec.mu1, dec.mu2


def apply_semigroup(
    v: Field2D, spec: SpectralData, t: float, dt: float | None = None
) -> Field2D:
    """e^{tA} v: eigen-exponentials on the discrete block, the chi = 0
    stepper on the gamma block (whose subspace the linear flow preserves)."""
    dec = decompose(v, spec)
    lam_p, lam_m, mu1, mu2 = semigroup_d_coefficients(dec, spec, t)
    out = d_part_values(spec, lam_p, lam_m, mu1, mu2)
    if float(np.max(np.abs(dec.gamma.values))) > 0.0 and t != 0.0:
        if dt is None:
            dt = math.copysign(abs(t) / max(1, math.ceil(abs(t) / 0.04)), t)
        gam = evolve_frame(
            ModulatedState(dec.gamma, spec.c_star, 0.0, 0.0),
            spec,
            t,
            dt,
            mode="linear",
        )
        out = out + gam.v.values
    else:
        out = out + dec.gamma.values
    return Field2D(spec.grid, out)


@dataclass(frozen=True)
class ConservationReport:
    """Largest drifts of the linear-flow invariants along a trajectory."""

    gamma_energy_drift: float
    q_pairing_drift: float
    dxq_pairing_drift: float


def conservation_report(
    states: Sequence[ModulatedState], spec: SpectralData
) -> ConservationReport:
    """Invariants of the linear system, measured along a trajectory: the
    energy norm of the gamma part and the two soliton pairings."""
    if not states:
        raise ValueError("empty trajectory")
    w = spec.grid.dx * spec.two_pi_l
    qs, dxqs = spec.profile.q.values, spec.profile.dq_dx.values

    def observables(s: ModulatedState) -> tuple[float, float, float]:
        dec = decompose(s.v, spec)
        vbar = s.v.values.mean(axis=1)
        return (
            math.sqrt(max(0.0, gamma_quadratic(dec.gamma, spec))),
            w * float(np.dot(qs, vbar)),
            w * float(np.dot(dxqs, vbar)),
        )

    base = observables(states[0])
    drifts = [0.0, 0.0, 0.0]
    for s in states[1:]:
        cur = observables(s)
        for i in range(3):
            drifts[i] = max(drifts[i], abs(cur[i] - base[i]))
    return ConservationReport(*drifts)


# -- reference trajectories and the tangent flow --------------------------------


@dataclass(frozen=True, eq=False)
class ReferenceTrajectory:
    """A soliton-frame trajectory sampled on a uniform time grid, dense
    enough (spacing = half the tangent step) for RK4 stage lookups."""

    spec: SpectralData
    times: np.ndarray
    v_values: np.ndarray  # (nt, nx, ny)
    c: np.ndarray
    rho: np.ndarray
    c_dot: np.ndarray
    rho_dot: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0])

    def index_of(self, t: float) -> int:
        i = int(round((t - self.times[0]) / self.spacing))
        if i < 0 or i >= len(self.times) or abs(self.times[i] - t) > 1e-9:
            raise NumericsError(f"time {t} is not on the reference grid")
        return i


def make_reference(
    state0: ModulatedState, spec: SpectralData, t_final: float, spacing: float
) -> ReferenceTrajectory:
    """Evolve the exact frame system, recording every state and its
    modulation scalars on the given spacing."""
    steps = int(round((t_final - state0.t) / spacing))
    if abs(steps * spacing - (t_final - state0.t)) > 1e-9:
        raise ValueError("span must be an integer number of spacings")
    grid = spec.grid
    cache = _frame_cache(spec, spacing)
    nt = steps + 1
    times = state0.t + spacing * np.arange(nt)
    v_values = np.empty((nt, grid.nx, grid.ny))
    cs = np.empty(nt)
    rhos = np.empty(nt)
    c_dots = np.empty(nt)
    rho_dots = np.empty(nt)
    vhat = grid.fft2(state0.v.values)
    c, rho = state0.c, state0.rho
    for k in range(nt):
        v_values[k] = grid.ifft2(vhat)
        cs[k], rhos[k] = c, rho
        _, c_dots[k], rho_dots[k] = _frame_rhs(cache, vhat, c, 1.0)
        if k < steps:
            vhat, c, rho = _step_frame_hat(cache, vhat, c, rho, "modulated", None)
    return ReferenceTrajectory(spec, times, v_values, cs, rhos, c_dots, rho_dots)


@dataclass(frozen=True, eq=False)
class TangentState:
    """Linearization data (eta, a1) transported along a reference."""

    eta: Field2D
    a1: float
    along: ReferenceTrajectory
    t: float


def _tangent_rhs(
    cache: _FrameCache, ref: ReferenceTrajectory, i: int, ehat: np.ndarray, a1: float
) -> np.ndarray:
    """Nonstiff block of the tangent equation at reference index i."""
    spec = cache.spec
    grid = spec.grid
    x = grid.x
    c0 = float(ref.c[i])
    rho_dot = float(ref.rho_dot[i])
    c_dot = float(ref.c_dot[i])
    eta = np.fft.irfft2(ehat, s=(grid.nx, grid.ny))
    # potential blocks combine: dx L eta - 2 dx((Q_c0 - Q*) eta) carries
    # the plain -2 Q_c0 coefficient
    qc0 = q_values(c0, x)
    b = -2.0 * qc0 + (rho_dot - spec.c_star)
    wfield = b[:, None] * eta - 2.0 * ref.v_values[i] * eta
    if a1 != 0.0:
        wfield = wfield - (2.0 * a1) * dq_dc_values(c0, x)[:, None] * ref.v_values[i]
    nhat = cache.ixi * (np.fft.rfft2(wfield) * grid.dealias_mask)
    if a1 != 0.0:
        g = (
            -a1 * dq_dx_values(c0, x)
            + (a1 * (rho_dot - c0)) * d2q_dcdx_values(c0, x)
            - (c_dot * a1) * d2q_dc2_values(c0, x)
        )
        nhat[:, 0] += np.fft.fft(g) * grid.ny
    return nhat


def step_tangent(ts: TangentState, dt: float) -> TangentState:
    """One RK4 step of the tangent flow; the reference must be sampled at
    dt/2 so that every stage lands on a stored slice."""
    ref = ts.along
    spec = ref.spec
    grid = spec.grid
    if abs(dt - 2.0 * ref.spacing) > 1e-12 * max(1.0, abs(dt)):
        raise NumericsError("tangent step must be twice the reference spacing")
    i = ref.index_of(ts.t)
    if i + 2 >= len(ref.times):
        raise NumericsError("tangent step runs past the stored reference")
    cache = _frame_cache(spec, dt)
    ph, pf = cache.phi_half, cache.phi_full
    ehat = grid.fft2(ts.eta.values)
    a1 = ts.a1
    n1 = _tangent_rhs(cache, ref, i, ehat, a1)
    n2 = _tangent_rhs(cache, ref, i + 1, ph * (ehat + (0.5 * dt) * n1), a1)
    n3 = _tangent_rhs(cache, ref, i + 1, ph * ehat + (0.5 * dt) * n2, a1)
    n4 = _tangent_rhs(cache, ref, i + 2, pf * ehat + dt * (ph * n3), a1)
    e_new = pf * ehat + (dt / 6.0) * (pf * n1 + 2.0 * ph * (n2 + n3) + n4)
    return TangentState(
        Field2D(grid, grid.ifft2(e_new)), a1, ref, ts.t + dt
    )


def evolve_tangent(
    eta0: Field2D, a1: float, ref: ReferenceTrajectory
) -> TangentState:
    """Transport (eta0, a1) along the whole stored reference."""
    ts = TangentState(eta0, a1, ref, float(ref.times[0]))
    dt = 2.0 * ref.spacing
    for _ in range((len(ref.times) - 1) // 2):
        ts = step_tangent(ts, dt)
    return ts


def _family_rhs(
    cache: _FrameCache, ref: ReferenceTrajectory, i: int, vhat: np.ndarray, ha1: float
) -> np.ndarray:
    """Nonstiff block of the perturbed family: the reference equation with
    frozen modulation scalars and the speed path shifted to c0(t) + h a1."""
    spec = cache.spec
    grid = spec.grid
    x = grid.x
    ch = float(ref.c[i]) + ha1
    rho_dot = float(ref.rho_dot[i])
    c_dot = float(ref.c_dot[i])
    v = np.fft.irfft2(vhat, s=(grid.nx, grid.ny))
    # dx L v + 2 dx((Q* - Q_ch) v) leaves the plain -2 Q_ch potential
    qch = q_values(ch, x)
    b = -2.0 * qch + (rho_dot - spec.c_star)
    wfield = (b[:, None] - v) * v
    nhat = cache.ixi * (np.fft.rfft2(wfield) * grid.dealias_mask)
    g = (rho_dot - ch) * dq_dx_values(ch, x) - c_dot * dq_dc_values(ch, x)
    nhat[:, 0] += np.fft.fft(g) * grid.ny
    return nhat


def evolve_family(
    v0: Field2D, ha1: float, ref: ReferenceTrajectory
) -> Field2D:
    """Evolve the reference-driven equation whose speed path is shifted by
    h*a1; at h = 0 this is the reference equation itself, so difference
    quotients of the result converge to the tangent flow."""
    spec = ref.spec
    grid = spec.grid
    dt = 2.0 * ref.spacing
    cache = _frame_cache(spec, dt)
    ph, pf = cache.phi_half, cache.phi_full
    vhat = grid.fft2(v0.values)
    for k in range((len(ref.times) - 1) // 2):
        i = 2 * k
        n1 = _family_rhs(cache, ref, i, vhat, ha1)
        n2 = _family_rhs(cache, ref, i + 1, ph * (vhat + (0.5 * dt) * n1), ha1)
        n3 = _family_rhs(cache, ref, i + 1, ph * vhat + (0.5 * dt) * n2, ha1)
        n4 = _family_rhs(cache, ref, i + 2, pf * vhat + dt * (ph * n3), ha1)
        vhat = pf * vhat + (dt / 6.0) * (pf * n1 + 2.0 * ph * (n2 + n3) + n4)
    return Field2D(grid, grid.ifft2(vhat))
