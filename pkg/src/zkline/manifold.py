"""Tube geometry around the line solitary wave and the shooting
realization of the center-stable graph.

``tube_distance`` measures the translation-minimized H1 gap to the
solitary profile.  ``shoot_graph`` finds the driven-coefficient vector
a_plus = G(w, c) whose trajectory never leaves the tube: each growing
coefficient Lambda_m(t) behaves like e^{lambda_m t}(a_m - G_m), so the
sign of a late readout bisects a bracket while the renormalized value
Lambda_m(T) e^{-lambda_m T} is a Newton correction.  Signs guard the
brackets, values do the convergence work; a run that reaches the horizon
without triggering is itself the persistence certificate.

``tangent_dichotomy`` classifies the tangent flow along a stored
reference: either the driven block wins a definite exponential race after
a trigger time, or it stays dominated with at most a slow envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .decomp import decompose, energy_report, gamma_quadratic, project
from .dynamics import (
    DEFAULT_BLOWUP_CAP,
    ModulatedState,
    ReferenceTrajectory,
    TangentState,
    _etdrk4_coeffs,
    _frame_cache,
    _step_frame_hat,
    _step_full_hat,
    step_tangent,
)
from .errors import BlowupError, BracketError, DomainError, NumericsError
from .grid import Field2D, Grid2D, h1_norm
from .soliton import q_values
from .spectral import SpectralData

_INVGOLD = (math.sqrt(5.0) - 1.0) / 2.0
#: golden-section tolerance for the tube shift
TUBE_Q_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TubeQuery:
    """A field with the tube it is measured against."""

    c_ref: float
    epsilon: float
    u: Field2D

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("tube radius must be positive")


def _tube_pieces(grid: Grid2D, c_ref: float) -> tuple[np.ndarray, float]:
    """Weighted profile transform and profile norm for the correlation form

        ||u - tau_q Q||_H1^2 = ||u||_H1^2 + ||Q||_H1^2 - 2 C(q),
        C(q) = Re sum_xi weight(xi) ubar_hat(xi) e^{i xi q}.
    """
    q = q_values(c_ref, grid.x)
    qhat = np.fft.fft(q)
    xi = grid.xi
    two_pi_l = 2.0 * math.pi * grid.torus_scale
    scale = grid.dx * two_pi_l / grid.nx
    weight = (1.0 + xi**2) * np.conj(qhat) * scale
    qq_sq = float(np.sum((1.0 + xi**2) * np.abs(qhat) ** 2)) * scale
    return weight, qq_sq


def _best_shift(grid: Grid2D, prod: np.ndarray) -> tuple[float, float]:
    """Maximize C(q) = Re sum prod e^{i xi q}: grid scan plus golden refine.

    Returns (best evaluated C, its shift); exact grid-point maxima survive
    untouched because only strictly better evaluations replace them.
    """
    xi = grid.xi
    corr = np.fft.ifft(prod).real * grid.nx
    m = int(np.argmax(corr))
    q0 = m * grid.dx if m <= grid.nx // 2 else (m - grid.nx) * grid.dx
    best_c, best_q = float(corr[m]), q0

    def corr_at(q: float) -> float:
        return float(np.sum(prod * np.exp(1j * xi * q)).real)

    lo, hi = q0 - grid.dx, q0 + grid.dx
    x1 = hi - _INVGOLD * (hi - lo)
    x2 = lo + _INVGOLD * (hi - lo)
    f1, f2 = corr_at(x1), corr_at(x2)
    while hi - lo > TUBE_Q_TOL:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVGOLD * (hi - lo)
            f1 = corr_at(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVGOLD * (hi - lo)
            f2 = corr_at(x2)
        if f1 > best_c:
            best_c, best_q = f1, x1
        if f2 > best_c:
            best_c, best_q = f2, x2
    return best_c, best_q


def tube_distance(u: Field2D, c_ref: float) -> tuple[float, float]:
    """Distance inf_q ||u - tau_q Q_{c_ref}||_H1 and its minimizing shift."""
    grid = u.grid
    weight, qq_sq = _tube_pieces(grid, c_ref)
    ubar_hat = np.fft.fft(u.values.mean(axis=1))
    best_c, best_q = _best_shift(grid, ubar_hat * weight)
    dist_sq = h1_norm(u) ** 2 + qq_sq - 2.0 * best_c
    return math.sqrt(max(0.0, dist_sq)), best_q


def mass_based_c(u: Field2D, c_ref: float | None = None) -> float:
    """Speed of the solitary profile with the same mass: closed-form
    inversion of 2 pi L * 6 c^{3/2} = M(u).  (c_ref is accepted for
    interface symmetry with the tube queries; the inversion ignores it.)"""
    grid = u.grid
    m = float(np.sum(u.values**2)) * grid.weight
    if m <= 0.0:
        raise DomainError("mass-based speed needs positive mass")
    two_pi_l = 2.0 * math.pi * grid.torus_scale
    return (m / (6.0 * two_pi_l)) ** (2.0 / 3.0)


def exit_time(
    u0: Field2D,
    c_ref: float,
    epsilon: float,
    t_max: float,
    dt: float = 0.02,
    observer: Callable[[float, float], None] | None = None,
    cap: float = DEFAULT_BLOWUP_CAP,
) -> float | None:
    """First time the full flow leaves the epsilon-tube, or None by t_max.

    The grid-resolution correlation scan bounds the distance from above,
    so the golden refinement only runs once that bound crosses epsilon.
    """
    grid = u0.grid
    d0, _ = tube_distance(u0, c_ref)
    if d0 >= epsilon:
        raise DomainError(
            f"initial state is outside the tube ({d0:.3e} >= {epsilon:.3e})"
        )
    weight, qq_sq = _tube_pieces(grid, c_ref)
    sym = 1.0 + grid.xi[:, None] ** 2 + grid.eta[None, :] ** 2
    mult = np.full(grid.ny // 2 + 1, 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    h1_scale = (sym * mult[None, :]) * (grid.weight / (grid.nx * grid.ny))
    coeffs = _etdrk4_coeffs(grid, dt)
    vhat = grid.fft2(u0.values) * grid.dealias_mask
    steps = int(math.ceil(t_max / dt - 1e-12))
    for k in range(1, steps + 1):
        vhat = _step_full_hat(grid, vhat, coeffs)
        t = k * dt
        u_sq = float(np.sum(h1_scale * (vhat.real**2 + vhat.imag**2)))
        if not math.isfinite(u_sq) or u_sq > cap**2:
            raise BlowupError(f"blowup at t={t:.4f} before the tube decision")
        corr = np.fft.ifft(vhat[:, 0] / grid.ny * weight).real * grid.nx
        coarse_sq = u_sq + qq_sq - 2.0 * float(np.max(corr))
        if observer is not None:
            observer(t, math.sqrt(max(0.0, coarse_sq)))
        if coarse_sq >= epsilon**2:
            u = Field2D(grid, grid.ifft2(vhat))
            dist, _ = tube_distance(u, c_ref)
            if dist >= epsilon:
                return t
    return None


def measure_growth(
    trajectory: Sequence[ModulatedState],
    spec: SpectralData,
    lo: float = 1e-6,
    hi: float = 1e-2,
) -> float:
    """Least-squares growth rate of log ||P_+ v(t)||_E inside (lo, hi)."""
    ts, logs = [], []
    for s in trajectory:
        dec = decompose(s.v, spec)
        p = float(np.sqrt(np.sum(dec.lam_plus**2)))
        if lo < p < hi:
            ts.append(s.t)
            logs.append(math.log(p))
    if len(ts) < 2:
        raise NumericsError(
            f"growth window ({lo:.1e}, {hi:.1e}) captured {len(ts)} samples"
        )
    return float(np.polyfit(np.array(ts), np.array(logs), 1)[0])


# -- shooting --------------------------------------------------------------


@dataclass(frozen=True)
class ShootResult:
    """Graph coefficients with the certificate of their quality."""

    a_plus: np.ndarray
    persist_time: float
    converged: bool
    bracket_width: float


@dataclass(frozen=True)
class _RunOutcome:
    exited: bool
    t_end: float
    lam_end: np.ndarray  # (2 n0,) readout of the driven block at t_end
    tube_ok: bool


def _mode_matrix(spec: SpectralData, sign: int) -> np.ndarray:
    """(2 n0, nx, ny) array of the F_k^{sign, j} fields, (k, j) lexicographic."""
    fields = []
    for i, mode in enumerate(spec.modes):
        prof = (mode.f_plus if sign > 0 else mode.f_minus).values
        fields.append(prof[:, None] * spec.cos_k[i][None, :])
        fields.append(prof[:, None] * spec.sin_k[i][None, :])
    return np.stack(fields)


def _lam_readout(spec: SpectralData, vhat: np.ndarray, sign: int) -> np.ndarray:
    """Driven-block coefficients (k, j) straight from the 2D spectrum.

    The x-profile of transverse mode k is the x-inverse of column k, so
    this matches the decomposition pairings without a full inverse
    transform.
    """
    grid = spec.grid
    w = grid.weight
    out = np.empty(2 * spec.n0)
    duals = spec.lf_minus if sign > 0 else spec.lf_plus
    for i, mode in enumerate(spec.modes):
        col = np.fft.ifft(vhat[:, mode.k])
        out[2 * i] = w * float(np.dot(duals[i], col.real))
        out[2 * i + 1] = -w * float(np.dot(duals[i], col.imag))
    return out


class _Shooter:
    """One shooting problem: base state, trigger bookkeeping, runs."""

    def __init__(
        self,
        w: Field2D,
        c: float,
        spec: SpectralData,
        epsilon: float,
        dt: float,
        theta: float,
        check_every: int,
        tube_every: int,
        direction: int,
    ):
        self.spec = spec
        self.grid = spec.grid
        self.c0 = c
        self.epsilon = epsilon
        self.dt = dt if direction > 0 else -dt
        self.theta = theta
        self.gate = theta / 3.0
        self.check_every = check_every
        self.tube_every = tube_every
        self.sign = 1 if direction > 0 else -1
        self.cache = _frame_cache(spec, self.dt)
        self.w_values = w.values
        self.modes = _mode_matrix(spec, self.sign)
        self.rates = np.repeat(spec.rates(), 2)
        self.tube_max = 0.0

    def _tube_ok(self, vhat: np.ndarray, c: float, rho: float) -> bool:
        v = self.grid.ifft2(vhat)
        u = self.grid.translate_values(v + q_values(c, self.grid.x)[:, None], rho)
        dist, _ = tube_distance(Field2D(self.grid, u), self.spec.c_star)
        self.tube_max = max(self.tube_max, dist)
        return dist < self.epsilon

    def run(self, a: np.ndarray, t_cap: float) -> _RunOutcome:
        """Evolve w + sum a_m F^m until the driven block triggers."""
        v0 = self.w_values + np.tensordot(a, self.modes, axes=(0, 0))
        vhat = self.grid.fft2(v0)
        c, rho = self.c0, 0.0
        steps = int(round(t_cap / abs(self.dt)))
        lam = _lam_readout(self.spec, vhat, self.sign)
        for k in range(1, steps + 1):
            vhat, c, rho = _step_frame_hat(self.cache, vhat, c, rho, "modulated", None)
            if k % self.check_every == 0 or k == steps:
                lam = _lam_readout(self.spec, vhat, self.sign)
                if float(np.sum(lam**2)) >= self.theta**2:
                    return _RunOutcome(True, k * abs(self.dt), lam, True)
            if k % self.tube_every == 0 and not self._tube_ok(vhat, c, rho):
                lam = _lam_readout(self.spec, vhat, self.sign)
                return _RunOutcome(True, k * abs(self.dt), lam, False)
        return _RunOutcome(False, steps * abs(self.dt), lam, True)


def _probe_signs(out: _RunOutcome, gate: float) -> np.ndarray:
    return np.where(np.abs(out.lam_end) >= gate, np.sign(out.lam_end), 0.0)


def shoot_graph(
    w: Field2D,
    c: float,
    spec: SpectralData,
    epsilon: float,
    t_max: float,
    dt: float = 0.0175,
    theta: float | None = None,
    check_every: int = 5,
    tube_every: int = 50,
    max_rounds: int = 48,
    max_offset_frac: float = 0.75,
    direction: int = 1,
) -> ShootResult:
    """Coefficients of the center-stable graph above (w, c).

    w must carry no driven component and the base offset
    ||w||_E + |log c - log c*| must stay below max_offset_frac * epsilon.
    direction=-1 mirrors the construction, driving the decaying block
    backward in time (the result vector then holds those coefficients).

    Because the final correction is read out at a late run time, the
    converged coefficients absorb the integrator's slow leakage into the
    driven block: the driven coefficients of the certified run stay at the
    leakage floor for the whole horizon instead of inheriting its e^{lam t}
    amplification.  The practical requirement on (grid, dt) is only that
    no numerical mode grows faster than the physical rates; see the module
    tests for the stability envelope.
    """
    dec = decompose(w, spec)
    driven0 = dec.lam_plus if direction > 0 else dec.lam_minus
    if float(np.max(np.abs(driven0), initial=0.0)) > 1e-10 * max(1.0, h1_norm(w)):
        raise ValueError("shooting data must not contain the driven block")
    rep = energy_report(dec, spec)
    offset = rep.value + abs(math.log(c) - math.log(spec.c_star))
    if offset > max_offset_frac * epsilon:
        raise DomainError(
            f"base offset {offset:.3e} exceeds {max_offset_frac} * epsilon"
        )
    if spec.n0 == 0:
        return ShootResult(np.zeros(0), t_max, True, 0.0)
    theta = epsilon / 3.0 if theta is None else theta
    sh = _Shooter(w, c, spec, epsilon, dt, theta, check_every, tube_every, direction)
    n = 2 * spec.n0

    # establish the bracket: probes at +-r0 must not read a sign that puts
    # the graph outside; a probe that persists certifies its side outright
    r0 = max(0.6 * offset, 1e-9)
    lo = hi = None
    for _ in range(3):
        out_p = sh.run(np.full(n, r0), t_max)
        out_n = sh.run(np.full(n, -r0), t_max)
        sp = _probe_signs(out_p, sh.gate) if out_p.exited else np.ones(n)
        sn = _probe_signs(out_n, sh.gate) if out_n.exited else -np.ones(n)
        if np.all(sp >= 0) and np.all(sn <= 0):
            lo, hi = np.full(n, -r0), np.full(n, r0)
            break
        r0 *= 4.0
    if lo is None:
        raise BracketError(
            f"no sign change along the driven block within half-width {r0:.3e}"
        )

    a = np.zeros(n)
    best_a, best_persist = a.copy(), 0.0
    prev_exit = -math.inf
    stalls = 0
    converged = False
    for _ in range(max_rounds):
        out = sh.run(a, t_max)
        if out.t_end > best_persist or not out.exited:
            best_a, best_persist = a.copy(), out.t_end
        if not out.exited:
            converged = True
            break
        for m in range(n):  # sign reads tighten the brackets
            if abs(out.lam_end[m]) >= sh.gate:
                if out.lam_end[m] > 0:
                    hi[m] = min(hi[m], a[m])
                else:
                    lo[m] = max(lo[m], a[m])
        if float(np.max(hi - lo)) < 1e-10:
            best_a = 0.5 * (lo + hi)
            final = sh.run(best_a, t_max)
            best_persist = max(best_persist, final.t_end)
            converged = True
            break
        if out.t_end <= prev_exit + 1e-9:
            stalls += 1
        else:
            stalls = 0
        prev_exit = out.t_end
        if stalls >= 2:
            a = 0.5 * (lo + hi)  # Newton is stuck; fall back to bisection
            stalls = 0
        else:
            a_new = a - out.lam_end * np.exp(-sh.rates * out.t_end)
            inside = (a_new > lo) & (a_new < hi)
            a = np.where(inside, a_new, 0.5 * (lo + hi))
    return ShootResult(
        a_plus=best_a,
        persist_time=best_persist,
        converged=converged,
        bracket_width=float(np.max(hi - lo)),
    )


def lipschitz_probe(
    n_samples: int,
    radius: float,
    epsilon: float,
    t_max: float,
    spec: SpectralData,
    dt: float = 0.0175,
    seed: int = 0,
    delta: float | None = None,
) -> float:
    """Worst ratio ||a_plus(w0,c0) - a_plus(w1,c1)|| / m_delta over pairs
    of random graph arguments at the given radius."""
    from .metric import MobileParams, StatePair, mobile_distance

    if n_samples < 10:
        raise ValueError("the probe needs at least 10 samples")
    grid = spec.grid
    rng = np.random.default_rng(seed)
    params = MobileParams(delta=delta if delta is not None else epsilon)
    fm = _mode_matrix(spec, -1)
    dcq = spec.profile.dq_dc.values

    samples = []
    for _ in range(n_samples):
        bump = np.exp(-0.3 * (grid.x[:, None] - rng.uniform(-4.0, 4.0)) ** 2)
        bump = bump * np.cos(grid.y[None, :] * rng.integers(1, 3) / grid.torus_scale)
        parts = rng.standard_normal(3)
        vals = parts[0] * np.tensordot(rng.standard_normal(fm.shape[0]), fm, axes=(0, 0))
        vals = vals + parts[1] * bump + parts[2] * dcq[:, None]
        f = Field2D(grid, vals)
        clean = vals - project(f, "P_plus", spec).values
        nrm = energy_report(Field2D(grid, clean), spec).value
        w = Field2D(grid, clean * (0.6 * radius / nrm))
        cs = spec.c_star * math.exp(rng.uniform(-0.2, 0.2) * radius)
        samples.append((w, cs))

    shots = [shoot_graph(w, cs, spec, epsilon, t_max, dt=dt).a_plus for w, cs in samples]
    worst = 0.0
    for i in range(n_samples):
        for j in range(i + 1, n_samples):
            m = mobile_distance(
                StatePair(samples[i][0], samples[i][1], samples[j][0], samples[j][1]),
                params,
                spec,
            )
            if m <= 1e-14:
                continue
            worst = max(worst, float(np.linalg.norm(shots[i] - shots[j])) / m)
    return worst


# -- tangent dichotomy ------------------------------------------------------


@dataclass(frozen=True)
class DichotomyReport:
    """Outcome of the trigger test along a tangent trajectory.

    Either the driven block passed the trigger (triggered, t0, and the
    growth display checked from t0 + 1/2 on), or it stayed dominated
    (largest ratio against the non-driven envelope, and the measured
    envelope exponent normalized by kappa^{1/6})."""

    triggered: bool
    t0: float | None
    growth_ok: bool | None
    growth_margin: float | None
    bounded_ratio: float | None
    k1_estimate: float | None


def tangent_dichotomy(
    eta0: Field2D,
    a1: float,
    trajectory: ReferenceTrajectory,
    kappa: float,
    k0: float,
) -> DichotomyReport:
    """Classify the tangent flow along the stored reference.

    Trigger at the first stored time with
        K0 kappa^{1/3} (||P_<=0 eta||_{E_kappa^{1/3}} + |a1|) < ||P_+ eta||_E;
    after it, the race
        3 ||P_+ eta(t)||_E > e^{(k_*/2)(t - t0)}
            (||P_+ eta(t0)||_E + K0 kappa^{1/3} (||P_<=0 eta(t)|| + |a1|))
    must hold for t >= t0 + 1/2.  Without a trigger, the driven block is
    reported against the kappa^{1/3}-weighted envelope instead.
    """
    spec = trajectory.spec
    if kappa <= 0 or k0 <= 0:
        raise ValueError("kappa and K0 must be positive")
    kappa3 = kappa ** (1.0 / 3.0)
    dt = 2.0 * trajectory.spacing
    n_steps = (len(trajectory.times) - 1) // 2
    state = TangentState(eta0, a1, trajectory, float(trajectory.times[0]))

    times = np.empty(n_steps + 1)
    p_plus = np.empty(n_steps + 1)
    p_le0 = np.empty(n_steps + 1)

    def record(i: int, st: TangentState) -> None:
        dec = decompose(st.eta, spec)
        times[i] = st.t
        p_plus[i] = math.sqrt(float(np.sum(dec.lam_plus**2)))
        gsq = max(0.0, gamma_quadratic(dec.gamma, spec))
        p_le0[i] = math.sqrt(
            float(np.sum(dec.lam_minus**2))
            + (kappa3 * dec.mu1) ** 2
            + dec.mu2**2
            + gsq
        )

    record(0, state)
    for i in range(1, n_steps + 1):
        state = step_tangent(state, dt)
        record(i, state)

    thresh = k0 * kappa3 * (p_le0 + abs(a1))
    trig = np.nonzero(thresh < p_plus)[0]
    if trig.size == 0:
        denom = np.maximum(kappa3 * (p_le0 + abs(a1)), 1e-300)
        ratio = float(np.max(p_plus / denom))
        base = p_le0[0] + abs(a1)
        k1 = 0.0
        if base > 0 and n_steps > 0:
            later = times > times[0]
            growth = np.log(np.maximum(p_le0[later] + abs(a1), 1e-300) / base)
            span = kappa ** (1.0 / 6.0) * (times[later] - times[0])
            k1 = float(np.max(growth / span))
        return DichotomyReport(False, None, None, None, ratio, k1)

    i0 = int(trig[0])
    t0 = float(times[i0])
    window = times >= t0 + 0.5
    if not np.any(window):
        return DichotomyReport(True, t0, None, None, None, None)
    rhs = np.exp(0.5 * spec.k_star_min * (times[window] - t0)) * (
        p_plus[i0] + k0 * kappa3 * (p_le0[window] + abs(a1))
    )
    margin = float(np.min(3.0 * p_plus[window] / np.maximum(rhs, 1e-300)))
    return DichotomyReport(True, t0, bool(margin > 1.0), margin, None, None)
