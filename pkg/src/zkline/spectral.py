"""Transverse instability spectrum of the line solitary wave.

For each transverse wavenumber k/L the flow linearized about Q_c reduces to
the one-dimensional pencil  d/dx (Lc + k^2/L^2)  with  Lc = -d^2/dx^2 + c - 2Q_c.
For 0 < a < 5c/4 that operator has a unique simple positive eigenvalue
lambda(a); the paired eigenfunctions f_k^{+/-} are normalized so that

    (f_k^+, (Lc + k^2/L^2) f_k^-)_{L2(x)} = 1 / (pi L),   f_k^+(x) = -f_k^-(-x),

which makes the 2D modes F_k^{+/-,j} = f_k^{+/-} (cos, sin)(ky/L) a
bi-orthogonal family with (F^{+,j}, L F^{-,j}) = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .errors import EigensolveError
from .grid import Field1D, Grid2D
from .soliton import SolitonProfile, n0 as mode_count, q_values, soliton

#: filters for isolating the real unstable eigenvalue
REAL_PART_FLOOR = 1e-6
IMAG_PART_TOL = 1e-6


@lru_cache(maxsize=8)
def _diff_matrices(nx: int, x_half_width: float) -> tuple[np.ndarray, np.ndarray]:
    """Dense spectral differentiation matrices (first and second order)."""
    dx = 2.0 * x_half_width / nx
    xi = 2.0 * np.pi * np.fft.fftfreq(nx, d=dx)
    eye = np.eye(nx)
    xi_odd = xi.copy()
    xi_odd[nx // 2] = 0.0
    d1 = np.real(np.fft.ifft(1j * xi_odd[:, None] * np.fft.fft(eye, axis=0), axis=0))
    d2 = np.real(np.fft.ifft(-(xi**2)[:, None] * np.fft.fft(eye, axis=0), axis=0))
    return d1, d2


def assemble_l_matrix(c: float, shift: float, grid: Grid2D) -> np.ndarray:
    """Dense matrix of Lc + shift on the x-line."""
    _, d2 = _diff_matrices(grid.nx, grid.x_half_width)
    return -d2 + np.diag(c + shift - 2.0 * q_values(c, grid.x))


def apply_l_x(c: float, shift: float, grid: Grid2D, values: np.ndarray) -> np.ndarray:
    """Apply Lc + shift to a 1D profile spectrally."""
    spec = grid.fft_x(values)
    d2 = grid.ifft_x(-(grid.xi_r**2) * spec)
    return -d2 + (c + shift) * values - 2.0 * q_values(c, grid.x) * values


def _growth_candidates(c: float, a: float, grid: Grid2D):
    _, _ = _diff_matrices(grid.nx, grid.x_half_width)
    d1 = _diff_matrices(grid.nx, grid.x_half_width)[0]
    mat = d1 @ assemble_l_matrix(c, a, grid)
    vals, vecs = sla.eig(mat)
    idx = [
        i
        for i, lam in enumerate(vals)
        if lam.real > REAL_PART_FLOOR
        and abs(lam.imag) < IMAG_PART_TOL * max(1.0, abs(lam.real))
    ]
    return vals, vecs, idx


def lambda_of(c: float, a: float, grid: Grid2D) -> float | None:
    """Growth rate of d/dx (Lc + a): the unique positive real eigenvalue.

    Returns None for a > 5c/4 (no unstable direction).  At a = 5c/4 the
    operator has a kernel spanned by Q_c^{3/2}; there the discretized kernel
    eigenvalue (numerically ~0) is returned.
    """
    edge = 1.25 * c
    vals, _, idx = _growth_candidates(c, a, grid)
    if len(idx) == 1:
        return float(vals[idx[0]].real)
    if len(idx) > 1:
        found = sorted(float(vals[i].real) for i in idx)
        raise EigensolveError(f"ambiguous spectrum at c={c}, a={a}: {found}")
    if abs(a - edge) <= 1e-9 * max(1.0, edge):
        # kernel case: report the discretized zero eigenvalue
        real = [v for v in vals if abs(v.imag) < IMAG_PART_TOL * max(1.0, abs(v.real))]
        zero = min(real, key=lambda z: abs(z.real))
        return float(zero.real)
    if a > edge:
        return None
    raise EigensolveError(
        f"no isolated positive eigenvalue at c={c}, a={a} (< 5c/4 = {edge}); "
        "the mode may be too close to the spectral edge for this domain"
    )


@dataclass(frozen=True, eq=False)
class TransverseMode:
    """Normalized unstable/stable eigenpair at transverse wavenumber k/L."""

    k: int
    rate: float
    f_plus: Field1D
    f_minus: Field1D


def _normalized_mode(c: float, k: int, grid: Grid2D) -> TransverseMode:
    L = grid.torus_scale
    a = (k / L) ** 2
    vals, vecs, idx = _growth_candidates(c, a, grid)
    if len(idx) != 1:
        raise EigensolveError(
            f"expected one unstable eigenvalue at k={k} (a={a:g}), found {len(idx)}"
        )
    lam = float(vals[idx[0]].real)
    vec = vecs[:, idx[0]]
    # rotate the complex eigenvector onto the real axis
    pivot = np.argmax(np.abs(vec))
    vec = np.real(vec * np.exp(-1j * np.angle(vec[pivot])))
    # sign convention: positive component along the ground state Q^{3/2}
    ground = q_values(c, grid.x) ** 1.5
    if np.sum(vec * ground) < 0:
        vec = -vec
    # scale so that (f+, (Lc+a) f-) = 1/(pi L) with f-(x) = -f+(-x)
    f_minus_raw = -grid.reflect_values(vec)
    pairing = float(np.sum(vec * apply_l_x(c, a, grid, f_minus_raw)) * grid.dx)
    if pairing <= 0:
        raise EigensolveError(f"pairing sign violated at k={k}: {pairing:.3e}")
    alpha = math.sqrt(1.0 / (math.pi * L) / pairing)
    f_plus = alpha * vec
    return TransverseMode(
        k=k,
        rate=lam,
        f_plus=Field1D(grid, f_plus),
        f_minus=Field1D(grid, -grid.reflect_values(f_plus)),
    )


def check_pairing_sign(mode: TransverseMode, c: float, grid: Grid2D) -> tuple[float, float]:
    """Return ((f+, L(k) f+), (f+, L(k) g+)) with g+(x) = f+(-x).

    The first pairing vanishes and the second is strictly negative; both are
    what makes the +/- normalization well-posed.
    """
    a = (mode.k / grid.torus_scale) ** 2
    f = mode.f_plus.values
    g = grid.reflect_values(f)
    self_pair = float(np.sum(f * apply_l_x(c, a, grid, f)) * grid.dx)
    cross_pair = float(np.sum(f * apply_l_x(c, a, grid, g)) * grid.dx)
    return self_pair, cross_pair


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Everything the decomposition and the steppers need at a reference speed.

    modes are ordered by k = 1..n0; k_star_max / k_star_min are the extreme
    growth rates over the realized wavenumbers (None in the stable regime).
    """

    c_star: float
    grid: Grid2D
    n0: int
    modes: tuple[TransverseMode, ...]
    k_star_max: float | None
    k_star_min: float | None
    profile: SolitonProfile
    # sampled trig factors, shape (n0, ny)
    cos_k: np.ndarray
    sin_k: np.ndarray
    # dual x-profiles for coefficient extraction, shape (n0, nx): these are
    # (Lc + k^2/L^2) f^{+/-} with a roundoff-level (~1e-10) Gram correction
    # folded in, so the discrete pairings (F^{s,j}, dual^{s',j'}) hit the
    # identity exactly and the projectors built on them are idempotent
    lf_plus: np.ndarray
    lf_minus: np.ndarray
    # L_{c*} applied to d^2Q/dx^2, shape (nx,)
    l_dxx_q: np.ndarray
    # 2D normalizers for the mu coefficients
    dxq_sq_2d: float
    dcq_q_2d: float

    @property
    def two_pi_l(self) -> float:
        return 2.0 * math.pi * self.grid.torus_scale

    def rates(self) -> np.ndarray:
        return np.array([m.rate for m in self.modes])


def unstable_modes(c_star: float, grid: Grid2D) -> SpectralData:
    """Solve for all unstable transverse modes of Q_{c_star} on the grid.

    In the stable regime (n0 = 0) the mode list is empty and the
    decomposition degenerates to (mu1, mu2, gamma).
    """
    count = mode_count(c_star, grid.torus_scale)
    prof = soliton(c_star, grid)
    modes = tuple(_normalized_mode(c_star, k, grid) for k in range(1, count + 1))

    L = grid.torus_scale
    cos_k = np.array([np.cos(m.k * grid.y / L) for m in modes]).reshape(count, grid.ny)
    sin_k = np.array([np.sin(m.k * grid.y / L) for m in modes]).reshape(count, grid.ny)
    lf_plus = np.array(
        [apply_l_x(c_star, (m.k / L) ** 2, grid, m.f_plus.values) for m in modes]
    ).reshape(count, grid.nx)
    lf_minus = np.array(
        [apply_l_x(c_star, (m.k / L) ** 2, grid, m.f_minus.values) for m in modes]
    ).reshape(count, grid.nx)
    # Gram-correct the duals: analytically (f^s, L(k) f^s) = 0, but the
    # eigensolve leaves a residual there that would break the exact
    # biorthogonality of the projectors; mix the tiny cross-terms back out.
    pi_l = math.pi * L
    for i, m in enumerate(modes):
        e_plus = float(np.sum(m.f_plus.values * lf_plus[i]) * grid.dx) * pi_l
        e_minus = float(np.sum(m.f_minus.values * lf_minus[i]) * grid.dx) * pi_l
        det = 1.0 - e_plus * e_minus
        dual_for_plus = (lf_minus[i] - e_minus * lf_plus[i]) / det
        dual_for_minus = (lf_plus[i] - e_plus * lf_minus[i]) / det
        lf_minus[i] = dual_for_plus
        lf_plus[i] = dual_for_minus

    q = prof.q.values
    dxx_q = c_star * q - q**2  # profile equation
    l_dxx_q = apply_l_x(c_star, 0.0, grid, dxx_q)

    two_pi_l = 2.0 * math.pi * L
    dxq_sq_2d = float(np.sum(prof.dq_dx.values**2) * grid.dx) * two_pi_l
    dcq_q_2d = float(np.sum(prof.dq_dc.values * q) * grid.dx) * two_pi_l

    rates = [m.rate for m in modes]
    return SpectralData(
        c_star=float(c_star),
        grid=grid,
        n0=count,
        modes=modes,
        k_star_max=max(rates) if rates else None,
        k_star_min=min(rates) if rates else None,
        profile=prof,
        cos_k=cos_k,
        sin_k=sin_k,
        lf_plus=lf_plus,
        lf_minus=lf_minus,
        l_dxx_q=l_dxx_q,
        dxq_sq_2d=dxq_sq_2d,
        dcq_q_2d=dcq_q_2d,
    )


def mode_field(spec: SpectralData, k: int, sign: int, j: int) -> np.ndarray:
    """Sample F_k^{sign,j}: f_k^{sign}(x) times cos (j=0) or sin (j=1) of ky/L."""
    i = k - 1
    f = spec.modes[i].f_plus.values if sign > 0 else spec.modes[i].f_minus.values
    trig = spec.cos_k[i] if j == 0 else spec.sin_k[i]
    return f[:, None] * trig[None, :]
