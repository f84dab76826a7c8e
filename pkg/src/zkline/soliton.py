"""Line solitary wave of the Zakharov-Kuznetsov flow and its c-derivatives.

Q_c(x) = (3c/2) sech^2(sqrt(c) x / 2) solves -Q'' + cQ - Q^2 = 0; all
derivative profiles below are closed forms of that expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResonantSpeedError
from .grid import Field1D, Grid2D

#: resonance tolerance on sqrt(5c) L / 2 being an integer
RESONANCE_TOL = 1e-9


def q_values(c: float, x: np.ndarray) -> np.ndarray:
    return 1.5 * c / np.cosh(0.5 * math.sqrt(c) * x) ** 2


def dq_dx_values(c: float, x: np.ndarray) -> np.ndarray:
    u = 0.5 * math.sqrt(c) * x
    return -1.5 * c**1.5 * np.tanh(u) / np.cosh(u) ** 2


def dq_dc_values(c: float, x: np.ndarray) -> np.ndarray:
    u = 0.5 * math.sqrt(c) * x
    s = 1.0 / np.cosh(u) ** 2
    return 1.5 * s - 0.75 * math.sqrt(c) * x * s * np.tanh(u)


def d2q_dc2_values(c: float, x: np.ndarray) -> np.ndarray:
    u = 0.5 * math.sqrt(c) * x
    s = 1.0 / np.cosh(u) ** 2
    t = np.tanh(u)
    return (-9.0 * x / (8.0 * math.sqrt(c))) * s * t + (3.0 * x**2 / 8.0) * s * t**2 - (
        3.0 * x**2 / 16.0
    ) * s**2


def d2q_dcdx_values(c: float, x: np.ndarray) -> np.ndarray:
    # d/dx of dq_dc: product rule on (3/2) s - (3 sqrt(c) x / 4) s t
    rc = math.sqrt(c)
    u = 0.5 * rc * x
    s = 1.0 / np.cosh(u) ** 2
    t = np.tanh(u)
    ds = -rc * s * t  # d/dx sech^2(u)
    dt = 0.5 * rc * s  # d/dx tanh(u)
    return 1.5 * ds - 0.75 * rc * (s * t + x * ds * t + x * s * dt)


@dataclass(frozen=True, eq=False)
class SolitonProfile:
    """Sampled solitary-wave profile at speed c with its first derivatives."""

    c: float
    q: Field1D
    dq_dx: Field1D
    dq_dc: Field1D


def soliton(c: float, grid: Grid2D, tail_tol: float = 1e-9) -> SolitonProfile:
    """Sample Q_c on the grid, refusing domains that truncate the tail."""
    if c <= 0:
        raise DomainError(f"speed must be positive, got c={c}")
    tail = q_values(c, np.array([grid.x_half_width]))[0]
    if tail > tail_tol:
        raise DomainError(
            f"domain too narrow for c={c}: Q_c({grid.x_half_width:g}) = {tail:.3e} "
            f"> {tail_tol:g}"
        )
    return SolitonProfile(
        c=float(c),
        q=Field1D(grid, q_values(c, grid.x)),
        dq_dx=Field1D(grid, dq_dx_values(c, grid.x)),
        dq_dc=Field1D(grid, dq_dc_values(c, grid.x)),
    )


# -- closed-form line integrals (used as oracles and for the mass map) ------


def profile_l2_sq(c: float) -> float:
    """int_R Q_c^2 dx = 6 c^{3/2}."""
    return 6.0 * c**1.5


def profile_slope_l2_sq(c: float) -> float:
    """int_R (dQ_c/dx)^2 dx = (6/5) c^{5/2}."""
    return 1.2 * c**2.5


def profile_cube_integral(c: float) -> float:
    """int_R Q_c^3 dx = (36/5) c^{5/2}."""
    return 7.2 * c**2.5


def profile_speed_pairing(c: float) -> float:
    """(dQ_c/dc, Q_c)_{L2(R)} = (9/2) sqrt(c)."""
    return 4.5 * math.sqrt(c)


# -- transverse mode count ---------------------------------------------------


def stability_threshold(L: float) -> float:
    """Speeds above 4 / (5 L^2) carry at least one unstable transverse mode."""
    return 4.0 / (5.0 * L**2)


def n0(c: float, L: float) -> int:
    """Number of unstable transverse wavenumbers: floor(sqrt(5c) L / 2).

    Raises ResonantSpeedError when sqrt(5c) L / 2 is an integer within
    RESONANCE_TOL: there a mode sits exactly at the spectral edge and the
    count is ill-defined.
    """
    if c <= 0:
        raise DomainError(f"speed must be positive, got c={c}")
    s = math.sqrt(5.0 * c) * L / 2.0
    if abs(s - round(s)) <= RESONANCE_TOL * max(1.0, s) and round(s) > 0:
        raise ResonantSpeedError(
            f"sqrt(5c)L/2 = {s!r} is an integer: resonant speed c={c}, L={L}"
        )
    return int(math.floor(s))
