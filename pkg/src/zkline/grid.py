"""Periodic tensor grid and field arithmetic.

The domain is [-X, X) x [0, 2*pi*L): an x-periodic truncation of the line
times the transverse torus of scale L.  All derivatives are spectral; all
quadrature is the equal-weight trapezoid rule, which is exact for the
trigonometric interpolants the solvers produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Uniform grid on [-X, X) x [0, 2*pi*L).

    x_half_width -- X, the half-width of the x-box
    nx, ny       -- grid sizes (powers of two)
    torus_scale  -- L; transverse wavenumbers are n/L for integer n
    """

    x_half_width: float
    nx: int
    torus_scale: float
    ny: int

    def __post_init__(self) -> None:
        if self.x_half_width <= 0 or self.torus_scale <= 0:
            raise ValueError("domain scales must be positive")
        if not (_is_pow2(self.nx) and self.nx >= 32):
            raise ValueError("nx must be a power of two >= 32")
        if not (_is_pow2(self.ny) and self.ny >= 8):
            raise ValueError("ny must be a power of two >= 8")
        X, L = self.x_half_width, self.torus_scale
        dx = 2.0 * X / self.nx
        dy = 2.0 * np.pi * L / self.ny
        set_ = object.__setattr__
        set_(self, "dx", dx)
        set_(self, "dy", dy)
        set_(self, "x", -X + dx * np.arange(self.nx))
        set_(self, "y", dy * np.arange(self.ny))
        xi = 2.0 * np.pi * np.fft.fftfreq(self.nx, d=dx)
        xi_odd = xi.copy()
        xi_odd[self.nx // 2] = 0.0  # Nyquist carries no sign information
        set_(self, "xi", xi)
        set_(self, "xi_odd", xi_odd)
        set_(self, "eta", 2.0 * np.pi * np.fft.rfftfreq(self.ny, d=dy))
        mx = np.abs(np.fft.fftfreq(self.nx) * self.nx) < self.nx / 3.0
        my = np.arange(self.ny // 2 + 1) < self.ny / 3.0
        set_(self, "dealias_mask", mx[:, None] & my[None, :])
        set_(self, "dealias_mask_x", mx)
        xi_r = 2.0 * np.pi * np.fft.rfftfreq(self.nx, d=dx)
        xi_r_odd = xi_r.copy()
        xi_r_odd[-1] = 0.0
        set_(self, "xi_r", xi_r)
        set_(self, "xi_r_odd", xi_r_odd)
        set_(self, "weight", dx * dy)
        # index map realizing x -> -x on the periodic grid
        set_(self, "reflect_idx", (self.nx - np.arange(self.nx)) % self.nx)

    # -- spectral transforms on raw (nx, ny) arrays -------------------------

    def fft2(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(values)

    def ifft2(self, spec: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(spec, s=(self.nx, self.ny))

    def fft_x(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft(values, axis=0)

    def ifft_x(self, spec: np.ndarray) -> np.ndarray:
        return np.fft.irfft(spec, n=self.nx, axis=0)

    def dealias2(self, spec: np.ndarray) -> np.ndarray:
        return spec * self.dealias_mask

    def ddx_values(self, values: np.ndarray) -> np.ndarray:
        if values.ndim == 1:
            return self.ifft_x(1j * self.xi_r_odd * self.fft_x(values))
        return self.ifft2(1j * self.xi_odd[:, None] * self.fft2(values))

    def ddy_values(self, values: np.ndarray) -> np.ndarray:
        return self.ifft2(1j * self.eta[None, :] * self.fft2(values))

    def laplacian_values(self, values: np.ndarray) -> np.ndarray:
        sym = -(self.xi[:, None] ** 2 + self.eta[None, :] ** 2)
        return self.ifft2(sym * self.fft2(values))

    def translate_values(self, values: np.ndarray, q: float) -> np.ndarray:
        """Band-limited shift x -> x - q (the Nyquist row is dropped)."""
        if q == 0.0:
            return values.copy()
        if values.ndim == 1:
            spec = self.fft_x(values) * np.exp(-1j * self.xi_r_odd * q)
            spec[-1] = 0.0
            return self.ifft_x(spec)
        spec = self.fft2(values) * np.exp(-1j * self.xi_odd * q)[:, None]
        spec[self.nx // 2, :] = 0.0
        return self.ifft2(spec)

    def reflect_values(self, values: np.ndarray) -> np.ndarray:
        return values[self.reflect_idx]

    def compatible(self, other: "Grid2D") -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and self.x_half_width == other.x_half_width
            and self.torus_scale == other.torus_scale
        )

    def key(self) -> tuple:
        return (self.x_half_width, self.nx, self.torus_scale, self.ny)


def _check_same_grid(a: "Field2D | Field1D", b: "Field2D | Field1D") -> None:
    if a.grid is not b.grid and not a.grid.compatible(b.grid):
        raise GridMismatchError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class Field2D:
    """Real scalar field sampled on a Grid2D; values are shape (nx, ny)."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(f"field shape {v.shape} does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    def __add__(self, other: "Field2D") -> "Field2D":
        _check_same_grid(self, other)
        return Field2D(self.grid, self.values + other.values)

    def __sub__(self, other: "Field2D") -> "Field2D":
        _check_same_grid(self, other)
        return Field2D(self.grid, self.values - other.values)

    def __mul__(self, s: float) -> "Field2D":
        return Field2D(self.grid, self.values * float(s))

    __rmul__ = __mul__

    def __neg__(self) -> "Field2D":
        return Field2D(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class Field1D:
    """Real profile on the x-line of a Grid2D; values are shape (nx,)."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.nx,):
            raise ValueError(f"profile shape {v.shape} does not match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile contains non-finite values")
        object.__setattr__(self, "values", v)

    def broadcast(self) -> Field2D:
        return Field2D(self.grid, np.repeat(self.values[:, None], self.grid.ny, axis=1))

    def __add__(self, other: "Field1D") -> "Field1D":
        _check_same_grid(self, other)
        return Field1D(self.grid, self.values + other.values)

    def __sub__(self, other: "Field1D") -> "Field1D":
        _check_same_grid(self, other)
        return Field1D(self.grid, self.values - other.values)

    def __mul__(self, s: float) -> "Field1D":
        return Field1D(self.grid, self.values * float(s))

    __rmul__ = __mul__

    def __neg__(self) -> "Field1D":
        return Field1D(self.grid, -self.values)


# -- quadrature and norms ---------------------------------------------------


def inner_product(a: Field2D, b: Field2D) -> float:
    """L2 pairing over the full domain (trapezoid quadrature)."""
    _check_same_grid(a, b)
    return float(np.sum(a.values * b.values) * a.grid.weight)


def inner_product_x(a: Field1D, b: Field1D) -> float:
    """L2 pairing on the x-line only."""
    _check_same_grid(a, b)
    return float(np.sum(a.values * b.values) * a.grid.dx)


def l2_norm(a: Field2D) -> float:
    return float(np.sqrt(np.sum(a.values**2) * a.grid.weight))


def l2_norm_x(a: Field1D) -> float:
    return float(np.sqrt(np.sum(a.values**2) * a.grid.dx))


def h1_norm_sq(a: Field2D) -> float:
    g = a.grid
    spec = g.fft2(a.values)
    sym = 1.0 + g.xi[:, None] ** 2 + g.eta[None, :] ** 2
    # Parseval with the rfft half-spectrum: double every column except
    # n = 0 and (for even ny) the y-Nyquist column
    mult = np.full(g.ny // 2 + 1, 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    scale = g.weight / (g.nx * g.ny)
    return float(np.sum(sym * np.abs(spec) ** 2 * mult[None, :]) * scale)


def h1_norm(a: Field2D) -> float:
    return float(np.sqrt(h1_norm_sq(a)))


def h1_norm_x(a: Field1D) -> float:
    g = a.grid
    da = g.ddx_values(a.values)
    return float(np.sqrt(np.sum(a.values**2 + da**2) * g.dx))


# -- calculus ---------------------------------------------------------------


def ddx(a: Field2D | Field1D):
    return type(a)(a.grid, a.grid.ddx_values(a.values))


def ddy(a: Field2D) -> Field2D:
    return Field2D(a.grid, a.grid.ddy_values(a.values))


def laplacian(a: Field2D) -> Field2D:
    return Field2D(a.grid, a.grid.laplacian_values(a.values))


def translate(a: Field2D | Field1D, q: float):
    """Shift a field right by q: (translate(a, q))(x) = a(x - q)."""
    return type(a)(a.grid, a.grid.translate_values(a.values, q))


def reflect_x(a: Field2D | Field1D):
    """Reflect x -> -x (the torus coordinate is untouched)."""
    return type(a)(a.grid, a.grid.reflect_values(a.values))


# -- invariants of the flow -------------------------------------------------


def mass(u: Field2D) -> float:
    """Conserved mass: integral of u^2."""
    return float(np.sum(u.values**2) * u.grid.weight)


def energy(u: Field2D) -> float:
    """Conserved energy: integral of |grad u|^2 / 2 - u^3 / 3."""
    g = u.grid
    ux = g.ddx_values(u.values)
    uy = g.ddy_values(u.values)
    dens = 0.5 * (ux**2 + uy**2) - u.values**3 / 3.0
    return float(np.sum(dens) * g.weight)
