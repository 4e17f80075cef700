"""Periodic spectral grid, transforms, and elementary field algebra.

Fields live on the torus [-L/2, L/2]^d sampled at N_x points per axis.
Spectral coefficients follow the mean-value normalization

    f(x) = sum_l  fhat_l * exp(i * dk * l . x),
    fhat_l = L^{-d} * integral  f(x) exp(-i * dk * l . x) dx,

so ``fhat_0`` is the spatial mean.  Mode indices are kept in standard FFT
order; because the physical grid starts at -L/2 rather than 0, the forward
and inverse transforms carry an extra (-1)^(l1+...+ld) phase relative to a
bare FFT.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "GridSpec",
    "ComplexField",
    "make_grid",
    "forward_transform",
    "inverse_transform",
    "gaussian_beam",
    "l2_norm",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on the torus [-L/2, L/2]^d.

    Attributes
    ----------
    d : int
        Lateral dimension, 1 or 2.
    L : float
        Period length per axis.
    N_x : int
        Points per axis (power of two).
    """

    d: int
    L: float
    N_x: int

    @property
    def dx(self) -> float:
        """Grid spacing, L / N_x."""
        return self.L / self.N_x

    @property
    def dk(self) -> float:
        """Fundamental wavenumber, 2*pi / L."""
        return 2.0 * np.pi / self.L

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N_x,) * self.d

    @property
    def size(self) -> int:
        return self.N_x**self.d

    @cached_property
    def axis_coords(self) -> np.ndarray:
        """Physical coordinates along one axis, x_j = -L/2 + j*dx."""
        return -0.5 * self.L + self.dx * np.arange(self.N_x)

    @cached_property
    def mode_indices(self) -> np.ndarray:
        """Integer mode indices along one axis in FFT order."""
        return np.fft.fftfreq(self.N_x, d=1.0 / self.N_x).astype(np.int64)

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        """Wavenumbers dk*l along one axis in FFT order."""
        return self.dk * self.mode_indices

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """|xi_l|^2 over the full mode grid (FFT order), shape ``self.shape``."""
        k = self.axis_wavenumbers
        if self.d == 1:
            return k**2
        return k[:, None] ** 2 + k[None, :] ** 2

    @cached_property
    def _center_phase(self) -> np.ndarray:
        # (-1)^(l1+...+ld): accounts for the grid starting at -L/2.
        s = (-1.0) ** (self.mode_indices & 1)
        if self.d == 1:
            return s
        return s[:, None] * s[None, :]

    def coordinate_arrays(self) -> tuple[np.ndarray, ...]:
        """Meshgrid coordinate arrays (ij indexing), one per axis."""
        return np.meshgrid(*([self.axis_coords] * self.d), indexing="ij")

    def radius_squared(self) -> np.ndarray:
        """|x|^2 over the physical grid."""
        coords = self.coordinate_arrays()
        return sum(c**2 for c in coords)


@dataclass
class ComplexField:
    """Complex values sampled on a grid (physical or spectral, per context)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy())


def make_grid(d: int, L: float, N_x: int) -> GridSpec:
    """Validated grid constructor.

    Rejects d outside {1, 2}, non-positive L, and non-power-of-two N_x.
    """
    if d not in (1, 2):
        raise ValueError(f"lateral dimension must be 1 or 2, got {d}")
    if not L > 0:
        raise ValueError(f"period L must be positive, got {L}")
    if not _is_power_of_two(int(N_x)):
        raise ValueError(f"N_x must be a power of two, got {N_x}")
    return GridSpec(d=d, L=float(L), N_x=int(N_x))


def _fft_axes(d: int) -> tuple[int, ...]:
    return tuple(range(-d, 0))


def spectral_coefficients(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """Raw-array forward transform; broadcasts over leading axes."""
    d = grid.d
    out = np.fft.fftn(values, axes=_fft_axes(d)) / grid.size
    out *= grid._center_phase
    return out


def spectral_synthesis(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """Raw-array inverse transform; broadcasts over leading axes."""
    d = grid.d
    return np.fft.ifftn(coeffs * grid._center_phase, axes=_fft_axes(d)) * grid.size


def forward_transform(f: ComplexField) -> ComplexField:
    """Spectral coefficients of a physical field (FFT mode order)."""
    return ComplexField(f.grid, spectral_coefficients(f.grid, f.values))


def inverse_transform(coeffs: ComplexField) -> ComplexField:
    """Physical field from spectral coefficients (adjoint convention)."""
    return ComplexField(coeffs.grid, spectral_synthesis(coeffs.grid, coeffs.values))


def gaussian_beam(grid: GridSpec) -> ComplexField:
    """Incident beam profile exp(-|x|^2 / 2) on the grid."""
    return ComplexField(grid, np.exp(-0.5 * grid.radius_squared()).astype(np.complex128))


def l2_norm(f: ComplexField) -> float:
    """Discrete L2 norm, (sum_j |f_j|^2 dx^d)^(1/2)."""
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2) * f.grid.dx**f.grid.d))
