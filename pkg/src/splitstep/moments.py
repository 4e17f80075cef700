"""Monte Carlo moment estimation and deterministic moment oracles.

Three independent references for the white-noise model with a Gaussian
incident beam and constant transport coefficient:

* ``free_space`` -- the exact noiseless beam;
* ``analytic_mean`` / ``analytic_second_moment`` -- closed-form first moment
  and quadrature-form second moment of the white-noise dynamics;
* ``moment_pde_solve`` -- a split-step integrator for the closed PDE
  satisfied by the two-point second moment mu(z, x, y), usable either with
  the continuous transport coefficient (reference) or with the collocation
  train of the splitting scheme, so the difference between the two isolates
  the splitting error on moments deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import erf

from .grid import ComplexField, GridSpec
from .medium import CovarianceModel, r_zero
from .propagator import Kappa1Profile, chi

__all__ = [
    "MomentAccumulator",
    "accumulate",
    "merge",
    "scintillation_index",
    "free_space",
    "free_space_field",
    "analytic_mean",
    "analytic_second_moment",
    "Mu11Field",
    "MomentTrajectory",
    "ContinuousPhi",
    "SplitPhi",
    "moment_pde_solve",
]


class MomentAccumulator:
    """Mergeable running sums of Monte Carlo field statistics.

    Stores raw sums (not running means) so merging is exact: the mean field,
    mean intensity |u|^2, mean |u|^4, and optional complex projections
    sum_j |u_j|^p exp(i m pi x_j / L) dx per configured (p, m) pair.
    """

    def __init__(self, grid: GridSpec, projections: tuple = ()):
        self.grid = grid
        self.projections = tuple(projections)
        self.count = 0
        self.sum_u = np.zeros(grid.shape, dtype=np.complex128)
        self.sum_i2 = np.zeros(grid.shape, dtype=np.float64)
        self.sum_i4 = np.zeros(grid.shape, dtype=np.float64)
        self.proj_sums = np.zeros(len(self.projections), dtype=np.complex128)
        if self.projections:
            if grid.d != 1:
                raise ValueError("mode projections are defined for d = 1 only")
            x = grid.axis_coords
            self._proj_weights = np.stack(
                [np.exp(1j * m * np.pi * x / grid.L) * grid.dx for (_p, m) in self.projections]
            )

    def _check_grid(self, grid: GridSpec) -> None:
        if grid != self.grid:
            raise ValueError("accumulator grid does not match field grid")

    def add(self, u: ComplexField) -> "MomentAccumulator":
        self._check_grid(u.grid)
        self.add_batch(u.values[None, ...])
        return self

    def add_batch(self, values: np.ndarray) -> "MomentAccumulator":
        """Accumulate a (batch, *grid.shape) block of sample fields."""
        if values.shape[1:] != self.grid.shape:
            raise ValueError("batch shape does not match grid")
        i2 = np.abs(values) ** 2
        self.count += values.shape[0]
        self.sum_u += values.sum(axis=0)
        self.sum_i2 += i2.sum(axis=0)
        self.sum_i4 += (i2**2).sum(axis=0)
        for k, (p, _m) in enumerate(self.projections):
            ip = i2 if p == 2 else i2 ** (p / 2.0)
            self.proj_sums[k] += np.sum(ip @ self._proj_weights[k].T if False else ip * self._proj_weights[k], axis=None)
        return self

    def merged(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.grid != self.grid or other.projections != self.projections:
            raise ValueError("cannot merge accumulators with different configuration")
        out = MomentAccumulator(self.grid, self.projections)
        out.count = self.count + other.count
        out.sum_u = self.sum_u + other.sum_u
        out.sum_i2 = self.sum_i2 + other.sum_i2
        out.sum_i4 = self.sum_i4 + other.sum_i4
        out.proj_sums = self.proj_sums + other.proj_sums
        return out

    @property
    def mean_field(self) -> np.ndarray:
        return self.sum_u / self.count

    @property
    def mean_i2(self) -> np.ndarray:
        return self.sum_i2 / self.count

    @property
    def mean_i4(self) -> np.ndarray:
        return self.sum_i4 / self.count

    @property
    def mean_projections(self) -> np.ndarray:
        return self.proj_sums / self.count


def accumulate(acc: MomentAccumulator, u: ComplexField) -> MomentAccumulator:
    """Add one sample field (mutating; returns the accumulator)."""
    return acc.add(u)


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    """Combined statistics of two accumulators (non-mutating)."""
    return a.merged(b)


def scintillation_index(acc: MomentAccumulator, idx) -> float:
    """Normalized intensity variance E|u|^4 / (E|u|^2)^2 - 1 at a grid index."""
    if acc.count < 2:
        raise ValueError("scintillation index needs at least 2 samples")
    m2 = acc.mean_i2[idx]
    if m2 <= 0.0:
        raise ZeroDivisionError("scintillation index undefined where mean intensity vanishes")
    return float(acc.mean_i4[idx] / m2**2 - 1.0)


def free_space(z: float, x, kappa1: float = 1.0):
    """Noiseless beam value at axial distance z, lateral position(s) x (d = 1).

    theta(z) = sqrt(1 + 2 i kappa1 z) with the principal branch.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    theta_sq = 1.0 + 2.0j * kappa1 * z
    theta = np.sqrt(theta_sq)
    x = np.asarray(x, dtype=float)
    out = np.exp(-(x**2) / (2.0 * theta_sq)) / theta
    return complex(out) if out.ndim == 0 else out


def free_space_field(grid: GridSpec, z: float, kappa1: float = 1.0) -> ComplexField:
    """Noiseless beam on a grid (any d; separable product over axes)."""
    theta_sq = 1.0 + 2.0j * kappa1 * z
    theta = np.sqrt(theta_sq)
    values = np.exp(-grid.radius_squared() / (2.0 * theta_sq)) / theta**grid.d
    return ComplexField(grid, values)


def analytic_mean(z: float, x, sigma: float):
    """Mean field of the white-noise model: exp(-sigma sqrt(pi) z / 2) * free beam.

    Valid for d = 1 and constant kappa1 = 1; the damping rate is R(0)/2 with
    R(0) = sigma sqrt(pi).
    """
    damping = np.exp(-0.5 * sigma * np.sqrt(np.pi) * z)
    return damping * free_space(z, x)


def _second_moment_exponent(z: float, xi: float, sigma: float) -> float:
    # sigma sqrt(pi) * integral_0^z (exp(-4 pi^2 xi^2 s^2) - 1) ds, closed form
    a = 2.0 * np.pi * abs(xi)
    if a == 0.0:
        return 0.0
    inner = np.sqrt(np.pi) * erf(a * z) / (2.0 * a) - z
    return sigma * np.sqrt(np.pi) * inner


def analytic_second_moment(z: float, x: float, sigma: float) -> float:
    """On-diagonal second moment E|u(z, x)|^2 of the white-noise model (d = 1).

    Adaptive Gauss-Kronrod quadrature of the closed-form Fourier integral;
    the integrand decays like exp(-xi^2/4) so |xi| <= 12 carries everything.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    width = z**2 + 0.25

    def integrand(xi: float) -> float:
        return float(
            np.exp(-(xi**2) * width)
            * np.cos(xi * x)
            * np.exp(_second_moment_exponent(z, xi, sigma))
        )

    val, abserr = quad(integrand, 0.0, 12.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    if abserr > 1e-9:
        raise RuntimeError(f"second-moment quadrature did not converge (abserr={abserr:.2e})")
    return float(2.0 * val / np.sqrt(4.0 * np.pi))


def analytic_second_moment_profile(z: float, xs: np.ndarray, sigma: float) -> np.ndarray:
    """Vectorized convenience wrapper over ``analytic_second_moment``."""
    return np.array([analytic_second_moment(z, float(x), sigma) for x in np.asarray(xs)])


@dataclass
class Mu11Field:
    """Two-point second moment mu(z, x, y) on the tensor grid (d = 1)."""

    grid: GridSpec
    values: np.ndarray

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.values).copy()

    def hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.values - self.values.conj().T)))


@dataclass
class MomentTrajectory:
    """Second-moment trajectory: diagonals at every axial grid point plus
    full fields at requested snapshot indices."""

    grid: GridSpec
    z_values: np.ndarray
    diagonals: np.ndarray
    fields: dict = field(default_factory=dict)

    def traces(self) -> np.ndarray:
        """Conserved diagonal trace sum_x mu(z, x, x) dx at every z."""
        return np.real(self.diagonals.sum(axis=1)) * self.grid.dx


@dataclass(frozen=True)
class ContinuousPhi:
    """Continuous transport coefficient; centered sub-stepping inside each step."""

    substeps: int = 16


@dataclass(frozen=True)
class SplitPhi:
    """Collocation-train transport: one kick per step at (n + gamma) dz."""

    gamma: float


def _pair_potential(grid: GridSpec, cov: CovarianceModel) -> np.ndarray:
    """U(x, y) = R(x - y) - R(0) on the tensor grid, minimal-image difference."""
    x = grid.axis_coords
    diff = x[:, None] - x[None, :]
    diff -= grid.L * np.round(diff / grid.L)
    return cov.r_physical(diff, d=1) - r_zero(cov, 1)


def moment_pde_solve(
    grid: GridSpec,
    cov: CovarianceModel,
    kappa1: Kappa1Profile,
    Z: float,
    N_z: int,
    phi_mode,
    snapshots: tuple = (),
) -> MomentTrajectory:
    """Integrate the closed second-moment PDE

        d mu / dz = i phi(z) (Lap_x - Lap_y) mu + (R(x - y) - R(0)) mu

    by alternating the exact multiplicative potential flow with the exact
    spectral transport flow.  With ``SplitPhi(gamma)`` the transport acts as
    one kick of weight dz * kappa1((n + gamma) dz) per step, placed between
    the two potential sub-intervals -- this integrates the collocation-train
    moment dynamics exactly, so comparing against ``ContinuousPhi`` isolates
    the splitting error.  Diagonals are recorded at every coarse grid point.
    """
    if grid.d != 1:
        raise ValueError("the second-moment PDE solver supports d = 1 only")
    if N_z < 1 or Z <= 0:
        raise ValueError("need Z > 0 and N_z >= 1")
    dz = Z / N_z
    pair_u = _pair_potential(grid, cov)
    k_sq = grid.axis_wavenumbers**2
    ksq_diff = k_sq[:, None] - k_sq[None, :]

    x = grid.axis_coords
    beam = np.exp(-0.5 * x**2)
    mu = np.outer(beam, beam).astype(np.complex128)

    want = {0, N_z} | set(snapshots)
    if any(not 0 <= s <= N_z for s in want):
        raise ValueError(f"snapshot indices must lie in [0, {N_z}]")
    diagonals = np.empty((N_z + 1, grid.N_x), dtype=np.complex128)
    fields: dict[int, Mu11Field] = {}

    def record(n: int) -> None:
        diagonals[n] = np.diagonal(mu)
        if n in want:
            fields[n] = Mu11Field(grid, mu.copy())

    def kick(state: np.ndarray, t: float, cache={}) -> np.ndarray:
        if cache.get("t") != t:
            cache["t"] = t
            cache["phase"] = np.exp(-1j * t * ksq_diff)
        return np.fft.ifft2(np.fft.fft2(state) * cache["phase"])

    record(0)
    if isinstance(phi_mode, SplitPhi):
        gamma = phi_mode.gamma
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
        e_first = np.exp(pair_u * (gamma * dz)) if gamma > 0.0 else None
        e_second = np.exp(pair_u * ((1.0 - gamma) * dz)) if gamma < 1.0 else None
        for n in range(N_z):
            if e_first is not None:
                mu *= e_first
            mu = kick(mu, dz * kappa1((n + gamma) * dz))
            if e_second is not None:
                mu *= e_second
            record(n + 1)
    elif isinstance(phi_mode, ContinuousPhi):
        substeps = phi_mode.substeps
        if substeps < 1:
            raise ValueError("substeps must be >= 1")
        h = dz / substeps
        e_half = np.exp(pair_u * (0.5 * h))
        e_full = np.exp(pair_u * h)
        for n in range(N_z):
            z0 = n * dz
            mu *= e_half
            for k in range(substeps):
                mu = kick(mu, chi(kappa1, z0 + k * h, z0 + (k + 1) * h))
                mu *= e_full if k < substeps - 1 else e_half
            record(n + 1)
    else:
        raise TypeError(f"unknown phi mode {phi_mode!r}")

    return MomentTrajectory(
        grid=grid,
        z_values=dz * np.arange(N_z + 1),
        diagonals=diagonals,
        fields=fields,
    )
