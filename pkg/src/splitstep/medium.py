"""Discrete periodic Gaussian random medium and phase-screen increments.

The medium is a real stationary Gaussian field synthesized from finitely many
Fourier modes on the lattice q = dk * l, retained inside a sharp spectral
cutoff |q_axis| <= K_k / 2.  Two drive models are supported:

* ``Paraxial(theta)`` -- increments of the rescaled medium
  theta^(-1/2) * nu(z / theta, x) integrated over z sub-intervals; the
  integrals of distinct steps are correlated with a correlation length
  O(theta) in z.
* ``Ito`` -- white-noise (theta -> 0) limit: independent Brownian increments
  with spatial power spectrum ``rhat``.

All stored spectral increment coefficients are in physical units, i.e. they
are the Fourier coefficients of the actual phase integral
W(x) = integral of the (rescaled) potential over the sub-interval, so the
paraxial sqrt(theta) rescaling is already folded in and the theta -> 0
covariance limit is the Ito covariance.

For pathwise coupling across step sizes, noise is always sampled once at the
finest granularity (``NoiseLadder``) and aggregated upward.  Aggregation uses
an aligned binary-tree summation so that screens for any power-of-two
multiple of the fine step are bit-identical whether formed directly or by
re-aggregating an intermediate level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import erf

from .grid import GridSpec, spectral_synthesis

__all__ = [
    "CovarianceModel",
    "Paraxial",
    "Ito",
    "MediumSpec",
    "NoiseLadder",
    "ScreenSet",
    "r_zero",
    "screen_covariance",
    "sample_noise_ladder",
    "aggregate_screens",
    "screen_field",
]

# Imaginary residue allowed in synthesized screens (they are Hermitian by
# construction; residue is pure FFT round-off).
_REALNESS_TOL = 1e-12


@dataclass(frozen=True)
class CovarianceModel:
    """Gaussian-family covariance of the random medium.

    The lateral power spectrum is ``rhat(q) = sigma * exp(-|q|^2 / (4 pi^2))``
    and the full space-time spectrum factorizes as
    ``chat(s, q) = rhat(q) * axial_profile(s)`` with the axial profile
    normalized to unit integral so that ``integral chat(s, q) ds == rhat(q)``
    exactly.  (Normalizing the axial factor is what makes the white-noise
    limit of the correlated medium coincide with the Ito drive at the same
    ``sigma``.)
    """

    sigma: float

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError(f"noise level sigma must be >= 0, got {self.sigma}")

    def rhat_sq(self, q_sq) -> np.ndarray:
        """Power spectrum as a function of |q|^2."""
        return self.sigma * np.exp(-np.asarray(q_sq, dtype=float) / (4.0 * np.pi**2))

    def rhat(self, q) -> np.ndarray:
        """Power spectrum.

        Scalar or 1-D input is read as scalar wavenumbers (one lateral
        dimension); input with ndim >= 2 is read as vectors with components
        on the last axis.
        """
        q = np.asarray(q, dtype=float)
        q_sq = np.sum(q * q, axis=-1) if q.ndim >= 2 else q * q
        return self.rhat_sq(q_sq)

    def axial_profile(self, s) -> np.ndarray:
        """Unit-integral axial correlation profile of the medium."""
        s = np.asarray(s, dtype=float)
        return np.exp(-(s**2) / (4.0 * np.pi**2)) / (2.0 * np.pi**1.5)

    def chat(self, s, q) -> np.ndarray:
        """Space-time spectrum chat(s, q)."""
        return self.rhat(q) * self.axial_profile(s)

    def r_physical(self, x, d: int) -> np.ndarray:
        """Spatial covariance R(x) = (2 pi)^-d integral rhat(k) e^{ikx} dk."""
        x = np.asarray(x, dtype=float)
        x2 = x**2 if d == 1 else np.sum(x**2, axis=-1)
        return self.sigma * np.pi ** (d / 2.0) * np.exp(-(np.pi**2) * x2)


@dataclass(frozen=True)
class Paraxial:
    """Correlated-medium drive; theta is the wavelength/correlation ratio."""

    theta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")


@dataclass(frozen=True)
class Ito:
    """White-noise drive (independent Brownian increments)."""


Model = Paraxial | Ito


def r_zero(cov: CovarianceModel, d: int) -> float:
    """Damping constant R(0) = (2 pi)^-d integral rhat(k) dk = sigma * pi^(d/2)."""
    if d not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {d}")
    return float(cov.sigma * np.pi ** (d / 2.0))


@dataclass(frozen=True)
class MediumSpec:
    """Random-medium configuration tied to a grid.

    The retained mode set is {q = dk * l : |q_axis| <= K_k / 2 for all axes};
    the sharp indicator cutoff matches the numerical experiments rather than
    a smooth compactly supported cutoff.
    """

    cov: CovarianceModel
    K_k: float
    grid: GridSpec
    model: Model

    def __post_init__(self) -> None:
        if self.K_k <= 0:
            raise ValueError(f"spectral cutoff K_k must be positive, got {self.K_k}")

    @property
    def max_mode_index(self) -> int:
        """Largest |l| per axis with dk * |l| <= K_k / 2."""
        return int(np.floor(self.K_k / 2.0 / self.grid.dk + 1e-12))

    def representative_modes(self) -> np.ndarray:
        """Lattice indices of one representative per Hermitian pair.

        Row 0 is the zero mode (real coefficient); the remaining rows are the
        lexicographically positive half of the retained lattice, sorted.  The
        conjugate partner of row j is -row j.
        """
        m = self.max_mode_index
        if self.grid.d == 1:
            pos = np.arange(1, m + 1, dtype=np.int64)[:, None]
            zero = np.zeros((1, 1), dtype=np.int64)
        else:
            rng = np.arange(-m, m + 1, dtype=np.int64)
            l1, l2 = np.meshgrid(rng, rng, indexing="ij")
            lat = np.stack([l1.ravel(), l2.ravel()], axis=1)
            keep = (lat[:, 0] > 0) | ((lat[:, 0] == 0) & (lat[:, 1] > 0))
            pos = lat[keep]
            order = np.lexsort((pos[:, 1], pos[:, 0]))
            pos = pos[order]
            zero = np.zeros((1, 2), dtype=np.int64)
        return np.concatenate([zero, pos], axis=0)

    def representative_wavenumbers(self) -> np.ndarray:
        """Wavenumber vectors dk * l for the representative modes, shape (n, d)."""
        return self.grid.dk * self.representative_modes().astype(float)


def _interval(iv) -> tuple[float, float]:
    a, b = float(iv[0]), float(iv[1])
    if b < a:
        raise ValueError(f"negative-length interval ({a}, {b})")
    return a, b


def _window_kernel(tau: np.ndarray, theta: float) -> np.ndarray:
    """Second antiderivative K of the scaled axial profile s -> profile(s/theta).

    K(0) = K'(0) = 0 and K'' (tau) = axial_profile(tau / theta); closed form
    through the error function.  Even in tau.
    """
    tau = np.asarray(tau, dtype=float)
    u = tau / (2.0 * np.pi * theta)
    return 0.5 * theta * tau * erf(u) - np.sqrt(np.pi) * theta**2 * (-np.expm1(-(u**2)))


def screen_covariance(spec: MediumSpec, q, interval_i, interval_j) -> float:
    """Covariance E[w_I conj(w_J)] of physical screen coefficients at mode q.

    Ito drive:       (2 pi dk)^d * |I intersect J| * rhat(q).
    Paraxial drive:  (2 pi dk)^d / theta * double integral over I x J of
                     chat((s - t) / theta, q), evaluated in closed form for
                     the Gaussian family.
    """
    a1, b1 = _interval(interval_i)
    a2, b2 = _interval(interval_j)
    pref = (2.0 * np.pi * spec.grid.dk) ** spec.grid.d
    rhat_q = float(spec.cov.rhat_sq(np.sum(np.asarray(q, dtype=float) ** 2)))
    if isinstance(spec.model, Ito):
        overlap = max(0.0, min(b1, b2) - max(a1, a2))
        return pref * overlap * rhat_q
    theta = spec.model.theta
    corners = np.array([b1 - a2, a1 - b2, b1 - b2, a1 - a2])
    window = _window_kernel(corners, theta)
    return pref / theta * rhat_q * float(window[0] + window[1] - window[2] - window[3])


@lru_cache(maxsize=8)
def _paraxial_factor(theta: float, h: float, n_fine: int, pref: float) -> np.ndarray:
    """Factor A with A @ A.T equal to the unit-spectrum fine-increment covariance.

    The exact Toeplitz covariance has Gaussian-decaying spectral content and is
    numerically rank-deficient in double precision, so a plain Cholesky can
    fail; use a symmetric eigendecomposition with eigenvalues clipped at zero.
    """
    lags = np.arange(n_fine, dtype=float) * h
    row = (
        _window_kernel(lags + h, theta)
        + _window_kernel(lags - h, theta)
        - 2.0 * _window_kernel(lags, theta)
    ) * (pref / theta)
    cov = toeplitz(row)
    eigval, eigvec = np.linalg.eigh(cov)
    eigval = np.clip(eigval, 0.0, None)
    factor = eigvec * np.sqrt(eigval)
    factor.setflags(write=False)
    return factor


@dataclass
class NoiseLadder:
    """Finest-granularity spectral increments for one medium realization.

    ``levels[0]`` has shape (n_fine, n_rep): physical-unit increment
    coefficients for every representative mode on every fine sub-interval
    ((m-1) h, m h].  ``levels[j]`` holds pairwise sums of ``levels[j-1]``, so
    any aligned dyadic block is available as a single stored entry.
    Conjugate partners (mode -q) are implied, never stored; the zero-mode
    column is real.
    """

    spec: MediumSpec
    seed: object
    dz_fine: float
    n_fine: int
    rep_modes: np.ndarray
    levels: list = field(repr=False, default_factory=list)

    @property
    def fine_coeffs(self) -> np.ndarray:
        return self.levels[0]

    @property
    def length(self) -> float:
        return self.n_fine * self.dz_fine

    def range_sum(self, i0: int, i1: int) -> np.ndarray:
        """Sum of fine coefficients over fine-index range [i0, i1).

        Decomposes the range into aligned dyadic blocks (combined left to
        right), so aligned power-of-two ranges are single stored tree nodes
        and re-aggregation across nested step sizes is bit-identical.
        """
        if not 0 <= i0 <= i1 <= self.n_fine:
            raise ValueError(f"fine range [{i0}, {i1}) out of bounds")
        out = None
        i = i0
        while i < i1:
            align = (i & -i).bit_length() - 1 if i > 0 else 63
            span = (i1 - i).bit_length() - 1
            j = min(align, span, len(self.levels) - 1)
            block = self.levels[j][i >> j]
            out = block.copy() if out is None else out + block
            i += 1 << j
        if out is None:
            out = np.zeros(self.rep_modes.shape[0], dtype=np.complex128)
        return out


def sample_noise_ladder(spec: MediumSpec, Z: float, dz_fine: float, seed) -> NoiseLadder:
    """Draw one medium realization at the finest increment granularity.

    Gaussian draws come from a counter-based (Philox) generator keyed by
    ``seed``; given (spec, Z, dz_fine, seed) the ladder is fully
    deterministic.  Draw order: one (n_fine, n_rep) standard-normal block for
    the real parts, then one for the imaginary parts; the zero mode uses the
    real block only.
    """
    n_fine = int(round(Z / dz_fine))
    if n_fine < 1 or abs(n_fine * dz_fine - Z) > 1e-9 * max(Z, 1.0):
        raise ValueError(f"dz_fine={dz_fine} does not evenly divide Z={Z}")
    reps = spec.representative_modes()
    n_rep = reps.shape[0]
    rhat = spec.cov.rhat(spec.grid.dk * reps.astype(float))
    rng = np.random.Generator(np.random.Philox(seed))
    gr = rng.standard_normal((n_fine, n_rep))
    gi = rng.standard_normal((n_fine, n_rep))
    draws = (gr + 1j * gi) / np.sqrt(2.0)
    draws[:, 0] = gr[:, 0]  # zero mode is real
    pref = (2.0 * np.pi * spec.grid.dk) ** spec.grid.d
    if isinstance(spec.model, Ito):
        coeffs = draws * np.sqrt(pref * dz_fine * rhat)
    else:
        factor = _paraxial_factor(spec.model.theta, dz_fine, n_fine, pref)
        coeffs = (factor @ draws) * np.sqrt(rhat)
    levels = [coeffs]
    while levels[-1].shape[0] % 2 == 0 and levels[-1].shape[0] > 1:
        prev = levels[-1]
        levels.append(prev[0::2] + prev[1::2])
    return NoiseLadder(
        spec=spec,
        seed=seed,
        dz_fine=float(dz_fine),
        n_fine=n_fine,
        rep_modes=reps,
        levels=levels,
    )


@dataclass
class ScreenSet:
    """Per-step phase screens aggregated from a ladder.

    ``coeffs`` has shape (N_z, n_sub, n_rep); ``fields`` holds the
    synthesized real screens, shape (N_z, n_sub, *grid.shape).  For the
    one-sided splittings (gamma 0 or 1) there is a single full-step
    sub-interval; for interior gamma there are two (lengths gamma*dz and
    (1-gamma)*dz).
    """

    grid: GridSpec
    model: Model
    dz: float
    gamma: float
    seed: object
    rep_modes: np.ndarray
    coeffs: np.ndarray
    fields: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_sub(self) -> int:
        return self.coeffs.shape[1]


def _fold_indices(grid: GridSpec, reps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flat FFT-layout bins for representative modes and their conjugates.

    Retained modes beyond the grid's Nyquist range fold onto their alias bin,
    which reproduces exact evaluation of the mode sum at the grid points.
    """
    n = grid.N_x
    pos = np.mod(reps, n)
    neg = np.mod(-reps, n)
    if grid.d == 1:
        return pos[:, 0], neg[:, 0]
    return pos[:, 0] * n + pos[:, 1], neg[:, 0] * n + neg[:, 1]


def synthesize_screens(grid: GridSpec, reps: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Real screens W(x) = sum_q w_q e^{iqx} / (2 pi)^d from representative coeffs.

    ``coeffs``: (..., n_rep) -> returns (..., *grid.shape) float64.
    """
    lead = coeffs.shape[:-1]
    flat = coeffs.reshape(-1, coeffs.shape[-1])
    bins_pos, bins_neg = _fold_indices(grid, reps)
    spec_flat = np.zeros((flat.shape[0], grid.size), dtype=np.complex128)
    rows = np.arange(flat.shape[0])[:, None]
    np.add.at(spec_flat, (rows, bins_pos[None, :]), flat)
    np.add.at(spec_flat, (rows, bins_neg[None, 1:]), np.conj(flat[:, 1:]))
    spec_flat /= (2.0 * np.pi) ** grid.d
    values = spectral_synthesis(grid, spec_flat.reshape((-1,) + grid.shape))
    residue = float(np.max(np.abs(values.imag), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(values.real), initial=0.0)))
    if residue > _REALNESS_TOL * scale:
        raise AssertionError(f"screen synthesis imaginary residue {residue:.3e}")
    return values.real.reshape(lead + grid.shape)


def _sub_boundaries(gamma: float, m: int) -> list[int]:
    """Fine-index split points of one coarse step (relative offsets)."""
    if gamma in (0.0, 1.0):
        return [0, m]
    m1 = gamma * m
    m1_int = int(round(m1))
    if not 0 < m1_int < m or abs(m1 - m1_int) > 1e-9:
        raise ValueError(
            f"gamma={gamma} sub-interval is not an integer multiple of the fine step "
            f"(gamma * {m} = {m1})"
        )
    return [0, m1_int, m]


def aggregate_screens(ladder: NoiseLadder, dz_coarse: float, gamma: float) -> ScreenSet:
    """Aggregate fine increments into per-step (and per-sub-interval) screens."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    ratio = dz_coarse / ladder.dz_fine
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9:
        raise ValueError(
            f"coarse step {dz_coarse} is not an integer multiple of fine step {ladder.dz_fine}"
        )
    if ladder.n_fine % m != 0:
        raise ValueError(
            f"ladder length {ladder.n_fine} fine steps does not cover whole steps of {m}"
        )
    n_steps = ladder.n_fine // m
    bounds = _sub_boundaries(gamma, m)
    n_sub = len(bounds) - 1
    n_rep = ladder.rep_modes.shape[0]
    coeffs = np.empty((n_steps, n_sub, n_rep), dtype=np.complex128)
    for n in range(n_steps):
        for s in range(n_sub):
            coeffs[n, s] = ladder.range_sum(n * m + bounds[s], n * m + bounds[s + 1])
    fields = synthesize_screens(ladder.spec.grid, ladder.rep_modes, coeffs)
    return ScreenSet(
        grid=ladder.spec.grid,
        model=ladder.spec.model,
        dz=float(dz_coarse),
        gamma=float(gamma),
        seed=ladder.seed,
        rep_modes=ladder.rep_modes,
        coeffs=coeffs,
        fields=fields,
    )


def screen_field(screens: ScreenSet, n: int, sub: int = 0) -> np.ndarray:
    """Synthesized real screen for step n, sub-interval ``sub``."""
    if not 0 <= n < screens.n_steps:
        raise IndexError(f"step index {n} out of range [0, {screens.n_steps})")
    if not 0 <= sub < screens.n_sub:
        raise IndexError(f"sub-interval index {sub} out of range [0, {screens.n_sub})")
    return screens.fields[n, sub]
