"""Band-limited exact solutions of the continuum fractional Klein-Gordon equation.

For constant mass m and zero forcing every Fourier mode evolves as
cos(gamma t) u0_hat + sin(gamma t)/gamma u1_hat with
gamma(xi) = sqrt(|2 pi xi|^{2a} + m).  Profiles are stored as spectral
samples on a uniform xi-grid over [-B, B]^n and the inverse Fourier
integral is evaluated by the (periodic) trapezoid rule on that grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fraclap import check_alpha
from .lattice import GridFunction, LatticeSpec
from .solver import _sinc

__all__ = [
    "BandLimitedProfile",
    "ContinuumSolutionSampler",
    "NyquistError",
    "continuum_symbol",
    "gaussian_profile",
    "point_profile",
    "smooth_taper",
    "sample_exact_solution",
    "symbol_gap",
    "sobolev_weight_norm",
]


class NyquistError(ValueError):
    """Profile cutoff exceeds the lattice's dual cell."""


def continuum_symbol(xi, alpha: float) -> np.ndarray | float:
    """[sum_j 4 pi^2 xi_j^2]^alpha; ``xi`` has its components on the last axis."""
    xi = np.asarray(xi, dtype=float)
    out = np.sum(4 * np.pi**2 * xi**2, axis=-1) ** alpha
    return float(out) if np.ndim(out) == 0 else out


def _xi_axis(cutoff: float, points: int) -> np.ndarray:
    return -cutoff + (2.0 * cutoff / points) * np.arange(points)


@dataclass(frozen=True, eq=False)
class BandLimitedProfile:
    """Spectra of (u0, u1) sampled on xi_i = -B + i 2B/M per axis."""

    dim: int
    cutoff: float
    u0_hat: np.ndarray = field(repr=False)
    u1_hat: np.ndarray = field(repr=False)

    def __post_init__(self):
        u0 = np.array(self.u0_hat, dtype=complex)
        u1 = np.array(self.u1_hat, dtype=complex)
        M = u0.shape[0]
        if u0.shape != (M,) * self.dim or u1.shape != u0.shape:
            raise ValueError("spectral samples must be (M,)*dim arrays of equal shape")
        if M % 2 or M < 2:
            raise ValueError(f"points per axis must be even, got {M}")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        for arr in (u0, u1):
            arr.flags.writeable = False
        object.__setattr__(self, "u0_hat", u0)
        object.__setattr__(self, "u1_hat", u1)

    @property
    def points_per_axis(self) -> int:
        return self.u0_hat.shape[0]

    @property
    def cell_weight(self) -> float:
        return (2.0 * self.cutoff / self.points_per_axis) ** self.dim

    def xi_axis(self) -> np.ndarray:
        return _xi_axis(self.cutoff, self.points_per_axis)

    def xi_grid(self) -> np.ndarray:
        ax = [self.xi_axis()] * self.dim
        return np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)


def smooth_taper(r: np.ndarray, start: float, stop: float) -> np.ndarray:
    """C-infinity step: 1 for r <= start, 0 for r >= stop."""
    r = np.asarray(r, dtype=float)
    s = np.clip((r - start) / (stop - start), 0.0, 1.0)

    def bump(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    a, b = bump(1.0 - s), bump(s)
    return a / (a + b)


def gaussian_profile(dim: int, cutoff: float, width: float, center=0.0,
                     amplitude: float = 1.0, points: int = 256,
                     velocity_amplitude: float = 0.0) -> BandLimitedProfile:
    """Gaussian spectrum exp(-|xi - center|^2 / (2 width^2)), tapered to zero
    over the outer 10% of the cutoff box.

    ``u1_hat`` is ``velocity_amplitude / amplitude`` times ``u0_hat``.
    """
    xi = BandLimitedProfile(dim, cutoff, np.zeros((points,) * dim), np.zeros((points,) * dim)).xi_grid()
    c = np.broadcast_to(np.asarray(center, dtype=float), (dim,))
    g = amplitude * np.exp(-np.sum((xi - c) ** 2, axis=-1) / (2 * width**2))
    box = np.max(np.abs(xi), axis=-1)
    g = g * smooth_taper(box, 0.9 * cutoff, cutoff)
    u1 = g * (velocity_amplitude / amplitude) if amplitude else np.zeros_like(g)
    return BandLimitedProfile(dim, cutoff, g, u1)


def point_profile(dim: int, cutoff: float, value: complex = 1.0, points: int = 16,
                  velocity: complex = 0.0) -> BandLimitedProfile:
    """Spectrum concentrated in the single xi = 0 cell: constant data ``value``."""
    u0 = np.zeros((points,) * dim, dtype=complex)
    u1 = np.zeros_like(u0)
    centre = (points // 2,) * dim
    profile = BandLimitedProfile(dim, cutoff, u0, u1)
    u0[centre] = value / profile.cell_weight
    u1[centre] = velocity / profile.cell_weight
    return BandLimitedProfile(dim, cutoff, u0, u1)


@dataclass(frozen=True, eq=False)
class ContinuumSolutionSampler:
    profile: BandLimitedProfile
    mass_const: float
    alpha: float

    def __post_init__(self):
        if self.mass_const < 0:
            raise ValueError("mass must be non-negative")
        check_alpha(self.alpha)

    def gamma(self) -> np.ndarray:
        return np.sqrt(continuum_symbol(self.profile.xi_grid(), self.alpha) + self.mass_const)

    def spectrum(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(v_hat(t), d/dt v_hat(t)) on the xi-grid."""
        p = self.profile
        g = self.gamma()
        c, s = np.cos(g * t), np.sin(g * t)
        v = c * p.u0_hat + t * _sinc(g * t) * p.u1_hat
        dv = -g * s * p.u0_hat + c * p.u1_hat
        return v, dv


def _inverse_integral(values: np.ndarray, profile: BandLimitedProfile, spec: LatticeSpec) -> np.ndarray:
    """Trapezoid sum of int e^{2 pi i x.xi} values(xi) dxi at the lattice sites."""
    x = spec.spacing * spec.indices()
    kernel = np.exp(2j * np.pi * np.outer(x, profile.xi_axis()))
    out = values
    # contract one xi-axis at a time; the new site axis is appended at the end
    for _ in range(profile.dim):
        out = np.tensordot(out, kernel, axes=([0], [1]))
    return profile.cell_weight * out


def check_nyquist(profile: BandLimitedProfile, spec: LatticeSpec) -> None:
    if profile.dim != spec.dim:
        raise ValueError(f"profile dim {profile.dim} != lattice dim {spec.dim}")
    if profile.cutoff > 1.0 / (2.0 * spec.spacing) * (1 + 1e-12):
        raise NyquistError(
            f"cutoff {profile.cutoff} exceeds 1/(2h) = {1 / (2 * spec.spacing)}; "
            f"need h <= {1 / (2 * profile.cutoff)}"
        )


def sample_exact_solution(sampler: ContinuumSolutionSampler, t: float,
                          spec: LatticeSpec) -> tuple[GridFunction, GridFunction]:
    """Continuum solution v(t) and its time derivative at the lattice sites."""
    check_nyquist(sampler.profile, spec)
    v_hat, dv_hat = sampler.spectrum(t)
    v = _inverse_integral(v_hat, sampler.profile, spec)
    dv = _inverse_integral(dv_hat, sampler.profile, spec)
    return GridFunction(spec, v), GridFunction(spec, dv)


def symbol_gap(theta, hbar: float, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Continuum minus scaled lattice symbol, and the gap over h^{2a} |theta|^{4a}.

    ``theta`` has components on its last axis.  The normalized value is
    defined as 0 at theta = 0.
    """
    alpha = check_alpha(alpha)
    theta = np.asarray(theta, dtype=float)
    cont = np.sum(4 * np.pi**2 * theta**2, axis=-1) ** alpha
    lat = hbar ** (-2 * alpha) * np.sum(4 * np.sin(np.pi * hbar * theta) ** 2, axis=-1) ** alpha
    gap = np.abs(cont - lat)
    r2 = np.sum(theta**2, axis=-1)
    denom = hbar ** (2 * alpha) * r2 ** (2 * alpha)
    normalized = np.divide(gap, denom, out=np.zeros_like(gap), where=r2 > 0)
    return gap, normalized


def sobolev_weight_norm(profile: BandLimitedProfile, alpha: float, t: float = 0.0,
                        mass_const: float = 0.0) -> float:
    """|| |xi|^{4a} v_hat(t) ||_{L^2} by trapezoid on the profile's xi-grid."""
    sampler = ContinuumSolutionSampler(profile, mass_const, alpha)
    v_hat, _ = sampler.spectrum(t)
    w = np.sum(profile.xi_grid() ** 2, axis=-1) ** (2 * alpha)
    return float(np.sqrt(profile.cell_weight * np.sum(np.abs(w * v_hat) ** 2)))
