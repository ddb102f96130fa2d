"""Periodic truncation of the lattice hZ^n and its Fourier analysis.

Arrays are stored in signed index order: position ``i`` along an axis
holds the site ``j = i - N/2`` (physical point ``h*j``) or, on the dual
side, the frequency ``theta_m = m / (N h)`` with ``m = i - N/2``.  FFT
wrapping happens only inside this module.
"""
from __future__ import annotations

import csv
import itertools
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft

__all__ = [
    "SpecMismatchError",
    "LatticeSpec",
    "GridFunction",
    "SpectralFunction",
    "forward_transform",
    "inverse_transform",
    "inner_product",
    "norm",
    "write_grid_csv",
    "read_grid_csv",
]


class SpecMismatchError(ValueError):
    """Two lattice objects that must share a LatticeSpec do not."""


def fft_workers() -> int:
    """Thread cap for transforms, read from ``LATFKG_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("LATFKG_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic box of ``N**dim`` sites with spacing ``spacing``."""

    dim: int
    spacing: float
    points_per_axis: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise ValueError(f"spacing must be positive, got {self.spacing!r}")
        N = self.points_per_axis
        if int(N) != N or N < 2 or N % 2:
            raise ValueError(f"points_per_axis must be an even integer >= 2, got {N!r}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "points_per_axis", int(N))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def box_length(self) -> float:
        return self.points_per_axis * self.spacing

    def indices(self) -> np.ndarray:
        """Signed site (or frequency) indices along one axis."""
        N = self.points_per_axis
        return np.arange(-N // 2, N // 2)

    def coordinates(self) -> np.ndarray:
        """Physical site coordinates, shape ``shape + (dim,)``."""
        axes = [self.spacing * self.indices()] * self.dim
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def frequencies(self) -> np.ndarray:
        """Dual grid points theta_m, shape ``shape + (dim,)``."""
        axes = [self.indices() / self.box_length] * self.dim
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _as_field(spec: LatticeSpec, values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128)
    if arr.shape != spec.shape:
        raise ValueError(f"{what} values have shape {arr.shape}, expected {spec.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} values must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex field on the lattice sites, signed index order."""

    spec: LatticeSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_field(self.spec, self.values, "GridFunction"))

    @classmethod
    def zeros(cls, spec: LatticeSpec) -> GridFunction:
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def delta(cls, spec: LatticeSpec, site=None) -> GridFunction:
        """Unit mass at signed multi-index ``site`` (origin by default)."""
        site = (0,) * spec.dim if site is None else tuple(site)
        vals = np.zeros(spec.shape, dtype=complex)
        vals[tuple(s + spec.points_per_axis // 2 for s in site)] = 1.0
        return cls(spec, vals)

    @classmethod
    def plane_wave(cls, spec: LatticeSpec, mode) -> GridFunction:
        """e^{2 pi i k.theta_m} for the signed frequency multi-index ``mode``."""
        mode = np.asarray(mode, dtype=float).reshape(spec.dim)
        theta = mode / spec.box_length
        return cls(spec, np.exp(2j * np.pi * spec.coordinates() @ theta))

    def _check(self, other: GridFunction) -> None:
        if other.spec != self.spec:
            raise SpecMismatchError(f"{self.spec} != {other.spec}")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.spec, self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.spec, self.values - other.values)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return GridFunction(self.spec, self.values * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.spec, -self.values)


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Complex field on the dual grid, signed frequency order."""

    spec: LatticeSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_field(self.spec, self.values, "SpectralFunction"))


def _to_spectral_array(spec: LatticeSpec, values: np.ndarray) -> np.ndarray:
    axes = tuple(range(spec.dim))
    wrapped = scipy.fft.ifftshift(values, axes=axes)
    out = scipy.fft.fftn(wrapped, axes=axes, workers=fft_workers())
    return spec.spacing ** (spec.dim / 2) * scipy.fft.fftshift(out, axes=axes)


def _to_grid_array(spec: LatticeSpec, values: np.ndarray) -> np.ndarray:
    # h^{n/2} (N h)^{-n} sum_m = h^{-n/2} * ifftn
    axes = tuple(range(spec.dim))
    wrapped = scipy.fft.ifftshift(values, axes=axes)
    out = scipy.fft.ifftn(wrapped, axes=axes, workers=fft_workers())
    return spec.spacing ** (-spec.dim / 2) * scipy.fft.fftshift(out, axes=axes)


def forward_transform(u: GridFunction) -> SpectralFunction:
    """u_hat(theta_m) = h^{n/2} sum_j u(h j) exp(-2 pi i j.m / N)."""
    return SpectralFunction(u.spec, _to_spectral_array(u.spec, u.values))


def inverse_transform(v: SpectralFunction) -> GridFunction:
    """Exact Riemann-sum inverse of :func:`forward_transform`."""
    return GridFunction(v.spec, _to_grid_array(v.spec, v.values))


def inner_product(u: GridFunction, v: GridFunction) -> complex:
    """Unweighted ``sum_k u(k) conj(v(k))``."""
    if u.spec != v.spec:
        raise SpecMismatchError(f"{u.spec} != {v.spec}")
    return complex(np.vdot(v.values, u.values))


def norm(u: GridFunction, p=2) -> float:
    """Unweighted l^p norm for p in {1, 2, inf}; no h^n measure factor."""
    a = np.abs(u.values)
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(np.sum(a * a)))
    if p in (np.inf, "inf"):
        return float(a.max())
    raise ValueError(f"unsupported norm exponent {p!r}")


def fmt_float(x: float) -> str:
    """17 significant digits: round-trips every double."""
    return format(float(x), ".17g")


def write_grid_csv(u: GridFunction, path) -> None:
    """One row per site: ``index_0,...,index_{n-1},re,im`` in signed order."""
    spec = u.spec
    header = [f"index_{a}" for a in range(spec.dim)] + ["re", "im"]
    idx = spec.indices()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for pos in itertools.product(range(spec.points_per_axis), repeat=spec.dim):
            z = u.values[pos]
            w.writerow([int(idx[p]) for p in pos] + [fmt_float(z.real), fmt_float(z.imag)])


def read_grid_csv(path, spacing: float) -> GridFunction:
    """Inverse of :func:`write_grid_csv`; dimension and N come from the file."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    dim = len(header) - 2
    if dim < 1 or header != [f"index_{a}" for a in range(dim)] + ["re", "im"]:
        raise ValueError(f"{path}: unexpected header {header}")
    N = round(len(body) ** (1.0 / dim))
    spec = LatticeSpec(dim, spacing, N)
    if len(body) != spec.size:
        raise ValueError(f"{path}: {len(body)} rows is not N**{dim}")
    vals = np.zeros(spec.shape, dtype=complex)
    seen = np.zeros(spec.shape, dtype=bool)
    for row in body:
        pos = tuple(int(s) + N // 2 for s in row[:dim])
        if any(not 0 <= p < N for p in pos):
            raise ValueError(f"{path}: index {row[:dim]} outside the box")
        vals[pos] = complex(float(row[dim]), float(row[dim + 1]))
        seen[pos] = True
    if not seen.all():
        raise ValueError(f"{path}: missing sites")
    return GridFunction(spec, vals)
