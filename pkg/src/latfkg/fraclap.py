"""Discrete fractional Laplacian on a periodic lattice box.

Two routes to the same operator:

* coefficients ``a_j`` (Fourier coefficients of ``[sum_i 4 sin^2(pi t_i)]^alpha``
  on the unit cell) applied as a truncated periodic convolution;
* the Fourier multiplier ``[sum_i 4 sin^2(pi h theta_i)]^alpha`` applied on
  the dual grid.

The coefficients themselves come either from trapezoid quadrature with
Richardson extrapolation (any dimension) or from the Gamma-function closed
form (one dimension).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.fft

from .lattice import (
    GridFunction,
    LatticeSpec,
    SpecMismatchError,
    _to_grid_array,
    _to_spectral_array,
    fft_workers,
)

DEFAULT_QUAD_POINTS = {1: 4096, 2: 512, 3: 128}
DEFAULT_RICHARDSON = 2


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


def default_quad_points(dim: int) -> int:
    return DEFAULT_QUAD_POINTS.get(dim, 64)


# ----------------------------------------------------------------------------
# coefficients
# ----------------------------------------------------------------------------


class Quadrature(NamedTuple):
    value: float
    error: float


def _cell_symbol(alpha: float, dim: int, M: int) -> np.ndarray:
    """[sum_i 4 sin^2(pi t_i)]^alpha on the grid t = -1/2 + i/M."""
    s = 4.0 * np.sin(np.pi * (-0.5 + np.arange(M) / M)) ** 2
    total = np.zeros((M,) * dim)
    for axis in range(dim):
        shape = [1] * dim
        shape[axis] = M
        total = total + s.reshape(shape)
    return total**alpha


def _trapezoid_coeffs(samples: np.ndarray, radius: int) -> np.ndarray:
    """Periodic trapezoid values of a_j for ||j||_inf <= radius, all at once.

    With nodes t_i = -1/2 + i/M the sum (1/M^n) sum_i f(t_i) e^{-2 pi i j.t_i}
    is a DFT times (-1)^{sum j}.
    """
    dim = samples.ndim
    M = samples.shape[0]
    spectrum = scipy.fft.fftn(samples, workers=fft_workers()).real / M**dim
    js = np.arange(-radius, radius + 1)
    out = spectrum[np.ix_(*([js % M] * dim))]
    sign = (-1.0) ** js
    for axis in range(dim):
        shape = [1] * dim
        shape[axis] = js.size
        out = out * sign.reshape(shape)
    return out


def _richardson(levels: list[np.ndarray], alpha: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Extrapolate trapezoid values ordered coarse -> fine.

    The integrand is homogeneous of degree 2 alpha at the origin, so the
    error expansion runs in M^{-(2 alpha + n + 2k)}, k = 0, 1, ...
    Returns the best estimate and |best - previous-order estimate|.
    """
    table = list(levels)
    prev = table[-1]
    for k in range(len(levels) - 1):
        factor = 2.0 ** (2 * alpha + dim + 2 * k)
        prev = table[-1]
        table = [(factor * fine - coarse) / (factor - 1.0) for coarse, fine in zip(table[:-1], table[1:])]
    if len(levels) == 1:
        return table[-1], np.zeros_like(table[-1])
    return table[-1], np.abs(table[-1] - prev)


def _quadrature_arrays(alpha, dim, radius, quad_points, richardson):
    M = int(quad_points)
    if M < 64 or M & (M - 1):
        raise ValueError(f"quad_points must be a power of two >= 64, got {quad_points}")
    if richardson < 0:
        raise ValueError("richardson must be >= 0")
    coarsest = M >> max(richardson, 1)
    if coarsest <= 2 * radius + 1:
        raise ValueError(f"quad_points={M} too small for radius {radius} with {richardson} Richardson levels")
    fine = _cell_symbol(alpha, dim, M)
    # coarser grids are exact subsamples of the finest one
    nlev = max(richardson, 1) + 1
    levels = []
    for level in reversed(range(nlev)):
        step = 1 << level
        levels.append(_trapezoid_coeffs(fine[(slice(None, None, step),) * dim], radius))
    if richardson == 0:
        return levels[-1], np.abs(levels[-1] - levels[-2])
    return _richardson(levels, alpha, dim)


def coeff_quadrature(alpha: float, dim: int, j, quad_points: int | None = None,
                     richardson: int = DEFAULT_RICHARDSON) -> Quadrature:
    """Quadrature value of a_j = int_{[-1/2,1/2]^n} [sum 4 sin^2(pi t_i)]^alpha cos(2 pi j.t) dt.

    With ``richardson=0`` this is the plain trapezoid value on ``quad_points``
    nodes per axis and the error is |T(M) - T(M/2)|.  Otherwise ``richardson``
    extrapolation steps are applied and the error is the change made by the
    last step.
    """
    alpha = check_alpha(alpha)
    j = np.atleast_1d(np.asarray(j, dtype=int))
    if j.size != dim:
        raise ValueError(f"multi-index {tuple(j)} does not have {dim} components")
    radius = int(np.abs(j).max())
    M = default_quad_points(dim) if quad_points is None else quad_points
    values, errors = _quadrature_arrays(alpha, dim, radius, M, richardson)
    pos = tuple(j + radius)
    return Quadrature(float(values[pos]), float(errors[pos]))


def coeff_closed_form_1d(alpha: float, j: int, dim: int = 1) -> float:
    """(-1)^j Gamma(2a+1) / (Gamma(a-j+1) Gamma(a+j+1)), one dimension only.

    Evaluated in log space; a pole of either denominator Gamma gives an
    exact zero.
    """
    if dim != 1:
        raise NotImplementedError("closed-form coefficients exist only for dim=1")
    alpha = check_alpha(alpha)
    j = abs(int(j))  # a_j = a_{-j}
    log_num = math.lgamma(2 * alpha + 1)
    sign = -1.0 if j % 2 else 1.0
    log_den = 0.0
    for x in (alpha - j + 1, alpha + j + 1):
        if x <= 0 and x == math.floor(x):
            return 0.0
        if x < 0.5:
            # reflection: Gamma(x) = pi / (sin(pi x) Gamma(1 - x)), Gamma(1-x) > 0
            s = math.sin(math.pi * x)
            sign *= 1.0 if s > 0 else -1.0
            log_den += math.log(math.pi) - math.log(abs(s)) - math.lgamma(1 - x)
        else:
            log_den += math.lgamma(x)
    return sign * math.exp(log_num - log_den)


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Weights a_j for ||j||_inf <= radius, centred at index ``radius``.

    ``tail_estimate`` is the largest |a_j| on the outer shell; ``tail_bound``
    extrapolates the l^1 mass of all discarded coefficients from the decay
    observed over the outer half of the table.
    """

    alpha: float
    dim: int
    radius: int
    weights: np.ndarray = field(repr=False)
    errors: np.ndarray = field(repr=False)
    quad_error_estimate: float
    tail_estimate: float
    tail_bound: float

    def weight(self, j) -> float:
        j = np.atleast_1d(np.asarray(j, dtype=int))
        if np.abs(j).max() > self.radius:
            return 0.0
        return float(self.weights[tuple(j + self.radius)])

    def offsets(self):
        """Yield (multi-index, weight) for every retained coefficient."""
        R = self.radius
        for pos in np.ndindex(*self.weights.shape):
            yield tuple(p - R for p in pos), float(self.weights[pos])

    def rows(self):
        """Yield (multi-index, weight, quadrature error) in axis-major order."""
        R = self.radius
        for pos in np.ndindex(*self.weights.shape):
            yield tuple(p - R for p in pos), float(self.weights[pos]), float(self.errors[pos])


def _shell_max(weights: np.ndarray, radius: int) -> np.ndarray:
    dim = weights.ndim
    grids = np.meshgrid(*([np.arange(-radius, radius + 1)] * dim), indexing="ij")
    linf = np.max(np.abs(np.stack(grids)), axis=0)
    return np.array([np.abs(weights[linf == r]).max() for r in range(radius + 1)])


def _tail_bound(weights: np.ndarray, radius: int, alpha: float) -> float:
    dim = weights.ndim
    if alpha == 1.0:
        return 0.0  # nearest-neighbour stencil, nothing beyond radius 1
    shell = _shell_max(weights, radius)
    if shell[-1] <= 1e-13 * shell[0]:
        return 0.0  # finite kernel (integer alpha)
    lo = max(1, radius // 2)
    r = np.arange(lo, radius + 1)
    if r.size < 2:
        return math.inf
    slope = np.polyfit(np.log(r), np.log(shell[lo:]), 1)[0]
    p = -slope
    if p <= dim:
        return math.inf
    # shell at radius r holds (2r+1)^n - (2r-1)^n ~ 2n (2r)^{n-1} sites;
    # sum_{r>R} 2n 2^{n-1} r^{n-1} C r^{-p} <= integral from R
    C = shell[-1] * radius**p
    return float(2 * dim * 2 ** (dim - 1) * C * radius ** (dim - p) / (p - dim))


def build_table(alpha: float, dim: int, radius: int, quad_points: int | None = None,
                richardson: int = DEFAULT_RICHARDSON) -> CoefficientTable:
    alpha = check_alpha(alpha)
    if radius < 1:
        raise ValueError("radius must be >= 1")
    M = default_quad_points(dim) if quad_points is None else quad_points
    weights, errors = _quadrature_arrays(alpha, dim, radius, M, richardson)
    weights.flags.writeable = False
    errors.flags.writeable = False
    shell = _shell_max(weights, radius)
    return CoefficientTable(
        alpha=alpha,
        dim=dim,
        radius=radius,
        weights=weights,
        errors=errors,
        quad_error_estimate=float(errors.max()),
        tail_estimate=float(shell[-1]),
        tail_bound=_tail_bound(weights, radius, alpha),
    )


# ----------------------------------------------------------------------------
# symbol and operator application
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymbolField:
    spec: LatticeSpec
    alpha: float
    scaled: bool
    values: np.ndarray = field(repr=False)


def symbol_values(spec: LatticeSpec, alpha: float, scaled: bool = False) -> np.ndarray:
    """[sum_i 4 sin^2(pi h theta_i)]^alpha on the dual grid, times h^{-2 alpha} if scaled."""
    alpha = check_alpha(alpha)
    s = 4.0 * np.sin(np.pi * spec.indices() / spec.points_per_axis) ** 2
    total = np.zeros(spec.shape)
    for axis in range(spec.dim):
        shape = [1] * spec.dim
        shape[axis] = spec.points_per_axis
        total = total + s.reshape(shape)
    sigma = total**alpha
    if scaled:
        sigma = sigma * spec.spacing ** (-2 * alpha)
    return sigma


def symbol_field(spec: LatticeSpec, alpha: float, scaled: bool = False) -> SymbolField:
    values = symbol_values(spec, alpha, scaled)
    values.flags.writeable = False
    return SymbolField(spec, float(alpha), bool(scaled), values)


def apply_conv(u: GridFunction, table: CoefficientTable) -> GridFunction:
    """sum_j a_j u(k + j h) with periodic wrap-around, truncated at the table radius."""
    spec = u.spec
    if table.dim != spec.dim:
        raise SpecMismatchError(f"table dim {table.dim} != lattice dim {spec.dim}")
    if 2 * table.radius >= spec.points_per_axis:
        raise ValueError(f"radius {table.radius} too large for N={spec.points_per_axis}")
    axes = tuple(range(spec.dim))
    out = np.zeros(spec.shape, dtype=complex)
    for j, a in table.offsets():
        if a != 0.0:
            out += a * np.roll(u.values, tuple(-s for s in j), axis=axes)
    return GridFunction(spec, out)


def apply_spectral(u: GridFunction, alpha: float, power_scale: float = 1.0,
                   scaled: bool = False) -> GridFunction:
    """Multiply by symbol**power_scale on the dual grid."""
    spec = u.spec
    mult = symbol_values(spec, alpha, scaled) ** power_scale
    out = _to_grid_array(spec, mult * _to_spectral_array(spec, u.values))
    return GridFunction(spec, out)
