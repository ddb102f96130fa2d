"""h-sweeps comparing lattice solutions with the continuum limit.

Discrepancies use the unweighted l^2 norm over lattice sites.  The
volume-weighted variant (times h^{n/2}) is carried alongside for
interpretation only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .continuum import (
    BandLimitedProfile,
    ContinuumSolutionSampler,
    check_nyquist,
    sample_exact_solution,
    sobolev_weight_norm,
)
from .fraclap import check_alpha
from .lattice import GridFunction, LatticeSpec, norm
from .solver import MassField, solve


@dataclass(frozen=True, eq=False)
class SweepPlan:
    alpha: float
    dim: int
    mass: float | Callable
    profile: BandLimitedProfile
    T: float
    hbar_list: tuple
    box: float
    dt: float | None = None  # None: a single exact step for constant mass, T/1024 otherwise

    def __post_init__(self):
        check_alpha(self.alpha)
        hs = tuple(float(h) for h in self.hbar_list)
        object.__setattr__(self, "hbar_list", hs)
        if len(hs) < 1 or any(h <= 0 for h in hs):
            raise ValueError("hbar_list must hold positive values")
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise ValueError("hbar_list must be strictly decreasing")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.profile.dim != self.dim:
            raise ValueError("profile dimension does not match plan")
        if not callable(self.mass) and self.mass < 0:
            raise ValueError("mass must be non-negative")
        for h in hs:
            self.spec_for(h)
            check_nyquist(self.profile, self.spec_for(h))

    def spec_for(self, hbar: float) -> LatticeSpec:
        ratio = self.box / hbar
        N = int(round(ratio))
        if abs(ratio - N) > 1e-9 * ratio or N % 2:
            raise ValueError(f"box/hbar = {ratio} is not an even integer for hbar={hbar}")
        return LatticeSpec(self.dim, hbar, N)

    @property
    def constant_mass(self) -> bool:
        return not callable(self.mass)

    def mass_field(self, spec: LatticeSpec) -> MassField:
        if self.constant_mass:
            return MassField.constant(spec, self.mass)
        return MassField.from_function(spec, self.mass)


@dataclass(frozen=True)
class SweepRow:
    hbar: float
    N: int
    D_u: float
    D_du: float
    normalized: float

    @property
    def D_total(self) -> float:
        return self.D_u + self.D_du

    def D_total_weighted(self, dim: int) -> float:
        return self.hbar ** (dim / 2) * self.D_total


@dataclass(frozen=True)
class ConvergenceReport:
    rows: list = field(default_factory=list)
    fitted_rate: float = math.nan
    fit_residual: float = math.nan
    dim: int = 1

    @property
    def exact(self) -> bool:
        return math.isinf(self.fitted_rate)

    def totals(self) -> np.ndarray:
        return np.array([r.D_total for r in self.rows])


def fit_rate(hbars, discrepancies) -> tuple[float, float]:
    """Least-squares slope of log D against log h, and RMS residual of the fit.

    All-zero discrepancies give (inf, 0): the match is exact.  Zero entries
    are otherwise dropped; fewer than three usable rows is an error.
    """
    h = np.asarray(hbars, dtype=float)
    d = np.asarray(discrepancies, dtype=float)
    if h.size and np.all(d == 0):
        return math.inf, 0.0
    keep = d > 0
    if keep.sum() < 3:
        raise ValueError(f"need at least 3 rows with D > 0 to fit a rate, got {int(keep.sum())}")
    x, y = np.log(h[keep]), np.log(d[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


def _fit_window(rows: list) -> list:
    n = max(3, math.ceil(len(rows) / 2))
    return rows[-n:]


def _report(rows: list, dim: int) -> ConvergenceReport:
    rows = sorted(rows, key=lambda r: -r.hbar)
    window = _fit_window(rows)
    rate, resid = fit_rate([r.hbar for r in window], [r.D_total for r in window])
    return ConvergenceReport(rows, rate, resid, dim)


def _lattice_final(plan: SweepPlan, spec: LatticeSpec, sampler: ContinuumSolutionSampler):
    u0, u1 = sample_exact_solution(sampler, 0.0, spec)
    mass = plan.mass_field(spec)
    if plan.dt is not None:
        dt = plan.dt
    elif mass.is_constant:
        dt = plan.T
    else:
        dt = plan.T / 1024
    trace = solve(u0, u1, plan.alpha, mass, None, plan.T, dt, record_every=10**9)
    return trace.states[-1]


def run_sweep(plan: SweepPlan) -> ConvergenceReport:
    """Lattice vs continuum at time T for every h; constant mass only."""
    if not plan.constant_mass:
        raise ValueError("run_sweep needs constant mass; use self_convergence")
    sampler = ContinuumSolutionSampler(plan.profile, float(plan.mass), plan.alpha)
    weight = sobolev_weight_norm(plan.profile, plan.alpha, plan.T, float(plan.mass))
    rows = []
    for h in plan.hbar_list:
        spec = plan.spec_for(h)
        final = _lattice_final(plan, spec, sampler)
        v, dv = sample_exact_solution(sampler, plan.T, spec)
        du, ddu = norm(final.u - v), norm(final.du - dv)
        normalized = (du + ddu) / (h ** (2 * plan.alpha) * weight) if weight > 0 else 0.0
        rows.append(SweepRow(h, spec.points_per_axis, du, ddu, normalized))
    return _report(rows, plan.dim)


def _restrict(u: GridFunction, coarse: LatticeSpec) -> np.ndarray:
    ratio = coarse.spacing / u.spec.spacing
    r = int(round(ratio))
    step = (slice(None, None, r),) * coarse.dim
    return u.values[step]


def self_convergence(plan: SweepPlan, reference_refinements: int = 0) -> ConvergenceReport:
    """Differences against the finest-h lattice solution, restricted by site matching.

    The h-list must be dyadic so coarse sites are a subset of the finest
    ones.  By default the finest entry serves as reference and gets no row;
    with ``reference_refinements=k`` the reference is computed at the finest
    h divided by 2**k and every listed h gets a row.  A reference only one
    level below the last rows biases the fitted rate upwards.
    """
    hs = plan.hbar_list
    if reference_refinements:
        hs = hs + tuple(hs[-1] / 2**k for k in range(1, reference_refinements + 1))
    if len(hs) < 2:
        raise ValueError("self_convergence needs at least two h values")
    for h in hs:
        k = math.log2(h / hs[-1])
        if abs(k - round(k)) > 1e-9:
            raise ValueError(f"h-list is not dyadic: {h} / {hs[-1]} is not a power of two")
    m0 = float(plan.mass) if plan.constant_mass else 0.0
    sampler = ContinuumSolutionSampler(plan.profile, m0, plan.alpha)
    weight = sobolev_weight_norm(plan.profile, plan.alpha, 0.0, m0)
    ref = _lattice_final(plan, plan.spec_for(hs[-1]), sampler)
    rows = []
    for h in hs[: len(plan.hbar_list) if reference_refinements else -1]:
        spec = plan.spec_for(h)
        final = _lattice_final(plan, spec, sampler)
        du = float(np.linalg.norm(final.u.values - _restrict(ref.u, spec)))
        ddu = float(np.linalg.norm(final.du.values - _restrict(ref.du, spec)))
        normalized = (du + ddu) / (h ** (2 * plan.alpha) * weight) if weight > 0 else 0.0
        rows.append(SweepRow(h, spec.points_per_axis, du, ddu, normalized))
    return _report(rows, plan.dim)
