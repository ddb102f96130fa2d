"""Time evolution of  u_tt + h^{-2a} (-L_h)^a u + m u = f  on a periodic lattice box.

Constant mass is handled exactly mode by mode: each dual-grid mode obeys
v'' + beta^2 v = f_hat with beta^2 = h^{-2a} sigma + m.  Variable mass uses
kick-drift-kick Strang splitting around the exact free flow.  Neither scheme
has a CFL restriction: the free flow is exact and the kicks are diagonal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fraclap import apply_spectral, check_alpha, symbol_values
from .lattice import (
    GridFunction,
    LatticeSpec,
    SpecMismatchError,
    _to_grid_array,
    _to_spectral_array,
    norm,
)

SINC_SERIES_THRESHOLD = 1e-6


def _sinc(x: np.ndarray) -> np.ndarray:
    """sin(x)/x, switching to a 4-term Taylor series for |x| < 1e-6."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < SINC_SERIES_THRESHOLD
    xs = x[small] ** 2
    out[small] = 1.0 - xs / 6.0 + xs**2 / 120.0 - xs**3 / 5040.0
    xl = x[~small]
    out[~small] = np.sin(xl) / xl
    return out


# ----------------------------------------------------------------------------
# problem data
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MassField:
    spec: LatticeSpec
    values: np.ndarray = field(repr=False)
    sup_norm: float = field(init=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.spec.shape:
            raise ValueError(f"mass has shape {vals.shape}, expected {self.spec.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("mass must be finite")
        if np.any(vals < 0):
            raise ValueError("mass must be non-negative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "sup_norm", float(vals.max()))

    @classmethod
    def constant(cls, spec: LatticeSpec, m: float) -> MassField:
        return cls(spec, np.full(spec.shape, float(m)))

    @classmethod
    def from_function(cls, spec: LatticeSpec, fn) -> MassField:
        """``fn`` maps coordinates of shape (..., dim) to mass values."""
        return cls(spec, fn(spec.coordinates()))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values.flat[0]))

    @property
    def const_value(self) -> float:
        if not self.is_constant:
            raise ValueError("mass is not constant")
        return float(self.values.flat[0])


@dataclass(frozen=True, eq=False)
class Forcing:
    """Source term sampled on a uniform time grid, linear in between.

    ``samples`` has shape ``(len(times),) + spec.shape``.  A forcing with no
    samples is identically zero.
    """

    spec: LatticeSpec
    times: np.ndarray = field(repr=False, default=None)
    samples: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.samples is None:
            object.__setattr__(self, "times", np.zeros(0))
            return
        times = np.array(self.times, dtype=float)
        samples = np.array(self.samples, dtype=complex)
        if samples.shape != times.shape + self.spec.shape:
            raise SpecMismatchError(f"forcing samples have shape {samples.shape}")
        if times.size < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("forcing time grid must be strictly increasing with >= 2 points")
        if not np.allclose(np.diff(times), times[1] - times[0], rtol=1e-9, atol=0):
            raise ValueError("forcing time grid must be uniform")
        if not np.all(np.isfinite(samples)):
            raise ValueError("forcing samples must be finite")
        times.flags.writeable = False
        samples.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def zero(cls, spec: LatticeSpec) -> Forcing:
        return cls(spec)

    @classmethod
    def sampled(cls, spec: LatticeSpec, fn, T: float, n_samples: int = 257) -> Forcing:
        """Sample ``fn(t, coords)`` at ``n_samples`` uniform times on [0, T]."""
        times = np.linspace(0.0, T, n_samples)
        coords = spec.coordinates()
        return cls(spec, times, np.stack([fn(t, coords) for t in times]))

    @property
    def is_zero(self) -> bool:
        return self.samples is None

    @property
    def kind(self) -> str:
        return "zero" if self.is_zero else "sampled"

    def at(self, t: float) -> np.ndarray:
        if self.is_zero:
            return np.zeros(self.spec.shape, dtype=complex)
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ValueError(f"t={t} outside the forcing time grid [{times[0]}, {times[-1]}]")
        dt = times[1] - times[0]
        s = min(max((t - times[0]) / dt, 0.0), times.size - 1.0)
        i = min(int(math.floor(s)), times.size - 2)
        w = s - i
        return (1.0 - w) * self.samples[i] + w * self.samples[i + 1]

    def norm_at(self, t: float) -> float:
        f = self.at(t)
        return float(np.sqrt(np.sum(np.abs(f) ** 2)))


@dataclass(frozen=True, eq=False)
class EvolutionState:
    time: float
    u: GridFunction
    du: GridFunction

    def __post_init__(self):
        if self.u.spec != self.du.spec:
            raise SpecMismatchError("u and du live on different lattices")

    @property
    def spec(self) -> LatticeSpec:
        return self.u.spec


@dataclass(frozen=True, eq=False)
class PropagatorModes:
    spec: LatticeSpec
    alpha: float
    mass_const: float
    beta: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class EnergyRecord:
    time: float
    kinetic: float
    dirichlet: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.dirichlet + self.potential


@dataclass(frozen=True, eq=False)
class SolutionTrace:
    times: np.ndarray
    states: list
    energies: list
    alpha: float
    mass: MassField
    forcing: Forcing
    T: float
    dt: float


# ----------------------------------------------------------------------------
# propagation
# ----------------------------------------------------------------------------


def build_propagator(spec: LatticeSpec, alpha: float, mass_const: float) -> PropagatorModes:
    if mass_const < 0:
        raise ValueError(f"mass must be non-negative, got {mass_const}")
    alpha = check_alpha(alpha)
    beta = np.sqrt(symbol_values(spec, alpha, scaled=True) + float(mass_const))
    beta.flags.writeable = False
    return PropagatorModes(spec, alpha, float(mass_const), beta)


def _rotate(v, w, beta, dt, f_hat=None):
    """Exact modal update of v'' + beta^2 v = f_hat over dt, f_hat frozen."""
    x = beta * dt
    c = np.cos(x)
    s = dt * _sinc(x)  # sin(beta dt) / beta
    v_new = c * v + s * w
    w_new = -beta * np.sin(x) * v + c * w
    if f_hat is not None:
        # int_0^dt sin(beta(dt-s))/beta ds = (1 - cos x)/beta^2 = dt^2/2 sinc(x/2)^2
        v_new = v_new + 0.5 * (dt * _sinc(0.5 * x)) ** 2 * f_hat
        w_new = w_new + s * f_hat
    return v_new, w_new


def propagate_exact(state: EvolutionState, propagator: PropagatorModes, dt: float,
                    forcing: Forcing | None = None) -> EvolutionState:
    """Advance by ``dt`` (either sign) with the exact constant-mass propagator.

    Forcing, if any, is frozen at the step midpoint and integrated against
    the cos/sin kernels in closed form.
    """
    spec = state.spec
    if propagator.spec != spec:
        raise SpecMismatchError("propagator built for a different lattice")
    if dt == 0:
        raise ValueError("dt must be non-zero")
    v = _to_spectral_array(spec, state.u.values)
    w = _to_spectral_array(spec, state.du.values)
    f_hat = None
    if forcing is not None and not forcing.is_zero:
        f_hat = _to_spectral_array(spec, forcing.at(state.time + 0.5 * dt))
    v, w = _rotate(v, w, propagator.beta, dt, f_hat)
    return EvolutionState(
        state.time + dt,
        GridFunction(spec, _to_grid_array(spec, v)),
        GridFunction(spec, _to_grid_array(spec, w)),
    )


def step_strang(state: EvolutionState, alpha: float, mass: MassField, dt: float,
                forcing: Forcing | None = None, free: PropagatorModes | None = None) -> EvolutionState:
    """Half kick by (-m u + f), exact free fractional-wave flow, half kick.

    ``free`` may carry a prebuilt zero-mass propagator to skip rebuilding it.
    """
    spec = state.spec
    if mass.spec != spec:
        raise SpecMismatchError("mass lives on a different lattice")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if free is None:
        free = build_propagator(spec, alpha, 0.0)
    f_mid = 0.0
    if forcing is not None and not forcing.is_zero:
        f_mid = forcing.at(state.time + 0.5 * dt)
    m = mass.values
    du = state.du.values + 0.5 * dt * (f_mid - m * state.u.values)
    v, w = _rotate(
        _to_spectral_array(spec, state.u.values),
        _to_spectral_array(spec, du),
        free.beta,
        dt,
    )
    u = _to_grid_array(spec, v)
    du = _to_grid_array(spec, w)
    du = du + 0.5 * dt * (f_mid - m * u)
    return EvolutionState(state.time + dt, GridFunction(spec, u), GridFunction(spec, du))


# ----------------------------------------------------------------------------
# diagnostics
# ----------------------------------------------------------------------------


def energy(state: EvolutionState, alpha: float, mass: MassField) -> EnergyRecord:
    """E = ||du||^2 + ||h^{-a} (-L_h)^{a/2} u||^2 + ||m^{1/2} u||^2, unweighted l^2."""
    if mass.spec != state.spec:
        raise SpecMismatchError("mass lives on a different lattice")
    half = apply_spectral(state.u, alpha, power_scale=0.5, scaled=True)
    u2 = np.abs(state.u.values) ** 2
    return EnergyRecord(
        time=state.time,
        kinetic=norm(state.du) ** 2,
        dirichlet=norm(half) ** 2,
        potential=float(np.sum(mass.values * u2)),
    )


def solve(u0: GridFunction, u1: GridFunction, alpha: float, mass: MassField,
          forcing: Forcing | None, T: float, dt: float | None = None,
          record_every: int = 16) -> SolutionTrace:
    """Integrate on [0, T]; exact propagator for constant mass, Strang otherwise.

    States are recorded at t=0, every ``record_every`` steps and at T.
    """
    spec = u0.spec
    for name, obj in (("u1", u1), ("mass", mass)):
        if obj.spec != spec:
            raise SpecMismatchError(f"{name} lives on a different lattice")
    forcing = Forcing.zero(spec) if forcing is None else forcing
    if forcing.spec != spec:
        raise SpecMismatchError("forcing lives on a different lattice")
    if T <= 0:
        raise ValueError("T must be positive")
    dt = T / 1024 if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    nsteps = round(T / dt)
    if nsteps < 1 or abs(nsteps * dt - T) > 1e-9 * T:
        raise ValueError(f"dt={dt} does not divide T={T}")
    dt = T / nsteps
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    alpha = check_alpha(alpha)

    if mass.is_constant:
        prop = build_propagator(spec, alpha, mass.const_value)

        def step(s):
            return propagate_exact(s, prop, dt, forcing)
    else:
        free = build_propagator(spec, alpha, 0.0)

        def step(s):
            return step_strang(s, alpha, mass, dt, forcing, free=free)

    state = EvolutionState(0.0, u0, u1)
    states, energies = [state], [energy(state, alpha, mass)]
    for k in range(1, nsteps + 1):
        state = step(state)
        if k % record_every == 0 or k == nsteps:
            # pin the clock to the grid to avoid accumulated round-off
            state = EvolutionState(k * dt, state.u, state.du)
            states.append(state)
            energies.append(energy(state, alpha, mass))
    times = np.array([s.time for s in states])
    return SolutionTrace(times, states, energies, alpha, mass, forcing, T, dt)


def forcing_l1_in_time(forcing: Forcing, times, dt: float) -> np.ndarray:
    """int_0^t ||f(s)|| ds at each t in ``times`` by the per-step midpoint rule.

    This is the forcing the time steppers actually apply, so the bound is
    checked against the problem that was solved.
    """
    times = np.asarray(times, dtype=float)
    if forcing.is_zero:
        return np.zeros_like(times)
    nsteps = round(times[-1] / dt)
    mids = (np.arange(nsteps) + 0.5) * dt
    cum = np.concatenate([[0.0], np.cumsum([forcing.norm_at(t) for t in mids]) * dt])
    return cum[np.rint(times / dt).astype(int)]


def forcing_l2_squared(forcing: Forcing, T: float) -> float:
    """||f||^2_{L^2([0,T]; l^2)} by trapezoid over the sample grid."""
    if forcing.is_zero:
        return 0.0
    t = forcing.times
    keep = t <= T + 1e-12
    sq = np.sum(np.abs(forcing.samples[keep]) ** 2, axis=tuple(range(1, forcing.samples.ndim)))
    return float(np.trapezoid(sq, t[keep]))


def energy_inequality_slack(trace: SolutionTrace) -> np.ndarray:
    """sqrt(E(0)) + int_0^t ||f|| ds - sqrt(E(t)) at each recorded time; >= 0 expected."""
    sqrt_e = np.sqrt([e.total for e in trace.energies])
    bound = sqrt_e[0] + forcing_l1_in_time(trace.forcing, trace.times, trace.dt)
    return bound - sqrt_e


@dataclass(frozen=True)
class AprioriReport:
    times: np.ndarray
    ratios: np.ndarray
    rhs: float

    @property
    def implied_constant(self) -> float:
        return float(self.ratios.max())


def apriori_report(trace: SolutionTrace, u0: GridFunction, u1: GridFunction,
                   mass: MassField, forcing: Forcing | None) -> AprioriReport:
    """Ratio of ||u(t)||^2 + ||du(t)||^2 to the well-posedness right-hand side

        (1 + |m|_inf) [ (h^{-2a} + |m|_inf) ||u0||^2 + ||u1||^2 + ||f||^2_{L^2(0,T)} ].

    The largest ratio is the implied constant; nothing is asserted about it.
    """
    spec = u0.spec
    msup = mass.sup_norm
    f2 = 0.0 if forcing is None else forcing_l2_squared(forcing, trace.T)
    rhs = (1.0 + msup) * (
        (spec.spacing ** (-2 * trace.alpha) + msup) * norm(u0) ** 2 + norm(u1) ** 2 + f2
    )
    lhs = np.array([norm(s.u) ** 2 + norm(s.du) ** 2 for s in trace.states])
    ratios = np.zeros_like(lhs) if rhs == 0 else lhs / rhs
    return AprioriReport(trace.times.copy(), ratios, rhs)
