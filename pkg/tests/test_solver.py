import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latfkg.lattice import GridFunction, LatticeSpec, norm
from latfkg.solver import (
    EvolutionState,
    Forcing,
    MassField,
    apriori_report,
    build_propagator,
    energy,
    energy_inequality_slack,
    propagate_exact,
    solve,
    step_strang,
)

SPEC = LatticeSpec(1, 0.1, 32)


def random_grid(spec, seed):
    rng = np.random.default_rng(seed)
    return GridFunction(spec, rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape))


def bump_mass(spec):
    return MassField.from_function(spec, lambda x: 1.0 + np.exp(-np.sum(x**2, axis=-1)))


def test_propagator_frequencies():
    prop = build_propagator(SPEC, 0.5, 2.0)
    k = 3
    expected = math.sqrt(2 * abs(math.sin(math.pi * k / 32)) / 0.1 + 2.0)
    assert prop.beta[16 + k] == pytest.approx(expected, rel=1e-14)
    assert prop.beta[16] == pytest.approx(math.sqrt(2.0))


def test_constant_data_oscillates_at_mass_frequency():
    one = GridFunction(SPEC, np.ones(32))
    trace = solve(one, GridFunction.zeros(SPEC), 0.7, MassField.constant(SPEC, 1.0), None, 3.0, dt=0.5)
    for s in trace.states:
        np.testing.assert_allclose(s.u.values, math.cos(s.time), atol=1e-13)
        np.testing.assert_allclose(s.du.values, -math.sin(s.time), atol=1e-13)


def test_plane_wave_phase():
    pw = GridFunction.plane_wave(SPEC, [4])
    prop = build_propagator(SPEC, 0.5, 0.0)
    beta = prop.beta[16 + 4]
    out = propagate_exact(EvolutionState(0.0, pw, GridFunction.zeros(SPEC)), prop, 1.7)
    np.testing.assert_allclose(out.u.values, math.cos(1.7 * beta) * pw.values, atol=1e-12)


def test_constant_forcing_without_mass():
    c = 0.3
    f = Forcing.sampled(SPEC, lambda t, x: np.full(x.shape[:-1], c), 2.0, n_samples=5)
    zero = GridFunction.zeros(SPEC)
    trace = solve(zero, zero, 0.5, MassField.constant(SPEC, 0.0), f, 2.0, dt=0.25)
    for s in trace.states:
        np.testing.assert_allclose(s.u.values, c * s.time**2 / 2, atol=1e-13)
        np.testing.assert_allclose(s.du.values, c * s.time, atol=1e-13)


def test_group_property_and_reversal():
    prop = build_propagator(SPEC, 0.6, 0.5)
    s0 = EvolutionState(0.0, random_grid(SPEC, 1), random_grid(SPEC, 2))
    a = propagate_exact(propagate_exact(s0, prop, 0.3), prop, 0.9)
    b = propagate_exact(s0, prop, 1.2)
    np.testing.assert_allclose(a.u.values, b.u.values, atol=1e-12)
    back = propagate_exact(b, prop, -1.2)
    np.testing.assert_allclose(back.u.values, s0.u.values, atol=1e-12)
    np.testing.assert_allclose(back.du.values, s0.du.values, atol=1e-12)


def test_strang_equals_exact_without_mass():
    mass = MassField.constant(SPEC, 0.0)
    s0 = EvolutionState(0.0, random_grid(SPEC, 3), random_grid(SPEC, 4))
    a = step_strang(s0, 0.5, mass, 0.1)
    b = propagate_exact(s0, build_propagator(SPEC, 0.5, 0.0), 0.1)
    np.testing.assert_allclose(a.u.values, b.u.values, atol=1e-13)


def test_strang_local_error_is_third_order():
    mass = MassField.constant(SPEC, 2.0)
    prop = build_propagator(SPEC, 0.5, 2.0)
    s0 = EvolutionState(0.0, random_grid(SPEC, 5), random_grid(SPEC, 6))
    errs = []
    for dt in (0.1, 0.05):
        errs.append(norm(step_strang(s0, 0.5, mass, dt).u - propagate_exact(s0, prop, dt).u))
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.15)


def test_strang_global_order_two():
    spec = LatticeSpec(1, 0.2, 32)
    mass = bump_mass(spec)
    u0, u1 = random_grid(spec, 7), random_grid(spec, 8)
    final = lambda dt: solve(u0, u1, 0.5, mass, None, 1.0, dt, record_every=10**6).states[-1].u
    ref = final(1 / 256)
    e1 = norm(final(1 / 16) - ref)
    e2 = norm(final(1 / 32) - ref)
    assert 3.4 <= e1 / e2 <= 4.6


def test_conservation_constant_mass():
    u0, u1 = random_grid(SPEC, 9), random_grid(SPEC, 10)
    trace = solve(u0, u1, 0.8, MassField.constant(SPEC, 1.5), None, 2.0)
    e = np.array([r.total for r in trace.energies])
    assert np.max(np.abs(e - e[0])) / e[0] <= 1e-10


def test_variable_mass_energy_drift_is_second_order():
    spec = LatticeSpec(1, 0.2, 32)
    mass = bump_mass(spec)
    u0, u1 = random_grid(spec, 11), random_grid(spec, 12)
    drift = []
    for dt in (0.02, 0.01):
        e = [r.total for r in solve(u0, u1, 0.5, mass, None, 2.0, dt).energies]
        drift.append(max(abs(x - e[0]) for x in e))
    assert drift[0] / drift[1] == pytest.approx(4.0, rel=0.2)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**31))
def test_solution_map_is_linear(a, b, seed):
    mass = bump_mass(SPEC)
    x0, x1, y0, y1 = (random_grid(SPEC, seed + i) for i in range(4))
    run = lambda p, q: solve(p, q, 0.5, mass, None, 0.5, 0.05, record_every=100).states[-1].u.values
    lhs = run(a * x0 + b * y0, a * x1 + b * y1)
    np.testing.assert_allclose(lhs, a * run(x0, x1) + b * run(y0, y1), atol=1e-11)


def test_energy_of_constant_field():
    one = GridFunction(SPEC, np.ones(32))
    rec = energy(EvolutionState(0.0, one, GridFunction.zeros(SPEC)), 0.5, MassField.constant(SPEC, 2.0))
    assert rec.kinetic == 0.0
    assert rec.dirichlet == pytest.approx(0.0, abs=1e-20)
    assert rec.potential == pytest.approx(64.0)


def test_energy_of_plane_wave():
    pw = GridFunction.plane_wave(SPEC, [3])
    rec = energy(EvolutionState(0.0, pw, GridFunction.zeros(SPEC)), 1.0, MassField.constant(SPEC, 0.0))
    assert rec.dirichlet == pytest.approx(32 * 4 * math.sin(math.pi * 3 / 32) ** 2 / 0.01, rel=1e-12)


@pytest.mark.parametrize("variable", [False, True])
def test_energy_inequality_with_forcing(variable):
    spec = LatticeSpec(1, 0.2, 32)
    mass = bump_mass(spec) if variable else MassField.constant(spec, 1.0)
    f = Forcing.sampled(spec, lambda t, x: np.sin(3 * t) * np.exp(-x[..., 0] ** 2), 2.0)
    trace = solve(random_grid(spec, 1), random_grid(spec, 2), 0.5, mass, f, 2.0, dt=2 / 256)
    assert energy_inequality_slack(trace).min() >= -1e-8


def test_apriori_zero_data():
    zero = GridFunction.zeros(SPEC)
    mass = MassField.constant(SPEC, 1.0)
    trace = solve(zero, zero, 0.5, mass, None, 1.0, 0.25)
    report = apriori_report(trace, zero, zero, mass, None)
    assert report.rhs == 0.0 and report.implied_constant == 0.0


def test_argument_checks():
    with pytest.raises(ValueError):
        MassField.constant(SPEC, -1.0)
    with pytest.raises(ValueError):
        build_propagator(SPEC, 0.5, -0.1)
    zero = GridFunction.zeros(SPEC)
    with pytest.raises(ValueError):
        solve(zero, zero, 0.5, MassField.constant(SPEC, 1.0), None, 1.0, dt=0.3)
    with pytest.raises(ValueError):
        solve(zero, zero, 1.2, MassField.constant(SPEC, 1.0), None, 1.0)
