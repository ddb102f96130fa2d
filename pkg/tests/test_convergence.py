import math

import numpy as np
import pytest

from latfkg.continuum import NyquistError, gaussian_profile, point_profile
from latfkg.convergence import SweepPlan, fit_rate, run_sweep, self_convergence

HS = (0.4, 0.2, 0.1, 0.05, 0.025)


def packet():
    return gaussian_profile(1, 1.25, 0.075, center=0.625)


def plan(alpha, mass=1.0, hs=HS, profile=None):
    return SweepPlan(alpha, 1, mass, profile or packet(), 1.0, hs, 64.0)


def test_fit_rate_recovers_power_law():
    h = np.array([0.4, 0.2, 0.1, 0.05])
    rate, resid = fit_rate(h, 3.0 * h**1.7)
    assert rate == pytest.approx(1.7, abs=1e-12)
    assert resid < 1e-12


def test_fit_rate_exact_and_degenerate():
    assert fit_rate([0.4, 0.2, 0.1], [0.0, 0.0, 0.0]) == (math.inf, 0.0)
    with pytest.raises(ValueError):
        fit_rate([0.4, 0.2, 0.1], [1.0, 0.0, 0.0])


def test_fit_rate_residual_reports_noise():
    h = np.array([0.4, 0.2, 0.1, 0.05])
    _, resid = fit_rate(h, h**2 * np.array([1.0, 1.5, 1.0, 1.5]))
    assert resid > 0.1


def test_point_profile_is_exact():
    report = run_sweep(plan(0.5, profile=point_profile(1, 1.25)))
    assert max(report.totals()) <= 1e-10


def test_zero_data_is_exact():
    zero = gaussian_profile(1, 1.25, 0.1, amplitude=0.0)
    report = run_sweep(plan(0.75, profile=zero))
    assert np.all(report.totals() == 0.0) and report.exact


@pytest.mark.parametrize("alpha", [0.5, 0.75])
def test_sweep_decreases_and_rate(alpha):
    report = run_sweep(plan(alpha))
    totals = report.totals()
    assert np.all(np.diff(totals) < 0)
    assert report.fitted_rate >= 2 * alpha - 0.3
    # smooth data: unweighted discrepancy behaves like h^{2 - n/2}
    assert report.fitted_rate == pytest.approx(1.5, abs=0.1)


def test_normalized_discrepancy_stays_bounded():
    rows = run_sweep(plan(0.5)).rows
    norm = [r.normalized for r in rows]
    assert max(norm) / min(norm) <= 4.0


def test_weighted_total_adds_half_power():
    row = run_sweep(plan(0.5)).rows[-1]
    assert row.D_total_weighted(1) == pytest.approx(math.sqrt(row.hbar) * row.D_total)


def test_self_convergence_matches_continuum_reference():
    p = plan(0.5, hs=(0.4, 0.2, 0.1, 0.05))
    cont = run_sweep(p)
    selfc = self_convergence(p, reference_refinements=3)
    assert len(selfc.rows) == len(cont.rows)
    assert selfc.fitted_rate == pytest.approx(cont.fitted_rate, abs=0.1)


def test_self_convergence_variable_mass():
    p = plan(0.5, mass=lambda x: 1.0 + np.exp(-np.sum(x**2, axis=-1)), hs=(0.4, 0.2, 0.1))
    report = self_convergence(p, reference_refinements=2)
    assert np.all(np.diff(report.totals()) < 0)
    assert report.fitted_rate >= 0.7


def test_plan_validation():
    with pytest.raises(ValueError):
        plan(0.5, hs=(0.1, 0.2, 0.4))
    with pytest.raises(ValueError):
        SweepPlan(0.5, 1, 1.0, packet(), 1.0, (0.4, 0.2), 63.0)
    with pytest.raises(NyquistError):
        plan(0.5, hs=(0.8, 0.4))
    with pytest.raises(ValueError):
        run_sweep(plan(0.5, mass=lambda x: np.ones(x.shape[:-1])))


def test_self_convergence_needs_dyadic_list():
    with pytest.raises(ValueError):
        self_convergence(plan(0.5, hs=(0.4, 0.32, 0.2)))
