"""Semiclassical fractional Klein-Gordon equation on the lattice hZ^n."""

__version__ = "0.1.0"

from .lattice import (  # noqa: E402
    GridFunction,
    LatticeSpec,
    SpecMismatchError,
    SpectralFunction,
    forward_transform,
    inner_product,
    inverse_transform,
    norm,
)
from .fraclap import (  # noqa: E402
    CoefficientTable,
    apply_conv,
    apply_spectral,
    build_table,
    coeff_closed_form_1d,
    coeff_quadrature,
    symbol_field,
)
from .solver import (  # noqa: E402
    EnergyRecord,
    EvolutionState,
    Forcing,
    MassField,
    apriori_report,
    build_propagator,
    energy,
    propagate_exact,
    solve,
    step_strang,
)
from .continuum import (  # noqa: E402
    BandLimitedProfile,
    ContinuumSolutionSampler,
    continuum_symbol,
    gaussian_profile,
    point_profile,
    sample_exact_solution,
    sobolev_weight_norm,
    symbol_gap,
)
from .convergence import ConvergenceReport, SweepPlan, fit_rate, run_sweep, self_convergence  # noqa: E402
