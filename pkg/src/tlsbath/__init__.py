"""Relaxation of a two-level system coupled to a repeatedly measured spin bath.

Exact few-spin simulation engines plus the second-order analytic maps they
validate: thermal-like attractors, Zeno suppression, population inversion and
parameter points where the dynamics freezes.
"""

__version__ = "1.0.0"

from .analytics import (
    AttractorResult,
    OffdiagCoeffs,
    RelaxationPair,
    SecondOrderWarning,
    SincFactors,
    TemperatureBounds,
    attractor,
    attractor_rho00,
    conditional_update,
    effective_temperature,
    ensemble_map,
    is_freezing_point,
    offdiag_closed_form,
    offdiag_coeffs,
    offdiag_map,
    outcome_probabilities,
    relaxation_constants,
    rho00_closed_form,
    sinc_factors,
    temperature_bounds,
)
from .dynamics import (
    EnsembleSeries,
    Propagator,
    TotalState,
    Trajectory,
    band_projector,
    coarse_reset,
    cojump_norm,
    measure_band_nonselective,
    measure_band_selective,
    reduced_qubit_state,
    run_ensemble,
    run_trajectory,
    trajectory_seed,
)
from .experiments import (
    ScenarioReport,
    attractor_map,
    compare_engines,
    default_environment,
    reproduce_fig2,
    reproduce_fig3,
    verify_freezing,
    zeno_scan,
)
from .model import (
    BandedEnvironment,
    ModelParams,
    QubitState,
    beta_working_point,
    binomial_degeneracy,
    build_band_environment,
    build_spin_environment,
    build_total_hamiltonian,
    effective_beta,
)

__all__ = [
    "__version__",
    "AttractorResult",
    "BandedEnvironment",
    "EnsembleSeries",
    "ModelParams",
    "OffdiagCoeffs",
    "Propagator",
    "QubitState",
    "RelaxationPair",
    "ScenarioReport",
    "SecondOrderWarning",
    "SincFactors",
    "TemperatureBounds",
    "TotalState",
    "Trajectory",
    "attractor",
    "attractor_map",
    "attractor_rho00",
    "band_projector",
    "beta_working_point",
    "binomial_degeneracy",
    "build_band_environment",
    "build_spin_environment",
    "build_total_hamiltonian",
    "coarse_reset",
    "cojump_norm",
    "compare_engines",
    "conditional_update",
    "default_environment",
    "effective_beta",
    "effective_temperature",
    "ensemble_map",
    "is_freezing_point",
    "measure_band_nonselective",
    "measure_band_selective",
    "offdiag_closed_form",
    "offdiag_coeffs",
    "offdiag_map",
    "outcome_probabilities",
    "reduced_qubit_state",
    "relaxation_constants",
    "reproduce_fig2",
    "reproduce_fig3",
    "rho00_closed_form",
    "run_ensemble",
    "run_trajectory",
    "sinc_factors",
    "temperature_bounds",
    "trajectory_seed",
    "verify_freezing",
    "zeno_scan",
]
