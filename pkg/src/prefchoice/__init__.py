"""Preferential attachment trees with location-based choice.

Grows the random tree (degree-biased candidate sampling, location-rank
choice), evaluates every closed-form limit object of the model, and
compares simulation against theory at desk scale.
"""

from .analytic import (
    AnalyticModel,
    ChoiceVector,
    Phase,
    PsiSolution,
    build_model,
    choice_density,
    classify_phase,
    critical_alpha,
    degree_cdf,
    degree_tail,
    density_integral,
    kernel_lower,
    kernel_upper,
    limit_proportion_bound,
    psi_curve,
    psi_drift,
    psi_drift_slope,
    psi_inverse_slope,
    saddle_point_tail_mass,
    solve_psi,
    tail_exponent,
    tail_mass,
    tail_mass_curve,
)
from .errors import (
    ConfigError,
    DomainError,
    PhaseError,
    PrefChoiceError,
    RangeError,
    ShapeError,
    SizeError,
)
from .growth import (
    GrowthState,
    ModelParams,
    attachment_frequencies,
    exact_attachment_distribution,
    grow_step,
    init,
    run,
    run_steps,
    sample_candidate,
    snapshot,
)
from .stats import (
    LocalDegreeGrid,
    PowerLawFit,
    SnapshotStats,
    condensation_diagnostic,
    degree_ccdf,
    default_fit_k_max,
    fit_power_law,
    local_degree_grid,
    proportion_below,
    psi_empirical,
    sae_diagnostic,
)

__version__ = "0.1.0"
