"""Max-margin classification on sub-Gaussian mixtures.

Data generation, hard-margin SVM and minimum-norm interpolation, their
equivalence certificate, exact and Monte-Carlo population risk, bound
evaluators, concentration diagnostics, and seeded experiment sweeps.
"""

from .errors import (
    BmlError,
    DegenerateGram,
    DomainError,
    InsufficientData,
    InternalInvariantViolation,
    NotConverged,
    NotExact,
    NotSeparable,
    ShapeError,
    StepTooLarge,
)
from .experiments import (
    CellAggregate,
    DimensionSpread,
    RegressionFit,
    SweepConfig,
    SweepRecord,
    SweepResult,
    dimension_free_check,
    load_sweep_config,
    log_risk_regression,
    run_sweep,
)
from .model import (
    CovarianceSpec,
    MeanSpec,
    MixtureModel,
    eigvec_mean,
    explicit_mean,
    explicit_spectrum,
    isotropic_spectrum,
    load_model,
    model_from_dict,
    model_to_dict,
    polynomial_spectrum,
    random_rotation,
    rare_weak_mean,
    rotated_spectrum,
    sphere_mean,
    spectral_summaries,
)
from .risk import (
    AssumptionVerdict,
    ConcentrationReport,
    Diagnostics,
    LowerBound,
    MonteCarloRisk,
    RiskReport,
    UpperBound,
    build_risk_report,
    check_assumptions,
    concentration_bound_checks,
    concentration_diagnostics,
    exact_gaussian_log_risk,
    exact_gaussian_risk,
    isotropic_upper_bound,
    margin_statistic,
    monte_carlo_risk,
    risk_lower_bound,
    risk_upper_bound,
    sub_gaussian_risk_bound,
    upper_bound_exponent,
)
from .sampling import Dataset, dataset_to_csv, sample_dataset
from .solvers import (
    EquivalenceVerdict,
    GdTrace,
    LinearClassifier,
    ShermanMorrisonRow,
    hard_margin_svm,
    logistic_gd_direction,
    min_norm_interpolator,
    sherman_morrison_row,
    sv_proliferation_predicate,
)
from .streams import DEFAULT_SEED, rng_for_seed, trial_seed

__version__ = "0.1.0"
