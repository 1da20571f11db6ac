"""Design and analysis of multi-regional clinical trials under a random effects model."""

from .analysis import (
    TrialAnalysisInput,
    TrialAnalysisReport,
    analyze_trial,
    schoenfeld_sigma2,
    summaries_from_hr,
)
from .design import (
    DesignConfig,
    DesignResult,
    RegionDesignInput,
    check_feasibility,
    closed_form_n0,
    consistency_probability,
    cp_equal_allocation,
    cp_lower_bound,
    cp_profile,
    lower_bound_design,
    regional_sizes,
    solve_overall_n0,
)
from .endpoints import (
    BinaryEndpoint,
    ContinuousEndpoint,
    Exponential,
    OmegaEndpoint,
    PiecewiseExponential,
    SurvivalPHEndpoint,
    SurvivalRMSTEndpoint,
    Weibull,
    omega_for,
    rmst,
    rmst_true_variance,
)
from .errors import (
    CalibrationError,
    DomainError,
    EstimationError,
    InfeasibleDesignError,
    MRCTError,
    NotAvailableError,
    NumericalError,
)
from .model import (
    RandomEffectsParams,
    RegionalSummary,
    moment_tau2,
    naive_hyperparams,
    pooled_estimate,
    shrinkage_estimate,
    wald_test,
)
from .survival import cox_loghr, kaplan_meier, nelson_aalen, rmst_estimate, rmst_variance_estimate

__version__ = "0.1.0"
