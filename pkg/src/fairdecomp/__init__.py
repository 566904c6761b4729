"""Interventional direct/indirect effect decomposition for binary decisions."""

__version__ = "0.1.0"

from .dag import AssumptionReport, CreditDag, default_credit_dag, generic_dag, validate_dag
from .dataset import (
    AuditDataset,
    FoldAssignment,
    ValidationReport,
    assign_folds,
    read_dataset,
    validate,
    write_dataset,
)
from .estimator import (
    EstimatorConfig,
    MediationEstimate,
    PotentialOutcomeMeans,
    aipw_means,
    cross_fit_estimate,
    plug_in_means,
    wald_ci,
)
from .hmda import CohortConfig, LarRecord, build_cohort, derive_quintiles, parse_lar
from .nuisance import (
    BoostedTreesModel,
    DensityRatioModel,
    LogisticModel,
    MediatorSampler,
    NuisanceConfig,
    NuisanceSet,
    fit_boosted_trees,
    fit_density_ratio,
    fit_logistic,
    fit_mediator_sampler,
    fit_nuisances,
    sample_mediators,
)
from .oracle import (
    OracleEffects,
    ScmSpec,
    effects_from_observable_law,
    generate_dataset,
    observable_law,
    oracle_effects,
    preset_scm,
    random_monotone_scm,
    random_scm,
)
from .paths import PathCoefficients, path_specific_effects
from .sensitivity import (
    SensitivityResult,
    bounds_statement,
    build_sensitivity,
    e_value,
    rr_from_risk_difference,
    sensitivity_curve,
)

__all__ = [
    "__version__",
    "AssumptionReport",
    "AuditDataset",
    "BoostedTreesModel",
    "CohortConfig",
    "CreditDag",
    "DensityRatioModel",
    "EstimatorConfig",
    "FoldAssignment",
    "LarRecord",
    "LogisticModel",
    "MediationEstimate",
    "MediatorSampler",
    "NuisanceConfig",
    "NuisanceSet",
    "OracleEffects",
    "PathCoefficients",
    "PotentialOutcomeMeans",
    "ScmSpec",
    "SensitivityResult",
    "ValidationReport",
    "aipw_means",
    "assign_folds",
    "bounds_statement",
    "build_cohort",
    "build_sensitivity",
    "cross_fit_estimate",
    "default_credit_dag",
    "derive_quintiles",
    "e_value",
    "effects_from_observable_law",
    "fit_boosted_trees",
    "fit_density_ratio",
    "fit_logistic",
    "fit_mediator_sampler",
    "fit_nuisances",
    "generate_dataset",
    "generic_dag",
    "observable_law",
    "oracle_effects",
    "parse_lar",
    "path_specific_effects",
    "plug_in_means",
    "preset_scm",
    "random_monotone_scm",
    "random_scm",
    "read_dataset",
    "rr_from_risk_difference",
    "sample_mediators",
    "sensitivity_curve",
    "validate",
    "validate_dag",
    "wald_ci",
    "write_dataset",
]
