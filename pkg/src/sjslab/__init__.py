"""sjslab: sparse joint shift on discrete feature spaces.

Model a labelled source distribution and an unlabelled target over
categorical features, verify shift hypotheses (sparse joint shift, prior
shift, covariate shift, conditional invariance, sufficiency) and their
identifiability, and estimate target class priors and corrected
posterior probabilities from the target's feature marginal alone.
"""

__version__ = "0.1.0"

from .datasets import (
    DatasetSchema,
    RowTable,
    empirical_distribution,
    load_dataset,
    sample_rows,
    schema_for_distribution,
    write_rows_csv,
)
from .distribution import (
    ConditionalTable,
    FiniteJointDistribution,
    check_absolute_continuity,
    class_conditional,
    class_conditional_density,
    full_importance_weight,
    kl_divergence,
    marginal_density,
    posterior,
)
from .errors import (
    AbsoluteContinuityViolated,
    DegenerateObjective,
    EmptyDataset,
    InfeasibleRatios,
    InvalidDistribution,
    NotConverged,
    SchemaViolation,
    SjslabError,
    ZeroLabelMass,
)
from .estimators import (
    HardClassifier,
    OptimizerOptions,
    SjsFit,
    SubsetResult,
    posterior_correct,
    reconstruct_target,
    sees_c_fit,
    sees_c_problem,
    sees_d_fit,
    sees_d_fit_with_classifier,
    sparsity_search,
    train_argmax_classifier,
)
from .experiment import ExperimentConfig, ExperimentResult, run_experiment
from .oracle import (
    BruteForceResult,
    PlantedInstance,
    brute_force_fit,
    fd_gradient_check,
    plant_sjs,
)
from .shifts import (
    RankReport,
    ShiftVerdict,
    TriangleReport,
    binary_variance_criterion,
    check_cdi,
    check_covariate_shift,
    check_prior_shift,
    check_sjs,
    check_sufficiency,
    check_triangle,
    classifier_statistics,
    posterior_statistics,
    rank_matrix,
    verify_total_expectation,
)
from .space import FeaturePartition, FeatureSpace, aggregate
from .synthetic import (
    PRESET_KINDS,
    cdi_not_sjs_tables,
    generate_synthetic,
    make_preset,
    paper_example_tables,
    product_distribution,
)

__all__ = [
    "AbsoluteContinuityViolated",
    "BruteForceResult",
    "ConditionalTable",
    "DatasetSchema",
    "DegenerateObjective",
    "EmptyDataset",
    "ExperimentConfig",
    "ExperimentResult",
    "FeaturePartition",
    "FeatureSpace",
    "FiniteJointDistribution",
    "HardClassifier",
    "InfeasibleRatios",
    "InvalidDistribution",
    "NotConverged",
    "OptimizerOptions",
    "PRESET_KINDS",
    "PlantedInstance",
    "RankReport",
    "RowTable",
    "SchemaViolation",
    "ShiftVerdict",
    "SjsFit",
    "SjslabError",
    "SubsetResult",
    "TriangleReport",
    "ZeroLabelMass",
    "aggregate",
    "binary_variance_criterion",
    "brute_force_fit",
    "cdi_not_sjs_tables",
    "check_absolute_continuity",
    "check_cdi",
    "check_covariate_shift",
    "check_prior_shift",
    "check_sjs",
    "check_sufficiency",
    "check_triangle",
    "class_conditional",
    "class_conditional_density",
    "classifier_statistics",
    "empirical_distribution",
    "fd_gradient_check",
    "full_importance_weight",
    "generate_synthetic",
    "kl_divergence",
    "load_dataset",
    "make_preset",
    "marginal_density",
    "paper_example_tables",
    "plant_sjs",
    "posterior",
    "posterior_correct",
    "posterior_statistics",
    "product_distribution",
    "rank_matrix",
    "reconstruct_target",
    "run_experiment",
    "sample_rows",
    "schema_for_distribution",
    "sees_c_fit",
    "sees_c_problem",
    "sees_d_fit",
    "sees_d_fit_with_classifier",
    "sparsity_search",
    "train_argmax_classifier",
    "verify_total_expectation",
    "write_rows_csv",
]
