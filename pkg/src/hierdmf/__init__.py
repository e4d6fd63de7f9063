"""Collaborative hierarchical semi-NMF for multi-scale component maps.

Factors each subject's time-by-voxel matrix into non-negative, nested
multi-scale component maps shared across a cohort, coupling subjects with
cross-subject group sparsity and per-subject graph smoothness. Ships a
synthetic cohort generator with known ground truth and an
activation-prediction evaluation harness.
"""

from .datamodel import (
    Cohort,
    FactorStack,
    HierarchySpec,
    NeighborGraph,
    SubjectTimeseries,
    SyntheticGroundTruth,
    validate_cohort,
)
from .errors import ConfigError, FormatError, HierdmfError, ValidationError
from .evaluation import (
    EvaluationReport,
    WilcoxonResult,
    fc_map,
    fisher_z,
    loso_evaluate,
    match_components,
    parcellate,
    recovery_score,
    synthesize_linear_activations,
    train_predictors,
    wilcoxon_signed_rank,
)
from .factorization import (
    GroupAggregates,
    ObjectiveBreakdown,
    compute_group_aggregates,
    fit_timecourses,
    normalize_rows_inf,
    objective,
    sparse_semi_nmf,
    split_signs,
    update_layer_deep,
    update_layer_finest,
)
from .pipeline import (
    DecompositionResult,
    decompose,
    decompose_greedy,
    decompose_independent,
    decompose_joint,
    load_result,
    pretrain_greedy,
    result_grid,
    save_result,
)
from .regularizers import (
    RegularizationWeights,
    SubjectGraphOperators,
    build_affinity,
    graph_reg_value,
    group_sparsity_value,
    regularization_weights,
)
from .storage import load_cohort, load_matrix, save_cohort, save_truth, store_matrix
from .synthetic import generate_synthetic_cohort, grid_graph

__version__ = "0.1.0"

__all__ = [
    "Cohort",
    "ConfigError",
    "DecompositionResult",
    "EvaluationReport",
    "FactorStack",
    "FormatError",
    "GroupAggregates",
    "HierarchySpec",
    "HierdmfError",
    "NeighborGraph",
    "ObjectiveBreakdown",
    "RegularizationWeights",
    "SubjectGraphOperators",
    "SubjectTimeseries",
    "SyntheticGroundTruth",
    "ValidationError",
    "WilcoxonResult",
    "build_affinity",
    "compute_group_aggregates",
    "decompose",
    "decompose_greedy",
    "decompose_independent",
    "decompose_joint",
    "fc_map",
    "fisher_z",
    "fit_timecourses",
    "generate_synthetic_cohort",
    "graph_reg_value",
    "grid_graph",
    "group_sparsity_value",
    "load_cohort",
    "load_matrix",
    "load_result",
    "loso_evaluate",
    "match_components",
    "normalize_rows_inf",
    "objective",
    "parcellate",
    "pretrain_greedy",
    "recovery_score",
    "regularization_weights",
    "result_grid",
    "save_cohort",
    "save_result",
    "save_truth",
    "sparse_semi_nmf",
    "split_signs",
    "store_matrix",
    "synthesize_linear_activations",
    "train_predictors",
    "update_layer_deep",
    "update_layer_finest",
    "validate_cohort",
    "wilcoxon_signed_rank",
]
