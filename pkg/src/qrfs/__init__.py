"""Feature selection built on strong rank-revealing QR factorization.

Three selectors share one toolkit: the RRQR permutation used directly, a
QR-coupled nonnegative factorization ranking features by weight-row norms,
and a two-phase hybrid that filters with RRQR and searches with a genetic
algorithm. A small evaluation harness (k-NN, decision tree, confusion-count
metrics, DOB-SCV folding) closes the loop.
"""

__version__ = "0.1.0"

from .errors import (DegenerateStateError, NonterminationError,
                     NumericalFailureError, OracleCapError, QrfsError,
                     RankDeficiencyError, ValidationError)
from .evaluation import (ConfusionCounts, EvaluationReport, FoldAssignment,
                         LabeledDataset, MetricVector, confusion,
                         cross_validate, dobscv_folds, knn_classify, metrics,
                         train_tree, tree_classify)
from .ga import (Chromosome, ChromosomeLayout, GaConfig, GaResult, Segment,
                 decode_segment, default_knn_layout, evaluate_chromosome,
                 fitness, ga_run, qr_ga_select, svm_example_layout)
from .matrix import (QrResult, SvdResult, column_pivoted_qr, householder_qr,
                     jacobi_svd, kahan_matrix, numerical_rank, pseudoinverse)
from .nmfqr import (NmfQrConfig, NmfQrState, affinity_matrix, graph_laplacian,
                    nmfqr_run, nmfqr_select, phi_matrix, update_w)
from .rrqr import (RrqrConfig, RrqrFactorization, SelectionResult, gamma,
                   omega, select_features_rrqr, strong_rrqr, swap_criterion)

__all__ = [
    "__version__",
    "QrfsError", "ValidationError", "OracleCapError", "RankDeficiencyError",
    "NonterminationError", "NumericalFailureError", "DegenerateStateError",
    "QrResult", "SvdResult", "householder_qr", "column_pivoted_qr",
    "jacobi_svd", "pseudoinverse", "kahan_matrix", "numerical_rank",
    "RrqrConfig", "RrqrFactorization", "SelectionResult", "omega", "gamma",
    "swap_criterion", "strong_rrqr", "select_features_rrqr",
    "NmfQrConfig", "NmfQrState", "affinity_matrix", "graph_laplacian",
    "phi_matrix", "update_w", "nmfqr_run", "nmfqr_select",
    "Segment", "ChromosomeLayout", "Chromosome", "GaConfig", "GaResult",
    "decode_segment", "fitness", "default_knn_layout", "svm_example_layout",
    "evaluate_chromosome", "ga_run", "qr_ga_select",
    "LabeledDataset", "ConfusionCounts", "MetricVector", "FoldAssignment",
    "EvaluationReport", "knn_classify", "train_tree", "tree_classify",
    "confusion", "metrics", "dobscv_folds", "cross_validate",
]
