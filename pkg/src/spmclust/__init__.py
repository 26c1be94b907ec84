"""Robust sparse clustering with spatial medians.

Partition-based clustering where cluster centers are spatial (geometric)
medians. Assignment can use a common Mahalanobis-type metric built from the
regularized spatial-sign covariance of within-cluster residuals, or restrict
itself to coordinates passing a hard separation-score threshold. The
threshold is tuned by a permutation gap criterion and the cluster count by a
between/within median-distance ratio. Includes planted-cluster simulation
designs, external evaluation metrics, and a benchmarking CLI.
"""

from .core import (
    CenterSet,
    DataMatrix,
    FitDiagnostics,
    Partition,
    RngSpec,
    standardize_columns,
    validate_matrix,
)
from .datagen import ContaminationSpec, CovarianceSpec, SimDesign, SimOutput, contaminate, sample
from .engines import (
    CenterRule,
    EngineConfig,
    FitResult,
    InitRule,
    SparseState,
    active_set,
    assign,
    fit_baseline,
    fit_engine,
    fit_sm_sscm,
    fit_sparse_sm,
    max_min_seed,
    separation_scores,
    update_centers,
)
from .geometry import (
    MetricSpec,
    WeiszfeldConfig,
    distance,
    restricted_distance,
    spatial_median,
    spatial_sign,
)
from .metrics import ContingencyTable, ari, contingency, fmi, nmi, purity, score_all, v_measure
from .sscm import SscmEstimate, estimate_sscm, inverse_metric
from .tuning import (
    GapReport,
    KSelectionReport,
    between_separation,
    bwdm_components,
    default_tau_grid,
    permute_columns,
    select_k,
    select_tau,
)

__version__ = "0.1.0"

__all__ = [
    "CenterRule",
    "CenterSet",
    "ContaminationSpec",
    "ContingencyTable",
    "CovarianceSpec",
    "DataMatrix",
    "EngineConfig",
    "FitDiagnostics",
    "FitResult",
    "GapReport",
    "InitRule",
    "KSelectionReport",
    "MetricSpec",
    "Partition",
    "RngSpec",
    "SimDesign",
    "SimOutput",
    "SparseState",
    "SscmEstimate",
    "WeiszfeldConfig",
    "active_set",
    "ari",
    "assign",
    "between_separation",
    "bwdm_components",
    "contaminate",
    "contingency",
    "default_tau_grid",
    "distance",
    "estimate_sscm",
    "fit_baseline",
    "fit_engine",
    "fit_sm_sscm",
    "fit_sparse_sm",
    "fmi",
    "inverse_metric",
    "max_min_seed",
    "nmi",
    "permute_columns",
    "purity",
    "restricted_distance",
    "sample",
    "score_all",
    "select_k",
    "select_tau",
    "separation_scores",
    "spatial_median",
    "spatial_sign",
    "standardize_columns",
    "update_centers",
    "v_measure",
    "validate_matrix",
]
