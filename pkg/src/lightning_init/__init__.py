"""Sparse graph interpretation of dense networks and lightning initialization."""

from .analysis import (
    ChangeRateReport,
    CdfSeries,
    PathCurve,
    cdf_by_layer,
    cdf_gap,
    change_rate,
    compare_parent_child,
    path_curve,
    paths_vs_accuracy_hook,
    pearson,
    top_k_path_fraction,
    transition_width,
)
from .data import Dataset, fetch_or_load, parse_idx_images, parse_idx_labels, preprocess
from .estimator import LightningMLPClassifier
from .initializers import (
    InitKind,
    InitializerSpec,
    LightningConfig,
    build_network,
    init_glorot_uniform,
    init_he_normal,
    init_lightning,
    init_truncated_normal,
    initialize,
)
from .network import (
    Activation,
    DenseLayer,
    DenseNetwork,
    ExperimentRecord,
    TrainConfig,
    evaluate,
    forward,
    loss_and_gradients,
    sgd_step,
    train,
)
from .sparse_graph import (
    EdgeCategory,
    PathReport,
    SparseGraphView,
    categorize,
    categorize_fraction,
    categorize_top_k,
    path_report,
    reinit_from_view,
    threshold_for_fraction,
    top_k_masks,
)

__version__ = "0.1.0"
