"""Token-level explanations learned from transformer attention traces.

The toolkit reads line-delimited attention-trace files, trains a small
network that maps per-token attention features to importance probabilities,
turns any explainer's continuous scores into binary rationales, and scores
everything against human rationales with dataset-level metrics.
"""

__version__ = "0.1.0"

from .baseline_adapter import (
    Explanation,
    ScoreRecord,
    aggregate_to_words,
    binarize_topk,
    load_scores,
    random_baseline,
)
from .errors import (
    DimensionError,
    ExperimentSpecError,
    ParseError,
    ToolkitError,
    TrainingDivergedError,
    UndefinedMetricError,
    ValidationError,
)
from .expnet import (
    ExpNetModel,
    TrainingConfig,
    focal_loss,
    forward,
    load_model,
    predict,
    save_model,
    train,
)
from .features import (
    FeatureMask,
    LabeledToken,
    TokenFeatureVector,
    compute_positive_rate,
    extract_features,
    project_labels,
)
from .harness import (
    ExperimentSpec,
    MergedRationale,
    load_experiment_spec,
    merge_rationales,
    run_experiment,
)
from .metrics import (
    ConfusionCounts,
    EvalReport,
    accumulate,
    bootstrap_ci,
    dataset_f1,
    krippendorff_alpha,
    pooled_aupr,
    pooled_auroc,
)
from .reporting import render_report
from .trace import (
    AttentionTrace,
    DatasetManifest,
    RationaleAnnotation,
    filter_correct,
    load_manifest,
    load_traces,
    validate_trace,
    write_manifest,
    write_traces,
)

__all__ = [
    "__version__",
    "AttentionTrace",
    "ConfusionCounts",
    "DatasetManifest",
    "DimensionError",
    "EvalReport",
    "ExperimentSpec",
    "ExperimentSpecError",
    "Explanation",
    "ExpNetModel",
    "FeatureMask",
    "LabeledToken",
    "MergedRationale",
    "ParseError",
    "RationaleAnnotation",
    "ScoreRecord",
    "TokenFeatureVector",
    "ToolkitError",
    "TrainingConfig",
    "TrainingDivergedError",
    "UndefinedMetricError",
    "ValidationError",
    "accumulate",
    "aggregate_to_words",
    "binarize_topk",
    "bootstrap_ci",
    "compute_positive_rate",
    "dataset_f1",
    "extract_features",
    "filter_correct",
    "focal_loss",
    "forward",
    "krippendorff_alpha",
    "load_experiment_spec",
    "load_manifest",
    "load_model",
    "load_scores",
    "load_traces",
    "merge_rationales",
    "pooled_aupr",
    "pooled_auroc",
    "predict",
    "project_labels",
    "random_baseline",
    "render_report",
    "run_experiment",
    "save_model",
    "train",
    "validate_trace",
    "write_manifest",
    "write_traces",
]
