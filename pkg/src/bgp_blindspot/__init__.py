"""Hybrid BGP anomaly detection: an LSTM autoencoder for high-complexity
events plus a volume heartbeat for signal loss, with a synthetic scenario
suite that exposes where reconstruction error alone goes blind."""

from .autoencoder import (
    AutoencoderParams,
    LstmCellParams,
    TrainConfig,
    TrainReport,
    init_params,
    load_model,
    lstm_step,
    reconstruct,
    reconstruction_error,
    save_model,
    train,
    window_errors,
)
from .dataset import ANOMALOUS, BENIGN, FeatureSchema, FeatureSeries, load_series, save_series, split_chronological
from .detectors import (
    AnomalyScore,
    HeartbeatDetector,
    HybridVerdict,
    Threshold,
    calibrate_threshold,
    cusum_downward,
    heartbeat_fit,
    heartbeat_score,
    hybrid_classify,
    score_windows,
    window_alert_flags,
)
from .errors import (
    BlindspotError,
    EmptyInputError,
    InvalidInputError,
    LeakageError,
    ParseError,
    SchemaError,
    SplitError,
    StageError,
    TrainingDivergedError,
)
from .evaluation import (
    DetectionReport,
    EvalMetrics,
    ExperimentConfig,
    ModelBundle,
    compute_metrics,
    emit_report,
    fit_models,
    run_experiment,
)
from .pipeline import (
    SequenceWindow,
    Standardizer,
    WindowSet,
    fit_standardizer,
    make_windows,
    transform,
    window_count,
)
from .synthgen import (
    BenignModel,
    FeatureSpec,
    ScenarioSpec,
    SuiteConfig,
    generate_benign,
    inject_scenario,
    make_scenario_suite,
)

__version__ = "0.1.0"
