"""Experiment orchestration, metrics and report files.

:func:`run_experiment` runs the whole protocol: generate (or load) data,
split the benign series chronologically, standardize, window, train the
autoencoder, calibrate the threshold on validation errors, fit the
heartbeat baseline, then score every scenario with the reconstruction
detector, the heartbeat detector and their hybrid.  Recall and false
positive rates count windows, not bins.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .autoencoder import AutoencoderParams, TrainConfig, TrainReport, train, window_errors
from .dataset import ANOMALOUS, FeatureSeries, load_series, split_chronological
from .detectors import (
    NORMAL,
    TYPE1,
    TYPE2,
    CusumConfig,
    HeartbeatDetector,
    Threshold,
    calibrate_threshold,
    cusum_downward,
    flag,
    heartbeat_fit,
    heartbeat_score,
    window_alert_flags,
)
from .errors import BlindspotError, InvalidInputError, LeakageError, StageError
from .pipeline import DEFAULT_STRIDE, DEFAULT_WINDOW, Standardizer, fit_standardizer, make_windows, transform
from .synthgen import SuiteConfig, make_scenario_suite

DETECTORS = ("recon", "heartbeat", "hybrid")
HISTOGRAM_BINS = 50
REPORT_FORMAT = "bgp-blindspot-report/1"
MODEL_FORMAT = "bgp-blindspot-model/1"
DEFAULT_VOLUME_FEATURES = ("n_announcements", "n_withdrawals")


@dataclass(frozen=True)
class EvalMetrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def recall(self) -> float | None:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else None

    @property
    def false_positive_rate(self) -> float | None:
        return self.fp / (self.fp + self.tn) if self.fp + self.tn else None

    @property
    def precision(self) -> float | None:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "recall": self.recall,
            "false_positive_rate": self.false_positive_rate,
            "precision": self.precision,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }


def compute_metrics(flags: Sequence[bool], labels: Sequence[int]) -> EvalMetrics:
    """Confusion counts from parallel flag / true-label sequences.

    ``flags`` may also be a sequence of :class:`AnomalyScore` (``labels`` is
    then ignored and may be ``None``).
    """
    if flags is not None and len(flags) and hasattr(flags[0], "flagged"):
        labels = [s.true_label for s in flags]
        flags = [s.flagged for s in flags]
    f = np.asarray(flags, dtype=bool)
    y = np.asarray(labels) == ANOMALOUS
    if f.size == 0:
        raise InvalidInputError("cannot compute metrics on empty input")
    if f.shape != y.shape:
        raise InvalidInputError(f"{f.size} flags vs {y.size} labels")
    return EvalMetrics(
        tp=int(np.sum(f & y)), fp=int(np.sum(f & ~y)), tn=int(np.sum(~f & ~y)), fn=int(np.sum(~f & y))
    )


def error_histogram(errors: np.ndarray, labels: np.ndarray, bins: int = HISTOGRAM_BINS) -> dict[str, list]:
    """Equal-width histogram over ``[0, max error]``, split by true label."""
    errors = np.asarray(errors, dtype=np.float64)
    top = float(errors.max()) if errors.size else 0.0
    if top <= 0.0:
        top = 1.0
    edges = np.linspace(0.0, top, bins + 1)
    anomalous = np.asarray(labels) == ANOMALOUS
    benign_counts, _ = np.histogram(errors[~anomalous], bins=edges)
    anomalous_counts, _ = np.histogram(errors[anomalous], bins=edges)
    return {"edges": edges.tolist(), "benign": benign_counts.tolist(), "anomalous": anomalous_counts.tolist()}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything :func:`run_experiment` needs.

    Either ``suite`` (synthetic mode) or ``data`` (external CSV mode) is used.
    ``data`` maps ``"benign_train"`` to a CSV path and ``"scenarios"`` to a
    ``{name: path}`` mapping.  ``seed`` drives every random stream.
    """

    suite: SuiteConfig | None = field(default_factory=SuiteConfig)
    data: Mapping[str, Any] | None = None
    seed: int = 7
    window: int = DEFAULT_WINDOW
    stride: int = DEFAULT_STRIDE
    train_fraction: float = 0.8
    train: TrainConfig = field(default_factory=lambda: TrainConfig(seed=7))
    percentile: float = 99.0
    heartbeat_k: float = 3.0
    heartbeat_n: int = 3
    heartbeat_eps_floor: float = 1.0
    volume_features: tuple[str, ...] = DEFAULT_VOLUME_FEATURES
    cusum_slack_sigmas: float = 1.0
    cusum_decision_sigmas: float = 8.0

    def __post_init__(self):
        if self.suite is None and self.data is None:
            raise InvalidInputError("experiment needs either a synthetic suite or external data")
        if self.data is not None and "benign_train" not in self.data:
            raise InvalidInputError("external data needs a 'benign_train' path")
        if not 0 < self.percentile <= 100:
            raise InvalidInputError("percentile must be in (0, 100]")
        object.__setattr__(self, "volume_features", tuple(self.volume_features))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        suite = None if self.suite is None else self.suite.with_seed(seed)
        return replace(self, seed=seed, suite=suite, train=replace(self.train, seed=seed))

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ExperimentConfig":
        known = {
            "seed", "suite", "data", "window", "stride", "train_fraction", "train",
            "percentile", "heartbeat", "cusum",
        }
        unknown = set(doc) - known
        if unknown:
            raise InvalidInputError(f"unknown experiment config keys: {sorted(unknown)}")
        base = cls()
        seed = int(doc.get("seed", base.seed))
        data = doc.get("data")
        suite = None if data is not None and "suite" not in doc else SuiteConfig.from_dict(doc.get("suite", {}))
        train_doc = dict(doc.get("train", {}))
        train_doc.pop("seed", None)
        try:
            train_cfg = TrainConfig(**train_doc)
        except TypeError as exc:
            raise InvalidInputError(f"bad train config: {exc}") from None
        hb = dict(doc.get("heartbeat", {}))
        cs = dict(doc.get("cusum", {}))
        cfg = cls(
            suite=suite,
            data=data,
            seed=seed,
            window=int(doc.get("window", base.window)),
            stride=int(doc.get("stride", base.stride)),
            train_fraction=float(doc.get("train_fraction", base.train_fraction)),
            train=train_cfg,
            percentile=float(doc.get("percentile", base.percentile)),
            heartbeat_k=float(hb.get("k", base.heartbeat_k)),
            heartbeat_n=int(hb.get("N", base.heartbeat_n)),
            heartbeat_eps_floor=float(hb.get("eps_floor", base.heartbeat_eps_floor)),
            volume_features=tuple(hb.get("volume_features", base.volume_features)),
            cusum_slack_sigmas=float(cs.get("k_c_sigmas", base.cusum_slack_sigmas)),
            cusum_decision_sigmas=float(cs.get("h_sigmas", base.cusum_decision_sigmas)),
        )
        return cfg.with_seed(seed)

    def to_dict(self) -> dict[str, Any]:
        train_doc = self.train.to_dict()
        return {
            "seed": self.seed,
            "suite": None if self.suite is None else self.suite.to_dict(),
            "data": None if self.data is None else json.loads(json.dumps(self.data, default=str)),
            "window": self.window,
            "stride": self.stride,
            "train_fraction": self.train_fraction,
            "train": train_doc,
            "percentile": self.percentile,
            "heartbeat": {
                "k": self.heartbeat_k,
                "N": self.heartbeat_n,
                "eps_floor": self.heartbeat_eps_floor,
                "volume_features": list(self.volume_features),
            },
            "cusum": {"k_c_sigmas": self.cusum_slack_sigmas, "h_sigmas": self.cusum_decision_sigmas},
        }


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InvalidInputError(f"{path}: config must be a JSON object")
    return ExperimentConfig.from_dict(doc)


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    """Per-window outcome of all three detectors on one series."""

    n_bins: int
    start_bins: np.ndarray
    errors: np.ndarray
    labels: np.ndarray
    recon_flags: np.ndarray
    type2_flags: np.ndarray
    bin_alerts: np.ndarray
    bin_labels: np.ndarray
    cusum_points: list[int]

    @property
    def verdicts(self) -> list[str]:
        return [
            TYPE2 if t2 else (TYPE1 if t1 else NORMAL)
            for t1, t2 in zip(self.recon_flags, self.type2_flags)
        ]

    @property
    def hybrid_flags(self) -> np.ndarray:
        return self.recon_flags | self.type2_flags

    def metrics(self) -> dict[str, EvalMetrics]:
        return {
            "recon": compute_metrics(self.recon_flags, self.labels),
            "heartbeat": compute_metrics(self.type2_flags, self.labels),
            "hybrid": compute_metrics(self.hybrid_flags, self.labels),
        }

    def to_dict(self) -> dict[str, Any]:
        anomalous = self.labels == ANOMALOUS
        benign_bins = self.bin_labels != ANOMALOUS

        def median(mask):
            return float(np.median(self.errors[mask])) if mask.any() else None

        return {
            "n_bins": self.n_bins,
            "n_windows": int(self.errors.size),
            "n_anomalous_windows": int(anomalous.sum()),
            "metrics": {k: m.to_dict() for k, m in self.metrics().items()},
            "median_error": {"benign": median(~anomalous), "anomalous": median(anomalous)},
            "histogram": error_histogram(self.errors, self.labels),
            "heartbeat": {
                "alert_bins": int(self.bin_alerts.sum()),
                "benign_alert_bin_fraction": (
                    float(self.bin_alerts[benign_bins].mean()) if benign_bins.any() else None
                ),
            },
            "cusum_change_points": list(self.cusum_points),
            "windows": {
                "start_bin": self.start_bins.tolist(),
                "error": self.errors.tolist(),
                "flagged": self.recon_flags.astype(int).tolist(),
                "label": self.labels.astype(int).tolist(),
                "type2_flag": self.type2_flags.astype(int).tolist(),
                "verdict": self.verdicts,
            },
        }


@dataclass(frozen=True, eq=False)
class DetectionReport:
    config: ExperimentConfig
    models: "ModelBundle"
    scenarios: dict[str, ScenarioResult]

    @property
    def threshold(self) -> Threshold:
        return self.models.threshold

    def metrics(self, scenario: str, detector: str) -> EvalMetrics:
        return self.scenarios[scenario].metrics()[detector]

    def to_dict(self) -> dict[str, Any]:
        m = self.models
        return {
            "format": REPORT_FORMAT,
            "counting_unit": "window",
            "config": self.config.to_dict(),
            "threshold": m.threshold.to_dict(),
            "heartbeat": m.heartbeat.to_dict(),
            "cusum": m.cusum.to_dict(),
            "standardizer": m.standardizer.to_dict(),
            "training": m.training.to_dict(),
            "scenarios": {name: r.to_dict() for name, r in self.scenarios.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


class _Stage:
    """Re-raise anything failing inside the block as :class:`StageError`."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, (BlindspotError, OSError, ValueError)) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _load_external(data: Mapping[str, Any]) -> tuple[FeatureSeries, dict[str, FeatureSeries]]:
    benign = load_series(data["benign_train"])
    scenarios = {
        name: load_series(path, expected_schema=benign.schema)
        for name, path in dict(data.get("scenarios", {})).items()
    }
    if not scenarios:
        raise InvalidInputError("external data needs at least one scenario CSV")
    return benign, scenarios


def score_series(
    series: FeatureSeries,
    standardizer: Standardizer,
    params: AutoencoderParams,
    threshold: Threshold,
    heartbeat: HeartbeatDetector,
    cusum: CusumConfig,
    window: int,
    stride: int,
) -> ScenarioResult:
    """Run all detectors over one raw series."""
    windows = make_windows(transform(standardizer, series), window, stride)
    errors = window_errors(params, windows) if len(windows) else np.empty(0)
    alerts = heartbeat_score(heartbeat, series)
    return ScenarioResult(
        n_bins=len(series),
        start_bins=np.asarray(windows.start_bins),
        errors=errors,
        labels=np.asarray(windows.labels),
        recon_flags=flag(errors, threshold),
        type2_flags=window_alert_flags(alerts, len(windows), window, stride),
        bin_alerts=alerts,
        bin_labels=np.asarray(series.labels),
        cusum_points=cusum_downward(heartbeat.volume(series), heartbeat.mean, cusum.slack, cusum.decision),
    )


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """Everything fitted on benign data: standardizer, autoencoder and detectors."""

    feature_names: tuple[str, ...]
    window: int
    stride: int
    standardizer: Standardizer
    params: AutoencoderParams
    train_config: TrainConfig
    training: TrainReport
    threshold: Threshold
    heartbeat: HeartbeatDetector
    cusum: CusumConfig

    def score(self, series: FeatureSeries) -> ScenarioResult:
        if series.schema.feature_names != self.feature_names:
            raise InvalidInputError(
                f"series features {series.schema.feature_names} do not match model {self.feature_names}"
            )
        return score_series(
            series, self.standardizer, self.params, self.threshold, self.heartbeat, self.cusum,
            self.window, self.stride,
        )

    def to_dict(self) -> dict[str, Any]:
        ae = self.params.to_dict()
        ae["train_config"] = self.train_config.to_dict()
        return {
            "format": MODEL_FORMAT,
            "schema": list(self.feature_names),
            "window": self.window,
            "stride": self.stride,
            "standardizer": self.standardizer.to_dict(),
            "autoencoder": ae,
            "training": self.training.to_dict(),
            "detectors": {
                "threshold": self.threshold.to_dict(),
                "heartbeat": self.heartbeat.to_dict(),
                "cusum": self.cusum.to_dict(),
            },
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ModelBundle":
        if doc.get("format") != MODEL_FORMAT:
            raise InvalidInputError(f"not a model file (format {doc.get('format')!r})")
        try:
            params = AutoencoderParams.from_dict(doc["autoencoder"])
            names = tuple(doc["schema"])
            standardizer = Standardizer.from_dict(doc["standardizer"])
            det = doc["detectors"]
            bundle = cls(
                feature_names=names,
                window=int(doc["window"]),
                stride=int(doc["stride"]),
                standardizer=standardizer,
                params=params,
                train_config=TrainConfig(**doc["autoencoder"].get("train_config", {})),
                training=TrainReport(
                    tuple(doc["training"]["epoch_losses"]), dict(doc["training"]["val_mae"])
                ),
                threshold=Threshold.from_dict(det["threshold"]),
                heartbeat=HeartbeatDetector.from_dict(det["heartbeat"]),
                cusum=CusumConfig(float(det["cusum"]["k_c"]), float(det["cusum"]["h"])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInputError):
                raise
            raise InvalidInputError(f"malformed model file: {exc!r}") from None
        D = len(names)
        if params.dims["D"] != D or standardizer.dim != D or params.dims["W"] != bundle.window:
            raise InvalidInputError("model file dimensions are inconsistent")
        return bundle

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ModelBundle":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)


def fit_models(
    train_part: FeatureSeries,
    val_part: FeatureSeries,
    *,
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
    train_config: TrainConfig | None = None,
    percentile: float = 99.0,
    volume_features: Sequence[str] = DEFAULT_VOLUME_FEATURES,
    heartbeat_k: float = 3.0,
    heartbeat_n: int = 3,
    heartbeat_eps_floor: float = 1.0,
    cusum_slack_sigmas: float = 1.0,
    cusum_decision_sigmas: float = 8.0,
) -> ModelBundle:
    """Fit every detector on a benign training part and calibrate on its validation part."""
    train_config = train_config or TrainConfig()
    if val_part.schema.feature_names != train_part.schema.feature_names:
        raise InvalidInputError("training and validation series have different features")
    with _Stage("standardize"):
        standardizer = fit_standardizer(train_part)
    with _Stage("window"):
        if not val_part.is_benign():
            raise LeakageError("validation series must be benign")
        train_w = make_windows(transform(standardizer, train_part), window, stride)
        val_w = make_windows(transform(standardizer, val_part), window, stride)
        if len(val_w) == 0:
            raise InvalidInputError("validation split is shorter than one window")
    with _Stage("train"):
        params, train_report = train(train_config, train_w, val_w)
    with _Stage("threshold"):
        threshold = calibrate_threshold(window_errors(params, val_w), percentile)
    with _Stage("heartbeat"):
        volume_idx = [train_part.schema.index(name) for name in volume_features]
        heartbeat = heartbeat_fit(train_part, volume_idx, heartbeat_k, heartbeat_n, heartbeat_eps_floor)
        cusum = CusumConfig.from_heartbeat(heartbeat, cusum_slack_sigmas, cusum_decision_sigmas)
    return ModelBundle(
        train_part.schema.feature_names, window, stride, standardizer, params, train_config,
        train_report, threshold, heartbeat, cusum,
    )


def run_experiment(config: ExperimentConfig | None = None) -> DetectionReport:
    """Execute the full protocol; deterministic for a given config."""
    config = config or ExperimentConfig()
    with _Stage("data"):
        if config.data is not None:
            benign, scenarios = _load_external(config.data)
        else:
            suite = make_scenario_suite(config.suite)
            benign = suite.pop("benign_train")
            scenarios = suite
    with _Stage("split"):
        train_part, val_part = split_chronological(benign, config.train_fraction)
    bundle = fit_models(
        train_part,
        val_part,
        window=config.window,
        stride=config.stride,
        train_config=config.train,
        percentile=config.percentile,
        volume_features=config.volume_features,
        heartbeat_k=config.heartbeat_k,
        heartbeat_n=config.heartbeat_n,
        heartbeat_eps_floor=config.heartbeat_eps_floor,
        cusum_slack_sigmas=config.cusum_slack_sigmas,
        cusum_decision_sigmas=config.cusum_decision_sigmas,
    )
    results = {}
    for name, series in scenarios.items():
        with _Stage(f"score:{name}"):
            results[name] = bundle.score(series)
    return DetectionReport(config, bundle, results)


def emit_report(report: DetectionReport, out_dir: str | os.PathLike) -> None:
    """Write ``report.json``, ``metrics.csv`` and one ``errors_<scenario>.csv`` per scenario."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    with open(out / "metrics.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "detector", "recall", "false_positive_rate", "precision", "tp", "fp", "tn", "fn"])
        for name, result in report.scenarios.items():
            for det, m in result.metrics().items():
                d = m.to_dict()
                w.writerow([
                    name, det,
                    *("null" if d[k] is None else repr(d[k]) for k in ("recall", "false_positive_rate", "precision")),
                    m.tp, m.fp, m.tn, m.fn,
                ])
    for name, result in report.scenarios.items():
        with open(out / f"errors_{name}.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["start_bin", "error", "flagged", "label"])
            for s, e, f, lab in zip(result.start_bins, result.errors, result.recon_flags, result.labels):
                w.writerow([int(s), repr(float(e)), int(f), int(lab)])
