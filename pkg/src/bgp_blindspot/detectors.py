"""Thresholding, the signal-loss detectors, and the hybrid verdict.

* :func:`calibrate_threshold` / :func:`score_windows` turn reconstruction
  errors into Type I alerts (strictly greater than a nearest-rank
  percentile of benign validation errors).
* :class:`HeartbeatDetector` alerts when summed update volume stays below a
  ``mean - k*std`` floor for ``N`` consecutive bins (Type II).
* :func:`cusum_downward` is a one-sided lower CUSUM over the same volume.
* :func:`hybrid_classify` merges both into ``normal`` / ``type1`` / ``type2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autoencoder import AutoencoderParams, window_errors
from .dataset import FeatureSeries
from .errors import InvalidInputError, LeakageError
from .pipeline import WindowSet, window_count

NORMAL = "normal"
TYPE1 = "type1"
TYPE2 = "type2"


@dataclass(frozen=True)
class Threshold:
    value: float
    percentile: float
    n_calibration: int

    def to_dict(self) -> dict:
        return {"value": self.value, "percentile": self.percentile, "n_calibration": self.n_calibration}

    @classmethod
    def from_dict(cls, doc: dict) -> "Threshold":
        return cls(float(doc["value"]), float(doc["percentile"]), int(doc["n_calibration"]))


def nearest_rank(values: Sequence[float], percentile: float) -> float:
    """Element at 1-based rank ``ceil(p/100 * n)`` of the ascending sort."""
    if not 0 < percentile <= 100:
        raise InvalidInputError(f"percentile must be in (0, 100], got {percentile}")
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise InvalidInputError("need at least one value")
    # guard 99/100*100 = 98.99999... style float noise before the ceiling
    rank = math.ceil(round(percentile * v.size / 100.0, 9))
    return float(v[max(rank, 1) - 1])


def calibrate_threshold(validation_errors: Sequence[float], percentile: float = 99.0) -> Threshold:
    errors = np.asarray(validation_errors, dtype=np.float64)
    if errors.size == 0:
        raise InvalidInputError("cannot calibrate on an empty error list")
    if np.any(errors < 0) or not np.all(np.isfinite(errors)):
        raise InvalidInputError("validation errors must be finite and non-negative")
    return Threshold(nearest_rank(errors, percentile), float(percentile), int(errors.size))


@dataclass(frozen=True)
class AnomalyScore:
    start_bin: int
    error: float
    flagged: bool
    true_label: int


def flag(errors: np.ndarray, threshold: Threshold) -> np.ndarray:
    return np.asarray(errors) > threshold.value


def score_windows(params: AutoencoderParams, threshold: Threshold, windows: WindowSet) -> list[AnomalyScore]:
    """One :class:`AnomalyScore` per window, order preserved."""
    errors = window_errors(params, windows)
    flags = flag(errors, threshold)
    return [
        AnomalyScore(int(s), float(e), bool(f), int(lab))
        for s, e, f, lab in zip(windows.start_bins, errors, flags, windows.labels)
    ]


@dataclass(frozen=True)
class HeartbeatDetector:
    """Sustained-silence monitor over raw summed update volume.

    Attributes
    ----------
    volume_indices : tuple of int
        Feature columns summed into the per-bin volume.
    mean, std : float
        Population mean and std of that volume on benign data.
    k : float
        Floor depth in standard deviations.
    persistence : int
        Consecutive sub-floor bins required before alerting.
    eps_floor : float
        Lower bound on the floor, so a zero-variance baseline still has one.
    """

    volume_indices: tuple[int, ...]
    mean: float
    std: float
    k: float = 3.0
    persistence: int = 3
    eps_floor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "volume_indices", tuple(int(i) for i in self.volume_indices))
        if not self.volume_indices:
            raise InvalidInputError("heartbeat needs at least one volume feature")
        if self.std < 0 or not self.k > 0 or self.persistence < 1 or not self.eps_floor > 0:
            raise InvalidInputError("heartbeat needs std >= 0, k > 0, persistence >= 1, eps_floor > 0")

    @property
    def floor(self) -> float:
        return self.mean - self.k * self.std

    @property
    def effective_floor(self) -> float:
        return max(self.floor, self.eps_floor)

    def volume(self, series: FeatureSeries) -> np.ndarray:
        if max(self.volume_indices) >= series.dim:
            raise InvalidInputError("volume feature index outside the series schema")
        return series.values[:, list(self.volume_indices)].sum(axis=1)

    def to_dict(self) -> dict:
        return {
            "indices": list(self.volume_indices),
            "mean": self.mean,
            "std": self.std,
            "k": self.k,
            "N": self.persistence,
            "eps_floor": self.eps_floor,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HeartbeatDetector":
        return cls(
            tuple(doc["indices"]), float(doc["mean"]), float(doc["std"]), float(doc["k"]),
            int(doc["N"]), float(doc.get("eps_floor", 1.0)),
        )


def heartbeat_fit(
    benign: FeatureSeries,
    volume_features: Sequence[int],
    k: float = 3.0,
    N: int = 3,
    eps_floor: float = 1.0,
) -> HeartbeatDetector:
    if len(benign) == 0:
        raise InvalidInputError("heartbeat baseline needs data")
    if not benign.is_benign():
        raise LeakageError("heartbeat baseline must be fitted on benign data only")
    idx = tuple(int(i) for i in volume_features)
    if not idx or min(idx) < 0 or max(idx) >= benign.dim:
        raise InvalidInputError(f"volume features {idx} not in schema of dimension {benign.dim}")
    vol = benign.values[:, list(idx)].sum(axis=1)
    return HeartbeatDetector(idx, float(vol.mean()), float(vol.std()), float(k), int(N), float(eps_floor))


def heartbeat_alerts(volume: np.ndarray, floor: float, persistence: int) -> np.ndarray:
    """Bin ``t`` alerts iff bins ``t-N+1 .. t`` are all below ``floor``."""
    below = np.asarray(volume) < floor
    run = np.zeros(below.size, dtype=np.int64)
    count = 0
    for t, b in enumerate(below):
        count = count + 1 if b else 0
        run[t] = count
    return run >= persistence


def heartbeat_score(d: HeartbeatDetector, series: FeatureSeries) -> np.ndarray:
    """Per-bin alert booleans on the raw (unstandardized) series."""
    return heartbeat_alerts(d.volume(series), d.effective_floor, d.persistence)


def cusum_downward(volumes: Sequence[float], reference: float, slack: float, decision: float) -> list[int]:
    """One-sided lower CUSUM change points.

    ``S_t = max(0, S_{t-1} + (reference - slack - v_t))``; an index is
    recorded whenever ``S_t > decision`` and the statistic then restarts at 0.
    """
    if not decision > 0 or slack < 0:
        raise InvalidInputError("CUSUM needs decision > 0 and slack >= 0")
    s = 0.0
    target = reference - slack
    points = []
    for t, v in enumerate(volumes):
        s = max(0.0, s + (target - float(v)))
        if s > decision:
            points.append(t)
            s = 0.0
    return points


@dataclass(frozen=True)
class CusumConfig:
    slack: float
    decision: float

    def to_dict(self) -> dict:
        return {"k_c": self.slack, "h": self.decision}

    @classmethod
    def from_heartbeat(cls, d: HeartbeatDetector, slack_sigmas: float = 1.0, decision_sigmas: float = 8.0) -> "CusumConfig":
        sd = d.std if d.std > 0 else 1.0
        return cls(slack_sigmas * sd, decision_sigmas * sd)


@dataclass(frozen=True)
class HybridVerdict:
    type1_flag: bool
    type2_flag: bool

    @property
    def verdict(self) -> str:
        if self.type2_flag:
            return TYPE2
        return TYPE1 if self.type1_flag else NORMAL


def window_alert_flags(alerts: np.ndarray, n_windows: int, window: int, stride: int) -> np.ndarray:
    """Window is Type II iff at least ``ceil(W/2)`` of its bins alert."""
    alerts = np.asarray(alerts, dtype=bool)
    if n_windows == 0:
        return np.zeros(0, dtype=bool)
    idx = (np.arange(n_windows) * stride)[:, None] + np.arange(window)[None, :]
    return alerts[idx].sum(axis=1) >= math.ceil(window / 2)


def hybrid_classify(
    recon: Sequence[AnomalyScore], heartbeat_alerts: Sequence[bool], window: int, stride: int
) -> list[HybridVerdict]:
    """Combine reconstruction flags with per-bin heartbeat alerts, window by window.

    ``recon`` must come from :func:`make_windows` over the same series that
    produced ``heartbeat_alerts``.
    """
    alerts = np.asarray(heartbeat_alerts, dtype=bool)
    expected = window_count(alerts.size, window, stride)
    if len(recon) != expected:
        raise InvalidInputError(
            f"{len(recon)} window scores do not match {expected} windows of {alerts.size} bins "
            f"(W={window}, stride={stride})"
        )
    type2 = window_alert_flags(alerts, expected, window, stride)
    return [HybridVerdict(bool(s.flagged), bool(t2)) for s, t2 in zip(recon, type2)]
