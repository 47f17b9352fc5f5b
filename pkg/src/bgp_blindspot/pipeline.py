"""Z-score standardization and overlapping sliding windows."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .dataset import ANOMALOUS, FeatureSeries
from .errors import InvalidInputError, LeakageError

DEFAULT_WINDOW = 8
DEFAULT_STRIDE = 1


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature population mean and std.

    ``stds`` is stored as fitted; zeros are swapped for 1 when transforming so
    a constant feature maps to 0.
    """

    means: np.ndarray
    stds: np.ndarray
    fitted_on: int

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        if means.ndim != 1 or means.shape != stds.shape:
            raise InvalidInputError("means and stds must be equal-length vectors")
        if np.any(stds < 0) or not (np.all(np.isfinite(means)) and np.all(np.isfinite(stds))):
            raise InvalidInputError("stds must be finite and non-negative")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def dim(self) -> int:
        return self.means.shape[0]

    @property
    def scale(self) -> np.ndarray:
        return np.where(self.stds == 0.0, 1.0, self.stds)

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.dim:
            raise InvalidInputError(f"expected {self.dim} features, got {values.shape[-1]}")
        return (values - self.means) / self.scale

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist(), "fitted_on": self.fitted_on}

    @classmethod
    def from_dict(cls, doc: dict) -> "Standardizer":
        return cls(np.array(doc["means"], dtype=float), np.array(doc["stds"], dtype=float), int(doc["fitted_on"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def fit_standardizer(train: FeatureSeries) -> Standardizer:
    if len(train) == 0:
        raise InvalidInputError("cannot fit a standardizer on an empty series")
    if not train.is_benign():
        raise LeakageError("standardizer must be fitted on benign data only")
    return Standardizer(train.values.mean(axis=0), train.values.std(axis=0), len(train))


def transform(s: Standardizer, series: FeatureSeries) -> FeatureSeries:
    if series.dim != s.dim:
        raise InvalidInputError(f"series has {series.dim} features, standardizer expects {s.dim}")
    return series.replace(values=s.apply(series.values))


@dataclass(frozen=True)
class SequenceWindow:
    start_bin: int
    values: np.ndarray
    label: int


def window_label(labels: np.ndarray, window: int) -> int:
    """Majority rule: anomalous iff at least ``ceil(W/2)`` timesteps are anomalous."""
    return int(np.count_nonzero(labels == ANOMALOUS) >= math.ceil(window / 2))


def window_count(n: int, window: int, stride: int) -> int:
    return (n - window) // stride + 1 if n >= window else 0


@dataclass(frozen=True, eq=False)
class WindowSet:
    """Stacked sliding windows of one series.

    Attributes
    ----------
    start_bins : ndarray of int, shape (m,)
        ``bin_index`` of each window's first timestep.
    values : ndarray, shape (m, W, D)
    labels : ndarray of {0, 1}, shape (m,)
    window, stride : int
    """

    start_bins: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    window: int
    stride: int

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> SequenceWindow:
        return SequenceWindow(int(self.start_bins[i]), self.values[i], int(self.labels[i]))

    def __iter__(self) -> Iterator[SequenceWindow]:
        for i in range(len(self)):
            yield self[i]

    def subset(self, mask: np.ndarray) -> "WindowSet":
        return WindowSet(self.start_bins[mask], self.values[mask], self.labels[mask], self.window, self.stride)

    def is_benign(self) -> bool:
        return not np.any(self.labels == ANOMALOUS)


def make_windows(series: FeatureSeries, window: int = DEFAULT_WINDOW, stride: int = DEFAULT_STRIDE) -> WindowSet:
    """Cut ``series`` into windows starting every ``stride`` bins.

    A series shorter than ``window`` yields an empty set.
    """
    if window < 2:
        raise InvalidInputError("window length must be at least 2")
    if stride < 1:
        raise InvalidInputError("stride must be positive")
    m = window_count(len(series), window, stride)
    starts = np.arange(m) * stride
    if m == 0:
        empty = np.empty((0, window, series.dim))
        return WindowSet(np.empty(0, dtype=np.int64), empty, np.empty(0, dtype=np.int8), window, stride)
    idx = starts[:, None] + np.arange(window)[None, :]
    values = series.values[idx]
    anomalous = np.count_nonzero(series.labels[idx] == ANOMALOUS, axis=1)
    labels = (anomalous >= math.ceil(window / 2)).astype(np.int8)
    return WindowSet(series.bin_index[starts], values, labels, window, stride)
