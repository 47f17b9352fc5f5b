"""Feature-series data model plus CSV loading, saving and chronological splitting.

A :class:`FeatureSeries` is a time-ordered block of uniformly binned BGP
feature vectors with one 0/1 label per bin.  Values live in a read-only
``(n, D)`` float array; :attr:`FeatureSeries.records` offers the row view.

CSV layout::

    bin_index,<feature_1>,...,<feature_D>,label

``bin_index`` and ``label`` are optional on load.  Written files always carry
both and use LF line endings.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterator, Sequence, Union

import numpy as np

from .errors import EmptyInputError, InvalidInputError, ParseError, SchemaError, SplitError

BENIGN = 0
ANOMALOUS = 1

DEFAULT_BIN_WIDTH = 60

PathOrStream = Union[str, os.PathLike, IO]


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature identifiers and the (metadata-only) bin width."""

    feature_names: tuple[str, ...]
    bin_width_seconds: int = DEFAULT_BIN_WIDTH

    def __post_init__(self):
        names = tuple(self.feature_names)
        object.__setattr__(self, "feature_names", names)
        if not names:
            raise SchemaError("schema needs at least one feature")
        if any(not isinstance(n, str) or not n.strip() for n in names):
            raise SchemaError("feature names must be non-empty strings")
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate feature names in {names}")
        if "label" in names or "bin_index" in names:
            raise SchemaError("'bin_index' and 'label' are reserved column names")
        if int(self.bin_width_seconds) <= 0:
            raise SchemaError("bin_width_seconds must be positive")

    @property
    def dim(self) -> int:
        return len(self.feature_names)

    def index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None


@dataclass(frozen=True)
class FeatureRecord:
    bin_index: int
    values: tuple[float, ...]
    label: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FeatureSeries:
    """Labeled feature vectors over consecutive time bins.

    Parameters
    ----------
    schema : FeatureSchema
    values : array_like, shape (n, D)
        Finite feature values.
    labels : array_like of {0, 1}, shape (n,), optional
        Per-bin label, ``BENIGN`` (0) or ``ANOMALOUS`` (1).  Defaults to benign.
    bin_index : array_like of int, shape (n,), optional
        Consecutive non-negative bin numbers.  Defaults to ``0..n-1``.
    """

    schema: FeatureSchema
    values: np.ndarray
    labels: np.ndarray = field(default=None)
    bin_index: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, self.schema.dim)
        if values.ndim != 2 or values.shape[1] != self.schema.dim:
            raise SchemaError(
                f"values shape {values.shape} does not match schema dimension {self.schema.dim}"
            )
        n = values.shape[0]
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("feature values must be finite")

        labels = np.zeros(n, dtype=np.int8) if self.labels is None else np.asarray(self.labels)
        if labels.shape != (n,):
            raise InvalidInputError(f"expected {n} labels, got shape {labels.shape}")
        if not np.all((labels == BENIGN) | (labels == ANOMALOUS)):
            raise InvalidInputError("labels must be 0 (benign) or 1 (anomalous)")

        if self.bin_index is None:
            bins = np.arange(n, dtype=np.int64)
        else:
            bins = np.asarray(self.bin_index, dtype=np.int64)
            if bins.shape != (n,):
                raise InvalidInputError(f"expected {n} bin indices, got shape {bins.shape}")
            if n and (bins[0] < 0 or np.any(np.diff(bins) != 1)):
                raise InvalidInputError("bin_index must be non-negative consecutive integers")

        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int8)))
        object.__setattr__(self, "bin_index", _frozen(bins))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, item: slice) -> "FeatureSeries":
        if not isinstance(item, slice) or item.step not in (None, 1):
            raise TypeError("FeatureSeries supports contiguous slices only")
        return FeatureSeries(
            self.schema, self.values[item], self.labels[item], self.bin_index[item]
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureSeries):
            return NotImplemented
        return (
            self.schema.feature_names == other.schema.feature_names
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.bin_index, other.bin_index)
        )

    @property
    def dim(self) -> int:
        return self.schema.dim

    @property
    def records(self) -> tuple[FeatureRecord, ...]:
        return tuple(self.iter_records())

    def iter_records(self) -> Iterator[FeatureRecord]:
        for b, row, lab in zip(self.bin_index, self.values, self.labels):
            yield FeatureRecord(int(b), tuple(float(v) for v in row), int(lab))

    def is_benign(self) -> bool:
        return not np.any(self.labels == ANOMALOUS)

    def replace(self, values=None, labels=None) -> "FeatureSeries":
        """Copy with new values and/or labels; bins and schema are kept."""
        return FeatureSeries(
            self.schema,
            self.values if values is None else values,
            self.labels if labels is None else labels,
            self.bin_index,
        )


def _open_text(source: PathOrStream, mode: str):
    """Return ``(text_stream, should_close)`` for a path, text or binary stream."""
    if isinstance(source, (str, os.PathLike)):
        return open(source, mode, encoding="utf-8", newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    wrapper = io.TextIOWrapper(source, encoding="utf-8", newline="")
    return wrapper, False


def load_series(source: PathOrStream, expected_schema: FeatureSchema | None = None) -> FeatureSeries:
    """Read a labeled feature series from CSV.

    Raises
    ------
    EmptyInputError
        No data rows.
    ParseError
        A row has the wrong column count or a non-numeric value; the
        exception carries the 1-based line number.
    SchemaError
        Header does not match ``expected_schema``.
    """
    stream, close = _open_text(source, "r")
    try:
        rows = list(csv.reader(stream))
    finally:
        if close:
            stream.close()
        elif isinstance(stream, io.TextIOWrapper) and not isinstance(source, io.TextIOBase):
            stream.detach()

    # drop trailing blank lines
    while rows and not any(cell.strip() for cell in rows[-1]):
        rows.pop()
    if not rows:
        raise EmptyInputError("empty CSV: no header")
    header = [h.strip().lstrip("﻿") for h in rows[0]]
    has_bin = bool(header) and header[0] == "bin_index"
    has_label = bool(header) and header[-1] == "label"
    names = header[(1 if has_bin else 0): (len(header) - 1 if has_label else len(header))]
    try:
        schema = FeatureSchema(
            tuple(names),
            expected_schema.bin_width_seconds if expected_schema else DEFAULT_BIN_WIDTH,
        )
    except SchemaError as exc:
        raise SchemaError(f"bad header: {exc}") from None
    if expected_schema is not None and schema.feature_names != expected_schema.feature_names:
        raise SchemaError(
            f"header features {schema.feature_names} do not match expected "
            f"{expected_schema.feature_names}"
        )
    data_rows = rows[1:]
    if not data_rows:
        raise EmptyInputError("CSV contains a header but no data rows")

    width = len(header)
    n = len(data_rows)
    values = np.empty((n, schema.dim), dtype=np.float64)
    labels = np.zeros(n, dtype=np.int8)
    bins = np.empty(n, dtype=np.int64) if has_bin else None
    lo = 1 if has_bin else 0
    for i, row in enumerate(data_rows):
        line = i + 2
        if len(row) != width:
            raise ParseError(line, f"expected {width} columns, got {len(row)}")
        try:
            vals = [float(c) for c in row[lo: lo + schema.dim]]
        except ValueError as exc:
            raise ParseError(line, f"non-numeric value ({exc})") from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(line, "non-finite value")
        values[i] = vals
        if has_bin:
            try:
                bins[i] = int(row[0])
            except ValueError:
                raise ParseError(line, f"bad bin_index {row[0]!r}") from None
        if has_label:
            cell = row[-1].strip()
            if cell not in ("0", "1"):
                raise ParseError(line, f"label must be 0 or 1, got {cell!r}")
            labels[i] = int(cell)
    if has_bin and (bins[0] < 0 or np.any(np.diff(bins) != 1)):
        raise ParseError(2, "bin_index must be non-negative consecutive integers")
    return FeatureSeries(schema, values, labels, bins)


def save_series(series: FeatureSeries, sink: PathOrStream) -> None:
    """Write ``series`` as CSV (header always present, LF line endings).

    Values are written with ``repr`` so a reload reproduces them exactly.
    """
    header = ["bin_index", *series.schema.feature_names, "label"]
    stream, close = _open_text(sink, "w")
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for b, row, lab in zip(series.bin_index, series.values, series.labels):
            writer.writerow([int(b), *(repr(float(v)) for v in row), int(lab)])
        stream.flush()
    finally:
        if close:
            stream.close()
        elif isinstance(stream, io.TextIOWrapper) and not isinstance(sink, io.TextIOBase):
            stream.detach()


def split_chronological(series: FeatureSeries, train_fraction: float) -> tuple[FeatureSeries, FeatureSeries]:
    """Split a benign series into leading training and trailing validation parts.

    The training part holds the first ``floor(train_fraction * n)`` records.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidInputError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(series)
    if n == 0:
        raise InvalidInputError("cannot split an empty series")
    if not series.is_benign():
        raise InvalidInputError("chronological split is defined for benign series only")
    cut = math.floor(train_fraction * n)
    if cut == 0 or cut == n:
        raise SplitError(f"split of {n} records at fraction {train_fraction} leaves one side empty")
    return series[:cut], series[cut:]


def concat(parts: Sequence[FeatureSeries]) -> FeatureSeries:
    """Join contiguous pieces of one series back together."""
    if not parts:
        raise InvalidInputError("nothing to concatenate")
    schema = parts[0].schema
    return FeatureSeries(
        schema,
        np.concatenate([p.values for p in parts]),
        np.concatenate([p.labels for p in parts]),
        np.concatenate([p.bin_index for p in parts]),
    )
