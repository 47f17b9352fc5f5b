import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bgp_blindspot.dataset import FeatureSchema, FeatureSeries
from bgp_blindspot.errors import InvalidInputError, LeakageError
from bgp_blindspot.pipeline import (
    Standardizer,
    fit_standardizer,
    make_windows,
    transform,
    window_count,
    window_label,
)

from oracles import population_std, window_count_by_enumeration


def _series(values, labels=None, names=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    names = names or tuple(f"f{i}" for i in range(values.shape[1]))
    return FeatureSeries(FeatureSchema(names), values, labels)


def test_fit_single_column():
    s = fit_standardizer(_series([1.0, 2.0, 3.0]))
    assert s.means[0] == 2.0
    assert math.isclose(s.stds[0], math.sqrt(2 / 3), rel_tol=0, abs_tol=1e-15)
    assert s.fitted_on == 3


def test_constant_feature_maps_to_zero(small_series):
    s = fit_standardizer(small_series)
    assert s.stds[2] == 0.0
    out = transform(s, small_series)
    assert np.all(out.values[:, 2] == 0.0)
    assert np.all(np.isfinite(out.values))


def test_fit_rejects_anomalous():
    with pytest.raises(LeakageError):
        fit_standardizer(_series([1.0, 2.0, 3.0], labels=[0, 1, 0]))


def test_fit_rejects_empty():
    with pytest.raises(InvalidInputError):
        fit_standardizer(_series(np.empty((0, 2))))


def test_signal_loss_bin_transforms_to_minus_ten():
    s = Standardizer(np.array([100.0]), np.array([10.0]), 5)
    out = transform(s, _series([0.0, 100.0, 110.0]))
    assert out.values[:, 0].tolist() == [-10.0, 0.0, 1.0]


def test_identity_standardizer(small_series):
    s = Standardizer(np.zeros(3), np.ones(3), 1)
    assert np.array_equal(transform(s, small_series).values, small_series.values)


def test_transform_keeps_labels_and_bins():
    series = _series([1.0, 2.0, 3.0, 4.0], labels=[0, 0, 1, 1])
    out = transform(Standardizer(np.array([1.0]), np.array([2.0]), 2), series)
    assert np.array_equal(out.labels, series.labels)
    assert np.array_equal(out.bin_index, series.bin_index)


def test_dim_mismatch(small_series):
    with pytest.raises(InvalidInputError):
        transform(Standardizer(np.zeros(2), np.ones(2), 1), small_series)


def test_standardizer_json_round_trip(small_series):
    s = fit_standardizer(small_series)
    again = Standardizer.from_dict(json.loads(s.to_json()))
    assert np.array_equal(again.means, s.means) and np.array_equal(again.stds, s.stds)
    assert again.fitted_on == s.fitted_on


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40))
def test_fit_matches_population_formula(xs):
    s = fit_standardizer(_series(xs))
    m = sum(xs) / len(xs)
    assert math.isclose(s.means[0], m, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(s.stds[0], population_std(xs), rel_tol=1e-9, abs_tol=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=40))
def test_fitted_data_becomes_zero_mean_unit_std(xs):
    series = _series(xs)
    out = transform(fit_standardizer(series), series).values[:, 0]
    assert np.all(np.isfinite(out))
    if np.std(xs) > 1e-6:
        assert abs(out.mean()) < 1e-9
        assert abs(out.std() - 1.0) < 1e-9


def test_window_count_example():
    series = _series(np.arange(10.0))
    ws = make_windows(series, window=4, stride=1)
    assert len(ws) == 7
    assert ws.values.shape == (7, 4, 1)
    assert ws.start_bins.tolist() == list(range(7))
    assert np.array_equal(ws.values[3, :, 0], [3.0, 4.0, 5.0, 6.0])


def test_short_series_gives_empty_set():
    ws = make_windows(_series([1.0, 2.0, 3.0]), window=4)
    assert len(ws) == 0
    assert ws.values.shape == (0, 4, 1)


def test_window_parameters_validated():
    series = _series(np.arange(10.0))
    with pytest.raises(InvalidInputError):
        make_windows(series, window=1)
    with pytest.raises(InvalidInputError):
        make_windows(series, window=4, stride=0)


def test_majority_label_half_counts():
    ws = make_windows(_series(np.arange(4.0), labels=[0, 1, 1, 0]), window=4)
    assert ws.labels.tolist() == [1]
    ws = make_windows(_series(np.arange(4.0), labels=[0, 0, 1, 0]), window=4)
    assert ws.labels.tolist() == [0]
    # odd W: ceil(5/2) = 3
    assert window_label(np.array([1, 1, 0, 0, 0]), 5) == 0
    assert window_label(np.array([1, 1, 1, 0, 0]), 5) == 1


def test_window_count_exhaustive():
    for n in range(0, 51):
        for w in range(2, 51):
            for stride in range(1, 51):
                assert window_count(n, w, stride) == window_count_by_enumeration(n, w, stride)


def test_make_windows_respects_stride():
    series = _series(np.arange(20.0))
    ws = make_windows(series, window=5, stride=3)
    assert len(ws) == window_count_by_enumeration(20, 5, 3)
    assert ws.start_bins.tolist() == [0, 3, 6, 9, 12, 15]


def test_windows_use_original_bin_index():
    series = FeatureSeries(FeatureSchema(("a",)), np.arange(6.0)[:, None], bin_index=np.arange(100, 106))
    assert make_windows(series, window=3).start_bins.tolist() == [100, 101, 102, 103]


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.integers(0, 1), min_size=2, max_size=30),
    st.integers(2, 6),
    st.integers(1, 3),
    st.randoms(use_true_random=False),
)
def test_labels_ignore_values(labels, window, stride, rnd):
    n = len(labels)
    values = np.arange(float(n))
    shuffled = values.copy()
    rnd.shuffle(shuffled)
    a = make_windows(_series(values, labels), window, stride)
    b = make_windows(_series(shuffled, labels), window, stride)
    assert np.array_equal(a.labels, b.labels)
    expected = [window_label(np.array(labels[s:s + window]), window) for s in a.start_bins]
    assert a.labels.tolist() == expected


def test_windowset_access():
    ws = make_windows(_series(np.arange(6.0), labels=[0, 0, 0, 1, 1, 1]), window=2)
    w = ws[4]
    assert w.start_bin == 4 and w.label == 1
    assert [x.start_bin for x in ws] == list(range(5))
    assert not ws.is_benign()
    assert ws.subset(ws.labels == 0).is_benign()
