"""
Where reconstruction error looks away
=====================================

Train the LSTM autoencoder on benign windows and compare reconstruction
errors on a storm, a signal loss and a low-deviation event.
"""

###############################################################################
# Split the benign training series chronologically, standardize with
# statistics from the training part only, and cut overlapping windows.
import numpy as np

from bgp_blindspot import (
    SuiteConfig,
    TrainConfig,
    calibrate_threshold,
    fit_standardizer,
    make_scenario_suite,
    make_windows,
    split_chronological,
    train,
    transform,
    window_errors,
)

suite = make_scenario_suite(SuiteConfig(train_length=3000, seed=7))
train_part, val_part = split_chronological(suite["benign_train"], 0.8)
scaler = fit_standardizer(train_part)
train_w = make_windows(transform(scaler, train_part), window=8)
val_w = make_windows(transform(scaler, val_part), window=8)

###############################################################################
# A short training run is enough to see the pattern.  The threshold is the
# 99th nearest-rank percentile of validation errors; a window is flagged only
# if its error is strictly above it.
params, report = train(TrainConfig(epochs=30, seed=7), train_w, val_w)
print("loss:", round(report.epoch_losses[0], 3), "->", round(report.epoch_losses[-1], 3))
threshold = calibrate_threshold(window_errors(params, val_w), 99)
print("threshold:", round(threshold.value, 4))

###############################################################################
# Storm windows sit far above the threshold.  Signal-loss windows are all
# zeros, which after standardization is a smooth, easy-to-reconstruct input,
# so their errors fall *below* typical benign errors.
benign_err = window_errors(params, make_windows(transform(scaler, suite["benign_test"]), 8))
print(f"{'benign_test':14s} median={np.median(benign_err):.3f}")
for kind in ("storm", "signal_loss", "low_deviation"):
    ws = make_windows(transform(scaler, suite[kind]), 8)
    err = window_errors(params, ws)
    anomalous = ws.labels == 1
    recall = np.mean(err[anomalous] > threshold.value)
    print(f"{kind:14s} median={np.median(err[anomalous]):.3f} recall={recall:.3f}")
