"""End-to-end acceptance gate.

Each test checks one criterion, records a PASS/FAIL line for the
"acceptance criteria" section of the terminal summary, then asserts.
Criteria 2-7 share two CLI ``evaluate`` runs of the default experiment.
"""

import math
import time

import numpy as np

from bgp_blindspot.autoencoder import reconstruction_error
from bgp_blindspot.dataset import FeatureSchema, FeatureSeries
from bgp_blindspot.detectors import calibrate_threshold, cusum_downward, flag, nearest_rank
from bgp_blindspot.pipeline import fit_standardizer, make_windows, transform, window_count

from test_autoencoder import GRADIENT_CASES, worst_gradient_error


def _windows(report, scenario):
    w = report["scenarios"][scenario]["windows"]
    return np.array(w["error"]), np.array(w["label"]), np.array(w["flagged"], bool), np.array(w["type2_flag"], bool)


def _recall(report, scenario, detector):
    return report["scenarios"][scenario]["metrics"][detector]["recall"]


def _check(record, number, name, checks):
    passed = all(ok for ok, _ in checks.values())
    detail = "; ".join(f"{k}={v}" for k, (_, v) in checks.items())
    record(number, name, passed, detail)
    failed = [k for k, (ok, _) in checks.items() if not ok]
    assert not failed, f"criterion {number} failed: {failed} ({detail})"


def test_criterion_1_gradient_oracle(record_criterion):
    t0 = time.perf_counter()
    worst = [worst_gradient_error(i) for i in range(len(GRADIENT_CASES))]
    elapsed = time.perf_counter() - t0
    dims_ok = all(D <= 4 and W <= 5 and H <= 6 for D, W, H in GRADIENT_CASES)
    _check(record_criterion, 1, "gradient oracle", {
        "instances": (len(GRADIENT_CASES) >= 20 and dims_ok, len(GRADIENT_CASES)),
        "max_rel_err": (max(worst) < 1e-4, f"{max(worst):.2e}"),
        "seconds": (elapsed < 60, f"{elapsed:.1f}"),
    })


def test_criterion_2_storm_positive_control(record_criterion, default_evaluations, default_report):
    elapsed = default_evaluations[2]
    storm_err, storm_lab, _, _ = _windows(default_report, "storm")
    benign_err, _, _, _ = _windows(default_report, "benign_test")
    min_storm = float(storm_err[storm_lab == 1].min())
    p90_benign = float(np.percentile(benign_err, 90))
    recall = _recall(default_report, "storm", "recon")
    losses = default_report["training"]["epoch_losses"]
    _check(record_criterion, 2, "storm positive control", {
        "recon_recall": (recall >= 0.95, f"{recall:.4f}"),
        "min_storm_err": (min_storm > p90_benign, f"{min_storm:.4f}>p90 {p90_benign:.4f}"),
        "seconds": (elapsed < 600, f"{elapsed:.1f}"),
        "loss_last<=first": (losses[-1] <= losses[0], f"{losses[0]:.4f}->{losses[-1]:.4f}"),
    })


def test_criterion_3_signal_loss_blind_spot(record_criterion, default_report):
    err, lab, _, _ = _windows(default_report, "signal_loss")
    benign_err, _, _, _ = _windows(default_report, "benign_test")
    med_anom = float(np.median(err[lab == 1]))
    med_benign = float(np.median(benign_err))
    recall = _recall(default_report, "signal_loss", "recon")
    _check(record_criterion, 3, "signal-loss blind spot", {
        "recon_recall": (recall <= 0.02, f"{recall:.4f}"),
        "median_err": (med_anom < med_benign, f"{med_anom:.4f}<{med_benign:.4f}"),
    })


def test_criterion_4_low_deviation_blind_spot(record_criterion, default_report):
    recall = _recall(default_report, "low_deviation", "recon")
    _check(record_criterion, 4, "low-deviation blind spot", {
        "recon_recall": (recall <= 0.10, f"{recall:.4f}"),
    })


def test_criterion_5_hybrid_remedy(record_criterion, default_report):
    hb = _recall(default_report, "signal_loss", "heartbeat")
    alert_fraction = default_report["scenarios"]["benign_test"]["heartbeat"]["benign_alert_bin_fraction"]
    hybrid_sl = _recall(default_report, "signal_loss", "hybrid")
    hybrid_storm = _recall(default_report, "storm", "hybrid")
    _check(record_criterion, 5, "hybrid remedy", {
        "heartbeat_recall": (hb >= 0.95, f"{hb:.4f}"),
        "benign_alert_frac": (alert_fraction <= 0.01, f"{alert_fraction:.4f}"),
        "hybrid_signal_loss": (hybrid_sl >= 0.95, f"{hybrid_sl:.4f}"),
        "hybrid_storm": (hybrid_storm >= 0.95, f"{hybrid_storm:.4f}"),
    })


def test_criterion_6_threshold_semantics(record_criterion, default_report):
    errors, _, _, _ = _windows(default_report, "benign_test")
    # exchangeable benign errors: a seeded shuffle, calibrate on one half
    shuffled = np.random.default_rng(2024).permutation(errors)
    half = shuffled.size // 2
    calib, held_out = shuffled[:half], shuffled[half:]
    th = calibrate_threshold(calib, 99)
    held_frac = float(flag(held_out, th).mean())
    at_threshold = bool(flag(np.array([th.value]), th)[0]) or bool(flag(calib[calib == th.value], th).any())
    pipeline_fpr = default_report["scenarios"]["benign_test"]["metrics"]["recon"]["false_positive_rate"]
    _check(record_criterion, 6, "threshold semantics", {
        "n_calibration": (th.n_calibration >= 500, th.n_calibration),
        "held_out_flagged": (held_frac <= 0.03, f"{held_frac:.4f}"),
        "equal_not_flagged": (not at_threshold, not at_threshold),
        "benign_test_fpr": (pipeline_fpr <= 0.03, f"{pipeline_fpr:.4f}"),
    })


def test_criterion_7_determinism(record_criterion, default_evaluations):
    a, b, _ = default_evaluations
    same_report = (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    same_metrics = (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    _check(record_criterion, 7, "determinism", {
        "report_json_identical": (same_report, same_report),
        "metrics_csv_identical": (same_metrics, same_metrics),
    })


def test_criterion_8_unit_oracles(record_criterion):
    checks = {}
    checks["nearest_rank"] = (
        nearest_rank(range(1, 101), 99) == 99
        and nearest_rank([0.5] * 40, 99) == 0.5
        and nearest_rank([0.5] * 40, 1) == 0.5
        and nearest_rank([3.0], 99) == 3.0,
        "ok",
    )

    s = fit_standardizer(FeatureSeries(FeatureSchema(("x", "k")), np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])))
    zeros = transform(s, FeatureSeries(FeatureSchema(("x", "k")), np.array([[1.0, 5.0], [3.0, 5.0]]))).values[:, 1]
    checks["standardizer"] = (
        s.means[0] == 2.0 and abs(s.stds[0] - math.sqrt(2 / 3)) <= 1e-12
        and s.means[1] == 5.0 and np.all(zeros == 0.0),
        f"sigma={s.stds[0]:.12f}",
    )

    ten = FeatureSeries(FeatureSchema(("x",)), np.arange(10.0)[:, None])
    checks["window_count"] = (
        window_count(10, 4, 1) == 7 and window_count(3, 4, 1) == 0
        and make_windows(ten, 4).start_bins.tolist() == list(range(7)),
        window_count(10, 4, 1),
    )

    diffs = np.array([[0.1, 0.3], [0.2, 0.6]])
    mae = reconstruction_error(diffs, np.zeros((2, 2)))
    checks["mae"] = (
        abs(mae - 0.3) <= 1e-12
        and reconstruction_error(np.ones((3, 2)), np.zeros((3, 2))) == 1.0
        and reconstruction_error(diffs, diffs) == 0.0,
        f"{mae:.15f}",
    )

    drop = [100.0] * 50 + [0.0] * 10
    points = cusum_downward(drop, 100.0, 10.0, 150.0)
    checks["cusum"] = (
        points[:1] == [51] and cusum_downward([100.0] * 200, 100.0, 10.0, 150.0) == [],
        points[:1],
    )
    _check(record_criterion, 8, "unit oracles", checks)
