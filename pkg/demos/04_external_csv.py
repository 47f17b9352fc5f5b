"""
Running the experiment on your own feature CSVs
===============================================

The full protocol accepts CSV files with one row per bin.  Here the files
come from the generator, but any series with the same header works.
"""

###############################################################################
# Write a small suite to disk.  Each CSV has ``bin_index``, the feature
# columns and an optional ``label`` column.
import tempfile
from pathlib import Path

from bgp_blindspot import ExperimentConfig, SuiteConfig, emit_report, make_scenario_suite, run_experiment, save_series

work = Path(tempfile.mkdtemp())
for name, series in make_scenario_suite(SuiteConfig(train_length=2000, test_length=1000, anomaly_length=1000)).items():
    save_series(series, work / f"{name}.csv")
print((work / "storm.csv").read_text().splitlines()[0])

###############################################################################
# Point ``data`` at the files instead of configuring a synthetic suite.
config = ExperimentConfig.from_dict({
    "seed": 3,
    "data": {
        "benign_train": str(work / "benign_train.csv"),
        "scenarios": {k: str(work / f"{k}.csv") for k in ("benign_test", "storm", "signal_loss")},
    },
    "train": {"epochs": 10},
})
report = run_experiment(config)

###############################################################################
# Metrics count windows.  The report directory holds ``report.json``,
# ``metrics.csv`` and one ``errors_<scenario>.csv`` per series.
for name in report.scenarios:
    for det in ("recon", "heartbeat", "hybrid"):
        m = report.metrics(name, det)
        print(f"{name:12s} {det:9s} recall={m.recall} fpr={m.false_positive_rate}")
emit_report(report, work / "report")
print(sorted(p.name for p in (work / "report").iterdir()))
