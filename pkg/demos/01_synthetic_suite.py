"""
Synthetic routing-feature scenarios
===================================

Generate the benign baseline and the three anomaly scenarios, then look at
what each one does to the per-bin features.
"""

###############################################################################
# A benign model draws update counts from a Poisson law with a daily cycle
# and path statistics from a clipped normal.  The defaults describe eight
# features.
import numpy as np

from bgp_blindspot import BenignModel, ScenarioSpec, SuiteConfig, generate_benign, inject_scenario, make_scenario_suite

model = BenignModel(seed=1)
print(model.schema.feature_names)

base = generate_benign(model, 2880)
print("benign means:", np.round(base.values.mean(axis=0), 2))

###############################################################################
# Scenarios are injected into a benign series over ``[start, start + duration)``.
# A storm inflates counts and path complexity, signal loss zeroes everything,
# and the low-deviation event nudges two count features by about 20%.
# Bins 1000-1300 fall in the daily trough, so compare against the benign
# values over the same bins.
print(f"{'benign':14s}", np.round(base.values[1000:1300].mean(axis=0), 1))
for kind in ("storm", "signal_loss", "low_deviation"):
    out = inject_scenario(base, ScenarioSpec(kind, start_bin=1000, duration_bins=300, seed=2), model)
    inside = out.values[1000:1300].mean(axis=0)
    print(f"{kind:14s}", np.round(inside, 1), "labels:", int(out.labels.sum()))

###############################################################################
# ``make_scenario_suite`` builds the five series used by the experiment.
# Every anomaly occupies the central fifth of its series.
suite = make_scenario_suite(SuiteConfig(seed=7))
for name, series in suite.items():
    print(f"{name:14s} bins={len(series):5d} anomalous={int(series.labels.sum())}")
