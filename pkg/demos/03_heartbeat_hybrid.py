"""
Closing the signal-loss gap with a heartbeat
============================================

A volume floor catches sustained silence that the autoencoder cannot see.
"""

###############################################################################
# The heartbeat sums announcements and withdrawals per bin and learns the
# mean and standard deviation on benign data.  A bin alerts once volume has
# stayed under ``mean - k * std`` for ``N`` consecutive bins.
import numpy as np

from bgp_blindspot import (
    SuiteConfig,
    cusum_downward,
    heartbeat_fit,
    heartbeat_score,
    make_scenario_suite,
    window_alert_flags,
    window_count,
)

suite = make_scenario_suite(SuiteConfig(seed=7))
schema = suite["benign_train"].schema
volume = [schema.index("n_announcements"), schema.index("n_withdrawals")]
hb = heartbeat_fit(suite["benign_train"], volume, k=3, N=3)
print(f"mean={hb.mean:.1f} std={hb.std:.1f} floor={hb.effective_floor:.1f}")

###############################################################################
# On the signal-loss series the alerts begin on the third silent bin.
series = suite["signal_loss"]
alerts = heartbeat_score(hb, series)
first_zero = int(np.flatnonzero(series.labels)[0])
print("first silent bin:", first_zero, "first alert:", int(np.flatnonzero(alerts)[0]))
print("benign alert fraction:", alerts[series.labels == 0].mean())

###############################################################################
# Windows become Type II when at least half their bins alert.  In the hybrid
# verdict a Type II flag takes precedence over a reconstruction flag.
W = 8
n = window_count(len(series), W, 1)
type2 = window_alert_flags(alerts, n, W, 1)
print("type2 windows:", int(type2.sum()), "of", n)

###############################################################################
# A lower CUSUM on the same volume reacts to the outage as well, but the
# daily trough also trips it, which is why it is only reported.
points = cusum_downward(hb.volume(series), hb.mean, hb.std, 8 * hb.std)
print("CUSUM change points:", len(points), "first inside outage:",
      next(p for p in points if p >= first_zero))
