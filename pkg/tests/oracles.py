"""Reference computations that share no code with the package.

The autoencoder oracle re-derives the forward pass one sample at a time in
extended precision (``np.longdouble``), so central differences taken on it
are not swamped by float64 round-off.
"""

import math

import numpy as np

LD = np.longdouble


def _sig(z):
    return 1 / (1 + np.exp(-z))


def _cell(wx, wh, b, x, h, c):
    H = wh.shape[1]
    z = wx @ x + wh @ h + b
    i, f, o = _sig(z[:H]), _sig(z[H:2 * H]), _sig(z[2 * H:3 * H])
    g = np.tanh(z[3 * H:])
    c = f * c + i * g
    return o * np.tanh(c), c


def reference_reconstruct(flat, window):
    """Per-sample encoder/decoder pass, extended precision."""
    p = {k: np.asarray(v).astype(LD) for k, v in flat.items()}
    x = np.asarray(window).astype(LD)
    W = x.shape[0]
    H = p["enc_w_h"].shape[1]
    h = np.zeros(H, LD)
    c = np.zeros(H, LD)
    for t in range(W):
        h, c = _cell(p["enc_w_x"], p["enc_w_h"], p["enc_b"], x[t], h, c)
    latent = h
    h = np.zeros(H, LD)
    c = np.zeros(H, LD)
    out = []
    for _ in range(W):
        h, c = _cell(p["dec_w_x"], p["dec_w_h"], p["dec_b"], latent, h, c)
        out.append(p["proj_w"] @ h + p["proj_b"])
    return np.array(out)


def reference_mse(flat, windows):
    X = np.asarray(windows)
    total = LD(0)
    for x in X:
        total += np.sum((reference_reconstruct(flat, x) - x.astype(LD)) ** 2)
    return total / X.size


def finite_difference_grads(flat, windows, step=1e-5):
    grads = {}
    for name, arr in flat.items():
        g = np.zeros(arr.shape)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + step
            plus = reference_mse(flat, windows)
            arr[idx] = old - step
            minus = reference_mse(flat, windows)
            arr[idx] = old
            g[idx] = float((plus - minus) / LD(2 * step))
        grads[name] = g
    return grads


def relative_error(analytic, numeric, guard=1e-8):
    a = np.abs(analytic)
    n = np.abs(numeric)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(a, n), guard)


def nearest_rank_by_counting(values, percentile):
    """Smallest sample value with at least ``percentile``% of the sample at or below it."""
    n = len(values)
    for v in sorted(values):
        if 100 * sum(1 for u in values if u <= v) >= percentile * n:
            return v
    raise AssertionError("unreachable")


def window_count_by_enumeration(n, window, stride):
    return sum(1 for s in range(0, n, stride) if s + window <= n)


def cusum_by_hand(volumes, mu, k, h):
    s, points = 0.0, []
    for t, v in enumerate(volumes):
        s = s + (mu - k - v)
        if s < 0:
            s = 0.0
        if s > h:
            points.append(t)
            s = 0.0
    return points


def population_std(xs):
    m = sum(xs) / len(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))
