"""LSTM encoder-decoder trained on benign windows and scored by reconstruction MAE.

Architecture: one LSTM layer encodes the ``W`` timesteps from a zero state;
its final hidden state is the latent vector.  A second LSTM layer, also
started from zeros, receives that latent vector at every one of ``W`` steps,
and a linear projection maps each decoder hidden state back to ``D``
features.

Gates are stacked row-wise in the order input, forget, output, candidate
(``i, f, o, g``), so ``w_x`` has shape ``(4H, D_in)``, ``w_h`` has shape
``(4H, H)`` and ``b`` has length ``4H``.

Training minimises mean squared error with Adam; gradients come from full
backpropagation through time over both layers.  Scoring uses mean absolute
error.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .errors import InvalidInputError, LeakageError, TrainingDivergedError
from .pipeline import WindowSet

GATES = ("i", "f", "o", "g")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True, eq=False)
class LstmCellParams:
    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        w_x = np.asarray(self.w_x, dtype=np.float64)
        w_h = np.asarray(self.w_h, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if w_h.ndim != 2 or w_h.shape[0] != 4 * w_h.shape[1]:
            raise InvalidInputError(f"recurrent weights must be (4H, H), got {w_h.shape}")
        h = w_h.shape[1]
        if w_x.ndim != 2 or w_x.shape[0] != 4 * h:
            raise InvalidInputError(f"input weights must be (4H, D), got {w_x.shape}")
        if b.shape != (4 * h,):
            raise InvalidInputError(f"bias must have length {4 * h}, got {b.shape}")
        if not all(np.all(np.isfinite(a)) for a in (w_x, w_h, b)):
            raise InvalidInputError("LSTM parameters must be finite")
        object.__setattr__(self, "w_x", w_x)
        object.__setattr__(self, "w_h", w_h)
        object.__setattr__(self, "b", b)

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_h.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(input weights, recurrent weights, bias)`` of one gate."""
        k = GATES.index(name)
        rows = slice(k * self.hidden_dim, (k + 1) * self.hidden_dim)
        return self.w_x[rows], self.w_h[rows], self.b[rows]

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmCellParams":
        return cls(
            np.zeros((4 * hidden_dim, input_dim)),
            np.zeros((4 * hidden_dim, hidden_dim)),
            np.zeros(4 * hidden_dim),
        )


def _cell_forward(w_x, w_h, b, x, h, c):
    H = w_h.shape[1]
    z = x @ w_x.T + h @ w_h.T + b
    i = _sigmoid(z[..., :H])
    f = _sigmoid(z[..., H:2 * H])
    o = _sigmoid(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, i, f, o, g, tc)


def _cell_backward(w_x, w_h, cache, dh, dc, grads):
    """Backprop one step; accumulates into ``grads`` and returns ``(dx, dh_prev, dc_prev)``."""
    x, h, c, i, f, o, g, tc = cache
    dc = dc + dh * o * (1.0 - tc * tc)
    dz = np.concatenate(
        [
            dc * g * i * (1.0 - i),
            dc * c * f * (1.0 - f),
            dh * tc * o * (1.0 - o),
            dc * i * (1.0 - g * g),
        ],
        axis=-1,
    )
    grads[0] += dz.T @ x
    grads[1] += dz.T @ h
    grads[2] += dz.sum(axis=0)
    return dz @ w_x, dz @ w_h, dc * f


def lstm_step(cell: LstmCellParams, x_t: np.ndarray, h: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Advance one LSTM cell by one timestep.

    Accepts single vectors or row-batches (leading batch axis).
    """
    x_t, h, c = (np.asarray(a, dtype=np.float64) for a in (x_t, h, c))
    H = cell.hidden_dim
    if x_t.shape[-1] != cell.input_dim or h.shape[-1] != H or c.shape != h.shape:
        raise InvalidInputError(
            f"lstm_step shapes x{x_t.shape} h{h.shape} c{c.shape} do not fit "
            f"D={cell.input_dim}, H={H}"
        )
    h_new, c_new, _ = _cell_forward(cell.w_x, cell.w_h, cell.b, x_t, h, c)
    return h_new, c_new


@dataclass(frozen=True, eq=False)
class AutoencoderParams:
    encoder: LstmCellParams
    decoder: LstmCellParams
    proj_w: np.ndarray
    proj_b: np.ndarray
    window: int

    def __post_init__(self):
        proj_w = np.asarray(self.proj_w, dtype=np.float64)
        proj_b = np.asarray(self.proj_b, dtype=np.float64)
        D, H = self.encoder.input_dim, self.encoder.hidden_dim
        if self.decoder.input_dim != H or self.decoder.hidden_dim != H:
            raise InvalidInputError("decoder must be an H -> H LSTM")
        if proj_w.shape != (D, H) or proj_b.shape != (D,):
            raise InvalidInputError(f"projection must be ({D}, {H}) + ({D},)")
        if not (np.all(np.isfinite(proj_w)) and np.all(np.isfinite(proj_b))):
            raise InvalidInputError("projection parameters must be finite")
        if self.window < 1:
            raise InvalidInputError("window must be positive")
        if H >= self.window * D:
            raise InvalidInputError(f"latent size H={H} must be below W*D={self.window * D}")
        object.__setattr__(self, "proj_w", proj_w)
        object.__setattr__(self, "proj_b", proj_b)

    @property
    def dims(self) -> dict[str, int]:
        return {"D": self.encoder.input_dim, "W": self.window, "H": self.encoder.hidden_dim}

    # flat view used by the optimizer and the gradient checker
    def flat(self) -> dict[str, np.ndarray]:
        return {
            "enc_w_x": self.encoder.w_x,
            "enc_w_h": self.encoder.w_h,
            "enc_b": self.encoder.b,
            "dec_w_x": self.decoder.w_x,
            "dec_w_h": self.decoder.w_h,
            "dec_b": self.decoder.b,
            "proj_w": self.proj_w,
            "proj_b": self.proj_b,
        }

    @classmethod
    def from_flat(cls, flat: dict[str, np.ndarray], window: int) -> "AutoencoderParams":
        return cls(
            LstmCellParams(flat["enc_w_x"], flat["enc_w_h"], flat["enc_b"]),
            LstmCellParams(flat["dec_w_x"], flat["dec_w_h"], flat["dec_b"]),
            flat["proj_w"],
            flat["proj_b"],
            window,
        )

    def to_dict(self) -> dict[str, Any]:
        def cell(p: LstmCellParams):
            return {"w_x": p.w_x.tolist(), "w_h": p.w_h.tolist(), "b": p.b.tolist()}

        return {
            "dims": self.dims,
            "gate_order": "".join(GATES),
            "encoder": cell(self.encoder),
            "decoder": cell(self.decoder),
            "projection": {"w": self.proj_w.tolist(), "b": self.proj_b.tolist()},
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "AutoencoderParams":
        try:
            dims = doc["dims"]
            D, W, H = int(dims["D"]), int(dims["W"]), int(dims["H"])
            if doc.get("gate_order", "ifog") != "".join(GATES):
                raise InvalidInputError(f"unsupported gate order {doc['gate_order']!r}")
            enc = LstmCellParams(doc["encoder"]["w_x"], doc["encoder"]["w_h"], doc["encoder"]["b"])
            dec = LstmCellParams(doc["decoder"]["w_x"], doc["decoder"]["w_h"], doc["decoder"]["b"])
            params = cls(enc, dec, doc["projection"]["w"], doc["projection"]["b"], W)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed model document: {exc}") from None
        if params.dims != {"D": D, "W": W, "H": H}:
            raise InvalidInputError(f"declared dims {dims} disagree with weight shapes {params.dims}")
        return params


def init_params(input_dim: int, window: int, hidden: int, rng: np.random.Generator) -> AutoencoderParams:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases, forget-gate bias 1."""
    bound = 1.0 / math.sqrt(hidden)

    def cell(d_in):
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        return LstmCellParams(
            rng.uniform(-bound, bound, (4 * hidden, d_in)),
            rng.uniform(-bound, bound, (4 * hidden, hidden)),
            b,
        )

    enc = cell(input_dim)
    dec = cell(hidden)
    return AutoencoderParams(enc, dec, rng.uniform(-bound, bound, (input_dim, hidden)), np.zeros(input_dim), window)


def _forward(flat: dict[str, np.ndarray], X: np.ndarray, keep: bool):
    B, W, _ = X.shape
    H = flat["enc_w_h"].shape[1]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    enc_caches = []
    for t in range(W):
        h, c, cache = _cell_forward(flat["enc_w_x"], flat["enc_w_h"], flat["enc_b"], X[:, t], h, c)
        if keep:
            enc_caches.append(cache)
    latent = h
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs = np.empty((B, W, H))
    dec_caches = []
    for t in range(W):
        h, c, cache = _cell_forward(flat["dec_w_x"], flat["dec_w_h"], flat["dec_b"], latent, h, c)
        hs[:, t] = h
        if keep:
            dec_caches.append(cache)
    Y = hs @ flat["proj_w"].T + flat["proj_b"]
    return Y, (enc_caches, dec_caches, hs)


def _check_windows(params: AutoencoderParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    d = params.dims
    if X.ndim != 3 or X.shape[1:] != (d["W"], d["D"]):
        raise InvalidInputError(f"windows of shape {X.shape[-2:]} do not match model (W={d['W']}, D={d['D']})")
    return X


def reconstruct(params: AutoencoderParams, window: np.ndarray) -> np.ndarray:
    """Reconstruct one ``(W, D)`` window or a stack of shape ``(m, W, D)``."""
    single = np.ndim(window) == 2
    X = _check_windows(params, window)
    Y, _ = _forward(params.flat(), X, keep=False)
    return Y[0] if single else Y


def decoder_states(params: AutoencoderParams, windows: np.ndarray) -> np.ndarray:
    """Decoder hidden states before projection, shape ``(m, W, H)``."""
    X = _check_windows(params, windows)
    _, (_, _, hs) = _forward(params.flat(), X, keep=False)
    return hs


def mse_loss_and_gradients(params: AutoencoderParams | dict, windows: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared reconstruction error and its gradient for every parameter array.

    ``params`` may be an :class:`AutoencoderParams` or its :meth:`flat` dict.
    """
    flat = params.flat() if isinstance(params, AutoencoderParams) else params
    X = np.asarray(windows, dtype=np.float64)
    B, W, D = X.shape
    Y, (enc_caches, dec_caches, hs) = _forward(flat, X, keep=True)
    diff = Y - X
    loss = float(np.mean(diff * diff))
    dY = 2.0 * diff / diff.size

    grads = {k: np.zeros_like(v) for k, v in flat.items()}
    grads["proj_w"] = np.einsum("bwd,bwh->dh", dY, hs)
    grads["proj_b"] = dY.sum(axis=(0, 1))
    dhs = dY @ flat["proj_w"]

    H = hs.shape[-1]
    dec_g = [grads["dec_w_x"], grads["dec_w_h"], grads["dec_b"]]
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dlatent = np.zeros((B, H))
    for t in reversed(range(W)):
        dx, dh_next, dc_next = _cell_backward(
            flat["dec_w_x"], flat["dec_w_h"], dec_caches[t], dhs[:, t] + dh_next, dc_next, dec_g
        )
        dlatent += dx

    enc_g = [grads["enc_w_x"], grads["enc_w_h"], grads["enc_b"]]
    dh_next = dlatent
    dc_next = np.zeros((B, H))
    for t in reversed(range(W)):
        _, dh_next, dc_next = _cell_backward(
            flat["enc_w_x"], flat["enc_w_h"], enc_caches[t], dh_next, dc_next, enc_g
        )
    return loss, grads


def reconstruction_error(window: np.ndarray, reconstruction: np.ndarray) -> float:
    """Mean absolute error over all entries of two equal-shape matrices."""
    a = np.asarray(window, dtype=np.float64)
    b = np.asarray(reconstruction, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def window_errors(params: AutoencoderParams, windows, batch_size: int = 512) -> np.ndarray:
    """Per-window reconstruction MAE for a stack of windows."""
    X = windows.values if isinstance(windows, WindowSet) else windows
    X = _check_windows(params, X)
    flat = params.flat()
    out = np.empty(X.shape[0])
    for lo in range(0, X.shape[0], batch_size):
        xb = X[lo:lo + batch_size]
        Y, _ = _forward(flat, xb, keep=False)
        out[lo:lo + batch_size] = np.abs(Y - xb).mean(axis=(1, 2))
    return out


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    hidden: int = 32

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.hidden < 1:
            raise InvalidInputError("epochs, batch_size and hidden must be positive")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1) or not self.eps > 0:
            raise InvalidInputError("Adam needs 0 < beta1, beta2 < 1 and eps > 0")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class TrainReport:
    epoch_losses: tuple[float, ...]
    val_mae: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"epoch_losses": list(self.epoch_losses), "val_mae": dict(self.val_mae)}


def _as_benign_array(windows, what: str) -> np.ndarray:
    if isinstance(windows, WindowSet):
        if not windows.is_benign():
            raise LeakageError(f"{what} windows contain anomalous labels")
        return windows.values
    return np.asarray(windows, dtype=np.float64)


def _mae_stats(errors: np.ndarray) -> dict[str, float]:
    if errors.size == 0:
        return {"n": 0}
    return {
        "n": int(errors.size),
        "mean": float(errors.mean()),
        "median": float(np.median(errors)),
        "max": float(errors.max()),
    }


def train(config: TrainConfig, train_windows, val_windows=None) -> tuple[AutoencoderParams, TrainReport]:
    """Fit the autoencoder on benign windows with Adam and full BPTT.

    Parameters
    ----------
    config : TrainConfig
    train_windows : WindowSet or ndarray, shape (m, W, D)
        Benign training windows.  A :class:`WindowSet` with any anomalous
        label raises :class:`LeakageError`.
    val_windows : WindowSet or ndarray, optional
        Benign validation windows; only summarised in the report.

    Returns
    -------
    params : AutoencoderParams
    report : TrainReport

    Raises
    ------
    TrainingDivergedError
        A batch loss became non-finite.
    """
    X = _as_benign_array(train_windows, "training")
    V = None if val_windows is None else _as_benign_array(val_windows, "validation")
    if X.ndim != 3 or X.shape[0] == 0:
        raise InvalidInputError("need at least one training window of shape (W, D)")
    m, W, D = X.shape
    rng = np.random.default_rng(config.seed)
    flat = {k: v.copy() for k, v in init_params(D, W, config.hidden, rng).flat().items()}
    m1 = {k: np.zeros_like(v) for k, v in flat.items()}
    m2 = {k: np.zeros_like(v) for k, v in flat.items()}
    b1, b2, lr, eps = config.beta1, config.beta2, config.learning_rate, config.eps
    step = 0
    epoch_losses = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(m)
            total = 0.0
            for lo in range(0, m, config.batch_size):
                idx = order[lo:lo + config.batch_size]
                loss, grads = mse_loss_and_gradients(flat, X[idx])
                if not math.isfinite(loss):
                    raise TrainingDivergedError(epoch)
                total += loss * len(idx)
                step += 1
                corr1 = 1.0 - b1 ** step
                corr2 = 1.0 - b2 ** step
                for k, g in grads.items():
                    m1[k] *= b1
                    m1[k] += (1.0 - b1) * g
                    m2[k] *= b2
                    m2[k] += (1.0 - b2) * g * g
                    flat[k] -= lr * (m1[k] / corr1) / (np.sqrt(m2[k] / corr2) + eps)
            epoch_loss = total / m
            if not math.isfinite(epoch_loss) or not all(np.all(np.isfinite(v)) for v in flat.values()):
                raise TrainingDivergedError(epoch)
            epoch_losses.append(epoch_loss)

    params = AutoencoderParams.from_flat(flat, W)
    val = window_errors(params, V) if V is not None and len(V) else np.empty(0)
    return params, TrainReport(tuple(epoch_losses), _mae_stats(val))


def save_model(params: AutoencoderParams, path, train_config: TrainConfig | None = None, **extra) -> None:
    doc = params.to_dict()
    if train_config is not None:
        doc["train_config"] = train_config.to_dict()
    doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path) -> AutoencoderParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return AutoencoderParams.from_dict(doc.get("autoencoder", doc))
