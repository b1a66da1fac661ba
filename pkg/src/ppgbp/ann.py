"""Two-hidden-layer feed-forward regressor: beat vector -> (SBP, DBP, MAP).

The network is deliberately tiny (it has to fit next to everything
else in a wearable's RAM): affine -> activation -> affine ->
activation -> affine, trained per subject with mini-batch SGD plus
momentum on the mean squared error of standardized targets.  The
learning rate is reduced when the monitored loss plateaus, and
training stops once it has not improved for ``stop_patience`` epochs,
returning the parameters of the best epoch.

Parameters are held in float64 for exact gradient math but are always
float32-valued (quantized at init / train / load), so the f32 model
file round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import LabeledBeats
from .errors import DataError, FormatError, NumericError

MODEL_MAGIC = b"MLP1"
MODEL_VERSION = 1

_ACTIVATION_TAGS = {"relu": 0, "tanh": 1}
_TAG_ACTIVATIONS = {v: k for k, v in _ACTIVATION_TAGS.items()}


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]       # per layer, shape (n_in, n_out)
    biases: list[np.ndarray]        # per layer, shape (n_out,)
    hidden_activation: str
    scaler_mean: np.ndarray         # per output, mmHg
    scaler_std: np.ndarray

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            hidden_activation=self.hidden_activation,
            scaler_mean=self.scaler_mean.copy(),
            scaler_std=self.scaler_std.copy(),
        )


@dataclass
class TrainConfig:
    train_fraction: float = 0.8
    seed: int = 0
    hidden_sizes: tuple[int, int] = (35, 20)
    hidden_activation: str = "relu"
    initial_lr: float = 1e-3
    momentum: float = 0.9
    lr_reduce_factor: float = 0.5
    lr_patience: int = 10
    stop_patience: int = 20
    max_epochs: int = 500
    batch_size: int = 64
    loss: str = "mse"

    def validate(self) -> "TrainConfig":
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.stop_patience < 1:
            raise DataError("stop_patience must be >= 1")
        if self.lr_patience < 1:
            raise DataError("lr_patience must be >= 1")
        if not 0.0 < self.lr_reduce_factor < 1.0:
            raise DataError("lr_reduce_factor must be in (0, 1)")
        if self.initial_lr <= 0:
            raise DataError("initial_lr must be positive")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise DataError("batch_size must be >= 1 and max_epochs >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise DataError("momentum must be in [0, 1)")
        if self.hidden_activation not in _ACTIVATION_TAGS:
            raise DataError(f"unknown activation {self.hidden_activation!r}")
        if self.loss != "mse":
            raise DataError(f"unsupported loss {self.loss!r}")
        return self

    def to_dict(self) -> dict:
        return {
            "train_fraction": self.train_fraction,
            "seed": self.seed,
            "hidden_sizes": list(self.hidden_sizes),
            "hidden_activation": self.hidden_activation,
            "initial_lr": self.initial_lr,
            "momentum": self.momentum,
            "lr_reduce_factor": self.lr_reduce_factor,
            "lr_patience": self.lr_patience,
            "stop_patience": self.stop_patience,
            "max_epochs": self.max_epochs,
            "batch_size": self.batch_size,
            "loss": self.loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        cfg = cls()
        for key, value in d.items():
            if not hasattr(cfg, key):
                raise DataError(f"unknown train config key {key!r}")
            if key == "hidden_sizes":
                value = tuple(int(v) for v in value)
            setattr(cfg, key, value)
        return cfg.validate()


@dataclass
class TrainReport:
    epochs_run: int
    best_epoch: int
    final_train_loss: float
    best_val_loss: float
    lr_schedule_trace: list[tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "final_train_loss": self.final_train_loss,
            "best_val_loss": self.best_val_loss,
            "lr_schedule_trace": [[e, lr] for e, lr in self.lr_schedule_trace],
        }


def split_dataset(
    beats: LabeledBeats, train_fraction: float = 0.8, seed: int = 0
) -> tuple[LabeledBeats, LabeledBeats]:
    """Random disjoint train/test split via a seeded uniform permutation."""
    n = len(beats)
    if n < 10:
        raise DataError(f"need at least 10 beats to split, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(np.floor(n * train_fraction))
    return beats.subset(perm[:n_train]), beats.subset(perm[n_train:])


def _quantize_f32(arr: np.ndarray) -> np.ndarray:
    # keep values exactly representable in the f32 model file
    return arr.astype(np.float32).astype(np.float64)


def init_model(layer_sizes, seed: int = 0, hidden_activation: str = "relu") -> MlpModel:
    """Seeded He-style uniform init: W ~ U(+/- sqrt(6 / fan_in)), b = 0."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) != 4 or any(s < 1 for s in sizes):
        raise DataError(f"layer_sizes must be 4 positive sizes, got {sizes}")
    if hidden_activation not in _ACTIVATION_TAGS:
        raise DataError(f"unknown activation {hidden_activation!r}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / n_in)
        weights.append(_quantize_f32(rng.uniform(-limit, limit, size=(n_in, n_out))))
        biases.append(np.zeros(n_out, dtype=np.float64))
    return MlpModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        hidden_activation=hidden_activation,
        scaler_mean=np.zeros(sizes[-1], dtype=np.float64),
        scaler_std=np.ones(sizes[-1], dtype=np.float64),
    )


def _activate(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(a, 0.0)
    return np.tanh(a)


def _activate_grad(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (a > 0.0).astype(np.float64)
    t = np.tanh(a)
    return 1.0 - t * t


def _net_forward(model: MlpModel, x: np.ndarray):
    """Standardized network output plus pre-activation caches."""
    pre = []
    h = x
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = h @ w + b
        pre.append(a)
        h = a if l == last else _activate(a, model.hidden_activation)
    return h, pre


def forward(model: MlpModel, x) -> np.ndarray:
    """Predict mmHg outputs for one vector (d,) or a batch (k, d)."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError("non-finite value in network input")
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    if batch.shape[1] != model.n_inputs:
        raise DataError(
            f"input has {batch.shape[1]} features but model expects {model.n_inputs}"
        )
    out, _ = _net_forward(model, batch)
    out = out * model.scaler_std + model.scaler_mean
    return out[0] if single else out


def loss_and_gradient(model: MlpModel, x, y) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """MSE over standardized targets and its exact backprop gradients.

    ``y`` is in mmHg; it is standardized with the model's label scaler
    before the squared error.  Gradients come back as one (dW, db)
    pair per layer, shaped like the parameters.
    """
    xb = np.atleast_2d(np.asarray(x, dtype=np.float64))
    yb = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if xb.shape[0] == 0:
        raise DataError("empty batch")
    if yb.shape != (xb.shape[0], model.n_outputs):
        raise DataError(f"target shape {yb.shape} does not match batch")
    z = (yb - model.scaler_mean) / model.scaler_std
    out, pre = _net_forward(model, xb)
    diff = out - z
    n_terms = diff.size
    loss = float(np.sum(diff * diff) / n_terms)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.weights)  # type: ignore
    delta = 2.0 * diff / n_terms
    hidden = [xb]
    for l in range(len(model.weights) - 1):
        hidden.append(_activate(pre[l], model.hidden_activation))
    for l in range(len(model.weights) - 1, -1, -1):
        grads[l] = (hidden[l].T @ delta, delta.sum(axis=0))
        if l > 0:
            delta = (delta @ model.weights[l].T) * _activate_grad(
                pre[l - 1], model.hidden_activation
            )
    return loss, grads


def _dataset_loss(model: MlpModel, x: np.ndarray, z: np.ndarray) -> float:
    out, _ = _net_forward(model, x)
    d = out - z
    return float(np.sum(d * d) / d.size)


def train(
    train_set: LabeledBeats, val_set: LabeledBeats, config: TrainConfig
) -> tuple[MlpModel, TrainReport]:
    """Fit a model on ``train_set``, monitoring ``val_set`` for the
    plateau learning-rate schedule and early stopping.

    Returns the parameters of the epoch with the best monitored loss.
    Raises NumericError if the loss leaves the finite range.
    """
    config.validate()
    if len(train_set) == 0 or len(val_set) == 0:
        raise DataError("train and validation sets must be non-empty")

    x_train = train_set.vectors.astype(np.float64)
    y_train = train_set.labels.astype(np.float64)
    x_val = val_set.vectors.astype(np.float64)
    y_val = val_set.labels.astype(np.float64)

    scaler_mean = y_train.mean(axis=0)
    scaler_std = y_train.std(axis=0)
    if np.any(scaler_std <= 0):
        raise DataError("constant training target: cannot standardize labels")

    n_in = x_train.shape[1]
    n_out = y_train.shape[1]
    model = init_model(
        (n_in, *config.hidden_sizes, n_out), seed=config.seed,
        hidden_activation=config.hidden_activation,
    )
    model.scaler_mean = _quantize_f32(scaler_mean)
    model.scaler_std = _quantize_f32(scaler_std)
    z_val = (y_val - model.scaler_mean) / model.scaler_std

    rng = np.random.default_rng([config.seed, 0x5EED])
    velocity = [
        (np.zeros_like(w), np.zeros_like(b)) for w, b in zip(model.weights, model.biases)
    ]
    lr = config.initial_lr
    trace: list[tuple[int, float]] = [(0, lr)]
    # the untrained model is the epoch-0 baseline for "best so far"
    z_train = (y_train - model.scaler_mean) / model.scaler_std
    best_val = _dataset_loss(model, x_val, z_val)
    best_epoch = 0
    best_params = ([w.copy() for w in model.weights], [b.copy() for b in model.biases])
    epochs_since_best = 0
    epochs_since_lr_drop = 0
    epochs_run = 0
    final_train_loss = _dataset_loss(model, x_train, z_train)

    n = len(train_set)
    for epoch in range(1, config.max_epochs + 1):
        epochs_run = epoch
        perm = rng.permutation(n)
        batch_losses = []
        # overflow here is handled explicitly: it surfaces as NumericError
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, config.batch_size):
                idx = perm[start : start + config.batch_size]
                loss, grads = loss_and_gradient(model, x_train[idx], y_train[idx])
                batch_losses.append(loss)
                for (w, b), (vw, vb), (gw, gb) in zip(
                    zip(model.weights, model.biases), velocity, grads
                ):
                    vw *= config.momentum
                    vw -= lr * gw
                    w += vw
                    vb *= config.momentum
                    vb -= lr * gb
                    b += vb
            final_train_loss = float(np.mean(batch_losses))
            val_loss = _dataset_loss(model, x_val, z_val)
        if not (np.isfinite(final_train_loss) and np.isfinite(val_loss)):
            raise NumericError(f"training diverged at epoch {epoch}")

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = ([w.copy() for w in model.weights], [b.copy() for b in model.biases])
            epochs_since_best = 0
            epochs_since_lr_drop = 0
        else:
            epochs_since_best += 1
            epochs_since_lr_drop += 1
            if epochs_since_lr_drop >= config.lr_patience:
                lr *= config.lr_reduce_factor
                epochs_since_lr_drop = 0
                trace.append((epoch, lr))
        if epochs_since_best >= config.stop_patience:
            break

    model.weights = [_quantize_f32(w) for w in best_params[0]]
    model.biases = [_quantize_f32(b) for b in best_params[1]]
    report = TrainReport(
        epochs_run=epochs_run,
        best_epoch=best_epoch,
        final_train_loss=final_train_loss,
        best_val_loss=float(best_val),
        lr_schedule_trace=trace,
    )
    return model, report


def save_model(model: MlpModel, path: str | Path) -> None:
    """Serialize to the little-endian ``MLP1`` f32 container."""
    path = Path(path)
    parts = [struct.pack("<4sII", MODEL_MAGIC, MODEL_VERSION, len(model.layer_sizes))]
    parts.append(struct.pack(f"<{len(model.layer_sizes)}I", *model.layer_sizes))
    parts.append(struct.pack("<B", _ACTIVATION_TAGS[model.hidden_activation]))
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.asarray(b, dtype="<f4").tobytes())
    for m, s in zip(model.scaler_mean, model.scaler_std):
        parts.append(struct.pack("<ff", m, s))
    path.write_bytes(b"".join(parts))


def load_model(path: str | Path) -> MlpModel:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    blob = path.read_bytes()
    head = struct.Struct("<4sII")
    if len(blob) < head.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n_layers = head.unpack_from(blob, 0)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    off = head.size
    if n_layers < 2 or len(blob) < off + 4 * n_layers + 1:
        raise FormatError(f"{path}: corrupt layer table")
    sizes = struct.unpack_from(f"<{n_layers}I", blob, off)
    off += 4 * n_layers
    if len(sizes) != 4:
        raise FormatError(f"{path}: expected 4 layer sizes, got {len(sizes)}")
    tag = blob[off]
    off += 1
    if tag not in _TAG_ACTIVATIONS:
        raise FormatError(f"{path}: unknown activation tag {tag}")
    n_out = sizes[-1]
    expect = sum(4 * (a * b + b) for a, b in zip(sizes[:-1], sizes[1:])) + 8 * n_out
    if len(blob) != off + expect:
        raise FormatError(f"{path}: payload size does not match layer sizes")
    weights = []
    biases = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(blob, dtype="<f4", count=a * b, offset=off).reshape(a, b)
        off += 4 * a * b
        bias = np.frombuffer(blob, dtype="<f4", count=b, offset=off)
        off += 4 * b
        weights.append(w.astype(np.float64))
        biases.append(bias.astype(np.float64))
    mean = np.empty(n_out, dtype=np.float64)
    std = np.empty(n_out, dtype=np.float64)
    for i in range(n_out):
        mean[i], std[i] = struct.unpack_from("<ff", blob, off)
        off += 8
    if np.any(std <= 0):
        raise FormatError(f"{path}: non-positive label scaler std")
    return MlpModel(
        layer_sizes=tuple(int(s) for s in sizes),
        weights=weights,
        biases=biases,
        hidden_activation=_TAG_ACTIVATIONS[tag],
        scaler_mean=mean,
        scaler_std=std,
    )


def export_model_json(model: MlpModel) -> dict:
    """JSON-friendly dump for interoperability with other runtimes."""
    return {
        "layer_sizes": list(model.layer_sizes),
        "hidden_activation": model.hidden_activation,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "label_scaler": {
            "mean": model.scaler_mean.tolist(),
            "std": model.scaler_std.tolist(),
        },
    }
