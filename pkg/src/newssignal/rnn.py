"""Stacked recurrent classifier over headline embedding matrices.

The network runs vanilla RNN, LSTM, or GRU cells in layers of shrinking
width, applies dropout between layers while training, and feeds the final
time-step state of the last layer through an affine map and a softmax over
the two classes. Training is plain mini-batch SGD on the mean cross-entropy,
with gradients derived by hand and verifiable against central finite
differences (:func:`gradient_check`).

All math runs in float64; checkpoints store parameters as float32 in the
same numeric layout as the embedding store.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .embeddings import HeadlineEmbedding
from .errors import (
    BadMagic,
    ConfigError,
    DegenerateTraining,
    IncompatibleArtifacts,
    ShapeError,
    Truncated,
)

CELL_KINDS = ("vanilla", "lstm", "gru")
_GATES = {"vanilla": 1, "lstm": 4, "gru": 3}

EPS = 1e-12  # probability clamp inside the cross-entropy

MAGIC = b"RNN1"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RnnConfig:
    cell_kind: str = "lstm"
    layer_widths: tuple = (256, 128, 64, 32)
    dropout: float = 0.5
    seed: int = 0
    learning_rate: float = 0.05
    batch_size: int = 32
    max_epochs: int = 50

    def __post_init__(self):
        if self.cell_kind not in CELL_KINDS:
            raise ConfigError(f"cell_kind must be one of {CELL_KINDS}, got {self.cell_kind!r}")
        widths = tuple(int(w) for w in self.layer_widths)
        if not widths or any(w < 1 for w in widths):
            raise ConfigError(f"layer_widths must be positive, got {widths}")
        if any(a < b for a, b in zip(widths, widths[1:])):
            raise ConfigError(f"layer_widths must be non-increasing, got {widths}")
        object.__setattr__(self, "layer_widths", widths)
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        # learning_rate 0 is allowed: it must leave parameters untouched
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be non-negative")


@dataclass
class RnnModel:
    config: RnnConfig
    input_dim: int
    layers: list  # per layer: {"Wx": (D, G*H), "Wh": (H, G*H), "b": (G*H,)}
    head: dict  # {"W": (H_last, 2), "b": (2,)}
    _rng: Optional[np.random.Generator] = field(default=None, repr=False, compare=False)

    def rng(self) -> np.random.Generator:
        # only used for dropout in ad-hoc training-mode forwards
        if self._rng is None:
            self._rng = np.random.default_rng(self.config.seed)
        return self._rng

    def parameter_count(self) -> int:
        total = sum(p.size for layer in self.layers for p in layer.values())
        return total + sum(p.size for p in self.head.values())


def _init_params(config: RnnConfig, input_dim: int, rng: np.random.Generator):
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    gates = _GATES[config.cell_kind]
    layers = []
    fan_in = input_dim
    for width in config.layer_widths:
        bx = 1.0 / np.sqrt(fan_in)
        bh = 1.0 / np.sqrt(width)
        layers.append(
            {
                "Wx": rng.uniform(-bx, bx, size=(fan_in, gates * width)),
                "Wh": rng.uniform(-bh, bh, size=(width, gates * width)),
                "b": np.zeros(gates * width),
            }
        )
        fan_in = width
    bo = 1.0 / np.sqrt(fan_in)
    head = {"W": rng.uniform(-bo, bo, size=(fan_in, 2)), "b": np.zeros(2)}
    return layers, head


def init_model(config: RnnConfig, input_dim: int) -> RnnModel:
    rng = np.random.default_rng(config.seed)
    layers, head = _init_params(config, input_dim, rng)
    return RnnModel(config=config, input_dim=input_dim, layers=layers, head=head)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _layer_forward(params: dict, cell: str, x_seq: np.ndarray):
    """Run one recurrent layer over (B, T, D); returns (B, T, H) and caches."""
    batch, steps_n, _ = x_seq.shape
    Wx, Wh, b = params["Wx"], params["Wh"], params["b"]
    width = Wh.shape[0]
    h = np.zeros((batch, width))
    c = np.zeros((batch, width))
    h_seq = np.empty((batch, steps_n, width))
    steps = []
    for t in range(steps_n):
        x = x_seq[:, t, :]
        if cell == "vanilla":
            h_new = np.tanh(x @ Wx + h @ Wh + b)
            steps.append((x, h, h_new))
            h = h_new
        elif cell == "lstm":
            gates = x @ Wx + h @ Wh + b
            i = _sigmoid(gates[:, :width])
            f = _sigmoid(gates[:, width : 2 * width])
            g = np.tanh(gates[:, 2 * width : 3 * width])
            o = _sigmoid(gates[:, 3 * width :])
            c_new = f * c + i * g
            hc = np.tanh(c_new)
            h_new = o * hc
            steps.append((x, h, c, i, f, g, o, hc))
            h, c = h_new, c_new
        else:  # gru, candidate computed from the reset-gated previous state
            zr = x @ Wx[:, : 2 * width] + h @ Wh[:, : 2 * width] + b[: 2 * width]
            z = _sigmoid(zr[:, :width])
            r = _sigmoid(zr[:, width:])
            rh = r * h
            n = np.tanh(x @ Wx[:, 2 * width :] + rh @ Wh[:, 2 * width :] + b[2 * width :])
            h_new = (1.0 - z) * n + z * h
            steps.append((x, h, z, r, rh, n))
            h = h_new
        h_seq[:, t, :] = h
    return h_seq, steps


def _layer_backward(params: dict, cell: str, d_hseq: np.ndarray, steps: list):
    """Backpropagate through one layer given d(loss)/d(output sequence)."""
    batch, steps_n, width = d_hseq.shape
    Wx, Wh = params["Wx"], params["Wh"]
    d_wx = np.zeros_like(Wx)
    d_wh = np.zeros_like(Wh)
    d_b = np.zeros_like(params["b"])
    dx_seq = np.empty((batch, steps_n, Wx.shape[0]))
    dh = np.zeros((batch, width))
    dc = np.zeros((batch, width))
    for t in reversed(range(steps_n)):
        dh_total = dh + d_hseq[:, t, :]
        if cell == "vanilla":
            x, h_prev, h_new = steps[t]
            da = dh_total * (1.0 - h_new**2)
            d_wx += x.T @ da
            d_wh += h_prev.T @ da
            d_b += da.sum(axis=0)
            dx_seq[:, t, :] = da @ Wx.T
            dh = da @ Wh.T
        elif cell == "lstm":
            x, h_prev, c_prev, i, f, g, o, hc = steps[t]
            dc_total = dc + dh_total * o * (1.0 - hc**2)
            da = np.concatenate(
                [
                    dc_total * g * i * (1.0 - i),
                    dc_total * c_prev * f * (1.0 - f),
                    dc_total * i * (1.0 - g**2),
                    dh_total * hc * o * (1.0 - o),
                ],
                axis=1,
            )
            d_wx += x.T @ da
            d_wh += h_prev.T @ da
            d_b += da.sum(axis=0)
            dx_seq[:, t, :] = da @ Wx.T
            dh = da @ Wh.T
            dc = dc_total * f
        else:  # gru
            x, h_prev, z, r, rh, n = steps[t]
            dn = dh_total * (1.0 - z)
            dan = dn * (1.0 - n**2)
            drh = dan @ Wh[:, 2 * width :].T
            da_zr = np.concatenate(
                [
                    dh_total * (h_prev - n) * z * (1.0 - z),
                    drh * h_prev * r * (1.0 - r),
                ],
                axis=1,
            )
            d_wx[:, : 2 * width] += x.T @ da_zr
            d_wx[:, 2 * width :] += x.T @ dan
            d_wh[:, : 2 * width] += h_prev.T @ da_zr
            d_wh[:, 2 * width :] += rh.T @ dan
            d_b[: 2 * width] += da_zr.sum(axis=0)
            d_b[2 * width :] += dan.sum(axis=0)
            dx_seq[:, t, :] = da_zr @ Wx[:, : 2 * width].T + dan @ Wx[:, 2 * width :].T
            dh = dh_total * z + drh * r + da_zr @ Wh[:, : 2 * width].T
    return dx_seq, {"Wx": d_wx, "Wh": d_wh, "b": d_b}


def _net_forward(layers, head, config: RnnConfig, x_seq: np.ndarray, masks=None):
    if x_seq.shape[2] != layers[0]["Wx"].shape[0]:
        raise ShapeError(
            f"embedding dimension {x_seq.shape[2]} != model input dimension {layers[0]['Wx'].shape[0]}"
        )
    caches = []
    current = x_seq
    for li, params in enumerate(layers):
        h_seq, steps = _layer_forward(params, config.cell_kind, current)
        caches.append(steps)
        current = h_seq
        if masks is not None and li < len(layers) - 1:
            current = current * masks[li]
    final = current[:, -1, :]
    logits = final @ head["W"] + head["b"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    probs = expv / expv.sum(axis=1, keepdims=True)
    return probs, (caches, final)


def _net_backward(layers, head, config: RnnConfig, dlogits: np.ndarray, cache, masks=None):
    caches, final = cache
    head_grads = {"W": final.T @ dlogits, "b": dlogits.sum(axis=0)}
    d_from_above = dlogits @ head["W"].T
    layer_grads: list = [None] * len(layers)
    d_hseq = None
    for li in reversed(range(len(layers))):
        steps = caches[li]
        width = layers[li]["Wh"].shape[0]
        if li == len(layers) - 1:
            batch, steps_n = len(steps[0][0]), len(steps)
            d_hseq = np.zeros((batch, steps_n, width))
            d_hseq[:, -1, :] = d_from_above
        else:
            d_hseq = d_from_below
            if masks is not None:
                d_hseq = d_hseq * masks[li]
        d_from_below, layer_grads[li] = _layer_backward(layers[li], config.cell_kind, d_hseq, steps)
    return layer_grads, head_grads


Example = tuple[Union[HeadlineEmbedding, np.ndarray], int]


def _as_matrix(item) -> np.ndarray:
    if isinstance(item, HeadlineEmbedding):
        return item.matrix.astype(np.float64)
    matrix = np.asarray(item, dtype=np.float64)
    if matrix.ndim != 2:
        raise ShapeError(f"expected a (tokens, dim) matrix, got shape {matrix.shape}")
    return matrix


def _length_groups(batch: Sequence[Example]) -> dict:
    groups: dict = {}
    for idx, (item, _) in enumerate(batch):
        groups.setdefault(_as_matrix(item).shape[0], []).append(idx)
    return groups


def _batch_pass(layers, head, config, batch, *, rng=None, want_grads: bool):
    """Mean loss (and grads) over a batch; sequences keep their own lengths.

    Same-length sequences are stacked and processed together; dropout masks
    are drawn per group in ascending-length order so runs are reproducible.
    """
    n_total = len(batch)
    scale = 1.0 / n_total
    total_loss = 0.0
    layer_grads = head_grads = None
    if want_grads:
        layer_grads = [
            {name: np.zeros_like(arr) for name, arr in params.items()} for params in layers
        ]
        head_grads = {name: np.zeros_like(arr) for name, arr in head.items()}
    keep = 1.0 - config.dropout
    groups = _length_groups(batch)
    for length in sorted(groups):
        idx = groups[length]
        x_seq = np.stack([_as_matrix(batch[i][0]) for i in idx])
        y = np.array([batch[i][1] for i in idx])
        masks = None
        if rng is not None and config.dropout > 0 and len(layers) > 1:
            masks = [
                (rng.random((len(idx), length, layers[li]["Wh"].shape[0])) < keep) / keep
                for li in range(len(layers) - 1)
            ]
        probs, cache = _net_forward(layers, head, config, x_seq, masks)
        p_plus = np.clip(probs[:, 1], EPS, 1.0 - EPS)
        total_loss += float(-np.sum(y * np.log(p_plus) + (1 - y) * np.log(1 - p_plus))) * scale
        if want_grads:
            dlogits = probs.copy()
            dlogits[np.arange(len(y)), y] -= 1.0
            dlogits *= scale
            clamped = (probs[:, 1] <= EPS) | (probs[:, 1] >= 1.0 - EPS)
            dlogits[clamped] = 0.0  # the clamped loss is flat there
            lg, hg = _net_backward(layers, head, config, dlogits, cache, masks)
            for acc, add in zip(layer_grads, lg):
                for name in acc:
                    acc[name] += add[name]
            for name in head_grads:
                head_grads[name] += hg[name]
    return total_loss, layer_grads, head_grads


def forward(model: RnnModel, embedding, training_mode: bool = False) -> float:
    """Positive-class probability for one headline.

    Dropout applies only when `training_mode` is set (inverted scaling, so
    inference needs no correction); without it the output is deterministic.
    """
    matrix = _as_matrix(embedding)[None, :, :]
    masks = None
    if training_mode and model.config.dropout > 0 and len(model.layers) > 1:
        keep = 1.0 - model.config.dropout
        rng = model.rng()
        masks = [
            (rng.random((1, matrix.shape[1], layer["Wh"].shape[0])) < keep) / keep
            for layer in model.layers[:-1]
        ]
    probs, _ = _net_forward(model.layers, model.head, model.config, matrix, masks)
    return float(probs[0, 1])


def predict_batch(model: RnnModel, matrices: Sequence) -> np.ndarray:
    """Positive-class probabilities for many headlines (inference mode)."""
    out = np.empty(len(matrices))
    groups: dict = {}
    for i, item in enumerate(matrices):
        groups.setdefault(_as_matrix(item).shape[0], []).append(i)
    for length in sorted(groups):
        idx = groups[length]
        x_seq = np.stack([_as_matrix(matrices[i]) for i in idx])
        probs, _ = _net_forward(model.layers, model.head, model.config, x_seq)
        out[idx] = probs[:, 1]
    return out


def loss(model: RnnModel, batch: Sequence[Example]) -> float:
    """Mean cross-entropy over the batch, probabilities clamped to [eps, 1-eps]."""
    if not batch:
        raise ValueError("loss needs a non-empty batch")
    value, _, _ = _batch_pass(model.layers, model.head, model.config, batch, want_grads=False)
    return value


def train(config: RnnConfig, train_set: Sequence[Example], dev_set: Sequence[Example]) -> RnnModel:
    """Mini-batch SGD with early stopping on dev loss.

    Deterministic given the seed: initialization, shuffling, and dropout all
    draw from one seeded generator in a fixed order. Stops after
    `max_epochs`, or once dev loss has failed to improve by 1e-4 for three
    consecutive epochs; returns the best-dev-loss snapshot.
    """
    labels = {y for _, y in train_set}
    if labels != {0, 1}:
        raise DegenerateTraining(f"training set must contain both classes, got labels {sorted(labels)}")
    dims = {_as_matrix(item).shape[1] for item, _ in train_set}
    if len(dims) != 1:
        raise ShapeError(f"mixed embedding dimensions in training set: {sorted(dims)}")
    input_dim = dims.pop()

    rng = np.random.default_rng(config.seed)
    layers, head = _init_params(config, input_dim, rng)
    model = RnnModel(config=config, input_dim=input_dim, layers=layers, head=head)

    def snapshot():
        return (
            [{name: arr.copy() for name, arr in params.items()} for params in layers],
            {name: arr.copy() for name, arr in head.items()},
        )

    best_layers, best_head = snapshot()
    best_dev = float("inf")
    patience = 0
    n = len(train_set)
    for _ in range(config.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            _, layer_grads, head_grads = _batch_pass(
                layers, head, config, batch, rng=rng if config.dropout > 0 else None, want_grads=True
            )
            for params, grads in zip(layers, layer_grads):
                for name in params:
                    params[name] -= config.learning_rate * grads[name]
            for name in head:
                head[name] -= config.learning_rate * head_grads[name]
        if not dev_set:
            best_layers, best_head = snapshot()
            continue
        dev_loss = loss(model, dev_set)
        improved = dev_loss < best_dev - 1e-4
        if dev_loss < best_dev:
            best_dev = dev_loss
            best_layers, best_head = snapshot()
        patience = 0 if improved else patience + 1
        if patience >= 3:
            break
    return RnnModel(config=config, input_dim=input_dim, layers=best_layers, head=best_head)


def gradient_check(model: RnnModel, batch: Sequence[Example], eps_fd: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in inference mode (dropout off); the relative error for each
    parameter is |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8).
    """
    layers, head, config = model.layers, model.head, model.config
    _, layer_grads, head_grads = _batch_pass(layers, head, config, batch, want_grads=True)

    def fd(param: np.ndarray, flat_index: int) -> float:
        flat = param.reshape(-1)
        original = flat[flat_index]
        flat[flat_index] = original + eps_fd
        up, _, _ = _batch_pass(layers, head, config, batch, want_grads=False)
        flat[flat_index] = original - eps_fd
        down, _, _ = _batch_pass(layers, head, config, batch, want_grads=False)
        flat[flat_index] = original
        return (up - down) / (2.0 * eps_fd)

    worst = 0.0
    targets = [
        (params[name], grads[name])
        for params, grads in zip(layers, layer_grads)
        for name in params
    ]
    targets += [(head[name], head_grads[name]) for name in head]
    for param, grad in targets:
        flat_grad = grad.reshape(-1)
        for j in range(param.size):
            numeric = fd(param, j)
            analytic = flat_grad[j]
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# checkpoint format: magic "RNN1", version, config JSON, then parameter
# matrices in the embedding-store numeric layout (u16 shape + f32 payload).


def _matrices(model: RnnModel):
    for li, params in enumerate(model.layers):
        for name in ("Wx", "Wh", "b"):
            arr = params[name]
            yield f"layer{li}.{name}", arr.reshape(1, -1) if arr.ndim == 1 else arr
    yield "head.W", model.head["W"]
    yield "head.b", model.head["b"].reshape(1, -1)


def save_model(model: RnnModel, path) -> None:
    config_doc = asdict(model.config)
    config_doc["layer_widths"] = list(config_doc["layer_widths"])
    config_doc["input_dim"] = model.input_dim
    blob = json.dumps(config_doc, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", _FORMAT_VERSION))
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    names = list(_matrices(model))
    buf.write(struct.pack("<I", len(names)))
    for name, arr in names:
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<HH", arr.shape[0], arr.shape[1]))
        buf.write(arr.astype("<f4").tobytes(order="C"))
    Path(path).write_bytes(buf.getvalue())


def load_model(path) -> RnnModel:
    data = Path(path).read_bytes()
    view = io.BytesIO(data)

    def take(n: int, what: str) -> bytes:
        chunk = view.read(n)
        if len(chunk) != n:
            raise Truncated(f"checkpoint ended inside {what}")
        return chunk

    if take(4, "magic") != MAGIC:
        raise BadMagic(f"not a recurrent-model checkpoint: {path}")
    (version,) = struct.unpack("<H", take(2, "version"))
    if version != _FORMAT_VERSION:
        raise IncompatibleArtifacts(f"checkpoint version {version}, expected {_FORMAT_VERSION}")
    (config_len,) = struct.unpack("<I", take(4, "config length"))
    config_doc = json.loads(take(config_len, "config"))
    input_dim = config_doc.pop("input_dim")
    config_doc["layer_widths"] = tuple(config_doc["layer_widths"])
    config = RnnConfig(**config_doc)
    (n_matrices,) = struct.unpack("<I", take(4, "matrix count"))
    arrays = {}
    for _ in range(n_matrices):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "name").decode("utf-8")
        rows, cols = struct.unpack("<HH", take(4, "shape"))
        payload = take(rows * cols * 4, f"matrix {name}")
        arrays[name] = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)
    if view.read(1):
        raise IncompatibleArtifacts("trailing bytes after the last checkpoint matrix")

    gates = _GATES[config.cell_kind]
    layers = []
    fan_in = input_dim
    for li, width in enumerate(config.layer_widths):
        try:
            layer = {
                "Wx": arrays[f"layer{li}.Wx"],
                "Wh": arrays[f"layer{li}.Wh"],
                "b": arrays[f"layer{li}.b"].reshape(-1),
            }
        except KeyError as exc:
            raise Truncated(f"checkpoint missing matrix {exc}") from exc
        expected = {"Wx": (fan_in, gates * width), "Wh": (width, gates * width), "b": (gates * width,)}
        for name, shape in expected.items():
            if layer[name].shape != shape:
                raise ShapeError(f"layer{li}.{name} has shape {layer[name].shape}, expected {shape}")
        layers.append(layer)
        fan_in = width
    try:
        head = {"W": arrays["head.W"], "b": arrays["head.b"].reshape(-1)}
    except KeyError as exc:
        raise Truncated(f"checkpoint missing matrix {exc}") from exc
    if head["W"].shape != (fan_in, 2) or head["b"].shape != (2,):
        raise ShapeError("head shapes inconsistent with layer widths")
    return RnnModel(config=config, input_dim=input_dim, layers=layers, head=head)
