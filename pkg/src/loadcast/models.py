"""Forecast model families: five baselines and six serial/parallel fusions.

Architectures:
  baselines  bp, cnn, lstm, bilstm, gru
  fusions    scl, pcl, scg, pcg, scga, pcga
             (serial/parallel CNN + {LSTM, GRU}, optionally with attention)

Input convention per sample: a dynamic window ``dyn [T, D_dyn]`` (load
history group) and a static vector ``stat [D_stat]`` (calendar/weather at
the target time). Batched forward takes ``dyn [B, T, D_dyn]`` and
``stat [B, D_stat]`` and returns one prediction per sample.

Wiring:
- bp / cnn consume the flattened full feature set [T·D_dyn + D_stat]
  (cnn as a single-channel sequence);
- recurrent baselines consume [T, D_dyn + D_stat] with the static vector
  repeated per step;
- serial fusions run the conv stack per time step over that same full
  window (shared weights) and feed the resulting feature sequence to the
  recurrent stack;
- parallel fusions run the conv stack on the static vector (as a
  1-channel sequence) and the recurrent stack on the dynamic window, then
  cascade both branch outputs;
- with attention, the cascade is zero-padded to a multiple of
  ``attention_rows`` and split into that many equal rows, and the attention
  context feeds the head;
- every model ends in the same head: batch norm, one ReLU dense layer,
  dropout, and a final dense layer to a scalar.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .layers import (
    Attention,
    BatchNorm,
    Conv1d,
    Dense,
    Dropout,
    Layer,
    MaxPool1d,
    Recurrent,
)
from .optim import Adam
from .rng import make_rng, split_rng
from .tensor import NonFiniteError, ShapeError, Tensor, concat, mse_loss

__all__ = [
    "ARCHITECTURES",
    "BASELINES",
    "FUSIONS",
    "Hyper",
    "ModelSpec",
    "ForecastModel",
    "build_model",
    "TrainingLog",
    "TrainAbort",
    "train_model",
    "predict_batched",
    "save_weights",
    "load_weights",
    "WeightFileError",
]

BASELINES = ("bp", "cnn", "lstm", "bilstm", "gru")
FUSIONS = ("scl", "pcl", "scg", "pcg", "scga", "pcga")
ARCHITECTURES = BASELINES + FUSIONS

WEIGHT_MAGIC = b"LCWT"
WEIGHT_FORMAT_VERSION = 1


@dataclass
class Hyper:
    """Training and architecture hyperparameters (defaults per the model
    parameter table: 50 epochs, batch 64, lr 1e-4, dropout 0.3, decay 0.5,
    two hidden layers of 150, channels 64/128, kernel 3, pool 2/2)."""

    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-4
    dropout: float = 0.3
    decay_factor: float = 0.5
    decay_every: int = 10
    hidden_size: int = 150
    hidden_layers: int = 2
    channels: tuple = (64, 128)
    kernel_size: int = 3
    pool_size: int = 2
    pool_stride: int = 2
    cnn_fc_dim: int = 150
    attention_rows: int = 8
    attention_dim: int | None = None  # None -> row width


@dataclass
class ModelSpec:
    """Declarative description of one of the eleven architectures."""

    architecture: str
    time_steps: int = 12
    dyn_features: int = 1
    stat_features: int = 0
    horizon: int = 1
    hyper: Hyper = field(default_factory=Hyper)

    @property
    def fusion(self) -> str:
        if self.architecture in BASELINES:
            return "none"
        return "serial" if self.architecture.startswith("s") else "parallel"

    @property
    def attention(self) -> bool:
        return self.architecture.endswith("a")

    @property
    def recurrent_kind(self) -> str | None:
        arch = self.architecture
        if arch in ("lstm", "bilstm", "scl", "pcl"):
            return "lstm"
        if arch in ("gru", "scg", "pcg", "scga", "pcga"):
            return "gru"
        return None

    @property
    def bidirectional(self) -> bool:
        # per the parameter table: LSTM unidirectional, BiLSTM/GRU bidirectional
        return self.architecture in ("bilstm", "gru", "scg", "pcg", "scga", "pcga")

    def validate(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}; "
                             f"expected one of {ARCHITECTURES}")
        if self.time_steps < 1 or self.horizon < 1:
            raise ValueError("time_steps and horizon must be >= 1")
        if self.dyn_features < 1:
            raise ValueError("dyn_features must be >= 1")
        if self.stat_features < 0:
            raise ValueError("stat_features must be >= 0")
        if self.attention and self.architecture not in ("scga", "pcga"):
            raise ValueError("attention only applies to scga/pcga")
        min_len = 2 * self.hyper.pool_size  # survive two pool stages
        if self.fusion == "parallel":
            if self.stat_features < 1:
                raise ValueError("parallel fusion requires stat_features >= 1")
            if self.stat_features < min_len:
                raise ValueError(
                    f"parallel conv stack needs stat_features >= {min_len}, "
                    f"got {self.stat_features}")
        full = self.time_steps * self.dyn_features + self.stat_features
        if self.architecture == "cnn" and full < min_len:
            raise ValueError(f"cnn baseline needs flattened width >= {min_len}")
        if self.fusion == "serial" and self.dyn_features + self.stat_features < min_len:
            raise ValueError(f"serial conv stack needs per-step width >= {min_len}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hyper"]["channels"] = list(self.hyper.channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        h = dict(d["hyper"])
        h["channels"] = tuple(h["channels"])
        if h.get("attention_dim") is not None:
            h["attention_dim"] = int(h["attention_dim"])
        return cls(architecture=d["architecture"], time_steps=d["time_steps"],
                   dyn_features=d["dyn_features"], stat_features=d["stat_features"],
                   horizon=d["horizon"], hyper=Hyper(**h))


class _ConvStack(Layer):
    """conv -> pool -> conv -> pool -> flatten -> dense(ReLU)."""

    def __init__(self, c_in: int, length: int, hyper: Hyper, rng: np.random.Generator):
        super().__init__()
        c1, c2 = hyper.channels
        self.conv1 = self._register_child(
            "conv1", Conv1d(c_in, c1, hyper.kernel_size, rng, padding="same"))
        self.conv2 = self._register_child(
            "conv2", Conv1d(c1, c2, hyper.kernel_size, rng, padding="same"))
        self.pool = MaxPool1d(hyper.pool_size, hyper.pool_stride)
        l1 = (length - hyper.pool_size) // hyper.pool_stride + 1
        l2 = (l1 - hyper.pool_size) // hyper.pool_stride + 1
        self.flat_dim = c2 * l2
        self.fc = self._register_child(
            "fc", Dense(self.flat_dim, hyper.cnn_fc_dim, rng, activation="relu"))
        self.out_dim = hyper.cnn_fc_dim

    def forward(self, x: Tensor) -> Tensor:
        h = self.pool(self.conv1(x))
        h = self.pool(self.conv2(h))
        h = h.reshape(h.shape[0], self.flat_dim)
        return self.fc(h)


class ForecastModel(Layer):
    """A built architecture: extractor(s) plus the shared prediction head."""

    def __init__(self, spec: ModelSpec, seed: int):
        super().__init__()
        spec.validate()
        self.spec = spec
        self.seed = seed
        rng = make_rng(seed)
        h = spec.hyper
        arch = spec.architecture
        t, d_dyn, d_stat = spec.time_steps, spec.dyn_features, spec.stat_features
        full_flat = t * d_dyn + d_stat
        d_all = d_dyn + d_stat
        self.dropout = Dropout(h.dropout)

        if arch == "bp":
            d = full_flat
            for i in range(h.hidden_layers):
                self._register_child(f"fc{i}", Dense(d, h.hidden_size, rng, activation="relu"))
                d = h.hidden_size
            head_in = d
        elif arch == "cnn":
            self.cnn = self._register_child("cnn", _ConvStack(1, full_flat, h, rng))
            head_in = self.cnn.out_dim
        elif arch in ("lstm", "bilstm", "gru"):
            self.rnn = self._register_child(
                "rnn", Recurrent(spec.recurrent_kind, d_all, h.hidden_size, rng,
                                 layers=h.hidden_layers, bidirectional=spec.bidirectional))
            head_in = h.hidden_size * (2 if spec.bidirectional else 1)
        elif spec.fusion == "serial":
            self.cnn = self._register_child("cnn", _ConvStack(1, d_all, h, rng))
            self.rnn = self._register_child(
                "rnn", Recurrent(spec.recurrent_kind, self.cnn.out_dim, h.hidden_size, rng,
                                 layers=h.hidden_layers, bidirectional=spec.bidirectional))
            head_in = h.hidden_size * (2 if spec.bidirectional else 1)
        else:  # parallel
            self.cnn = self._register_child("cnn", _ConvStack(1, d_stat, h, rng))
            self.rnn = self._register_child(
                "rnn", Recurrent(spec.recurrent_kind, d_dyn, h.hidden_size, rng,
                                 layers=h.hidden_layers, bidirectional=spec.bidirectional))
            head_in = self.cnn.out_dim + h.hidden_size * (2 if spec.bidirectional else 1)

        if spec.attention:
            m = h.attention_rows
            self.attn_rows = m
            self.attn_width = -(-head_in // m)  # ceil
            self.attn_pad = m * self.attn_width - head_in
            attn_dim = h.attention_dim or self.attn_width
            self.attention = self._register_child(
                "attention", Attention(self.attn_width, attn_dim, rng))
            head_in = self.attn_width

        self.head_bn = self._register_child("head_bn", BatchNorm(head_in))
        self.head_fc1 = self._register_child(
            "head_fc1", Dense(head_in, h.hidden_size, rng, activation="relu"))
        self.head_fc2 = self._register_child("head_fc2", Dense(h.hidden_size, 1, rng))

    # -- forward pieces --------------------------------------------------

    def _full_window(self, dyn: np.ndarray, stat: np.ndarray) -> np.ndarray:
        """[B, T, D_dyn + D_stat] with the static vector repeated per step."""
        b, t, _ = dyn.shape
        tiled = np.repeat(stat[:, None, :], t, axis=1)
        return np.concatenate([dyn, tiled], axis=2)

    def fusion_vector(self, dyn: np.ndarray, stat: np.ndarray,
                      train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        """Extractor output before attention and head: [B, width]."""
        spec, h = self.spec, self.spec.hyper
        arch = spec.architecture
        b = dyn.shape[0]
        if arch == "bp":
            x = Tensor(np.concatenate([dyn.reshape(b, -1), stat], axis=1))
            for i in range(h.hidden_layers):
                x = self._children[f"fc{i}"](x)
                x = self.dropout(x, train, rng)
            return x
        if arch == "cnn":
            flat = np.concatenate([dyn.reshape(b, -1), stat], axis=1)
            u = self.cnn(Tensor(flat[:, None, :]))
            return self.dropout(u, train, rng)
        if arch in ("lstm", "bilstm", "gru"):
            seq = Tensor(self._full_window(dyn, stat))
            _, final = self.rnn(seq)
            return self.dropout(final, train, rng)
        if spec.fusion == "serial":
            window = self._full_window(dyn, stat)  # [B, T, D_all]
            t = window.shape[1]
            steps = Tensor(window.reshape(b * t, 1, window.shape[2]))
            feats = self.cnn(steps).reshape(b, t, self.cnn.out_dim)
            feats = self.dropout(feats, train, rng)
            _, final = self.rnn(feats)
            return self.dropout(final, train, rng)
        # parallel
        u = self.cnn(Tensor(stat[:, None, :]))
        u = self.dropout(u, train, rng)
        _, v = self.rnn(Tensor(dyn))
        v = self.dropout(v, train, rng)
        return concat([u, v], axis=1)

    def _attend(self, vec: Tensor, batch: int) -> Tensor:
        if self.attn_pad:
            vec = concat([vec, Tensor(np.zeros((batch, self.attn_pad)))], axis=1)
        rows = vec.reshape(batch, self.attn_rows, self.attn_width)
        context, _ = self.attention(rows)
        return context

    def _head(self, vec: Tensor, train: bool, rng: np.random.Generator | None) -> Tensor:
        x = self.head_bn(vec, train)
        x = self.head_fc1(x)
        x = self.dropout(x, train, rng)
        y = self.head_fc2(x)
        return y.reshape(y.shape[0])

    def forward(self, dyn: np.ndarray, stat: np.ndarray,
                train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        dyn = np.asarray(dyn, dtype=np.float64)
        stat = np.asarray(stat, dtype=np.float64)
        spec = self.spec
        if dyn.ndim != 3 or dyn.shape[1:] != (spec.time_steps, spec.dyn_features):
            raise ShapeError(
                f"dyn must be [B, {spec.time_steps}, {spec.dyn_features}], got {dyn.shape}")
        if stat.ndim != 2 or stat.shape[1] != spec.stat_features or stat.shape[0] != dyn.shape[0]:
            raise ShapeError(
                f"stat must be [{dyn.shape[0]}, {spec.stat_features}], got {stat.shape}")
        vec = self.fusion_vector(dyn, stat, train, rng)
        if spec.attention:
            vec = self._attend(vec, dyn.shape[0])
        return self._head(vec, train, rng)


def build_model(spec: ModelSpec, seed: int) -> ForecastModel:
    """Deterministic construction: same spec + seed -> bit-identical params."""
    return ForecastModel(spec, seed)


# -- training -----------------------------------------------------------------


class TrainAbort(RuntimeError):
    """Training hit a non-finite loss; message carries epoch and batch index."""


@dataclass
class EpochLog:
    epoch: int
    train_mse: float
    val_mse: float
    lr: float


@dataclass
class TrainingLog:
    epochs: list
    best_val_epoch: int

    def final_train_mse(self) -> float:
        return self.epochs[-1].train_mse

    def final_val_mse(self) -> float:
        return self.epochs[-1].val_mse


def predict_batched(model: ForecastModel, dyn: np.ndarray, stat: np.ndarray,
                    batch_size: int = 256) -> np.ndarray:
    """Eval-mode forward in index order; pure given fixed weights."""
    out = np.empty(len(dyn))
    for start in range(0, len(dyn), batch_size):
        sl = slice(start, start + batch_size)
        out[sl] = model.forward(dyn[sl], stat[sl], train=False).data
    return out


def _batch_mse(pred: np.ndarray, y: np.ndarray) -> float:
    d = pred - y
    return float(np.mean(d * d))


def train_model(model: ForecastModel, train_set, val_set, seed: int,
                epochs: int | None = None) -> TrainingLog:
    """Mini-batch Adam training with the step-decay schedule.

    ``train_set`` / ``val_set`` are (dyn, stat, y) triples of numpy arrays.
    Batches are reshuffled each epoch from the seeded generator; remainder
    batches of size 1 are skipped (batch norm needs >= 2 rows). Aborts with
    a diagnostic on a non-finite loss.
    """
    h = model.spec.hyper
    n_epochs = h.epochs if epochs is None else epochs
    dyn, stat, y = (np.asarray(a, dtype=np.float64) for a in train_set)
    vdyn, vstat, vy = (np.asarray(a, dtype=np.float64) for a in val_set)
    if len(dyn) == 0 or len(vdyn) == 0:
        raise ValueError("train and validation sets must be non-empty")

    rng = make_rng(seed)
    shuffle_rng, dropout_rng = split_rng(rng, 2)
    opt = Adam(model.parameters(), lr=h.learning_rate,
               decay_factor=h.decay_factor, decay_every=h.decay_every)
    logs: list[EpochLog] = []
    for epoch in range(1, n_epochs + 1):
        perm = shuffle_rng.permutation(len(dyn))
        sq_sum = 0.0
        n_seen = 0
        for bstart in range(0, len(perm), h.batch_size):
            idx = perm[bstart:bstart + h.batch_size]
            if len(idx) < 2:
                continue
            batch_no = bstart // h.batch_size
            try:
                pred = model.forward(dyn[idx], stat[idx], train=True, rng=dropout_rng)
                loss = mse_loss(pred, Tensor(y[idx]))
                opt.zero_grad()
                loss.backward()
                opt.step()
            except NonFiniteError as exc:
                raise TrainAbort(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}: {exc}") from exc
            sq_sum += loss.item() * len(idx)
            n_seen += len(idx)
        opt.end_epoch(epoch)
        train_mse = sq_sum / max(n_seen, 1)
        val_mse = _batch_mse(
            predict_batched(model, vdyn, vstat, max(h.batch_size, 256)), vy)
        logs.append(EpochLog(epoch, train_mse, val_mse, opt.lr))

    best = int(np.argmin([e.val_mse for e in logs])) + 1
    return TrainingLog(epochs=logs, best_val_epoch=best)


# -- weight files ---------------------------------------------------------------


class WeightFileError(RuntimeError):
    """Malformed, truncated or incompatible weight file."""


def save_weights(model: ForecastModel, path) -> None:
    """Versioned self-describing container: magic, JSON header (spec and
    named block manifest), then raw little-endian float64 blocks."""
    params = model.named_parameters()
    buffers = model.named_buffers()
    header = {
        "format_version": WEIGHT_FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "params": [{"name": n, "shape": list(t.shape)} for n, t in params],
        "buffers": [{"name": n, "shape": list(b.shape)} for n, b in buffers],
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<I", len(hbytes)))
        fh.write(hbytes)
        for _, t in params:
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        for _, b in buffers:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_weights(path) -> ForecastModel:
    """Rebuild the model from the embedded spec and restore every block
    bit-exactly. Raises ``WeightFileError`` on version/shape/size trouble."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != WEIGHT_MAGIC:
        raise WeightFileError("not a weight file (bad magic)")
    (hlen,) = struct.unpack("<I", blob[4:8])
    try:
        header = json.loads(blob[8:8 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFileError(f"corrupt header: {exc}") from exc
    if header.get("format_version") != WEIGHT_FORMAT_VERSION:
        raise WeightFileError(
            f"weight format version {header.get('format_version')} "
            f"!= supported {WEIGHT_FORMAT_VERSION}")
    spec = ModelSpec.from_dict(header["spec"])
    model = ForecastModel(spec, seed=0)
    params = dict(model.named_parameters())
    buffers = dict(model.named_buffers())

    offset = 8 + hlen
    payload = blob[offset:]
    expected = sum(int(np.prod(e["shape"])) for e in header["params"])
    expected += sum(int(np.prod(e["shape"])) for e in header["buffers"])
    if len(payload) != expected * 8:
        raise WeightFileError(
            f"truncated weight file: payload {len(payload)} bytes, "
            f"expected {expected * 8}")

    pos = 0
    for entry in header["params"] + header["buffers"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name in params:
            dest = params[name].data
        elif name in buffers:
            dest = buffers[name]
        else:
            raise WeightFileError(f"unknown block {name!r} for this spec")
        if dest.shape != shape:
            raise WeightFileError(
                f"shape mismatch for {name!r}: file has {shape}, "
                f"spec implies {dest.shape}")
        n = int(np.prod(shape))
        block = np.frombuffer(payload[pos * 8:(pos + n) * 8], dtype="<f8").reshape(shape)
        pos += n
        dest[...] = block
    return model
