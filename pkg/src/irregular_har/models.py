"""Classifier architectures: ConvDense, DeepConvLSTM and a CfC recurrent net.

All models map a batch of windows ``values (B, L, d)``, ``elapsed (B, L)``
and ``lengths (B,)`` to ``(B, K)`` logits. The two discrete-time models
require ``L == window_len`` and never read ``elapsed``; the continuous-time
model accepts any length and consumes the elapsed gaps.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .nn import cfc_cell, conv1d_forward, dense_forward, lstm_cell
from .windowing import Window, stack_windows

Architecture = Literal["conv_dense", "deep_conv_lstm", "cfc_net"]
ARCHITECTURES = ("conv_dense", "deep_conv_lstm", "cfc_net")
CHECKPOINT_MAGIC = "irregular-har-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    architecture: str
    input_channels: int
    num_classes: int
    window_len: Optional[int] = None
    hidden_size: int = 32
    conv_channels: int = 16
    kernel_size: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.input_channels < 1:
            raise ValueError("input_channels must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.hidden_size < 1 or self.conv_channels < 1 or self.kernel_size < 1:
            raise ValueError("layer sizes must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


class Model:
    """Base class holding the config, parameters and input normalization."""

    fixed_length = True
    num_convs = 0

    def __init__(self, config: ModelConfig):
        self.config = config
        self.store = ParamStore(config.seed)
        self.input_mean = np.zeros(config.input_channels)
        self.input_std = np.ones(config.input_channels)
        if self.fixed_length:
            min_len = self.num_convs * (config.kernel_size - 1) + 1
            if config.window_len is None:
                raise ValueError(f"{config.architecture} needs a fixed window_len")
            if config.window_len < min_len:
                raise ValueError(
                    f"window_len {config.window_len} too short for "
                    f"{self.num_convs} valid convolutions (need >= {min_len})"
                )
        self._build()

    def _build(self) -> None:
        raise NotImplementedError

    def _logits(self, x: np.ndarray, elapsed: np.ndarray, lengths: np.ndarray) -> Tensor:
        raise NotImplementedError

    @property
    def num_parameters(self) -> int:
        return self.store.num_values

    def set_normalization(self, mean, std) -> None:
        std = np.asarray(std, dtype=np.float64).copy()
        std[~(std > 1e-12)] = 1.0
        self.input_mean = np.asarray(mean, dtype=np.float64).copy()
        self.input_std = std

    def forward(self, values, elapsed=None, lengths=None) -> Tensor:
        """Logits for a batch. ``values`` may also be a single ``(L, d)`` window."""
        values = np.asarray(values, dtype=np.float64)
        single = values.ndim == 2
        if single:
            values = values[None]
            elapsed = None if elapsed is None else np.asarray(elapsed)[None]
        b_, length, d = values.shape
        if d != self.config.input_channels:
            raise ValueError(f"expected {self.config.input_channels} channels, got {d}")
        if length < 1:
            raise ValueError("empty window")
        if self.fixed_length and length != self.config.window_len:
            raise ValueError(
                f"{self.config.architecture} expects windows of {self.config.window_len} "
                f"samples, got {length}; apply pad_to_length first"
            )
        if lengths is None:
            lengths = np.full(b_, length, dtype=np.int64)
        if elapsed is None:
            elapsed = np.zeros((b_, length))
        x = (values - self.input_mean) / self.input_std
        out = self._logits(x, np.asarray(elapsed, dtype=np.float64), np.asarray(lengths))
        return out[0] if single else out

    def prepare(self, windows: Sequence[Window]):
        """Stack windows into the arrays :meth:`forward` expects."""
        length = self.config.window_len if self.fixed_length else None
        return stack_windows(list(windows), length)

    def forward_windows(self, windows: Sequence[Window]) -> Tensor:
        values, elapsed, lengths, _ = self.prepare(windows)
        return self.forward(values, elapsed, lengths)

    def predict_logits(self, windows: Sequence[Window], batch_size: int = 256) -> np.ndarray:
        out = []
        for i in range(0, len(windows), batch_size):
            out.append(self.forward_windows(windows[i : i + batch_size]).data)
        return np.concatenate(out, axis=0)

    def predict_batch(self, windows: Sequence[Window]) -> np.ndarray:
        return np.argmax(self.predict_logits(windows), axis=1)


class ConvDense(Model):
    """Three valid conv+ReLU layers, flatten, dense+ReLU, dense to logits."""

    num_convs = 3

    def _build(self) -> None:
        c, k = self.config.conv_channels, self.config.kernel_size
        s = self.store
        c_in = self.config.input_channels
        for i in range(1, 4):
            s.create(f"conv{i}.weight", (c, c_in, k))
            s.create(f"conv{i}.bias", (c,), "zeros")
            c_in = c
        flat = (self.config.window_len - 3 * (k - 1)) * c
        s.create("fc1.weight", (self.config.hidden_size, flat))
        s.create("fc1.bias", (self.config.hidden_size,), "zeros")
        s.create("fc2.weight", (self.config.num_classes, self.config.hidden_size))
        s.create("fc2.bias", (self.config.num_classes,), "zeros")

    def _logits(self, x, elapsed, lengths):
        s = self.store
        h = Tensor(x)
        for i in range(1, 4):
            h = ad.relu(conv1d_forward(h, s[f"conv{i}.weight"], s[f"conv{i}.bias"]))
        h = ad.reshape(h, (h.shape[0], -1))
        h = ad.relu(dense_forward(h, s["fc1.weight"], s["fc1.bias"]))
        return dense_forward(h, s["fc2.weight"], s["fc2.bias"])


class DeepConvLSTM(Model):
    """Four valid conv+ReLU layers, one LSTM over time, dense on the last state."""

    num_convs = 4

    def _build(self) -> None:
        c, k, hidden = self.config.conv_channels, self.config.kernel_size, self.config.hidden_size
        s = self.store
        c_in = self.config.input_channels
        for i in range(1, 5):
            s.create(f"conv{i}.weight", (c, c_in, k))
            s.create(f"conv{i}.bias", (c,), "zeros")
            c_in = c
        s.create("lstm.w_ih", (4 * hidden, c))
        s.create("lstm.w_hh", (4 * hidden, hidden))
        b = s.create("lstm.bias", (4 * hidden,), "zeros")
        b.data[hidden : 2 * hidden] = 1.0  # forget-gate bias
        s.create("fc.weight", (self.config.num_classes, hidden))
        s.create("fc.bias", (self.config.num_classes,), "zeros")

    def _logits(self, x, elapsed, lengths):
        s = self.store
        h = Tensor(x)
        for i in range(1, 5):
            h = ad.relu(conv1d_forward(h, s[f"conv{i}.weight"], s[f"conv{i}.bias"]))
        hidden = self.config.hidden_size
        state = Tensor(np.zeros((x.shape[0], hidden)))
        cell = Tensor(np.zeros((x.shape[0], hidden)))
        for t in range(h.shape[1]):
            state, cell = lstm_cell(
                h[:, t, :], state, cell, s["lstm.w_ih"], s["lstm.w_hh"], s["lstm.bias"]
            )
        return dense_forward(state, s["fc.weight"], s["fc.bias"])


class CfcNet(Model):
    """Per-sample tanh projection, CfC recurrence over elapsed gaps, dense head.

    Windows of different lengths share a batch: steps past a window's length
    leave its hidden state untouched.
    """

    fixed_length = False

    def _build(self) -> None:
        hidden, d = self.config.hidden_size, self.config.input_channels
        s = self.store
        s.create("proj.weight", (hidden, d))
        s.create("proj.bias", (hidden,), "zeros")
        for head in ("f", "g", "h"):
            s.create(f"cfc.w_{head}", (hidden, 2 * hidden))
            s.create(f"cfc.b_{head}", (hidden,), "zeros")
        s.create("fc.weight", (self.config.num_classes, hidden))
        s.create("fc.bias", (self.config.num_classes,), "zeros")

    def _logits(self, x, elapsed, lengths):
        s = self.store
        b_, length, _ = x.shape
        if np.any(lengths < 1):
            raise ValueError("empty window")
        z = ad.tanh(dense_forward(Tensor(x), s["proj.weight"], s["proj.bias"]))
        weights = [s[f"cfc.{n}"] for n in ("w_f", "b_f", "w_g", "b_g", "w_h", "b_h")]
        h = Tensor(np.zeros((b_, self.config.hidden_size)))
        ragged = bool(np.any(lengths < length))
        for t in range(length):
            active = t < lengths
            tau = np.where(active, elapsed[:, t], 0.0)
            h_new = cfc_cell(z[:, t, :], h, tau, *weights)
            if ragged and not active.all():
                keep = active.astype(np.float64)[:, None]
                h = h_new * keep + h * (1.0 - keep)
            else:
                h = h_new
        return dense_forward(h, s["fc.weight"], s["fc.bias"])


_CLASSES = {"conv_dense": ConvDense, "deep_conv_lstm": DeepConvLSTM, "cfc_net": CfcNet}


def build_model(config: ModelConfig) -> Model:
    return _CLASSES[config.architecture](config)


def build_conv_dense(config: ModelConfig) -> ConvDense:
    return ConvDense(_with_arch(config, "conv_dense"))


def build_deep_conv_lstm(config: ModelConfig) -> DeepConvLSTM:
    return DeepConvLSTM(_with_arch(config, "deep_conv_lstm"))


def build_cfc_net(config: ModelConfig) -> CfcNet:
    return CfcNet(_with_arch(config, "cfc_net"))


def _with_arch(config: ModelConfig, arch: str) -> ModelConfig:
    if config.architecture == arch:
        return config
    return ModelConfig(**{**config.to_dict(), "architecture": arch})


def argmax_lowest(logits) -> int:
    """Index of the largest logit; ties go to the lowest index."""
    return int(np.argmax(np.asarray(logits)))


def predict(model: Model, window: Window) -> int:
    """Class id predicted for one window (padding must already be applied)."""
    elapsed = window.elapsed
    logits = model.forward(window.values, elapsed).data
    return argmax_lowest(logits)


# ----------------------------------------------------------- checkpoints


def _fmt(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values).ravel())


def save_checkpoint(model: Model, path) -> None:
    """Write the model as a line-oriented text file (layout in README)."""
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        "config " + json.dumps(model.config.to_dict(), sort_keys=True),
    ]
    for name, arr in (("input_mean", model.input_mean), ("input_std", model.input_std)):
        lines.append(f"buffer {name} {arr.size} {_fmt(arr)}")
    for name, p in model.store.items():
        shape = ",".join(str(s) for s in p.shape)
        lines.append(f"param {name} {shape} {_fmt(p.data)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].split()[:1] != [CHECKPOINT_MAGIC]:
        raise ValueError(f"{path}: not a model checkpoint")
    version = int(lines[0].split()[1])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if not lines[1].startswith("config "):
        raise ValueError(f"{path}: missing config line")
    model = build_model(ModelConfig(**json.loads(lines[1][len("config ") :])))
    state = {}
    buffers = {}
    for line in lines[2:]:
        kind, name, shape, *vals = line.split(" ")
        data = np.array([float(v) for v in vals], dtype=np.float64)
        if kind == "buffer":
            buffers[name] = data
        elif kind == "param":
            dims = tuple(int(s) for s in shape.split(",")) if shape else ()
            state[name] = data.reshape(dims)
        else:
            raise ValueError(f"{path}: unknown record {kind!r}")
    missing = set(model.store.params) - set(state)
    if missing:
        raise ValueError(f"{path}: missing parameters {sorted(missing)}")
    model.store.load_state(state)
    model.input_mean = buffers.get("input_mean", model.input_mean)
    model.input_std = buffers.get("input_std", model.input_std)
    return model
