"""LSTM, fully-connected and dropout layers built on :mod:`rulfp.diffcore.tensor`."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from rulfp.diffcore.params import ModelParams
from rulfp.diffcore.tensor import Tensor, as_tensor
from rulfp.errors import ConfigurationError

LAYER_KINDS = ("lstm", "elu", "linear", "dropout")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    width: int = 0
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dropout":
            if not 0.0 <= self.p < 1.0:
                raise ConfigurationError(f"dropout probability must be in [0, 1), got {self.p}")
        elif self.width <= 0:
            raise ConfigurationError(f"{self.kind} layer needs a positive width, got {self.width}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "dropout":
            d["p"] = self.p
        else:
            d["width"] = self.width
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "LayerSpec":
        return cls(kind=d["kind"], width=int(d.get("width", 0)), p=float(d.get("p", 0.0)))


def _glorot(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out))


def init_lstm(params: ModelParams, prefix: str, n_in: int, n_hidden: int,
              rng: np.random.Generator) -> None:
    """Gates are packed in the order input, forget, candidate, output."""
    H = n_hidden
    w_x = np.concatenate([_glorot(rng, n_in, H) for _ in range(4)], axis=1)
    w_h = rng.uniform(-1.0 / np.sqrt(H), 1.0 / np.sqrt(H), size=(H, 4 * H))
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0
    params.add(f"{prefix}.W_x", w_x)
    params.add(f"{prefix}.W_h", w_h)
    params.add(f"{prefix}.b", b, decay=False)


def init_dense(params: ModelParams, prefix: str, n_in: int, n_out: int,
               rng: np.random.Generator) -> None:
    params.add(f"{prefix}.W", _glorot(rng, n_in, n_out))
    params.add(f"{prefix}.b", np.zeros(n_out), decay=False)


def _lookup(params, name: str) -> Tensor:
    try:
        return as_tensor(params[name])
    except KeyError:
        raise ConfigurationError(f"missing parameter {name!r}") from None


def lstm_step(x_t, h, c, params, prefix: str = "lstm"):
    """One LSTM update; returns ``(h_next, c_next)``.

    Accepts a single vector or a ``(batch, features)`` matrix for ``x_t``.
    """
    x_t, h, c = as_tensor(x_t), as_tensor(h), as_tensor(c)
    vector = x_t.ndim == 1
    if vector:
        x_t, h, c = x_t.reshape(1, -1), h.reshape(1, -1), c.reshape(1, -1)
    w_x = _lookup(params, f"{prefix}.W_x")
    w_h = _lookup(params, f"{prefix}.W_h")
    b = _lookup(params, f"{prefix}.b")
    H = w_h.shape[0]
    if (w_x.shape[0] != x_t.shape[1] or h.shape[1] != H or c.shape[1] != H
            or w_x.shape[1] != 4 * H or h.shape[0] != x_t.shape[0]):
        raise ConfigurationError(
            f"lstm {prefix!r}: input {x_t.shape}, h {h.shape}, c {c.shape} "
            f"incompatible with W_x {w_x.shape}, W_h {w_h.shape}")
    z = x_t @ w_x + h @ w_h + b
    i = z[:, 0:H].sigmoid()
    f = z[:, H:2 * H].sigmoid()
    g = z[:, 2 * H:3 * H].tanh()
    o = z[:, 3 * H:4 * H].sigmoid()
    c_next = f * c + i * g
    h_next = o * c_next.tanh()
    if vector:
        return h_next.reshape(-1), c_next.reshape(-1)
    return h_next, c_next


def lstm_sequence(x, params, prefix: str = "lstm") -> Tensor:
    """Run the cell over ``x`` of shape ``(batch, steps, features)``; return the last hidden state."""
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if data.ndim != 3:
        raise ConfigurationError(f"expected (batch, steps, features), got {data.shape}")
    H = _lookup(params, f"{prefix}.W_h").shape[0]
    batch = data.shape[0]
    h = Tensor(np.zeros((batch, H)))
    c = Tensor(np.zeros((batch, H)))
    for t in range(data.shape[1]):
        x_t = x[:, t, :] if isinstance(x, Tensor) else Tensor(data[:, t, :])
        h, c = lstm_step(x_t, h, c, params, prefix)
    return h


def fc_forward(x, layer: LayerSpec, params, prefix: str) -> Tensor:
    x = as_tensor(x)
    vector = x.ndim == 1
    if vector:
        x = x.reshape(1, -1)
    W = _lookup(params, f"{prefix}.W")
    b = _lookup(params, f"{prefix}.b")
    if W.shape[0] != x.shape[1] or W.shape[1] != layer.width:
        raise ConfigurationError(
            f"dense {prefix!r}: input width {x.shape[1]} / layer width {layer.width} "
            f"incompatible with W {W.shape}")
    y = x @ W + b
    if layer.kind == "elu":
        y = y.elu()
    elif layer.kind != "linear":
        raise ConfigurationError(f"fc_forward cannot run a {layer.kind!r} layer")
    return y.reshape(-1) if vector else y


def dropout(x, p: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout: scaled at train time, identity at inference."""
    x = as_tensor(x)
    if not train or p == 0.0:
        return x
    if rng is None:
        raise ConfigurationError("training-mode dropout needs an explicit generator")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * keep
