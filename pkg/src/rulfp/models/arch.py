"""Network layouts and the shared forward pass."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from rulfp.diffcore import (LayerSpec, ModelParams, Tensor, dropout, fc_forward, init_dense,
                            init_lstm, lstm_sequence)
from rulfp.errors import ConfigurationError

MODEL_KINDS = ("dw", "mtl", "fp", "rul")
HEADS = {"dw": ("weibull",), "mtl": ("fp", "rul"), "fp": ("fp",), "rul": ("rul",)}
HEAD_OUT = {"weibull": 2, "fp": 2, "rul": 1}


@dataclass
class ArchitectureSpec:
    trunk: list[LayerSpec]
    heads: dict[str, list[LayerSpec]]

    def to_dict(self) -> dict:
        return {"trunk": [l.to_dict() for l in self.trunk],
                "heads": {k: [l.to_dict() for l in v] for k, v in self.heads.items()}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ArchitectureSpec":
        return cls([LayerSpec.from_dict(x) for x in d["trunk"]],
                   {k: [LayerSpec.from_dict(x) for x in v] for k, v in d["heads"].items()})

    def validate(self, kind: str) -> None:
        if kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {kind!r}")
        if not self.trunk or self.trunk[0].kind != "lstm":
            raise ConfigurationError("trunk must start with an LSTM layer")
        if any(l.kind == "lstm" for l in self.trunk[1:]):
            raise ConfigurationError("only one recurrent layer is supported, at the trunk start")
        if set(self.heads) != set(HEADS[kind]):
            raise ConfigurationError(f"{kind} needs heads {HEADS[kind]}, got {sorted(self.heads)}")
        for name, layers in self.heads.items():
            dense = [l for l in layers if l.kind != "dropout"]
            if not dense or dense[-1].kind != "linear" or dense[-1].width != HEAD_OUT[name]:
                raise ConfigurationError(
                    f"head {name!r} must end in a linear layer of width {HEAD_OUT[name]}")
            if any(l.kind == "lstm" for l in layers):
                raise ConfigurationError("heads cannot contain recurrent layers")


def _stack(lstm: int, fcs, dropout_p: float) -> list[LayerSpec]:
    layers = [LayerSpec("lstm", lstm)]
    if dropout_p:
        layers.append(LayerSpec("dropout", p=dropout_p))
    for width in fcs:
        layers.append(LayerSpec("elu", width))
        if dropout_p:
            layers.append(LayerSpec("dropout", p=dropout_p))
    return layers


_TABLE = {
    # (lstm width, trunk FC widths, extra RUL-head FC widths for MTL)
    "cmapss": {"fp": (128, (32, 16)), "rul": (128, (64, 32)), "dw": (128, (32, 16)),
               "mtl": (200, (100, 64), (32,))},
    "backblaze": {"fp": (64, (16,)), "rul": (64, (32,)), "dw": (64, (32, 16)),
                  "mtl": (100, (64, 16), (16,))},
}


def preset(dataset: str, kind: str, dropout_p: float = 0.1) -> ArchitectureSpec:
    """Layer sizes used for C-MAPSS and Backblaze."""
    try:
        entry = _TABLE[dataset][kind]
    except KeyError:
        raise ConfigurationError(f"no preset for dataset={dataset!r}, kind={kind!r}") from None
    trunk = _stack(entry[0], entry[1], dropout_p)
    if kind == "mtl":
        rul = [LayerSpec("elu", w) for w in entry[2]] + [LayerSpec("linear", 1)]
        return ArchitectureSpec(trunk, {"fp": [LayerSpec("linear", 2)], "rul": rul})
    head = HEADS[kind][0]
    return ArchitectureSpec(trunk, {head: [LayerSpec("linear", HEAD_OUT[head])]})


def small_arch(kind: str, lstm: int = 6, fcs=(5, 4), head_fc=(3,), dropout_p: float = 0.0
               ) -> ArchitectureSpec:
    """Tiny network of the same shape, for gradient checks and tests."""
    trunk = _stack(lstm, fcs, dropout_p)
    if kind == "mtl":
        rul = [LayerSpec("elu", w) for w in head_fc] + [LayerSpec("linear", 1)]
        return ArchitectureSpec(trunk, {"fp": [LayerSpec("linear", 2)], "rul": rul})
    head = HEADS[kind][0]
    return ArchitectureSpec(trunk, {head: [LayerSpec("linear", HEAD_OUT[head])]})


@dataclass
class Model:
    kind: str
    arch: ArchitectureSpec
    n_features: int
    params: ModelParams
    horizon: float
    max_rul: float
    pretrained: bool = False
    meta: dict = field(default_factory=dict)

    def forward(self, leaves: Mapping[str, Tensor], X, train: bool = False,
                rng: np.random.Generator | None = None) -> dict[str, Tensor]:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != self.n_features:
            raise ConfigurationError(
                f"input of shape {X.shape} does not match {self.n_features} features")
        h = lstm_sequence(X, leaves, "trunk.0")
        h = _run(self.arch.trunk[1:], h, leaves, "trunk", 1, train, rng)
        return {name: _run(layers, h, leaves, name, 0, train, rng)
                for name, layers in self.arch.heads.items()}

    def manifest(self) -> dict:
        return {"kind": self.kind, "arch": self.arch.to_dict(), "n_features": self.n_features,
                "horizon": self.horizon, "max_rul": self.max_rul, "pretrained": self.pretrained,
                "meta": self.meta}


def _run(layers, h, leaves, prefix, offset, train, rng):
    for i, layer in enumerate(layers, start=offset):
        if layer.kind == "dropout":
            h = dropout(h, layer.p, rng, train)
        else:
            h = fc_forward(h, layer, leaves, f"{prefix}.{i}")
    return h


def build_model(kind: str, arch: ArchitectureSpec, n_features: int, seed: int,
                horizon: float, max_rul: float) -> Model:
    arch.validate(kind)
    rng = np.random.default_rng(seed)
    params = ModelParams()
    width = arch.trunk[0].width
    init_lstm(params, "trunk.0", n_features, width, rng)
    for i, layer in enumerate(arch.trunk[1:], start=1):
        if layer.kind != "dropout":
            init_dense(params, f"trunk.{i}", width, layer.width, rng)
            width = layer.width
    trunk_width = width
    for name, layers in arch.heads.items():
        width = trunk_width
        for i, layer in enumerate(layers):
            if layer.kind != "dropout":
                init_dense(params, f"{name}.{i}", width, layer.width, rng)
                width = layer.width
    return Model(kind, arch, n_features, params, float(horizon), float(max_rul))


def model_from_manifest(manifest: Mapping, params: ModelParams) -> Model:
    arch = ArchitectureSpec.from_dict(manifest["arch"])
    arch.validate(manifest["kind"])
    return Model(manifest["kind"], arch, int(manifest["n_features"]), params,
                 float(manifest["horizon"]), float(manifest["max_rul"]),
                 bool(manifest.get("pretrained", False)), dict(manifest.get("meta", {})))
