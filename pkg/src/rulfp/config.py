"""Run configuration: a YAML file of documented blocks, overridable from the command line.

Every key has a default, so an empty file is a valid configuration. After
overrides are applied the fully resolved mapping is written next to the run's
outputs as ``resolved_config.yaml``; feeding that file back reproduces the run.

Top-level blocks::

    dataset:      where the raw data lives and how it is windowed
    synth:        settings for the synthetic generator (``rulfp synth``)
    model:        network kind, layer sizes and training settings
    evaluation:   failure horizon and confusion-matrix bins
    output_dir:   every artifact goes under this directory
"""

from __future__ import annotations

import copy
import math
from pathlib import Path
from typing import Any

import yaml

from rulfp.errors import ConfigurationError
from rulfp.models.arch import MODEL_KINDS, ArchitectureSpec, preset
from rulfp.models.training import TrainConfig
from rulfp.pipeline.synth import SynthConfig
from rulfp.pipeline.types import WindowingConfig

DATASET_KINDS = ("cmapss", "backblaze", "synth")

DEFAULTS: dict[str, Any] = {
    "dataset": {
        # cmapss: directory with train_/test_/RUL_<subset>.txt
        # backblaze: directory (or single file) of daily SMART CSVs
        # synth: directory written by ``rulfp synth`` (devices.csv + observations.csv)
        "kind": "cmapss",
        "path": None,
        "subset": "FD001",
        "drive_model": "ST4000DM000",
        # w, stride, tau_f, tau_e, max_rul; null or missing keys take the per-dataset defaults
        "window": None,
        "normalize": True,
        # keep all failed devices and as many censored ones (training split only)
        "balance": False,
        "balance_seed": 0,
        "validation_fraction": 0.3,
        # share of devices held out for testing when the source has no test split
        "test_fraction": 0.2,
        "split_seed": 0,
    },
    "synth": {"n_devices": 2000, "d": 8, "seed": 0, **SynthConfig().to_dict()},
    "model": {
        "kind": "mtl",
        # layer sizes: a preset name (cmapss | backblaze) or explicit layer lists under ``arch``
        "preset": None,
        "dropout": 0.1,
        "arch": None,
        "train": TrainConfig().to_dict(),
    },
    "evaluation": {
        # failure horizon tau in window units; null means (tau_f + tau_e) / w
        "horizon": None,
        "bins": 6,
    },
    "output_dir": "runs/default",
}

_WINDOW_DEFAULTS = {"cmapss": WindowingConfig.cmapss, "backblaze": WindowingConfig.backblaze,
                    "synth": lambda: WindowingConfig(5, 5, 5, 10, 500)}


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigurationError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b.c=value`` with the value parsed as YAML."""
    if "=" not in text:
        raise ConfigurationError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    return key.strip().split("."), yaml.safe_load(raw)


def apply_overrides(cfg: dict, overrides) -> dict:
    cfg = copy.deepcopy(cfg)
    for text in overrides or ():
        keys, value = parse_override(text)
        node = cfg
        for k in keys[:-1]:
            if not isinstance(node.get(k), dict):
                if k in node and node[k] is None and k in ("window", "arch"):
                    node[k] = {}
                else:
                    raise ConfigurationError(f"unknown configuration key {'.'.join(keys)!r}")
            node = node[k]
        if keys[-1] not in node and not _open_block(keys):
            raise ConfigurationError(f"unknown configuration key {'.'.join(keys)!r}")
        node[keys[-1]] = value
    return cfg


def _open_block(keys) -> bool:
    return len(keys) >= 3 and keys[:2] in (["dataset", "window"], ["model", "arch"])


def load_config(path=None, overrides=()) -> dict:
    """Defaults, then the YAML file, then ``key=value`` overrides; resolved and validated."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"configuration file {path} not found")
        with open(path) as fh:
            try:
                raw = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise ConfigurationError(f"{path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
    cfg = _merge(DEFAULTS, raw)
    cfg = apply_overrides(cfg, overrides)
    return resolve(cfg)


def resolve(cfg: dict) -> dict:
    """Fill derived defaults in place of nulls and check every block."""
    ds, model, ev = cfg["dataset"], cfg["model"], cfg["evaluation"]
    if ds["kind"] not in DATASET_KINDS:
        raise ConfigurationError(f"dataset.kind must be one of {DATASET_KINDS}")
    base = _WINDOW_DEFAULTS[ds["kind"]]().to_dict()
    if ds["window"] is None:
        ds["window"] = base
    elif isinstance(ds["window"], dict):
        ds["window"] = _merge(base, ds["window"], "dataset.window.")
    else:
        raise ConfigurationError("dataset.window must be a mapping or null")
    window = windowing(cfg)
    for key in ("validation_fraction", "test_fraction"):
        if not 0.0 <= float(ds[key]) < 1.0:
            raise ConfigurationError(f"dataset.{key} must be in [0, 1)")
    if model["kind"] not in MODEL_KINDS:
        raise ConfigurationError(f"model.kind must be one of {MODEL_KINDS}")
    if model["arch"] is None:
        name = model["preset"] or ("backblaze" if ds["kind"] == "backblaze" else "cmapss")
        model["preset"] = name
        model["arch"] = preset(name, model["kind"], float(model["dropout"])).to_dict()
    architecture(cfg).validate(model["kind"])
    model["train"] = _merge(TrainConfig().to_dict(), model["train"], "model.train.")
    train_config(cfg)
    if model["kind"] == "dw" and not model["train"]["pretrain"]:
        raise ConfigurationError("the Weibull network needs its pre-training phase "
                                 "(model.train.pretrain must be true)")
    if ev["horizon"] is None:
        ev["horizon"] = window.horizon
    if not (float(ev["horizon"]) > 0 and math.isfinite(float(ev["horizon"]))):
        raise ConfigurationError("evaluation.horizon must be positive")
    if int(ev["bins"]) < 1:
        raise ConfigurationError("evaluation.bins must be >= 1")
    synth_config(cfg)
    return cfg


def windowing(cfg: dict) -> WindowingConfig:
    try:
        return WindowingConfig(**cfg["dataset"]["window"])
    except TypeError as exc:
        raise ConfigurationError(f"dataset.window: {exc}") from None


def architecture(cfg: dict) -> ArchitectureSpec:
    try:
        return ArchitectureSpec.from_dict(cfg["model"]["arch"])
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"model.arch: {exc}") from None


def train_config(cfg: dict) -> TrainConfig:
    try:
        return TrainConfig.from_dict(cfg["model"]["train"])
    except TypeError as exc:
        raise ConfigurationError(f"model.train: {exc}") from None


def synth_config(cfg: dict) -> SynthConfig:
    s = {k: v for k, v in cfg["synth"].items() if k not in ("n_devices", "d", "seed")}
    if int(cfg["synth"]["n_devices"]) < 1 or int(cfg["synth"]["d"]) < 1:
        raise ConfigurationError("synth.n_devices and synth.d must be >= 1")
    try:
        return SynthConfig(**s)
    except TypeError as exc:
        raise ConfigurationError(f"synth: {exc}") from None


def dump_config(cfg: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write("# fully resolved configuration; rerun with --config on this file\n")
        yaml.safe_dump(cfg, fh, sort_keys=False, default_flow_style=False)
