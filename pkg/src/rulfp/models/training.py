"""Mini-batch training with early stopping for the four networks."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from rulfp.diffcore import OptimizerState, adam_update, grad, l2_penalty
from rulfp.errors import ConfigurationError, DataError, DomainError, NumericalError, TrainingDiverged
from rulfp.metrics import pr_auc, rmse
from rulfp.models.arch import Model
from rulfp.models.losses import (LossWeights, check_labels, classification_loss, dw_nll_loss,
                                 dw_pretrain_loss, mtl_loss, regression_loss)
from rulfp.models.predict import frozen_leaves, predict_arrays
from rulfp.pipeline.types import WindowSet
from rulfp.weibull import transform_t

log = logging.getLogger(__name__)

DEFAULT_METRIC = {"mtl": "auc_pr", "fp": "auc_pr", "rul": "rmse", "dw": "auc_pr",
                  "dw_pretrain": "rmse"}


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 100
    pretrain_max_epochs: int = 100
    patience: int = 10
    alpha_f: float = 1000.0
    alpha_1: float = 1.0
    alpha_2: float = 1.0
    alpha_3: float = 1e-5
    alpha_dw: float = 1e-5
    hinge: bool = True
    use_poly: bool = True
    min_tg: float = 0.5
    pretrain: bool = True
    early_stop: str | None = None
    seed: int = 0

    def __post_init__(self):
        if min(self.alpha_f, self.alpha_1, self.alpha_2, self.alpha_3, self.alpha_dw) < 0:
            raise ConfigurationError("loss weights must be nonnegative")
        if self.patience < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigurationError("need patience >= 1, batch_size >= 1, lr > 0")
        if self.early_stop not in (None, "auc_pr", "rmse", "loss"):
            raise ConfigurationError(f"unknown early-stop metric {self.early_stop!r}")

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.alpha_f, self.alpha_1, self.alpha_2, self.alpha_3, self.hinge)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown training keys {sorted(unknown)}")
        return cls(**d)


# ----------------------------------------------------------------- objectives
def network_outputs(model: Model, leaves, X, train=False, rng=None) -> dict:
    out = model.forward(leaves, X, train, rng)
    res = {}
    if "fp" in out:
        res["fp"] = out["fp"].log_softmax(axis=1)
    if "rul" in out:
        res["rul"] = out["rul"].reshape(-1)
    if "weibull" in out:
        res["lam"], res["k"] = transform_t(out["weibull"])
    return res


def objective(model: Model, phase: str, leaves, batch: WindowSet, cfg: TrainConfig,
              train: bool = False, rng=None):
    """Scalar training loss for ``phase`` plus a dict of its components."""
    preds = network_outputs(model, leaves, batch.X, train, rng)
    l2 = l2_penalty(leaves, model.params)
    w = cfg.weights
    if phase == "mtl":
        return mtl_loss(batch, preds, w, l2)
    check_labels(batch)
    if phase == "fp":
        lc = classification_loss(preds["fp"], batch.f, w.alpha_f)
        return w.alpha_1 * lc + w.alpha_3 * l2, {"L_c": float(lc.data)}
    if phase == "rul":
        lr = regression_loss(preds["rul"], batch, w.hinge)
        return lr + w.alpha_3 * l2, {"L_r": float(lr.data)}
    if phase == "dw_pretrain":
        return dw_pretrain_loss(preds["lam"], preds["k"], batch, w.hinge, cfg.alpha_dw, l2)
    if phase == "dw":
        return dw_nll_loss(preds["lam"], preds["k"], batch, cfg.use_poly, cfg.min_tg,
                           cfg.alpha_dw, l2)
    raise ConfigurationError(f"unknown training phase {phase!r}")


# -------------------------------------------------------------- validation
def validation_score(model: Model, phase: str, metric: str, val: WindowSet, cfg: TrainConfig):
    """Return ``(value, higher_is_better)``."""
    if metric == "auc_pr":
        arr = predict_arrays(model, val.X)
        try:
            return pr_auc(arr["fp_prob"], val.f)[1], True
        except DomainError:
            log.warning("validation set has no positive windows; using validation loss")
            metric = "loss"
    if metric == "rmse":
        known = np.isfinite(val.t_g)
        if not known.any():
            raise DataError("RMSE early stopping needs failed-device validation windows")
        arr = predict_arrays(model, val.X[known])
        return rmse(arr["rul_hat"], val.t_g[known]), False
    loss, _ = objective(model, phase, frozen_leaves(model), val, cfg)
    return float(loss.data), False


# -------------------------------------------------------------------- loop
def fit(model: Model, phase: str, train: WindowSet, val: WindowSet | None, cfg: TrainConfig,
        max_epochs: int | None = None, history: list | None = None) -> tuple[Model, list]:
    """Adam on ``phase``'s objective; keeps the best validation checkpoint.

    Raises :class:`TrainingDiverged` carrying the last good parameters when the
    loss stops being finite.
    """
    if len(train) == 0:
        raise DataError("no training windows")
    history = [] if history is None else history
    max_epochs = cfg.max_epochs if max_epochs is None else max_epochs
    metric = cfg.early_stop if (cfg.early_stop and phase != "dw_pretrain") else DEFAULT_METRIC[phase]
    rng = np.random.default_rng([cfg.seed, _PHASE_IDS[phase]])
    state = OptimizerState(lr=cfg.lr)
    best_params, best_score, since_best = model.params.copy(), None, 0
    have_val = val is not None and len(val) > 0

    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(len(train))
        sums: dict[str, float] = {}
        n_batches = 0
        for s in range(0, len(order), cfg.batch_size):
            batch = train.subset(order[s:s + cfg.batch_size])
            leaves = model.params.leaves()
            try:
                loss, parts = objective(model, phase, leaves, batch, cfg, train=True, rng=rng)
                grads = grad(loss, leaves)
                new_params = adam_update(model.params, grads, state)
            except NumericalError as exc:
                model.params = best_params
                raise TrainingDiverged(f"{phase} epoch {epoch}: {exc}", best_params, history) from exc
            model.params = new_params
            sums["loss"] = sums.get("loss", 0.0) + float(loss.data)
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v
            n_batches += 1
        row = {"phase": phase, "epoch": epoch}
        row.update({k: v / n_batches for k, v in sums.items()})
        if have_val:
            score, higher = validation_score(model, phase, metric, val, cfg)
            if not np.isfinite(score):
                model.params = best_params
                raise TrainingDiverged(f"{phase} epoch {epoch}: validation metric not finite",
                                       best_params, history)
            row["val_metric"] = metric
            row["val_value"] = score
            improved = best_score is None or (score > best_score if higher else score < best_score)
            if improved:
                best_score, best_params, since_best = score, model.params.copy(), 0
            else:
                since_best += 1
            row["best"] = int(improved)
        else:
            best_params = model.params.copy()
        history.append(row)
        log.debug("%s", row)
        if have_val and since_best >= cfg.patience:
            break
    model.params = best_params
    return model, history


_PHASE_IDS = {"mtl": 1, "fp": 2, "rul": 3, "dw_pretrain": 4, "dw": 5}


def train(model: Model, train_ws: WindowSet, val_ws: WindowSet | None, cfg: TrainConfig):
    """Train an MTL, FP-RNN or RUL-RNN network; returns ``(model, history)``."""
    if model.kind not in ("mtl", "fp", "rul"):
        raise ConfigurationError("use dw_pretrain / dw_train for the Weibull network")
    if model.kind in ("mtl", "rul") and not np.any(np.isfinite(train_ws.t_g)):
        raise DataError("RUL objective needs failed-device windows")
    return fit(model, model.kind, train_ws, val_ws, cfg)


def dw_pretrain(model: Model, train_ws: WindowSet, val_ws: WindowSet | None, cfg: TrainConfig,
                history: list | None = None):
    """Regression warm-up on the Weibull mean, early-stopped on validation RMSE."""
    if model.kind != "dw":
        raise ConfigurationError("dw_pretrain applies to the Weibull network only")
    if not np.any(~train_ws.censored):
        raise ConfigurationError("pre-training needs failed-device windows")
    model, history = fit(model, "dw_pretrain", train_ws, val_ws, cfg,
                         max_epochs=cfg.pretrain_max_epochs, history=history)
    model.pretrained = True
    return model, history


def dw_train(model: Model, train_ws: WindowSet, val_ws: WindowSet | None, cfg: TrainConfig,
             history: list | None = None):
    """Likelihood phase; refuses to run before :func:`dw_pretrain`."""
    if model.kind != "dw":
        raise ConfigurationError("dw_train applies to the Weibull network only")
    if not model.pretrained:
        raise ConfigurationError("the Weibull network must be pre-trained before the likelihood phase")
    return fit(model, "dw", train_ws, val_ws, cfg, history=history)


def train_any(model: Model, train_ws: WindowSet, val_ws: WindowSet | None, cfg: TrainConfig):
    """Full schedule for any kind (pre-training then likelihood for DW)."""
    if model.kind != "dw":
        return train(model, train_ws, val_ws, cfg)
    if not cfg.pretrain:
        raise ConfigurationError("the Weibull network cannot be trained without its pre-training phase")
    model, history = dw_pretrain(model, train_ws, val_ws, cfg)
    return dw_train(model, train_ws, val_ws, cfg, history)
