from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rulfp.diffcore import Tensor
from rulfp.metrics import (EvalReport, default_edges, pr_auc, rmse, roc_auc, rul_confusion,
                           spearman)
from rulfp.models.arch import Model
from rulfp.pipeline.types import WindowSet
from rulfp.weibull import WeibullParams, expected_rul, failure_prob, transform_t


@dataclass
class PredictionRecord:
    device_id: str
    end_time: int
    fp_prob: float
    rul_hat: float | None
    weibull: WeibullParams | None = None


def frozen_leaves(model: Model) -> dict[str, Tensor]:
    return {k: Tensor(v) for k, v in model.params.items()}


def predict_arrays(model: Model, X: np.ndarray, horizon: float | None = None,
                   chunk: int = 2048) -> dict[str, np.ndarray]:
    """Evaluation-mode outputs as arrays: ``fp_prob``, ``rul_hat`` and for DW ``lam``/``k``.

    RUL values are clipped to [0, max_rul]. The RUL-only network scores
    failure as ``1 - rul_hat / max_rul``, which ranks windows exactly opposite
    to ``rul_hat``.
    """
    horizon = model.horizon if horizon is None else float(horizon)
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    leaves = frozen_leaves(model)
    parts: dict[str, list] = {"fp_prob": [], "rul_hat": [], "lam": [], "k": []}
    for s in range(0, n, chunk):
        out = model.forward(leaves, X[s:s + chunk], train=False)
        if "weibull" in out:
            lam, k = transform_t(out["weibull"])
            p = WeibullParams(lam.data, k.data)
            parts["lam"].append(lam.data)
            parts["k"].append(k.data)
            parts["fp_prob"].append(np.asarray(failure_prob(p, horizon)).reshape(-1))
            parts["rul_hat"].append(np.asarray(expected_rul(p)).reshape(-1))
        if "fp" in out:
            parts["fp_prob"].append(np.exp(out["fp"].log_softmax(axis=1).data[:, 1]))
        if "rul" in out:
            parts["rul_hat"].append(out["rul"].data.reshape(-1))
    res = {}
    for key, vals in parts.items():
        if vals:
            res[key] = np.concatenate(vals)
    if "rul_hat" in res:
        res["rul_hat"] = np.clip(res["rul_hat"], 0.0, model.max_rul)
        if model.kind == "rul":
            res["fp_prob"] = 1.0 - res["rul_hat"] / model.max_rul
    if n == 0:
        res = {k: np.zeros(0) for k in ("fp_prob", "rul_hat")}
        if model.kind == "fp":
            del res["rul_hat"]
    return res


def predict(model: Model, windows: WindowSet, horizon: float | None = None) -> list[PredictionRecord]:
    arr = predict_arrays(model, windows.X, horizon)
    out = []
    for i in range(len(windows)):
        wb = WeibullParams(float(arr["lam"][i]), float(arr["k"][i])) if "lam" in arr else None
        out.append(PredictionRecord(
            str(windows.device_id[i]), int(windows.end_time[i]), float(arr["fp_prob"][i]),
            float(arr["rul_hat"][i]) if "rul_hat" in arr else None, wb))
    return out


def evaluate(model: Model, windows: WindowSet, window_size: int, n_bins: int = 6,
             horizon: float | None = None):
    """Score ``windows`` and return ``(EvalReport, curves)``.

    RMSE and the confusion matrix are in raw time units (window units times
    ``window_size``) over windows with a known RUL target.
    """
    arr = predict_arrays(model, windows.X, horizon)
    report = EvalReport(model_kind=model.kind, n_windows=len(windows))
    curves = {}
    labels = windows.f
    if labels.size and 0 < labels.sum() < labels.size:
        (fpr, tpr, thr), report.auc_roc = roc_auc(arr["fp_prob"], labels)
        (rec, prec, thr_pr), report.auc_pr = pr_auc(arr["fp_prob"], labels)
        curves["roc"] = np.column_stack([fpr, tpr, thr])
        curves["pr"] = np.column_stack([rec, prec, thr_pr])
    if model.kind != "fp":
        known = np.isfinite(windows.t_g)
        if known.any():
            pred = arr["rul_hat"][known] * window_size
            true = windows.t_g[known] * window_size
            report.rmse = rmse(pred, true)
            edges = default_edges(model.max_rul * window_size, n_bins)
            report.confusion = rul_confusion(pred, true, edges).tolist()
            report.confusion_edges = edges.tolist()
        if len(windows) >= 2 and np.ptp(arr["fp_prob"]) > 0 and np.ptp(arr["rul_hat"]) > 0:
            report.spearman_consistency = spearman(arr["fp_prob"], arr["rul_hat"])
    return report, curves
