"""RMSE, ROC/PR areas, Spearman consistency and RUL-binned confusion matrices."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from rulfp.errors import DomainError

log = logging.getLogger(__name__)


@dataclass
class EvalReport:
    model_kind: str
    n_windows: int
    rmse: float | None = None
    auc_roc: float | None = None
    auc_pr: float | None = None
    spearman_consistency: float | None = None
    confusion: list | None = None
    confusion_edges: list | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float).reshape(-1)
    t = np.asarray(targets, dtype=float).reshape(-1)
    if p.size == 0 or p.shape != t.shape:
        raise DomainError("rmse needs equal, nonzero lengths")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def _sweep(scores, labels):
    """Cumulative (tp, fp) after each distinct score, highest score first."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise DomainError("scores and labels differ in length")
    if not np.all(np.isfinite(s)):
        raise DomainError("scores must be finite")
    if np.any((y != 0) & (y != 1)):
        raise DomainError("labels must be 0/1")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order].astype(float)
    last_of_group = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[last_of_group]
    fp = np.cumsum(1.0 - y)[last_of_group]
    return tp, fp, s[last_of_group]


def roc_auc(scores, labels):
    """Return ``((fpr, tpr, thresholds), area)``; tied scores move together."""
    tp, fp, thr = _sweep(scores, labels)
    P, N = tp[-1], fp[-1]
    if P == 0 or N == 0:
        raise DomainError("ROC needs both classes")
    tpr = np.r_[0.0, tp / P]
    fpr = np.r_[0.0, fp / N]
    area = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return (fpr, tpr, np.r_[np.inf, thr]), area


def pr_auc(scores, labels):
    """Return ``((recall, precision, thresholds), average_precision)``.

    The area is sum_i (R_i - R_{i-1}) * P_i over distinct score thresholds.
    """
    tp, fp, thr = _sweep(scores, labels)
    P = tp[-1]
    if P == 0:
        raise DomainError("PR curve needs at least one positive")
    precision = tp / (tp + fp)
    recall = tp / P
    area = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return (np.r_[0.0, recall], np.r_[1.0, precision], np.r_[np.inf, thr]), area


def spearman(x, y) -> float:
    """Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape or x.size < 2:
        raise DomainError("spearman needs two equal-length inputs of size >= 2")
    rx, ry = rankdata(x), rankdata(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    denom = np.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if denom == 0:
        raise DomainError("spearman is undefined for a constant input")
    return float(np.clip(np.sum(rx * ry) / denom, -1.0, 1.0))


def default_edges(max_rul: float, n_bins: int = 6) -> np.ndarray:
    return np.linspace(0.0, max_rul, n_bins + 1)


def rul_confusion(pred, truth, edges) -> np.ndarray:
    """Counts with rows = true RUL bin and columns = predicted RUL bin.

    Bins are half-open ``[e_i, e_{i+1})`` except the last, which is closed.
    Values outside the edges are clipped into the boundary bins and logged.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("bin edges must be strictly increasing")
    pred = np.asarray(pred, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if pred.shape != truth.shape:
        raise DomainError("pred and truth differ in length")
    n_bins = edges.size - 1

    def assign(v):
        outside = int(np.sum((v < edges[0]) | (v > edges[-1])))
        idx = np.searchsorted(edges, np.clip(v, edges[0], edges[-1]), side="right") - 1
        return np.clip(idx, 0, n_bins - 1), outside

    ti, t_out = assign(truth)
    pi, p_out = assign(pred)
    if t_out or p_out:
        log.warning("confusion: clipped %d true and %d predicted values into boundary bins",
                    t_out, p_out)
    mat = np.zeros((n_bins, n_bins), dtype=np.int64)
    np.add.at(mat, (ti, pi), 1)
    return mat
