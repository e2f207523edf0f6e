"""Training objectives. All data terms are averaged over the batch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rulfp.diffcore import Tensor
from rulfp.errors import DataError
from rulfp.pipeline.types import WindowSet
from rulfp.weibull import expected_rul_t, weibull_nll


@dataclass
class LossWeights:
    alpha_f: float = 1000.0
    alpha_1: float = 1.0
    alpha_2: float = 1.0
    alpha_3: float = 1e-5
    hinge: bool = True


def check_labels(batch: WindowSet) -> None:
    failed = ~batch.censored
    if np.any(failed & ~np.isfinite(batch.t_g)):
        raise DataError("failed-device window without an RUL target")
    if np.any(batch.censored & ~np.isfinite(batch.censor_remaining)):
        raise DataError("censored window without censor_remaining")
    if np.any((batch.f != 0) & (batch.f != 1)):
        raise DataError("failure labels must be 0/1")


def classification_loss(logp: Tensor, f: np.ndarray, alpha_f: float) -> Tensor:
    """Class-weighted cross-entropy; ``logp`` holds log-probabilities (n, 2)."""
    f = np.asarray(f)
    weights = np.stack([(f == 0).astype(float), alpha_f * (f == 1)], axis=1)
    return -(logp * weights).sum() / float(len(f))


def regression_loss(rul_hat: Tensor, batch: WindowSet, hinge: bool = True) -> Tensor:
    """Squared error on failed windows plus max(censor_remaining - rul_hat, 0) on censored ones."""
    n = float(len(batch))
    failed = ~batch.censored
    target = np.where(failed, batch.t_g, 0.0)
    sq = ((rul_hat - target) * failed.astype(float)) ** 2
    total = sq.sum()
    if hinge and np.any(batch.censored):
        gap = (np.where(batch.censored, batch.censor_remaining, 0.0) - rul_hat).relu()
        total = total + (gap * batch.censored.astype(float)).sum()
    return total / n


def mtl_loss(batch: WindowSet, predictions: dict, weights: LossWeights, l2: Tensor | float = 0.0):
    """alpha_1 * L_c + alpha_2 * L_r + alpha_3 * ||theta||^2; returns ``(J, parts)``."""
    check_labels(batch)
    lc = classification_loss(predictions["fp"], batch.f, weights.alpha_f)
    lr = regression_loss(predictions["rul"], batch, weights.hinge)
    J = weights.alpha_1 * lc + weights.alpha_2 * lr + weights.alpha_3 * l2
    return J, {"L_c": float(lc.data), "L_r": float(lr.data), "l2": float(np.asarray(
        l2.data if isinstance(l2, Tensor) else l2))}


def nll_events(batch: WindowSet):
    """Event indicators and times for the likelihood; zero-length censored windows are dropped."""
    failed = ~batch.censored
    keep = failed | (batch.censor_remaining > 0)
    t = np.where(failed, batch.t_g, batch.censor_remaining)
    return keep, t[keep], failed[keep].astype(float)


def dw_nll_loss(lam: Tensor, k: Tensor, batch: WindowSet, use_poly: bool = True,
                min_tg: float = 0.5, alpha: float = 0.0, l2: Tensor | float = 0.0):
    check_labels(batch)
    keep, t, delta = nll_events(batch)
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        raise DataError("no usable windows for the likelihood")
    if idx.size != len(batch):
        lam, k = lam[idx], k[idx]
    nll = weibull_nll(t, delta, lam, k, use_poly=use_poly, min_tg=min_tg, reduction="mean")
    return nll + alpha * l2, {"nll": float(nll.data)}


def dw_pretrain_loss(lam: Tensor, k: Tensor, batch: WindowSet, hinge: bool = True,
                     alpha: float = 0.0, l2: Tensor | float = 0.0):
    """Regression loss on the Weibull mean lambda * Gamma(1 + 1/k)."""
    check_labels(batch)
    rul = expected_rul_t(lam, k)
    lr = regression_loss(rul, batch, hinge)
    return lr + alpha * l2, {"L_r": float(lr.data)}
