"""Finite-difference checks of every differentiable expression the models train on.

Each check builds a small random problem and compares reverse-mode gradients
with central differences through :func:`rulfp.diffcore.grad_check`, reporting
the worst per-tensor relative error ``||a - n|| / max(||a||, ||n||)``. Hinge
targets are placed at least ``HINGE_MARGIN`` away from the kink so the
finite difference never straddles it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from rulfp.diffcore import (LayerSpec, ModelParams, fc_forward, grad_check, init_dense, init_lstm,
                            lstm_sequence, lstm_step)
from rulfp.models.arch import build_model, small_arch
from rulfp.models.training import TrainConfig, objective
from rulfp.pipeline.types import WindowSet
from rulfp.weibull import expected_rul_t, transform_t, weibull_nll

TOLERANCE = 1e-5
HINGE_MARGIN = 0.5


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < TOLERANCE


def _batch(rng, n, w, d, rul_hat=None) -> WindowSet:
    """Mixed failed/censored batch; censored targets sit away from the hinge kink."""
    censored = np.arange(n) % 3 == 2
    t_g = np.where(censored, np.nan, rng.uniform(0.5, 6.0, n))
    if rul_hat is None:
        rem = rng.uniform(0.5, 6.0, n)
    else:
        # half the censored windows active (target well above the prediction), half inactive
        gap = np.where(np.arange(n) % 2 == 0, 1.0, -1.0) * rng.uniform(HINGE_MARGIN, 2.0, n)
        rem = np.maximum(rul_hat + gap, 0.1)
    f = np.zeros(n, dtype=np.int64)
    f[~censored & (t_g < 2.0)] = 1
    f[0] = 1
    censored[0] = False
    t_g[0] = 1.0
    return WindowSet(np.array([f"d{i}" for i in range(n)]), np.arange(n) * w + w,
                     rng.standard_normal((n, w, d)), f, t_g, censored,
                     np.where(censored, rem, np.nan), {})


def _layer_checks(rng):
    d, H, w, n = 3, 4, 4, 3
    p_lstm = ModelParams()
    init_lstm(p_lstm, "l", d, H, rng)
    p_lstm["l.b"] = rng.standard_normal(p_lstm["l.b"].shape) * 0.5
    x = rng.standard_normal((n, w, d))
    h0, c0 = rng.standard_normal((n, H)), rng.standard_normal((n, H))
    yield "lstm_step", lambda L: _sumsq(*lstm_step(x[:, 0], h0, c0, L, "l")), p_lstm
    yield "lstm_sequence", lambda L: (lstm_sequence(x, L, "l") ** 2).sum(), p_lstm

    for kind in ("elu", "linear"):
        p = ModelParams()
        init_dense(p, "fc", 5, 4, rng)
        p["fc.b"] = rng.standard_normal(4) * 0.3
        xin = rng.standard_normal((6, 5))
        spec = LayerSpec(kind, 4)
        yield f"fc_{kind}", (lambda L, spec=spec, xin=xin:
                             (fc_forward(xin, spec, L, "fc") ** 2).sum()), p

    p = ModelParams()
    p.add("o", rng.standard_normal((5, 2)))
    yield "log_softmax", lambda L: (L["o"].log_softmax(axis=1) * np.array([[0.3, 1.7]])).sum(), p
    yield "weibull_transform", lambda L: _sumsq(*transform_t(L["o"])), p
    yield "expected_rul", lambda L: expected_rul_t(*transform_t(L["o"] * 0.5 + 1.0)).sum(), p


def _sumsq(a, b):
    return (a ** 2).sum() + (b * 0.7).sum()


def _model_checks(rng):
    n, w, d = 9, 3, 3
    cfg = TrainConfig(alpha_f=5.0, alpha_3=1e-3, alpha_dw=1e-3, min_tg=0.05)

    dw = build_model("dw", small_arch("dw"), d, int(rng.integers(1 << 30)), 1.0, 50.0)
    batch = _batch(rng, n, w, d)
    for poly in (True, False):
        c = TrainConfig(**{**cfg.to_dict(), "use_poly": poly})
        name = "dw_nll_poly" if poly else "dw_nll_exact"
        yield name, (lambda L, c=c: objective(dw, "dw", L, batch, c)[0]), dw.params

    # hinge targets are positioned relative to the network's own predictions
    lam, k = transform_t(dw.forward(dw.params.leaves(), batch.X)["weibull"])
    pre_batch = _batch(rng, n, w, d, rul_hat=expected_rul_t(lam, k).data)
    pre_batch.X = batch.X
    yield "dw_pretrain_loss", (lambda L: objective(dw, "dw_pretrain", L, pre_batch, cfg)[0]), \
        dw.params

    mtl = build_model("mtl", small_arch("mtl"), d, int(rng.integers(1 << 30)), 1.0, 50.0)
    X = rng.standard_normal((n, w, d))
    rul = mtl.forward(mtl.params.leaves(), X)["rul"].data.reshape(-1)
    mb = _batch(rng, n, w, d, rul_hat=rul)
    mb.X = X
    yield "mtl_loss", (lambda L: objective(mtl, "mtl", L, mb, cfg)[0]), mtl.params

    for kind in ("fp", "rul"):
        m = build_model(kind, small_arch(kind), d, int(rng.integers(1 << 30)), 1.0, 50.0)
        b = mb
        if kind == "rul":
            r = m.forward(m.params.leaves(), X)["rul"].data.reshape(-1)
            b = _batch(rng, n, w, d, rul_hat=r)
            b.X = X
        yield f"{kind}_loss", (lambda L, m=m, b=b, kind=kind: objective(m, kind, L, b, cfg)[0]), \
            m.params

    # the raw likelihood on its own, with per-sample parameters as leaves
    p = ModelParams()
    p.add("lam", rng.uniform(2.0, 8.0, 7))
    p.add("k", rng.uniform(0.8, 2.5, 7))
    t = rng.uniform(0.5, 6.0, 7)
    delta = (np.arange(7) % 2).astype(float)
    yield "weibull_nll_poly", lambda L: weibull_nll(t, delta, L["lam"], L["k"], use_poly=True), p


def gradcheck_suite(seed: int = 0, corrupt: float = 0.0,
                    epsilon: float = 1e-6, order: int = 2) -> list[CheckResult]:
    """Run every check; ``corrupt`` perturbs analytic gradients (detection test hook)."""
    rng = np.random.default_rng(seed)
    results = []
    for source in (_layer_checks, _model_checks):
        for name, fn, params in source(rng):
            start = time.perf_counter()
            err = grad_check(fn, params, epsilon=epsilon, corrupt=corrupt, order=order,
                             per="tensor")
            results.append(CheckResult(name, err, time.perf_counter() - start))
    return results


CHECK_NAMES: tuple[str, ...] = (
    "lstm_step", "lstm_sequence", "fc_elu", "fc_linear", "log_softmax", "weibull_transform",
    "expected_rul", "dw_nll_poly", "dw_nll_exact", "dw_pretrain_loss", "mtl_loss", "fp_loss",
    "rul_loss", "weibull_nll_poly",
)

__all__ = ["CHECK_NAMES", "CheckResult", "HINGE_MARGIN", "TOLERANCE", "gradcheck_suite"]
