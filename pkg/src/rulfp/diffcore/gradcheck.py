from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from rulfp.diffcore.params import ModelParams
from rulfp.diffcore.tensor import Tensor, grad


def numeric_grad(fn: Callable[[Mapping[str, Tensor]], Tensor], params: ModelParams,
                 epsilon: float = 1e-6, coords: Mapping[str, np.ndarray] | None = None,
                 order: int = 2) -> dict[str, np.ndarray]:
    """Central finite differences of ``fn`` at ``params``.

    ``order=2`` is the two-point difference (error O(eps^2)); ``order=4`` the
    five-point stencil (error O(eps^4)), which permits a larger ``eps`` and so
    less floating-point cancellation. ``coords`` optionally restricts each
    parameter to a set of flat indices; unlisted entries are returned as NaN.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    stencil = {2: ((1, 0.5), (-1, -0.5)),
               4: ((2, -1 / 12), (1, 8 / 12), (-1, -8 / 12), (-2, 1 / 12))}[order]
    out = {}
    base = {k: v.copy() for k, v in params.items()}
    for name, arr in base.items():
        g = np.full(arr.size, np.nan)
        flat = arr.reshape(-1)
        idx = range(arr.size) if coords is None else coords.get(name, ())
        for i in idx:
            work = flat.copy()
            total = 0.0
            for step, weight in stencil:
                work[i] = flat[i] + step * epsilon
                total += weight * _eval(fn, base, name, work.reshape(arr.shape))
            g[i] = total / epsilon
        out[name] = g.reshape(arr.shape)
    return out


def _eval(fn, base, name, value) -> float:
    leaves = {k: Tensor(value if k == name else v) for k, v in base.items()}
    return float(fn(leaves).data)


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    a, n = np.abs(analytic), np.abs(numeric)
    err = np.abs(analytic - numeric) / np.maximum(np.maximum(a, n), 1e-12)
    return np.where(np.isfinite(err), err, np.inf)


def grad_check(fn: Callable[[Mapping[str, Tensor]], Tensor], params: ModelParams,
               epsilon: float = 1e-6, max_coords: int | None = None,
               rng: np.random.Generator | None = None,
               corrupt: float = 0.0, order: int = 2, per: str = "element") -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``fn`` maps a dict of leaves to a scalar tensor. With ``per="element"``
    the error is taken entry by entry; with ``per="tensor"`` it is
    ``||a - n|| / max(||a||, ||n||)`` for each parameter tensor, which stays
    meaningful when a tensor holds entries whose gradients are near zero and
    therefore swamped by floating-point cancellation in the finite difference.
    With ``max_coords`` only that many randomly chosen entries per parameter
    are compared. ``corrupt`` is added to the analytic gradient (test hook for
    the detection path). Non-finite comparisons count as ``inf``.
    """
    if per not in ("element", "tensor"):
        raise ValueError("per must be 'element' or 'tensor'")
    leaves = params.leaves()
    analytic = grad(fn(leaves), leaves)
    coords = None
    if max_coords is not None:
        rng = rng or np.random.default_rng(0)
        coords = {k: rng.choice(v.size, size=min(max_coords, v.size), replace=False)
                  for k, v in params.items()}
    numeric = numeric_grad(fn, params, epsilon, coords, order)
    worst = 0.0
    for name in params:
        a = analytic[name].reshape(-1) + corrupt
        n = numeric[name].reshape(-1)
        mask = ~np.isnan(n) if coords is not None else slice(None)
        a, n = a[mask], n[mask]
        if per == "tensor" and a.size:
            scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
            err = np.linalg.norm(a - n) / scale
            errs = np.array([err if np.isfinite(err) else np.inf])
        else:
            errs = relative_errors(a, n)
        if errs.size:
            worst = max(worst, float(errs.max()))
    return worst
