"""Weibull time-to-event maths.

Times are in window units throughout. Scalar and array arguments are both
accepted; the ``*_t`` helpers operate on :class:`~rulfp.diffcore.Tensor`
values so they can sit inside a training graph.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from rulfp.diffcore.tensor import Tensor, as_tensor, elementwise
from rulfp.errors import DomainError

log = logging.getLogger(__name__)

K_FLOOR = 1e-2

_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


@dataclass(frozen=True)
class WeibullParams:
    lam: float | np.ndarray
    k: float | np.ndarray

    def __post_init__(self):
        lam, k = np.asarray(self.lam, dtype=float), np.asarray(self.k, dtype=float)
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(k))):
            raise DomainError("Weibull parameters must be finite")
        if np.any(lam <= 0) or np.any(k <= 0):
            raise DomainError(f"Weibull parameters must be positive (lam={self.lam}, k={self.k})")


@dataclass(frozen=True)
class EventSample:
    t_g: float
    delta: int

    def __post_init__(self):
        if self.t_g < 0:
            raise DomainError(f"t_g must be nonnegative, got {self.t_g}")
        if self.delta not in (0, 1):
            raise DomainError(f"delta must be 0 or 1, got {self.delta}")


def _positive(x, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError(f"{what} must be > 0")
    return x


# ----------------------------------------------------------------- gamma / psi
def _gamma_lanczos(x: np.ndarray) -> np.ndarray:
    x = x - 1.0
    acc = np.full_like(x, _LANCZOS[0])
    for i in range(1, len(_LANCZOS)):
        acc = acc + _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * np.exp((x + 0.5) * np.log(t) - t) * acc


def gamma_fn(x):
    """Gamma function for positive arguments (Lanczos, g=7, 9 terms)."""
    arr = _positive(x, "gamma argument")
    small = arr < 0.5
    out = np.empty_like(arr)
    if np.any(~small):
        out[~small] = _gamma_lanczos(arr[~small])
    if np.any(small):
        xs = arr[small]
        out[small] = math.pi / (np.sin(math.pi * xs) * _gamma_lanczos(1.0 - xs))
    return out if out.ndim else float(out)


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0: upward recurrence then the asymptotic series."""
    arr = _positive(x, "digamma argument").copy()
    acc = np.zeros_like(arr)
    while np.any(arr < 6.0):
        low = arr < 6.0
        acc[low] -= 1.0 / arr[low]
        arr[low] += 1.0
    inv2 = 1.0 / (arr * arr)
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 / 132))))
    out = acc + np.log(arr) - 0.5 / arr - series
    return out if out.ndim else float(out)


def gamma_t(x: Tensor) -> Tensor:
    return elementwise(x, lambda a: np.asarray(gamma_fn(a)), lambda a, out: out * digamma(a), "gamma")


# ------------------------------------------------------------ distribution
def weibull_eval(t, p: WeibullParams):
    """(pdf, cdf, hazard) at time ``t``."""
    t = _positive(t, "t")
    lam, k = np.asarray(p.lam, dtype=float), np.asarray(p.k, dtype=float)
    z = t / lam
    hazard = (k / lam) * z ** (k - 1.0)
    surv = np.exp(-(z ** k))
    return hazard * surv, -np.expm1(-(z ** k)), hazard


def softplus(o):
    o = np.asarray(o, dtype=float)
    return np.maximum(o, 0.0) + np.log1p(np.exp(-np.abs(o)))


def transform_outputs(o1, o2) -> WeibullParams:
    """Map raw head outputs to (lambda, k) = (exp(o1), softplus(o2))."""
    k = softplus(o2)
    if np.any(k < K_FLOOR):
        log.info("shape floor %.g hit for %d output(s)", K_FLOOR, int(np.sum(k < K_FLOOR)))
    k = np.maximum(k, K_FLOOR)
    lam = np.exp(np.asarray(o1, dtype=float))
    if lam.ndim == 0:
        return WeibullParams(float(lam), float(k))
    return WeibullParams(lam, k)


def transform_t(o: Tensor) -> tuple[Tensor, Tensor]:
    """Differentiable version of :func:`transform_outputs` for an ``(n, 2)`` output."""
    k = o[:, 1].softplus()
    if np.any(k.data < K_FLOOR):
        log.info("shape floor %.g hit for %d output(s)", K_FLOOR, int(np.sum(k.data < K_FLOOR)))
    return o[:, 0].exp(), k.clamp_min(K_FLOOR)


def poly_pow(t_g, p: WeibullParams):
    """Fourth-order Taylor stand-in for (t_g / lambda) ** k."""
    t_g = _positive(t_g, "t_g")
    u = np.asarray(p.k, dtype=float) * np.log(t_g / np.asarray(p.lam, dtype=float))
    out = 1.0 + u + u ** 2 / 2.0 + u ** 3 / 6.0 + u ** 4 / 24.0
    return out if out.ndim else float(out)


def _poly_t(u: Tensor) -> Tensor:
    u2 = u * u
    return 1.0 + u + u2 * 0.5 + u2 * u * (1.0 / 6.0) + u2 * u2 * (1.0 / 24.0)


def weibull_nll(t_g, delta, lam, k, l2_term=0.0, use_poly: bool = False,
                min_tg: float | None = None, reduction: str = "sum") -> Tensor:
    """Right-censored Weibull negative log-likelihood.

    ``-sum(delta * [log(k/lam) + (k-1) log(t_g/lam)] - (t_g/lam)**k) + l2_term``.
    The power term applies to every sample; ``use_poly`` swaps it for the
    Taylor expansion. ``min_tg`` clamps times from below; without it a
    non-positive time is a :class:`DomainError`. ``reduction="mean"`` divides
    the data term by the batch size.
    """
    t = np.asarray(t_g, dtype=float).reshape(-1)
    if t.size == 0:
        raise DomainError("empty batch")
    if np.any(t < 0):
        raise DomainError("t_g must be nonnegative")
    if min_tg is not None:
        t = np.maximum(t, min_tg)
    elif np.any(t <= 0):
        raise DomainError("t_g = 0 makes log(t_g/lambda) diverge; pass min_tg to clamp")
    d = np.asarray(delta, dtype=float).reshape(-1)
    if d.shape != t.shape or np.any((d != 0) & (d != 1)):
        raise DomainError("delta must be a 0/1 vector matching t_g")
    lam, k = as_tensor(lam), as_tensor(k)
    log_ratio = np.log(t) - lam.log()
    u = k * log_ratio
    power = _poly_t(u) if use_poly else u.exp()
    per = -(d * (k.log() - lam.log() + (k - 1.0) * log_ratio) - power)
    total = per.sum()
    if reduction == "mean":
        total = total / float(t.size)
    elif reduction != "sum":
        raise ValueError(f"unknown reduction {reduction!r}")
    return total + l2_term


# ----------------------------------------------------------------- inference
def expected_rul(p: WeibullParams):
    """Mean time to failure: lambda * Gamma(1 + 1/k)."""
    k = np.asarray(p.k, dtype=float)
    out = np.asarray(p.lam, dtype=float) * np.asarray(gamma_fn(1.0 + 1.0 / k))
    return out if out.ndim else float(out)


def expected_rul_t(lam: Tensor, k: Tensor) -> Tensor:
    return lam * gamma_t(1.0 / k + 1.0)


def failure_prob(p: WeibullParams, tau):
    """P(T <= tau) = 1 - exp(-(tau/lambda)**k)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise DomainError("horizon must be >= 0")
    z = (tau / np.asarray(p.lam, dtype=float)) ** np.asarray(p.k, dtype=float)
    out = -np.expm1(-z)
    return out if out.ndim else float(out)


def sample(p: WeibullParams, u):
    """Inverse-CDF draw; ``u`` must lie strictly inside (0, 1)."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("u must lie in (0, 1)")
    out = np.asarray(p.lam, dtype=float) * (-np.log(u)) ** (1.0 / np.asarray(p.k, dtype=float))
    return out if out.ndim else float(out)
