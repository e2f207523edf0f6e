from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rulfp.errors import ConfigurationError, DataError


@dataclass
class SensorSequence:
    """One device's observations ``x_1 .. x_{c_p}`` (row ``i`` is time ``i + 1``).

    ``true_rul`` is only set for devices whose residual life beyond the last
    observation is known from outside the series (C-MAPSS test units).
    """

    device_id: str
    observations: np.ndarray
    failed: bool
    true_rul: float | None = None

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=np.float64)
        if self.observations.ndim != 2:
            raise DataError(f"device {self.device_id}: observations must be 2-D")
        if self.failed and self.true_rul is not None:
            raise DataError(f"device {self.device_id}: failed devices have no residual life")

    @property
    def censor_time(self) -> int:
        return int(self.observations.shape[0])

    @property
    def failure_time(self) -> int | None:
        return self.censor_time if self.failed else None

    @property
    def n_features(self) -> int:
        return int(self.observations.shape[1])


@dataclass(frozen=True)
class WindowingConfig:
    """Window geometry; every length is in raw dataset units (cycles or days)."""

    w: int
    stride: int
    tau_f: float
    tau_e: float
    max_rul: float

    def __post_init__(self):
        if self.w < 1 or self.stride < 1:
            raise ConfigurationError("w and stride must be >= 1")
        if self.tau_f < 0 or self.tau_e <= 0:
            raise ConfigurationError("need tau_f >= 0 and tau_e > 0")
        if not self.max_rul > self.tau_f + self.tau_e:
            raise ConfigurationError("max_rul must exceed tau_f + tau_e")

    @property
    def horizon(self) -> float:
        """Failure-prediction horizon tau = tau_f + tau_e in window units."""
        return (self.tau_f + self.tau_e) / self.w

    @property
    def max_rul_units(self) -> float:
        return self.max_rul / self.w

    @classmethod
    def cmapss(cls, stride: int | None = None) -> "WindowingConfig":
        return cls(w=10, stride=stride or 10, tau_f=5, tau_e=20, max_rul=130)

    @classmethod
    def backblaze(cls, stride: int | None = None) -> "WindowingConfig":
        return cls(w=4, stride=stride or 4, tau_f=4, tau_e=12, max_rul=50)

    def to_dict(self) -> dict:
        return {"w": self.w, "stride": self.stride, "tau_f": self.tau_f,
                "tau_e": self.tau_e, "max_rul": self.max_rul}


@dataclass
class Window:
    device_id: str
    end_time: int
    values: np.ndarray
    fp_label: int
    censored: bool
    rul_target: float | None = None
    censor_remaining: float | None = None


@dataclass
class WindowSet:
    """Column-wise stack of windows; absent targets are NaN."""

    device_id: np.ndarray
    end_time: np.ndarray
    X: np.ndarray
    f: np.ndarray
    t_g: np.ndarray
    censored: np.ndarray
    censor_remaining: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.X.shape[0])

    @property
    def w(self) -> int:
        return int(self.X.shape[1])

    @property
    def n_features(self) -> int:
        return int(self.X.shape[2])

    def subset(self, idx) -> "WindowSet":
        return WindowSet(self.device_id[idx], self.end_time[idx], self.X[idx], self.f[idx],
                         self.t_g[idx], self.censored[idx], self.censor_remaining[idx],
                         dict(self.meta))

    def positive_fraction(self) -> float:
        return float(self.f.mean()) if len(self) else 0.0

    @classmethod
    def empty(cls, w: int, d: int) -> "WindowSet":
        return cls(np.array([], dtype=str), np.zeros(0, dtype=np.int64), np.zeros((0, w, d)),
                   np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0, dtype=bool), np.zeros(0))

    @classmethod
    def from_windows(cls, windows: Sequence[Window], w: int | None = None,
                     d: int | None = None) -> "WindowSet":
        if not windows:
            if w is None or d is None:
                raise ConfigurationError("empty window list needs explicit w and d")
            return cls.empty(w, d)
        nan = float("nan")
        return cls(
            device_id=np.array([x.device_id for x in windows], dtype=str),
            end_time=np.array([x.end_time for x in windows], dtype=np.int64),
            X=np.stack([x.values for x in windows]).astype(np.float64),
            f=np.array([x.fp_label for x in windows], dtype=np.int64),
            t_g=np.array([nan if x.rul_target is None else x.rul_target for x in windows]),
            censored=np.array([x.censored for x in windows], dtype=bool),
            censor_remaining=np.array(
                [nan if x.censor_remaining is None else x.censor_remaining for x in windows]),
        )

    def to_windows(self) -> list[Window]:
        out = []
        for i in range(len(self)):
            out.append(Window(
                device_id=str(self.device_id[i]), end_time=int(self.end_time[i]),
                values=self.X[i], fp_label=int(self.f[i]), censored=bool(self.censored[i]),
                rul_target=None if np.isnan(self.t_g[i]) else float(self.t_g[i]),
                censor_remaining=None if np.isnan(self.censor_remaining[i])
                else float(self.censor_remaining[i])))
        return out


def concat_windowsets(sets: Sequence[WindowSet]) -> WindowSet:
    sets = [s for s in sets if len(s)]
    if not sets:
        raise ConfigurationError("nothing to concatenate")
    return WindowSet(*(np.concatenate([getattr(s, f) for s in sets]) for f in
                       ("device_id", "end_time", "X", "f", "t_g", "censored", "censor_remaining")))
