from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rulfp.errors import ConfigurationError
from rulfp.pipeline.types import SensorSequence

log = logging.getLogger(__name__)


@dataclass
class NormalizationStats:
    """Per-feature z-score statistics from the training devices.

    ``keep`` indexes the retained (non-constant) input columns; ``mean`` and
    ``std`` are aligned with it.
    """

    keep: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    dropped: list[int]
    n_input: int

    def to_dict(self) -> dict:
        return {"n_input": self.n_input, "keep": [int(i) for i in self.keep],
                "dropped": [int(i) for i in self.dropped],
                "mean": [float(x) for x in self.mean], "std": [float(x) for x in self.std]}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(np.array(d["keep"], dtype=np.int64), np.array(d["mean"], dtype=np.float64),
                   np.array(d["std"], dtype=np.float64), list(d["dropped"]), int(d["n_input"]))


def fit_normalizer(train: Sequence[SensorSequence], rel_tol: float = 1e-8) -> NormalizationStats:
    if not train:
        raise ConfigurationError("cannot fit normalization on an empty training set")
    stacked = np.concatenate([s.observations for s in train], axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(stacked, axis=0)
        std = np.nanstd(stacked, axis=0)
    mean = np.where(np.isnan(mean), 0.0, mean)
    std = np.where(np.isnan(std), 0.0, std)
    constant = std <= rel_tol * np.maximum(1.0, np.abs(mean))
    dropped = [int(i) for i in np.flatnonzero(constant)]
    if dropped:
        log.info("dropping constant features %s", dropped)
    keep = np.flatnonzero(~constant)
    return NormalizationStats(keep, mean[keep], std[keep], dropped, stacked.shape[1])


def apply_normalizer(stats: NormalizationStats,
                     seqs: Sequence[SensorSequence]) -> list[SensorSequence]:
    out = []
    for s in seqs:
        if s.n_features != stats.n_input:
            raise ConfigurationError(
                f"device {s.device_id}: {s.n_features} features, normalizer expects {stats.n_input}")
        z = (s.observations[:, stats.keep] - stats.mean) / stats.std
        z = np.where(np.isnan(z), 0.0, z)
        out.append(SensorSequence(s.device_id, z, s.failed, s.true_rul))
    return out

