from __future__ import annotations

from typing import Sequence

import numpy as np

from rulfp.errors import ConfigurationError
from rulfp.pipeline.types import SensorSequence


def balance_devices(devices: Sequence[SensorSequence], seed: int) -> list[SensorSequence]:
    """Down-sample censored devices to the number of failed ones.

    Every failed device is kept and input order is preserved.
    """
    failed = [i for i, d in enumerate(devices) if d.failed]
    if not failed:
        raise ConfigurationError("balancing needs at least one failed device")
    censored = [i for i, d in enumerate(devices) if not d.failed]
    if len(censored) > len(failed):
        rng = np.random.default_rng(seed)
        censored = sorted(rng.choice(censored, size=len(failed), replace=False).tolist())
    keep = sorted(failed + censored)
    return [devices[i] for i in keep]


def split_devices(devices: Sequence[SensorSequence], fraction: float, seed: int):
    """Device-level random split; returns ``(rest, held_out)`` with ``fraction`` held out."""
    if not 0.0 < fraction < 1.0:
        raise ConfigurationError("split fraction must be in (0, 1)")
    n = len(devices)
    rng = np.random.default_rng(seed)
    held = set(rng.permutation(n)[: int(round(fraction * n))].tolist())
    rest = [d for i, d in enumerate(devices) if i not in held]
    out = [d for i, d in enumerate(devices) if i in held]
    return rest, out
