"""Backblaze daily drive-stats snapshots -> one sequence per serial number."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from rulfp.errors import DataError
from rulfp.pipeline.types import SensorSequence

log = logging.getLogger(__name__)

DEFAULT_MODEL = "ST4000DM000"

# Feature manifest: 13 SMART attributes reported by ST4000DM000 over 2014-2015,
# each in normalized and raw form.
SMART_ATTRIBUTES = (1, 3, 4, 5, 7, 9, 10, 12, 187, 188, 194, 197, 198)
SMART_FEATURES = tuple(f"smart_{a}_{kind}" for a in SMART_ATTRIBUTES
                       for kind in ("normalized", "raw"))


def _read_frames(path: Path) -> pd.DataFrame:
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise FileNotFoundError(f"no CSV snapshots under {path}")
    return pd.concat([pd.read_csv(f) for f in files], ignore_index=True)


def load_backblaze(path, model: str = DEFAULT_MODEL,
                   features=SMART_FEATURES) -> list[SensorSequence]:
    """Load daily snapshots for one drive model.

    A drive fails on the first day its ``failure`` flag is 1; later rows are
    discarded. Missing days inside a drive's history are filled from the
    previous day so the series stays gap-free; values missing from the first
    day onward stay NaN until normalization zero-fills them.
    """
    path = Path(path)
    df = _read_frames(path)
    for col in ("date", "serial_number", "model", "failure"):
        if col not in df.columns:
            raise DataError(f"{path}: missing column {col!r}")
    df = df[df["model"] == model]
    if df.empty:
        log.warning("no rows for drive model %s under %s", model, path)
        return []
    df = df.assign(date=pd.to_datetime(df["date"]))
    for col in features:
        if col not in df.columns:
            df[col] = np.nan

    out = []
    for serial, g in df.groupby("serial_number", sort=True):
        dates = g["date"]
        if not dates.is_monotonic_increasing or dates.duplicated().any():
            raise DataError(f"serial {serial}: dates are not strictly increasing")
        g = g.set_index("date")
        fail_days = g.index[g["failure"].to_numpy() == 1]
        failed = len(fail_days) > 0
        if failed:
            g = g.loc[:fail_days[0]]
        full = pd.date_range(g.index[0], g.index[-1], freq="D")
        obs = g[list(features)].astype(float).reindex(full).ffill()
        out.append(SensorSequence(str(serial), obs.to_numpy(), failed=failed))
    return out
