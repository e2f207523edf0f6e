"""Landmark windowing with filter/evidence labelling, and the prepared-window file.

Prepared-window file (``rulfp-windows/1``), UTF-8 CSV:

* line 1: ``# rulfp-windows/1 w=<w> d=<d>``
* line 2: header ``device_id,end_time,f,t_g,censored,censor_remaining,x_0_0,...``
* one row per window; ``t_g`` / ``censor_remaining`` are empty when absent,
  ``censored`` is 0/1 and feature ``x_<step>_<feature>`` values follow in
  row-major (step, feature) order.

Floats are written with ``repr`` so reading a file back reproduces every value
bit for bit.
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from rulfp.errors import DataError, DomainError, ParseError
from rulfp.pipeline.types import SensorSequence, Window, WindowingConfig, WindowSet

log = logging.getLogger(__name__)

WINDOW_FORMAT = "rulfp-windows/1"
_FIXED = ["device_id", "end_time", "f", "t_g", "censored", "censor_remaining"]


def cap_rul(remaining, max_rul):
    """Piece-wise linear target: min(remaining, max_rul)."""
    if np.any(np.asarray(remaining) < 0):
        raise DomainError("remaining life must be >= 0")
    out = np.minimum(remaining, max_rul)
    return float(out) if np.ndim(out) == 0 else out


def make_windows(seq: SensorSequence, cfg: WindowingConfig,
                 reveal_truth: bool = False) -> list[Window]:
    """Cut ``seq`` into windows ending at t = w, w + stride, ...

    Failed devices lose windows with t > F - tau_f (filter region) and label
    F - tau_f - tau_e < t <= F - tau_f as positive, where F is the failure
    time. Censored devices yield negative windows carrying the time left to
    censoring. With ``reveal_truth`` a device with a known ``true_rul`` is
    labelled as if it failed at c_p + true_rul.
    """
    c_p, w = seq.censor_time, cfg.w
    if c_p < w:
        log.warning("device %s skipped: %d observations < window size %d", seq.device_id, c_p, w)
        return []
    if seq.failed:
        fail_at = float(c_p)
    elif reveal_truth and seq.true_rul is not None:
        fail_at = c_p + float(seq.true_rul)
    else:
        fail_at = None

    out = []
    for t in range(w, c_p + 1, cfg.stride):
        values = seq.observations[t - w:t]
        if fail_at is None:
            out.append(Window(seq.device_id, t, values, 0, True, None, (c_p - t) / w))
            continue
        if t > fail_at - cfg.tau_f:
            continue
        positive = fail_at - cfg.tau_f - cfg.tau_e < t
        out.append(Window(seq.device_id, t, values, int(positive), False,
                          cap_rul(fail_at - t, cfg.max_rul) / w, None))
    return out


def build_windowset(seqs: Iterable[SensorSequence], cfg: WindowingConfig,
                    reveal_truth: bool = False, n_features: int | None = None) -> WindowSet:
    seqs = list(seqs)
    windows = [win for s in seqs for win in make_windows(s, cfg, reveal_truth)]
    if n_features is None:
        n_features = seqs[0].n_features if seqs else 0
    ws = WindowSet.from_windows(windows, cfg.w, n_features)
    ws.meta["window"] = cfg.to_dict()
    return ws


def positive_fraction(seqs: Sequence[SensorSequence], cfg: WindowingConfig) -> float:
    total = positives = 0
    for s in seqs:
        for win in make_windows(s, cfg):
            total += 1
            positives += win.fp_label
    return positives / total if total else 0.0


# ------------------------------------------------------------------- file I/O
def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_windows(path, ws: WindowSet) -> None:
    path = Path(path)
    n, w, d = ws.X.shape
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {WINDOW_FORMAT} w={w} d={d}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(_FIXED + [f"x_{i}_{j}" for i in range(w) for j in range(d)])
        for i in range(n):
            wr.writerow([ws.device_id[i], int(ws.end_time[i]), int(ws.f[i]), _fmt(ws.t_g[i]),
                         int(bool(ws.censored[i])), _fmt(ws.censor_remaining[i])]
                        + [repr(float(v)) for v in ws.X[i].reshape(-1)])
    tmp.replace(path)


def read_windows(path) -> WindowSet:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().split()
        if len(first) != 4 or first[1] != WINDOW_FORMAT:
            raise ParseError("missing rulfp-windows header", line=1, path=path)
        try:
            w = int(first[2].split("=")[1])
            d = int(first[3].split("=")[1])
        except (IndexError, ValueError):
            raise ParseError("bad w/d in header", line=1, path=path) from None
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or header[:6] != _FIXED or len(header) != 6 + w * d:
            raise ParseError("unexpected column header", line=2, path=path)
        ids, ends, fs, tg, cens, crem, xs = [], [], [], [], [], [], []
        for lineno, row in enumerate(rd, start=3):
            if len(row) != 6 + w * d:
                raise ParseError(f"expected {6 + w * d} fields, got {len(row)}", line=lineno, path=path)
            try:
                ids.append(row[0])
                ends.append(int(row[1]))
                fs.append(int(row[2]))
                tg.append(float(row[3]) if row[3] else float("nan"))
                cens.append(row[4] == "1")
                crem.append(float(row[5]) if row[5] else float("nan"))
                xs.append([float(v) for v in row[6:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno, path=path) from None
    if not ids:
        return WindowSet.empty(w, d)
    X = np.array(xs, dtype=np.float64).reshape(len(ids), w, d)
    ws = WindowSet(np.array(ids, dtype=str), np.array(ends, dtype=np.int64), X,
                   np.array(fs, dtype=np.int64), np.array(tg), np.array(cens, dtype=bool),
                   np.array(crem))
    if np.any((ws.f != 0) & (ws.f != 1)):
        raise DataError(f"{path}: f must be 0/1")
    return ws
