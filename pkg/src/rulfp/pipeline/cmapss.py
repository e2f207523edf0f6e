"""Reader for the NASA C-MAPSS turbofan files (``train_FD00x.txt`` etc.)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from rulfp.errors import DataError, ParseError
from rulfp.pipeline.types import SensorSequence

SUBSETS = ("FD001", "FD002", "FD003", "FD004")
N_COLUMNS = 26
FEATURE_NAMES = ([f"setting_{i}" for i in range(1, 4)]
                 + [f"sensor_{i}" for i in range(1, 22)])


def _read_units(path: Path) -> dict[int, np.ndarray]:
    units: dict[int, list] = {}
    last_cycle: dict[int, int] = {}
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != N_COLUMNS:
                raise ParseError(f"expected {N_COLUMNS} columns, got {len(parts)}", lineno, path)
            try:
                unit, cycle = int(parts[0]), int(parts[1])
                row = [float(v) for v in parts[2:]]
            except ValueError as exc:
                raise ParseError(str(exc), lineno, path) from None
            expected = last_cycle.get(unit, 0) + 1
            if cycle != expected:
                raise ParseError(f"unit {unit}: cycle {cycle} follows {expected - 1}", lineno, path)
            last_cycle[unit] = cycle
            units.setdefault(unit, []).append(row)
    return {u: np.array(rows) for u, rows in sorted(units.items())}


def load_cmapss(path, subset: str = "FD001"):
    """Return ``(train, test, test_rul)`` for one C-MAPSS subset.

    Training units run to failure; test units are censored and carry their
    ground-truth residual life from ``RUL_<subset>.txt``.
    """
    if subset not in SUBSETS:
        raise DataError(f"unknown C-MAPSS subset {subset!r}")
    root = Path(path)
    files = {k: root / f"{k}_{subset}.txt" for k in ("train", "test", "RUL")}
    for f in files.values():
        if not f.is_file():
            raise FileNotFoundError(f)
    train_units = _read_units(files["train"])
    test_units = _read_units(files["test"])
    rul = []
    with open(files["RUL"], encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    rul.append(float(line.split()[0]))
                except ValueError as exc:
                    raise ParseError(str(exc), lineno, files["RUL"]) from None
    if len(rul) != len(test_units):
        raise DataError(f"{files['RUL']}: {len(rul)} values for {len(test_units)} test units")
    train = [SensorSequence(f"train-{u}", obs, failed=True) for u, obs in train_units.items()]
    test = [SensorSequence(f"test-{u}", obs, failed=False, true_rul=r)
            for (u, obs), r in zip(test_units.items(), rul)]
    return train, test, rul
