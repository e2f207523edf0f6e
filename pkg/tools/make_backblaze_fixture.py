"""Write the bundled synthetic Backblaze-format fixture (not real drive data).

Mimics the public daily drive-stats layout: one row per drive per day with
``date, serial_number, model, capacity_bytes, failure`` and SMART columns.
Failing drives ramp up reallocated/pending-sector counts and read errors
before their last day; a few rows of another model check the model filter,
and a handful of days are deleted to exercise gap filling.

    python tools/make_backblaze_fixture.py tests/data/backblaze_synthetic
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import pandas as pd

from rulfp.pipeline.backblaze import SMART_ATTRIBUTES


def make_fixture(n_drives: int = 200, n_failed: int = 8, days: int = 90, seed: int = 7):
    rng = np.random.default_rng(seed)
    start = pd.Timestamp("2015-01-01")
    rows = []
    failed_ids = set(rng.choice(n_drives, n_failed, replace=False).tolist())
    for i in range(n_drives):
        serial = f"SYN{i:05d}"
        first = int(rng.integers(0, 20))
        last = days - 1
        if i in failed_ids:
            last = int(rng.integers(first + 40, days))
        elif rng.random() < 0.15:
            last = int(rng.integers(first + 30, days))  # drive leaves the fleet: censored
        age0 = rng.uniform(2000, 20000)
        onset = last - int(rng.integers(10, 30)) if i in failed_ids else None
        for day in range(first, last + 1):
            if i % 37 == 5 and day == first + 10:
                continue  # missing snapshot
            wear = 0.0 if onset is None or day < onset else (day - onset + 1)
            raw = {
                1: rng.integers(0, 2e8) + 1e6 * wear, 3: 0, 4: 10 + day // 30,
                5: rng.poisson(0.05) + 8 * wear ** 1.3, 7: rng.integers(0, 5e8),
                9: age0 + 24 * day, 10: 0, 12: 10 + day // 30,
                187: rng.poisson(0.02) + 2 * wear, 188: 0,
                194: 22 + rng.normal(0, 2), 197: rng.poisson(0.02) + 4 * wear,
                198: rng.poisson(0.01) + 3 * wear,
            }
            row = {"date": (start + pd.Timedelta(days=day)).strftime("%Y-%m-%d"),
                   "serial_number": serial, "model": "ST4000DM000",
                   "capacity_bytes": 4000787030016,
                   "failure": int(i in failed_ids and day == last)}
            for a in SMART_ATTRIBUTES:
                r = float(raw[a])
                row[f"smart_{a}_raw"] = round(r, 3)
                row[f"smart_{a}_normalized"] = int(max(1, 100 - min(99, r / 1e3 if a in (1, 7, 9)
                                                                      else r)))
            rows.append(row)
    for day in range(5):
        rows.append({"date": (start + pd.Timedelta(days=day)).strftime("%Y-%m-%d"),
                     "serial_number": "OTHER0001", "model": "HGST HMS5C4040ALE640",
                     "capacity_bytes": 4000787030016, "failure": 0})
    df = pd.DataFrame(rows).sort_values(["date", "serial_number"], kind="mergesort")
    return df


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("out_dir")
    args = ap.parse_args(argv)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    df = make_fixture()
    month = df["date"].str.slice(0, 7)
    for m, part in df.groupby(month, sort=True):
        part.to_csv(out / f"{m}.csv", index=False)


if __name__ == "__main__":
    main()
