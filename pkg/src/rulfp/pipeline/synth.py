"""Synthetic Weibull degradation data with known per-device parameters.

Each device has a latent covariate z ~ N(0, 1) and scale
``lam = exp(slope * z + intercept)`` (window units) with a common shape ``k``.
Every sensor channel is ``loading_j * z`` plus Gaussian noise at every step.
The lifetime is drawn from Weibull(lam, k) and counted from the end of the
first window, so the residual life seen by the first window is exactly
Weibull(lam, k). Censoring times come from Weibull(theta * lam, k) with
``theta = ((1 - q) / q) ** (1 / k)``, which censors a fraction ``q`` of devices
in expectation independently of z (non-informative censoring).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from rulfp.errors import ConfigurationError, DataError, ParseError
from rulfp.pipeline.types import SensorSequence


@dataclass(frozen=True)
class SynthConfig:
    w: int = 5
    k: float = 1.8
    slope: float = 1.5
    intercept: float = math.log(15.0)
    noise: float = 0.3
    censor_fraction: float = 0.3

    def __post_init__(self):
        if self.w < 1 or self.k <= 0 or self.noise < 0:
            raise ConfigurationError("invalid synthetic generator settings")
        if not 0.0 <= self.censor_fraction < 1.0:
            raise ConfigurationError("censor_fraction must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthTruth:
    device_id: np.ndarray
    lam: np.ndarray
    k: np.ndarray
    z: np.ndarray
    lifetime: np.ndarray
    censored: np.ndarray


def synth_weibull(n_devices: int, d: int, cfg: SynthConfig = SynthConfig(), seed: int = 0):
    """Return ``(sequences, truth)``."""
    if n_devices < 1 or d < 1:
        raise ConfigurationError("need n_devices >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    w = cfg.w
    z = rng.standard_normal(n_devices)
    lam = np.exp(cfg.slope * z + cfg.intercept)
    life = lam * (-np.log(1.0 - rng.random(n_devices))) ** (1.0 / cfg.k)
    if cfg.censor_fraction > 0:
        theta = ((1.0 - cfg.censor_fraction) / cfg.censor_fraction) ** (1.0 / cfg.k)
        cens_time = theta * lam * (-np.log(1.0 - rng.random(n_devices))) ** (1.0 / cfg.k)
    else:
        cens_time = np.full(n_devices, np.inf)
    censored = cens_time < life
    loadings = np.linspace(1.0, 0.25, d)

    seqs = []
    ids = np.array([f"syn-{i}" for i in range(n_devices)])
    for i in range(n_devices):
        if censored[i]:
            length = w + int(round(cens_time[i] * w))
        else:
            length = w + max(1, int(round(life[i] * w)))
        obs = z[i] * loadings + cfg.noise * rng.standard_normal((length, d))
        seqs.append(SensorSequence(str(ids[i]), obs, failed=not censored[i]))
    truth = SynthTruth(ids, lam, np.full(n_devices, cfg.k), z, life, censored)
    return seqs, truth


# ------------------------------------------------------------- raw sequences
def write_sequences(directory, seqs) -> None:
    """``devices.csv`` (device_id, censor_time, failed) plus long-format ``observations.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    d = seqs[0].n_features if seqs else 0
    with open(directory / "devices.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["device_id", "censor_time", "failed"])
        for s in seqs:
            wr.writerow([s.device_id, s.censor_time, int(s.failed)])
    with open(directory / "observations.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["device_id", "time"] + [f"x_{j}" for j in range(d)])
        for s in seqs:
            for t, row in enumerate(s.observations, start=1):
                wr.writerow([s.device_id, t] + [repr(float(v)) for v in row])


def read_sequences(directory) -> list[SensorSequence]:
    directory = Path(directory)
    devices = []
    with open(directory / "devices.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            devices.append((row["device_id"], int(row["censor_time"]), row["failed"] == "1"))
    rows: dict[str, list] = {dev: [] for dev, _, _ in devices}
    with open(directory / "observations.csv", newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        for lineno, row in enumerate(rd, start=2):
            dev, t = row[0], int(row[1])
            if dev not in rows or t != len(rows[dev]) + 1:
                raise ParseError(f"unexpected row for device {dev} at time {t}", lineno,
                                 directory / "observations.csv")
            rows[dev].append([float(v) for v in row[2:]])
    out = []
    for dev, c_p, failed in devices:
        if len(rows[dev]) != c_p:
            raise DataError(f"device {dev}: {len(rows[dev])} rows, censor_time {c_p}")
        out.append(SensorSequence(dev, np.array(rows[dev]), failed))
    return out


def write_truth(path, truth: SynthTruth) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["device_id", "lam", "k", "z", "lifetime", "censored"])
        for i in range(len(truth.device_id)):
            wr.writerow([truth.device_id[i], repr(float(truth.lam[i])), repr(float(truth.k[i])),
                         repr(float(truth.z[i])), repr(float(truth.lifetime[i])),
                         int(truth.censored[i])])
