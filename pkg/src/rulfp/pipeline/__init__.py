"""Dataset ingestion, windowing, normalization, balancing and synthetic data."""

from rulfp.pipeline.backblaze import SMART_FEATURES, load_backblaze
from rulfp.pipeline.cmapss import load_cmapss
from rulfp.pipeline.normalize import NormalizationStats, apply_normalizer, fit_normalizer
from rulfp.pipeline.split import balance_devices, split_devices
from rulfp.pipeline.synth import (SynthConfig, SynthTruth, read_sequences, synth_weibull,
                                  write_sequences, write_truth)
from rulfp.pipeline.types import (SensorSequence, Window, WindowingConfig, WindowSet,
                                  concat_windowsets)
from rulfp.pipeline.windows import (build_windowset, cap_rul, make_windows, positive_fraction,
                                    read_windows, write_windows)

__all__ = [
    "NormalizationStats", "SMART_FEATURES", "SensorSequence", "SynthConfig", "SynthTruth",
    "Window", "WindowSet", "WindowingConfig", "apply_normalizer", "balance_devices",
    "build_windowset", "cap_rul", "concat_windowsets", "fit_normalizer", "load_backblaze",
    "load_cmapss", "make_windows", "positive_fraction", "read_sequences", "read_windows",
    "split_devices", "synth_weibull", "write_sequences", "write_truth", "write_windows",
]
