"""Parameter checkpoints.

Format ``rulfp-ckpt/1``: an uncompressed numpy ``.npz`` archive holding

* ``__format__``   -- the format tag as a 0-d unicode array,
* ``__names__``    -- parameter names in insertion order,
* ``__no_decay__`` -- names excluded from the L2 penalty,
* ``p/<name>``     -- one float64 array per parameter, row-major.

Values are stored as raw IEEE-754 bytes so save/load is bitwise exact.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from rulfp.diffcore.params import ModelParams
from rulfp.errors import DataError

FORMAT = "rulfp-ckpt/1"


def save_params(path, params: ModelParams) -> None:
    path = Path(path)
    arrays = {f"p/{k}": np.ascontiguousarray(v) for k, v in params.items()}
    arrays["__format__"] = np.array(FORMAT)
    arrays["__names__"] = np.array(params.names(), dtype=str)
    arrays["__no_decay__"] = np.array(sorted(params.no_decay), dtype=str)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def load_params(path) -> ModelParams:
    with np.load(path, allow_pickle=False) as z:
        if "__format__" not in z or str(z["__format__"]) != FORMAT:
            raise DataError(f"{path}: not a {FORMAT} checkpoint")
        names = [str(n) for n in z["__names__"]]
        no_decay = [str(n) for n in z["__no_decay__"]]
        return ModelParams({n: z[f"p/{n}"] for n in names}, no_decay)
