from __future__ import annotations

from typing import Iterable, Iterator, Mapping

import numpy as np

from rulfp.diffcore.tensor import DTYPE, Tensor
from rulfp.errors import ConfigurationError


class ModelParams:
    """Ordered, named collection of trainable arrays.

    Names listed in ``no_decay`` are left out of :meth:`l2_penalty` (biases by
    default when built through the layer initialisers).
    """

    def __init__(self, arrays: Mapping[str, np.ndarray] | None = None,
                 no_decay: Iterable[str] = ()):
        self._arrays: dict[str, np.ndarray] = {}
        self.no_decay: set[str] = set()
        for name, arr in (arrays or {}).items():
            self.add(name, arr, decay=name not in set(no_decay))
        self.no_decay |= set(no_decay) & set(self._arrays)

    def add(self, name: str, value, decay: bool = True) -> None:
        if name in self._arrays:
            raise ConfigurationError(f"duplicate parameter name {name!r}")
        self._arrays[name] = np.array(value, dtype=DTYPE)
        if not decay:
            self.no_decay.add(name)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value) -> None:
        if name not in self._arrays:
            raise KeyError(name)
        value = np.asarray(value, dtype=DTYPE)
        if value.shape != self._arrays[name].shape:
            raise ConfigurationError(
                f"shape mismatch for {name!r}: {value.shape} vs {self._arrays[name].shape}")
        self._arrays[name] = value

    def __contains__(self, name) -> bool:
        return name in self._arrays

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self):
        return self._arrays.items()

    def names(self) -> list[str]:
        return list(self._arrays)

    @property
    def count(self) -> int:
        return int(sum(a.size for a in self._arrays.values()))

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self._arrays.items()}, self.no_decay)

    def leaves(self) -> dict[str, Tensor]:
        """Fresh differentiable leaves, one per parameter."""
        return {k: Tensor(v, requires_grad=True, name=k) for k, v in self._arrays.items()}

    def equal(self, other: "ModelParams") -> bool:
        return (self.names() == other.names()
                and all(np.array_equal(self[k], other[k]) for k in self))


def l2_penalty(leaves: Mapping[str, Tensor], params: ModelParams) -> Tensor:
    """Sum of squared weights over every parameter not flagged ``no_decay``."""
    total = Tensor(0.0)
    for name, t in leaves.items():
        if name not in params.no_decay:
            total = total + (t * t).sum()
    return total
