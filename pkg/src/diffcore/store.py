# -*- coding: utf-8 -*-
"""Named parameter storage shared by every learned module."""
import hashlib
from dataclasses import dataclass

import numpy as np

from src.diffcore.tensor import DiffArray
from src.exceptions import ShapeError


@dataclass
class AdamWState:
    """First/second moment estimates and step count for one parameter."""
    m: np.ndarray
    v: np.ndarray
    step: int = 0


class ParamStore:
    """Ordered name -> parameter map with per-parameter optimizer state."""

    def __init__(self, dtype='float64'):
        self.dtype = np.dtype(dtype)
        self._params = {}
        self._state = {}

    def add(self, name, values) -> DiffArray:
        if name in self._params:
            raise ValueError(f'parameter {name!r} is already registered')
        param = DiffArray(np.asarray(values, dtype=self.dtype),
                          requires_grad=True, name=name)
        self._params[name] = param
        return param

    def __getitem__(self, name) -> DiffArray:
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self, prefix=None):
        for name, param in self._params.items():
            if prefix is None or name.startswith(prefix):
                yield name, param

    def names(self, prefix=None):
        return [name for name, _ in self.items(prefix)]

    def assign(self, name, values):
        """Overwrite a parameter's values in place, keeping its shape."""
        param = self._params[name]
        values = np.asarray(values)
        if values.shape != param.shape:
            raise ShapeError(
                f'parameter {name!r} has shape {param.shape}, '
                f'got {values.shape}')
        param.values[...] = values.astype(self.dtype)

    def freeze(self, prefix):
        for _, param in self.items(prefix):
            param.requires_grad = False
            param.zero_grad()

    def unfreeze(self, prefix):
        for _, param in self.items(prefix):
            param.requires_grad = True

    def frozen_names(self):
        return [n for n, p in self._params.items() if not p.requires_grad]

    def zero_grad(self):
        for param in self._params.values():
            param.zero_grad()

    def num_parameters(self, prefix=None) -> int:
        return int(sum(p.size for _, p in self.items(prefix)))

    def checksum(self, prefix=None) -> str:
        digest = hashlib.sha256()
        for name, param in self.items(prefix):
            digest.update(name.encode('utf-8'))
            digest.update(np.ascontiguousarray(param.values).tobytes())
        return digest.hexdigest()

    def optimizer_state(self, name) -> AdamWState:
        state = self._state.get(name)
        if state is None:
            param = self._params[name]
            state = AdamWState(np.zeros_like(param.values),
                               np.zeros_like(param.values))
            self._state[name] = state
        return state
