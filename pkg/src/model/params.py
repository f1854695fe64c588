from collections import OrderedDict
from typing import Dict, Iterator, List, Tuple

import numpy as np

from src.autodiff.tensor import Tensor


class ModelParams:
    """Ordered registry of named trainable tensors."""

    def __init__(self):
        self._tensors: "OrderedDict[str, Tensor]" = OrderedDict()

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._tensors:
            raise KeyError(f"Duplicate parameter: {name}")
        tensor = Tensor(value, requires_grad=True, name=name)
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self._tensors.items())

    def tensors(self) -> List[Tensor]:
        return list(self._tensors.values())

    def groups(self) -> "OrderedDict[str, List[Tensor]]":
        """Parameter groups keyed by the first two name components, e.g. 'heads.start'."""
        grouped: "OrderedDict[str, List[Tensor]]" = OrderedDict()
        for name, tensor in self._tensors.items():
            key = ".".join(name.split(".")[:2])
            grouped.setdefault(key, []).append(tensor)
        return grouped

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self._tensors.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        missing = [name for name in self._tensors if name not in state]
        if missing:
            raise KeyError(f"Missing parameters: {', '.join(missing)}")
        for name, tensor in self._tensors.items():
            value = np.asarray(state[name], dtype=tensor.data.dtype)
            if value.shape != tensor.shape:
                raise ValueError(f"Parameter {name}: shape {value.shape} != {tensor.shape}")
            tensor.data[...] = value


def glorot(rng: np.random.Generator, shape: Tuple[int, int]) -> np.ndarray:
    scale = np.sqrt(2.0 / (shape[0] + shape[1]))
    return rng.normal(0.0, scale, size=shape)


def normal(rng: np.random.Generator, shape: Tuple[int, ...], std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)
