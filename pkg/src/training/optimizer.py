from typing import Dict, Sequence

import numpy as np

from src.model.params import ModelParams


class Adam:
    """Adam update over a parameter registry; moments live alongside each named tensor."""

    def __init__(self, params: ModelParams, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m: Dict[str, np.ndarray] = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v: Dict[str, np.ndarray] = {name: np.zeros_like(t.data) for name, t in params.items()}

    def step(self, grads: Sequence[np.ndarray]) -> None:
        """Apply one update; `grads` follows the registry order."""
        names = list(self.params)
        if len(grads) != len(names):
            raise ValueError(f"Expected {len(names)} gradients, got {len(grads)}")
        if self.lr == 0.0:
            self.step_count += 1
            return
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for name, grad in zip(names, grads):
            tensor = self.params[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            tensor.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
