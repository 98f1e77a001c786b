from __future__ import annotations

import numpy as np


class Adam:
    """Adam over a flat parameter vector, with bias correction."""

    def __init__(self, n_params: int, learning_rate: float = 3e-4, beta1=0.9, beta2=0.999, eps=1e-8, dtype=np.float32):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.lr = float(learning_rate)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(n_params, dtype=dtype)
        self.v = np.zeros(n_params, dtype=dtype)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1 - b1) * grad
        self.v *= b2
        self.v += (1 - b2) * grad * grad
        m_hat = self.m / (1 - b1**self.t)
        v_hat = self.v / (1 - b2**self.t)
        params -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(params.dtype, copy=False)
        return params
