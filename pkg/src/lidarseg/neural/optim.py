"""Adam with bias correction.

m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
m^ = m / (1 - b1^t)         v^ = v / (1 - b2^t)
theta <- theta - lr * m^ / (sqrt(v^) + eps)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Parameter


@dataclass
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


class Adam:
    def __init__(self, params: list[Parameter], config: AdamConfig | None = None):
        self.params = params
        self.config = config or AdamConfig()
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        cfg = self.config
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * np.square(g)
            m_hat = m / bc1
            v_hat = v / bc2
            p.value -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
