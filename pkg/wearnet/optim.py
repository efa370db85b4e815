import logging
from typing import Mapping, Sequence

import numpy as np

from .models import TrainConfig
from .tensor import Tensor

logger = logging.getLogger(__name__)


class Adam:
    """Adaptive-moment optimizer with bias correction. Updates parameters through `Tensor.assign`."""

    def __init__(
        self,
        params: Sequence[Tensor],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.steps = 0
        self._m = [np.zeros(p.shape, dtype=np.float64) for p in self.params]
        self._v = [np.zeros(p.shape, dtype=np.float64) for p in self.params]

    @classmethod
    def from_config(cls, params: Sequence[Tensor], cfg: TrainConfig) -> "Adam":
        return cls(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    def step(self, grads: Mapping[Tensor, np.ndarray]) -> None:
        self.steps += 1
        correction1 = 1.0 - self.beta1**self.steps
        correction2 = 1.0 - self.beta2**self.steps
        for param, m, v in zip(self.params, self._m, self._v):
            grad = grads.get(param)
            if grad is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(grad)
            update = self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.epsilon)
            param.assign(param.data - update)
