"""Parameter-owning layers on top of `wearnet.functional`."""

import logging
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from . import functional as F
from .tensor import Tensor, default_dtype

logger = logging.getLogger(__name__)


class Module:
    """
    Minimal layer container.

    Parameters are `Tensor` attributes with `requires_grad=True`; child modules are `Module`
    attributes or lists of modules. Names are dotted attribute paths, in definition order.
    """

    training: bool = True

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{path}.")
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Module):
                yield from value.named_buffers(f"{path}.")
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{path}.{i}.")

    def set_buffer(self, path: str, values: np.ndarray) -> None:
        head, _, rest = path.partition(".")
        child = getattr(self, head)
        if isinstance(child, list):
            index, _, rest = rest.partition(".")
            child = child[int(index)]
        child.set_buffer(rest, values)

    def modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, list):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
        zero_init: bool = False,
    ):
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        fan_in = in_channels * kernel_size * kernel_size
        weights = np.zeros(shape) if zero_init else he_normal(rng, shape, fan_in)
        self.kernel = Tensor(weights, requires_grad=True)
        self.bias = Tensor.zeros((out_channels,), requires_grad=True) if bias else None
        self.stride = stride
        self.padding = padding

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    def output_size(self, height: int, width: int) -> Tuple[int, int]:
        k = self.kernel.shape[2]
        return (
            F.conv_output_size(height, k, self.stride, self.padding),
            F.conv_output_size(width, k, self.stride, self.padding),
        )

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.kernel, self.bias, stride=self.stride, padding=self.padding)


class Dense(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, std: Optional[float] = None):
        scale = np.sqrt(2.0 / in_features) if std is None else std
        self.weights = Tensor(rng.normal(0.0, scale, size=(in_features, out_features)), requires_grad=True)
        self.bias = Tensor.zeros((out_features,), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return F.dense(x, self.weights, self.bias)


class BatchNorm2d(Module):
    def __init__(self, channels: int):
        self.gamma = Tensor.ones((channels,), requires_grad=True)
        self.beta = Tensor.zeros((channels,), requires_grad=True)
        self.state = F.BatchNormState.initial(channels, dtype=default_dtype())

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        yield f"{prefix}running_mean", self.state.running_mean
        yield f"{prefix}running_var", self.state.running_var

    def set_buffer(self, path: str, values: np.ndarray) -> None:
        if path not in ("running_mean", "running_var"):
            raise KeyError(f"unknown batch-norm buffer '{path}'")
        current = getattr(self.state, path)
        setattr(self.state, path, np.asarray(values, dtype=current.dtype).reshape(current.shape))

    def __call__(self, x: Tensor) -> Tensor:
        return F.batch_norm(x, self.gamma, self.beta, self.state, training=self.training)


def named_arrays(module: Module) -> Dict[str, np.ndarray]:
    """Parameters and buffers by name, the order checkpoints are written in."""
    arrays = {name: p.data for name, p in module.named_parameters()}
    arrays.update(dict(module.named_buffers()))
    return arrays
