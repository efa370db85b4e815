"""Differentiable primitives. Each computes its forward value with numpy and records a backward closure."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .tensor import Tensor, record
from .utils import ShapeError, shape_mismatch

logger = logging.getLogger(__name__)

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.9
BCE_CLAMP = 1e-7

Scalar = Union[int, float]


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, out_h: int, out_w: int) -> np.ndarray:
    n, c, _, _ = x.shape
    s_n, s_c, s_h, s_w = x.strides
    patches = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, kh, kw, out_h, out_w),
        strides=(s_n, s_c, s_h, s_w, stride * s_h, stride * s_w),
        writeable=False,
    )
    return patches.reshape(n, c * kh * kw, out_h * out_w)


def _col2im(
    cols: np.ndarray, padded_shape: Tuple[int, ...], kh: int, kw: int, stride: int, out_h: int, out_w: int
) -> np.ndarray:
    n, c = padded_shape[:2]
    x = np.zeros(padded_shape, dtype=cols.dtype)
    cols = cols.reshape(n, c, kh, kw, out_h, out_w)
    for i in range(kh):
        for j in range(kw):
            x[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += cols[:, :, i, j]
    return x


def conv2d(
    input: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    2-D cross-correlation of an NCHW input with a K'×C×kh×kw kernel, plus per-filter bias.

    Output extents are `(H + 2*padding - kh) // stride + 1` (same for W).
    """
    if input.ndim != 4 or kernel.ndim != 4:
        raise shape_mismatch("conv2d expects NCHW input and 4-d kernel", input.shape, kernel.shape)
    n, c, h, w = input.shape
    k_out, k_c, kh, kw = kernel.shape
    if c != k_c:
        raise shape_mismatch("conv2d input channels vs kernel channels", input.shape, kernel.shape)
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d needs stride >= 1 and padding >= 0, got {stride}, {padding}")
    if bias is not None and bias.shape != (k_out,):
        raise shape_mismatch("conv2d bias vs filter count", bias.shape, (k_out,))
    out_h = conv_output_size(h, kh, stride, padding)
    out_w = conv_output_size(w, kw, stride, padding)
    if out_h < 1 or out_w < 1:
        raise shape_mismatch("conv2d kernel larger than padded input", input.shape, kernel.shape)

    x = input.data
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(x, kh, kw, stride, out_h, out_w)
    w_mat = kernel.data.reshape(k_out, -1)
    out = np.matmul(w_mat, cols).reshape(n, k_out, out_h, out_w)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    padded_shape = x.shape

    def backward(g):
        g_flat = g.reshape(n, k_out, out_h * out_w)
        grad_kernel = np.einsum("nkl,ncl->kc", g_flat, cols).reshape(kernel.shape)
        grad_cols = np.matmul(w_mat.T, g_flat)
        grad_x = _col2im(grad_cols, padded_shape, kh, kw, stride, out_h, out_w)
        if padding:
            grad_x = grad_x[:, :, padding:-padding, padding:-padding]
        grads = [grad_x, grad_kernel]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    inputs = (input, kernel) if bias is None else (input, kernel, bias)
    return record("conv2d", inputs, out, backward)


def dense(input: Tensor, weights: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Fully connected layer: `input @ weights + bias` for N×F input and F×G weights."""
    if input.ndim != 2 or weights.ndim != 2 or input.shape[1] != weights.shape[0]:
        raise shape_mismatch("dense input vs weights", input.shape, weights.shape)
    if bias is not None and bias.shape != (weights.shape[1],):
        raise shape_mismatch("dense bias vs output width", bias.shape, (weights.shape[1],))
    out = input.data @ weights.data
    if bias is not None:
        out = out + bias.data

    def backward(g):
        grads = [g @ weights.data.T, input.data.T @ g]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    inputs = (input, weights) if bias is None else (input, weights, bias)
    return record("dense", inputs, out, backward)


@dataclass
class BatchNormState:
    """Running statistics of one batch-norm layer. Mutated by train-mode forwards only."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    epsilon: float = BN_EPSILON
    updates: int = field(default=0)

    @classmethod
    def initial(cls, channels: int, dtype=np.float32) -> "BatchNormState":
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype))


def batch_norm(
    input: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    training: bool,
) -> Tensor:
    """
    Per-channel normalization of an NCHW tensor followed by the gamma/beta affine.

    Training mode normalizes by the batch's mean and (biased) variance and folds them into
    the running statistics with `state.momentum`; eval mode uses the running statistics,
    which start at mean 0 / variance 1.
    """
    if input.ndim != 4:
        raise ShapeError(f"batch_norm expects NCHW input, got shape {input.shape}")
    channels = input.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise shape_mismatch("batch_norm parameters vs channels", gamma.shape, (channels,))
    x = input.data
    axes = (0, 2, 3)
    if training:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        m = state.momentum
        state.running_mean = (m * state.running_mean + (1 - m) * mean).astype(state.running_mean.dtype)
        state.running_var = (m * state.running_var + (1 - m) * var).astype(state.running_var.dtype)
        state.updates += 1
    else:
        mean = state.running_mean.astype(x.dtype)
        var = state.running_var.astype(x.dtype)
    inv_std = 1.0 / np.sqrt(var + state.epsilon)
    x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma.data[None, :, None, None] * x_hat + beta.data[None, :, None, None]

    def backward(g):
        grad_gamma = (g * x_hat).sum(axis=axes)
        grad_beta = g.sum(axis=axes)
        dx_hat = g * gamma.data[None, :, None, None]
        if training:
            count = x.shape[0] * x.shape[2] * x.shape[3]
            grad_x = (
                inv_std[None, :, None, None]
                / count
                * (
                    count * dx_hat
                    - dx_hat.sum(axis=axes)[None, :, None, None]
                    - x_hat * (dx_hat * x_hat).sum(axis=axes)[None, :, None, None]
                )
            )
        else:
            grad_x = dx_hat * inv_std[None, :, None, None]
        return grad_x, grad_gamma, grad_beta

    return record("batch_norm", (input, gamma, beta), out, backward)


def relu(input: Tensor) -> Tensor:
    x = input.data
    active = x > 0
    return record("relu", (input,), np.where(active, x, 0).astype(x.dtype), lambda g: (g * active,))


def sigmoid(input: Tensor) -> Tensor:
    x = input.data
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return record("sigmoid", (input,), out, lambda g: (g * out * (1.0 - out),))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise shape_mismatch("add", a.shape, b.shape)
    return record("add", (a, b), a.data + b.data, lambda g: (g, g))


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    """Elementwise product of equal-shaped tensors, or of a tensor and a constant."""
    if not isinstance(b, Tensor):
        constant = np.asarray(b, dtype=a.dtype)
        return record("scale", (a,), a.data * constant, lambda g: (g * constant,))
    if a.shape != b.shape:
        raise shape_mismatch("mul", a.shape, b.shape)
    return record("mul", (a, b), a.data * b.data, lambda g: (g * b.data, g * a.data))


ELEMENTWISE_OPS = {"relu": relu, "sigmoid": sigmoid, "add": add, "mul": mul}


def elementwise(op: str, *inputs) -> Tensor:
    """Dispatch to a pointwise primitive by name (`relu`, `sigmoid`, `add`, `mul`)."""
    if op not in ELEMENTWISE_OPS:
        raise ValueError(f"unknown elementwise op '{op}', expected one of {sorted(ELEMENTWISE_OPS)}")
    return ELEMENTWISE_OPS[op](*inputs)


def sum(input: Tensor) -> Tensor:
    shape = input.shape
    return record(
        "sum", (input,), np.asarray(input.data.sum(), dtype=input.dtype),
        lambda g: (np.broadcast_to(g, shape).astype(g.dtype),),
    )


def mean(input: Tensor) -> Tensor:
    shape, count = input.shape, input.size
    return record(
        "mean", (input,), np.asarray(input.data.mean(), dtype=input.dtype),
        lambda g: (np.broadcast_to(g / count, shape).astype(g.dtype),),
    )


def reshape(input: Tensor, shape: Sequence[int]) -> Tensor:
    original = input.shape
    out = input.data.reshape(tuple(shape))
    return record("reshape", (input,), out, lambda g: (g.reshape(original),))


def flatten(input: Tensor) -> Tensor:
    return reshape(input, (input.shape[0], -1))


def global_avg_pool(input: Tensor) -> Tensor:
    """Per-channel spatial mean of an NCHW tensor, giving N×C."""
    if input.ndim != 4:
        raise ShapeError(f"global_avg_pool expects NCHW input, got shape {input.shape}")
    n, c, h, w = input.shape

    def backward(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), (n, c, h, w)).astype(g.dtype),)

    return record("global_avg_pool", (input,), input.data.mean(axis=(2, 3)), backward)


def dropout(
    input: Tensor,
    rate: float = 0.5,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """
    Inverted dropout: in training, zero each element with probability `rate` and scale the
    survivors by 1/(1-rate). Eval mode, or rate 0, returns `input` itself.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return input
    if rng is None:
        raise ValueError("training-mode dropout needs a seeded rng")
    keep = (rng.random(input.shape) >= rate).astype(input.dtype) / np.asarray(1.0 - rate, dtype=input.dtype)
    return record("dropout", (input,), input.data * keep, lambda g: (g * keep,))


def bce_loss(prob: Tensor, label) -> Tensor:
    """
    Mean binary cross-entropy of probabilities against {0, 1} labels.

    Probabilities are clamped into [1e-7, 1 - 1e-7] before the log; the gradient is taken at
    the clamped value for every element so saturated sigmoids still receive a signal.
    """
    y = label.data if isinstance(label, Tensor) else np.asarray(label)
    y = y.astype(prob.dtype).reshape(prob.shape)
    p = np.clip(prob.data, BCE_CLAMP, 1.0 - BCE_CLAMP)
    count = prob.size
    losses = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    out = np.asarray(losses.mean(), dtype=prob.dtype)

    def backward(g):
        return (g * (p - y) / (p * (1.0 - p)) / count,)

    return record("bce_loss", (prob,), out, backward)
