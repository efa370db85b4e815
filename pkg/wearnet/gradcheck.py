import logging
from typing import Callable, Sequence, Union

import numpy as np

from .tensor import Tape, Tensor, checking_mode, reverse_pass
from .utils import NonDeterministicError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-4


def relative_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))


def finite_diff_check(
    fn: Callable[..., Tensor],
    point: Union[Tensor, Sequence[Tensor]],
    eps: float = DEFAULT_EPS,
) -> float:
    """
    Compare reverse-pass gradients of a scalar function with central differences.

    Args:
        fn: Called as `fn(*points)`; must return a scalar tensor and be deterministic
            (dropout in eval mode). It may ignore its arguments and close over a module
            whose parameters are passed as `point`.
        point: The tensor, or tensors, to differentiate with respect to. They must be
            64-bit, which they are when created inside `checking_mode()`.
        eps: Central-difference step.

    Returns:
        The maximum elementwise relative error `|a-b| / max(1e-8, |a|+|b|)`.

    Raises:
        NonDeterministicError: Two evaluations at the same point disagree.
    """
    points = [point] if isinstance(point, Tensor) else list(point)
    for p in points:
        if p.dtype != np.float64:
            raise ShapeError(f"finite_diff_check needs 64-bit tensors, got {p.dtype} for {p!r}")

    with checking_mode():
        flags = [p.requires_grad for p in points]
        for p in points:
            p.requires_grad = True
        try:
            with Tape() as tape:
                loss = fn(*points)
            reference = loss.item()
            if fn(*points).item() != reference:
                raise NonDeterministicError("function returned different values for the same input")
            grads = reverse_pass(tape, loss)
            worst = 0.0
            for p in points:
                analytic = grads[p] if p in grads else np.zeros(p.shape)
                numeric = _central_differences(fn, points, p, eps)
                error = float(relative_error(analytic, numeric).max())
                logger.debug(f"finite_diff_check {p.name or p.shape}: max rel error {error:.3e}")
                worst = max(worst, error)
        finally:
            for p, flag in zip(points, flags):
                p.requires_grad = flag
    return worst


def _central_differences(fn, points, target: Tensor, eps: float) -> np.ndarray:
    original = target.numpy()
    flat = original.reshape(-1)
    numeric = np.zeros_like(flat)
    try:
        for i in range(flat.size):
            shifted = flat.copy()
            shifted[i] = flat[i] + eps
            target.assign(shifted.reshape(original.shape))
            upper = fn(*points).item()
            shifted[i] = flat[i] - eps
            target.assign(shifted.reshape(original.shape))
            lower = fn(*points).item()
            numeric[i] = (upper - lower) / (2 * eps)
    finally:
        target.assign(original)
    return numeric.reshape(original.shape)
