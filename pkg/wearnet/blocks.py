"""
Building blocks of the relationship classifier: the Attention Input, the soft attention unit,
pre-activation bottleneck units with attention injection, and the classification head.
"""

from __future__ import annotations

import logging
from typing import Dict, Optional, Sequence, Tuple, Union

import cv2
import numpy as np

from . import functional as F
from .layers import BatchNorm2d, Conv2d, Dense, Module
from .models import AttentionUnitConfig
from .tensor import Tensor, default_dtype
from .utils import ShapeError, shape_mismatch

logger = logging.getLogger(__name__)

# OpenCV's per-call channel limit
_CV_MAX_CHANNELS = 512


def _as_batch(mask) -> np.ndarray:
    array = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    return array[None] if array.ndim == 2 else array


class AttentionInput:
    """
    N×3×H×W map identifying the pair being classified: channel 0 is the subject (person)
    mask, channel 1 the object (clothing) mask and channel 2 their unclamped sum.

    Resized copies are cached per target size, since many units share one.
    """

    def __init__(self, map: np.ndarray):
        if map.ndim != 4 or map.shape[1] != 3:
            raise ShapeError(f"Attention Input must be N×3×H×W, got shape {map.shape}")
        self.map = Tensor._wrap(map)
        self._resized: Dict[Tuple[int, int], Tensor] = {}

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.map.shape

    def resized(self, height: int, width: int) -> Tensor:
        key = (height, width)
        if key not in self._resized:
            self._resized[key] = resize_area(self.map, height, width)
        return self._resized[key]


def build_attention_input(s_mask, o_mask) -> AttentionInput:
    """Stack subject mask, object mask and their sum. Accepts H×W or N×H×W masks.

    Raises:
        ShapeError: the masks do not share dims.
    """
    s = _as_batch(s_mask)
    o = _as_batch(o_mask)
    if s.shape != o.shape:
        raise shape_mismatch("subject and object masks", s.shape, o.shape)
    dtype = default_dtype()
    s = (s != 0).astype(dtype)
    o = (o != 0).astype(dtype)
    return AttentionInput(np.stack([s, o, s + o], axis=1))


def resize_area(map: Union[Tensor, np.ndarray], target_h: int, target_w: int) -> Tensor:
    """
    Area-average (box-filter) resampling of an NCHW map to `target_h`×`target_w`.

    Constant maps stay constant and fractional mass is kept, so thin masks survive
    large reductions. Same-size requests return the input values unchanged.
    """
    if target_h < 1 or target_w < 1:
        raise ShapeError(f"resize target must be at least 1x1, got {target_h}x{target_w}")
    array = map.data if isinstance(map, Tensor) else np.asarray(map)
    if array.ndim != 4:
        raise ShapeError(f"resize_area expects an NCHW map, got shape {array.shape}")
    n, c, h, w = array.shape
    if (h, w) == (target_h, target_w):
        return map if isinstance(map, Tensor) else Tensor._wrap(array.copy())
    planes = np.ascontiguousarray(array.reshape(n * c, h, w).transpose(1, 2, 0))
    chunks = []
    for start in range(0, n * c, _CV_MAX_CHANNELS):
        chunk = np.ascontiguousarray(planes[:, :, start : start + _CV_MAX_CHANNELS])
        resized = cv2.resize(chunk, (target_w, target_h), interpolation=cv2.INTER_AREA)
        chunks.append(resized.reshape(target_h, target_w, -1))
    out = np.concatenate(chunks, axis=2).transpose(2, 0, 1).reshape(n, c, target_h, target_w)
    return Tensor._wrap(out.astype(array.dtype, copy=False))


class SoftAttentionUnit(Module):
    """Resize the Attention Input to (H, W), then one 3×3 convolution to K channels. No activation."""

    def __init__(self, config: AttentionUnitConfig, rng: np.random.Generator, zero_init: bool = False):
        self.config = config
        self.conv = Conv2d(
            3,
            config.target_k,
            config.kernel_size,
            rng,
            padding=config.padding,
            bias=config.bias,
            zero_init=zero_init,
        )

    def __call__(self, att: AttentionInput) -> Tensor:
        return self.conv(att.resized(self.config.target_h, self.config.target_w))


class BottleneckUnit(Module):
    """
    Pre-activation bottleneck: norm-relu-1×1 reduce, norm-relu-3×3 (the "second" convolution,
    carrying the stride), norm-relu-1×1 expand, plus a 1×1 projection shortcut when the
    dims change. An attached soft attention unit's output is added right after the 3×3 conv.
    """

    def __init__(
        self,
        in_channels: int,
        width: int,
        expansion: int,
        stride: int,
        input_hw: Tuple[int, int],
        rng: np.random.Generator,
        attach_attention: bool = False,
    ):
        out_channels = width * expansion
        self.bn1 = BatchNorm2d(in_channels)
        self.conv1 = Conv2d(in_channels, width, 1, rng, bias=False)
        self.bn2 = BatchNorm2d(width)
        self.conv2 = Conv2d(width, width, 3, rng, stride=stride, padding=1, bias=False)
        self.bn3 = BatchNorm2d(width)
        self.conv3 = Conv2d(width, out_channels, 1, rng, bias=False)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = Conv2d(in_channels, out_channels, 1, rng, stride=stride, bias=False)
        else:
            self.shortcut = None
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.input_hw = tuple(input_hw)
        h, w = self.conv2.output_size(*self.input_hw)
        if h < 1 or w < 1:
            raise ShapeError(f"bottleneck input {self.input_hw} collapses below 1x1 at stride {stride}")
        self.output_hw = (h, w)
        self.attention = (
            SoftAttentionUnit(AttentionUnitConfig(target_h=h, target_w=w, target_k=width), rng)
            if attach_attention
            else None
        )

    @property
    def second_conv_dims(self) -> Tuple[int, int, int]:
        return (*self.output_hw, self.conv2.out_channels)

    def audit(self) -> None:
        """Assert the attached unit's output dims equal the second conv's output dims."""
        if self.attention is not None and self.attention.config.dims != self.second_conv_dims:
            raise shape_mismatch(
                "attention unit vs second convolution", self.attention.config.dims, self.second_conv_dims
            )

    def __call__(self, x: Tensor, att: Optional[AttentionInput] = None) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.in_channels or x.shape[2:] != self.input_hw:
            raise shape_mismatch(
                "bottleneck input", x.shape, ("N", self.in_channels, *self.input_hw)
            )
        out = F.relu(self.bn1(x))
        shortcut = self.shortcut(out) if self.shortcut is not None else x
        out = self.conv1(out)
        out = self.conv2(F.relu(self.bn2(out)))
        if self.attention is not None and att is not None:
            out = F.add(out, self.attention(att))
        out = self.conv3(F.relu(self.bn3(out)))
        return F.add(out, shortcut)


class ClassificationHead(Module):
    """dense → relu → dropout for each hidden width, then dense(1) → sigmoid."""

    def __init__(
        self,
        in_features: int,
        hidden: Sequence[int],
        dropout_rate: float,
        rng: np.random.Generator,
        dropout_seed: int = 0,
    ):
        widths = [in_features, *hidden]
        self.hidden = [Dense(a, b, rng) for a, b in zip(widths[:-1], widths[1:])]
        # small output weights keep an untrained model near p = 0.5
        self.output = Dense(widths[-1], 1, rng, std=0.01)
        self.dropout_rate = dropout_rate
        self.dropout_seed = dropout_seed
        self.dropout_rng = np.random.default_rng(dropout_seed)

    def reseed(self, seed: int) -> None:
        self.dropout_seed = seed
        self.dropout_rng = np.random.default_rng(seed)

    def __call__(self, features: Tensor) -> Tensor:
        out = features
        for layer in self.hidden:
            out = F.relu(layer(out))
            out = F.dropout(out, self.dropout_rate, training=self.training, rng=self.dropout_rng)
        return F.sigmoid(self.output(out))


def hard_attention_input(image, s_mask, o_mask) -> Tensor:
    """Channel concatenation [person mask, clothing mask, R, G, B] for the hard-attention stem.

    Args:
        image: N×3×H×W (or 3×H×W) float image.
        s_mask, o_mask: N×H×W (or H×W) binary masks.
    """
    img = image.data if isinstance(image, Tensor) else np.asarray(image)
    if img.ndim == 3:
        img = img[None]
    s = _as_batch(s_mask)
    o = _as_batch(o_mask)
    if img.ndim != 4 or img.shape[1] != 3:
        raise ShapeError(f"image must be N×3×H×W, got shape {img.shape}")
    if s.shape != o.shape or s.shape != (img.shape[0], *img.shape[2:]):
        raise shape_mismatch("hard attention masks vs image", s.shape, img.shape)
    dtype = default_dtype()
    stacked = np.concatenate(
        [(s != 0).astype(dtype)[:, None], (o != 0).astype(dtype)[:, None], img.astype(dtype)], axis=1
    )
    return Tensor(stacked)

