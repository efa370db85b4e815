"""Backbone assembly and the full person/clothing relationship classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from . import functional as F
from .blocks import (
    AttentionInput,
    BottleneckUnit,
    ClassificationHead,
    build_attention_input,
    hard_attention_input,
)
from .layers import BatchNorm2d, Conv2d, Module
from .masks import boxed_mask
from .models import AttentionMode, ModelConfig, Placement
from .tensor import Tensor, default_dtype, no_grad
from .utils import ModeMismatchError, ShapeError, derive_rng

logger = logging.getLogger(__name__)


class Backbone(Module):
    """Stem convolution → stages of pre-activation bottleneck units → final norm/relu."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.stem = Conv2d(
            config.stem_in_channels,
            config.stem_channels,
            config.stem_kernel,
            rng,
            stride=config.stem_stride,
            padding=config.stem_kernel // 2,
        )
        hw = self.stem.output_size(config.input_size, config.input_size)
        if min(hw) < 1:
            raise ShapeError(f"stem collapses input {config.input_size} to {hw}")
        channels = config.stem_channels
        self.units: List[BottleneckUnit] = []
        for stage, (count, width) in enumerate(zip(config.layout, config.widths)):
            for index in range(count):
                stride = 2 if stage > 0 and index == 0 else 1
                attach = config.uses_attention_units and (
                    config.placement is Placement.ALL or not self.units
                )
                unit = BottleneckUnit(channels, width, config.expansion, stride, hw, rng, attach)
                self.units.append(unit)
                channels, hw = unit.out_channels, unit.output_hw
        self.final_bn = BatchNorm2d(channels)
        self.out_channels = channels
        self.output_hw = hw
        self.audit()

    @property
    def attention_unit_count(self) -> int:
        return sum(unit.attention is not None for unit in self.units)

    def audit(self) -> List[dict]:
        """Per-unit shape report; raises ShapeError if any attention unit mismatches its host."""
        report = []
        for index, unit in enumerate(self.units):
            unit.audit()
            report.append(
                {
                    "unit": index,
                    "second_conv_dims": unit.second_conv_dims,
                    "attention_dims": unit.attention.config.dims if unit.attention else None,
                }
            )
        return report

    def __call__(self, x: Tensor, att: Optional[AttentionInput] = None) -> Tensor:
        out = self.stem(x)
        for unit in self.units:
            out = unit(out, att)
        return F.relu(self.final_bn(out))


def assemble_backbone(config: ModelConfig, seed: int = 0) -> Backbone:
    """Build the backbone described by `config`, initialised from `seed`."""
    backbone = Backbone(config, derive_rng(seed, 0))
    logger.debug(
        f"assembled backbone layout={config.layout} mode={config.attention_mode} "
        f"attention_units={backbone.attention_unit_count}"
    )
    return backbone


class RelationshipNet(Module):
    """Backbone + global average pooling + classification head, giving p(P=worn | S, O, I)."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.backbone = assemble_backbone(config, seed)
        self.head = ClassificationHead(
            self.backbone.out_channels,
            config.head_widths,
            config.dropout_rate,
            derive_rng(seed, 1),
            dropout_seed=seed,
        )

    @property
    def attention_unit_count(self) -> int:
        return self.backbone.attention_unit_count

    @property
    def mode(self) -> AttentionMode:
        return self.config.attention_mode

    def prepare_inputs(self, images, s_masks, o_masks) -> Tuple[Tensor, Optional[AttentionInput]]:
        """
        Turn raw batches into the stem input and Attention Input for this model's mode.

        Args:
            images: N×H×W×3 uint8 rasters or N×3×H×W floats in [0, 1].
            s_masks, o_masks: N×H×W binary masks.
        """
        image = _to_nchw(images)
        size = self.config.input_size
        if image.shape[2:] != (size, size):
            raise ShapeError(f"model expects {size}x{size} images, got {image.shape[2:]}")
        s = np.asarray(s_masks, dtype=bool)
        o = np.asarray(o_masks, dtype=bool)
        if s.ndim == 2:
            s, o = s[None], o[None]
        mode = self.mode
        if mode is AttentionMode.HARD:
            return hard_attention_input(image, s, o), None
        if mode is AttentionMode.NONE:
            return Tensor(image), None
        if mode is AttentionMode.BOX:
            s = np.stack([boxed_mask(m) if m.any() else m for m in s])
            o = np.stack([boxed_mask(m) if m.any() else m for m in o])
        return Tensor(image), build_attention_input(s, o)

    def __call__(self, x: Tensor, att: Optional[AttentionInput] = None) -> Tensor:
        if self.config.uses_attention_units and att is None:
            raise ModeMismatchError(f"{self.mode} model needs an Attention Input")
        features = F.global_avg_pool(self.backbone(x, att))
        return self.head(features)

    def predict(self, images, s_masks, o_masks) -> np.ndarray:
        """Eval-mode probabilities for a batch; leaves the model's mode as it found it."""
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                x, att = self.prepare_inputs(images, s_masks, o_masks)
                return self(x, att).data.reshape(-1).astype(np.float64)
        finally:
            self.train(was_training)


def _to_nchw(images) -> np.ndarray:
    array = np.asarray(images)
    if array.ndim == 3:
        array = array[None]
    if array.ndim != 4:
        raise ShapeError(f"images must be a batch of rasters, got shape {array.shape}")
    if array.dtype == np.uint8:
        return (array.transpose(0, 3, 1, 2) / 255.0).astype(default_dtype())
    if array.shape[1] == 3:
        return array.astype(default_dtype())
    return array.transpose(0, 3, 1, 2).astype(default_dtype())


def audit_shapes(model: Union[RelationshipNet, Backbone]) -> List[dict]:
    """Per-bottleneck attention target dims vs second-conv output dims.

    Raises:
        ShapeError: an attention unit does not match the convolution it is added to.
    """
    backbone = model.backbone if isinstance(model, RelationshipNet) else model
    return backbone.audit()


def build_model(config: ModelConfig, seed: int = 0) -> RelationshipNet:
    model = RelationshipNet(config, seed)
    logger.info(
        f"built {config.attention_mode} model: layout={config.layout} "
        f"attention_units={model.attention_unit_count} parameters={count_parameters(model)}"
    )
    return model


def predict_pair(model: RelationshipNet, image, s_mask, o_mask, mode: AttentionMode) -> float:
    """p(P=worn | S, O, I) for a single person/clothing pair.

    Raises:
        ModeMismatchError: `mode` differs from the mode the model was assembled in.
    """
    mode = AttentionMode(mode)
    if mode is not model.mode:
        raise ModeMismatchError(f"model was assembled for {model.mode} attention, not {mode}")
    return float(model.predict(image, s_mask, o_mask)[0])


@dataclass(frozen=True)
class ParameterCount:
    total: int
    attention: int

    @property
    def backbone_share(self) -> int:
        return self.total - self.attention


def count_parameters(model: Module) -> int:
    return int(sum(p.size for p in model.parameters()))


def parameter_breakdown(model: RelationshipNet) -> ParameterCount:
    attention = sum(
        count_parameters(unit.attention) for unit in model.backbone.units if unit.attention is not None
    )
    return ParameterCount(total=count_parameters(model), attention=int(attention))
