"""
Configuration documents. Every document forbids unknown keys and is immutable once validated.
"""

import logging
from pathlib import Path
from typing import ClassVar, List, Literal, Optional, Tuple, Type

import pydantic
from pydantic import ConfigDict, Field, model_validator

from .documented_enum import DocumentedEnum
from .schema_generators import ConfigSchemaGenerator
from .utils import PathLike

logger = logging.getLogger(__name__)

# class mix and validation share of the released dataset
DEFAULT_UNWORN_RATIO = 11126 / (18726 + 11126)
DEFAULT_VAL_FRACTION = 5705 / (29852 + 5705)
RUN_CONFIG_VERSION = 1


class AttentionMode(DocumentedEnum):
    """How the person and clothing masks reach the classifier.\n{options}"""

    SOFT = "soft", "Attention Input resized, convolved and added after bottleneck 3x3 convolutions."
    HARD = "hard", "Person and clothing masks concatenated with the RGB image at the stem."
    BOX = "box", "Soft attention fed with filled minimal bounding boxes instead of masks."
    NONE = "none", "Image only; no mask information."


class Placement(DocumentedEnum):
    """Which bottleneck units receive a soft attention unit.\n{options}"""

    ALL = "all", "One attention unit per bottleneck unit."
    FIRST = "first", "A single attention unit on the first bottleneck unit."


class Predicate(DocumentedEnum):
    """Relationship between a person and an article of clothing.\n{options}"""

    WORN = "worn", "The person is wearing the clothing (positive class, label 1)."
    UNWORN = "unworn", "The clothing is not worn by the person (label 0)."

    @property
    def label(self) -> int:
        return 1 if self is Predicate.WORN else 0

    @classmethod
    def from_label(cls, label: int) -> "Predicate":
        return cls.WORN if int(label) == 1 else cls.UNWORN


class ConfigBaseModel(pydantic.BaseModel):
    """
    Base of every configuration document: strict about unknown keys, frozen after validation,
    and rendered to JSON schema by `ConfigSchemaGenerator`.
    """

    model_config = ConfigDict(extra="forbid", frozen=True, use_enum_values=False)

    _schema_generator: ClassVar[Type[ConfigSchemaGenerator]] = ConfigSchemaGenerator

    @classmethod
    def model_json_schema(cls, schema_generator=None, **kwargs):
        default_kwargs = {
            "ref_template": "#/$defs/{model}",
            "mode": "validation",
            "schema_generator": schema_generator or cls._schema_generator,
            **kwargs,
        }
        return super().model_json_schema(**default_kwargs)


class AttentionUnitConfig(ConfigBaseModel):
    """Target dims of one soft attention unit; they equal its host's second-conv output dims."""

    target_h: int = Field(..., ge=1, description="Height H after resize.")
    target_w: int = Field(..., ge=1, description="Width W after resize.")
    target_k: int = Field(..., ge=1, description="Number of filters K.")
    kernel_size: Literal[3] = 3
    padding: Literal[1] = 1
    bias: Literal[True] = True

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.target_h, self.target_w, self.target_k


class ModelConfig(ConfigBaseModel):
    """Backbone layout, attention variant and classification head."""

    layout: List[int] = Field(
        default=[1, 1, 1],
        min_length=1,
        description="Bottleneck units per stage, e.g. [3,4,6,3] or [3,4,23,3].",
    )
    base_width: int = Field(default=8, ge=1, description="Bottleneck width of the first stage.")
    stage_widths: Optional[List[int]] = Field(
        default=None, description="Explicit bottleneck width per stage; doubles per stage when omitted."
    )
    expansion: int = Field(default=4, ge=1, description="Output channels = width * expansion.")
    stem_channels: int = Field(default=16, ge=1)
    stem_kernel: int = Field(default=3, ge=1)
    stem_stride: int = Field(default=2, ge=1)
    input_size: int = Field(default=64, ge=8, description="Square input resolution.")
    attention_mode: AttentionMode = AttentionMode.SOFT
    placement: Placement = Placement.ALL
    head_widths: List[int] = Field(default=[256, 256], min_length=1)
    dropout_rate: float = Field(default=0.5, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_layout(self):
        if any(units < 1 for units in self.layout):
            raise ValueError(f"every stage needs at least one bottleneck unit, got {self.layout}")
        if self.stage_widths is not None and len(self.stage_widths) != len(self.layout):
            raise ValueError(
                f"stage_widths has {len(self.stage_widths)} entries for {len(self.layout)} stages"
            )
        if any(width < 1 for width in self.head_widths):
            raise ValueError(f"head widths must be positive, got {self.head_widths}")
        return self

    @property
    def widths(self) -> List[int]:
        if self.stage_widths is not None:
            return list(self.stage_widths)
        return [self.base_width * 2**i for i in range(len(self.layout))]

    @property
    def uses_attention_units(self) -> bool:
        return self.attention_mode in (AttentionMode.SOFT, AttentionMode.BOX)

    @property
    def stem_in_channels(self) -> int:
        return 5 if self.attention_mode is AttentionMode.HARD else 3

    @property
    def expected_attention_units(self) -> int:
        if not self.uses_attention_units:
            return 0
        return sum(self.layout) if self.placement is Placement.ALL else 1


class TrainConfig(ConfigBaseModel):
    """Mini-batch training with an adaptive-moment optimizer and best-val-accuracy selection."""

    epochs: int = Field(default=50, ge=1)
    batch_size: int = Field(default=16, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    seed: int = Field(default=0, ge=0)
    val_fold: int = Field(default=1, ge=1, description="Validation fold monitored for checkpoint selection.")
    threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    selection_metric: Literal["val_accuracy"] = "val_accuracy"
    log_every: int = Field(default=1, ge=1)


class GeneratorConfig(ConfigBaseModel):
    """Procedural person/clothing scenes composited the way the released dataset was."""

    count: int = Field(default=2000, ge=1, description="Number of person/clothing pair samples.")
    seed: int = Field(default=0, ge=0)
    image_size: int = Field(default=64, ge=16)
    unworn_ratio: float = Field(default=DEFAULT_UNWORN_RATIO, ge=0.0, le=1.0)
    min_overlap: float = Field(default=0.55, gt=0.0, le=1.0)
    folds: int = Field(default=10, ge=1)
    val_fraction: float = Field(default=DEFAULT_VAL_FRACTION, ge=0.0, le=1.0)
    max_persons: int = Field(default=1, ge=1, le=3)
    max_worn: int = Field(default=2, ge=1, le=2)

    @property
    def val_count(self) -> int:
        return int(round(self.count * self.val_fraction))


class RunConfig(ConfigBaseModel):
    """Everything one experiment needs: model, training protocol and data generator."""

    schema_version: Literal[1] = RUN_CONFIG_VERSION
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)


def load_run_config(path: Optional[PathLike]) -> RunConfig:
    if path is None:
        return RunConfig()
    logger.debug(f"loading run config from {path}")
    return RunConfig.model_validate_json(Path(path).read_text())
