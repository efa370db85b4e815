from pydantic import ValidationError

from .blocks import (
    AttentionInput,
    BottleneckUnit,
    ClassificationHead,
    SoftAttentionUnit,
    build_attention_input,
    hard_attention_input,
    resize_area,
)
from .checkpoint import load_checkpoint, restore, save_checkpoint, snapshot
from .dataset import (
    DatasetManifest,
    SampleRecord,
    SceneFile,
    assign_splits,
    read_dataset,
    read_scene,
    write_dataset,
)
from .decorators import Command, command
from .dispatch import CommandDispatch
from .documented_enum import DocumentedEnum
from .evaluation import (
    ConfusionCounts,
    EvalReport,
    Metrics,
    RocCurve,
    confusion,
    kfold_eval,
    metrics,
    roc_auc,
    run_ablation,
)
from .gradcheck import finite_diff_check
from .layers import BatchNorm2d, Conv2d, Dense, Module
from .masks import BinaryMask, Box, boxed_mask, mask_to_box, rle_decode, rle_encode
from .models import (
    AttentionMode,
    AttentionUnitConfig,
    GeneratorConfig,
    ModelConfig,
    Placement,
    Predicate,
    RunConfig,
    TrainConfig,
    load_run_config,
)
from .network import (
    Backbone,
    RelationshipNet,
    assemble_backbone,
    audit_shapes,
    build_model,
    count_parameters,
    parameter_breakdown,
    predict_pair,
)
from .optim import Adam
from .relation import Triplet, TripletConfidence, compose_chain, compose_triplet, confidence_matrix
from .synth import (
    PairSample,
    Scene,
    composite_overlay,
    draw_pair,
    generate_samples,
    generate_scene,
    overlap_fraction,
    sample_offset,
)
from .tensor import Tape, Tensor, checking_mode, no_grad, reverse_pass
from .train import TrainResult, evaluate_scores, train
from .utils import (
    CheckpointError,
    DatasetFormatError,
    EmptyMaskError,
    ModeMismatchError,
    NonDeterministicError,
    ProbabilityRangeError,
    RLEError,
    ShapeError,
    TapeError,
    UndefinedMetricError,
    WearnetError,
)

__all__ = [
    # Autodiff
    "Tensor",
    "Tape",
    "reverse_pass",
    "checking_mode",
    "no_grad",
    "finite_diff_check",
    # Layers and blocks
    "Module",
    "Conv2d",
    "Dense",
    "BatchNorm2d",
    "AttentionInput",
    "build_attention_input",
    "resize_area",
    "SoftAttentionUnit",
    "BottleneckUnit",
    "ClassificationHead",
    "hard_attention_input",
    # Network
    "Backbone",
    "RelationshipNet",
    "assemble_backbone",
    "audit_shapes",
    "build_model",
    "count_parameters",
    "parameter_breakdown",
    "predict_pair",
    # Checkpoints
    "save_checkpoint",
    "load_checkpoint",
    "snapshot",
    "restore",
    # Config models
    "AttentionMode",
    "Placement",
    "Predicate",
    "AttentionUnitConfig",
    "ModelConfig",
    "TrainConfig",
    "GeneratorConfig",
    "RunConfig",
    "load_run_config",
    "DocumentedEnum",
    # Masks and data
    "BinaryMask",
    "Box",
    "rle_encode",
    "rle_decode",
    "mask_to_box",
    "boxed_mask",
    "Scene",
    "PairSample",
    "overlap_fraction",
    "sample_offset",
    "composite_overlay",
    "draw_pair",
    "generate_scene",
    "generate_samples",
    "DatasetManifest",
    "SampleRecord",
    "SceneFile",
    "assign_splits",
    "write_dataset",
    "read_dataset",
    "read_scene",
    # Training and evaluation
    "Adam",
    "train",
    "TrainResult",
    "evaluate_scores",
    "ConfusionCounts",
    "Metrics",
    "RocCurve",
    "EvalReport",
    "confusion",
    "metrics",
    "roc_auc",
    "kfold_eval",
    "run_ablation",
    # Relation
    "Triplet",
    "TripletConfidence",
    "compose_chain",
    "compose_triplet",
    "confidence_matrix",
    # CLI plumbing
    "Command",
    "command",
    "CommandDispatch",
    # Exceptions
    "ValidationError",
    "WearnetError",
    "ShapeError",
    "TapeError",
    "NonDeterministicError",
    "EmptyMaskError",
    "RLEError",
    "DatasetFormatError",
    "CheckpointError",
    "ProbabilityRangeError",
    "ModeMismatchError",
    "UndefinedMetricError",
]
