"""
Checkpoint format: `manifest.json` (model config, named tensor list with shapes and byte
offsets, format version) next to `weights.bin` (little-endian float32, concatenated in
manifest order). Batch-norm running statistics are stored as buffers next to the parameters.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional

import numpy as np
import pydantic
from pydantic import ConfigDict, Field

from .layers import named_arrays
from .models import ModelConfig
from .network import RelationshipNet
from .utils import CheckpointError, PathLike

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.bin"
_WIRE_DTYPE = np.dtype("<f4")


class TensorEntry(pydantic.BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    kind: Literal["parameter", "buffer"]
    shape: List[int]
    offset: int = Field(..., ge=0)
    nbytes: int = Field(..., ge=0)


class CheckpointManifest(pydantic.BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    format_version: Literal[1] = CHECKPOINT_VERSION
    model: ModelConfig
    seed: int = 0
    tensors: List[TensorEntry]
    metadata: Dict[str, object] = Field(default_factory=dict)


def snapshot(model: RelationshipNet) -> Dict[str, np.ndarray]:
    """Copies of every parameter and buffer, enough to restore the model exactly."""
    return {name: np.array(array, copy=True) for name, array in named_arrays(model).items()}


def restore(model: RelationshipNet, state: Dict[str, np.ndarray]) -> None:
    params = dict(model.named_parameters())
    buffers = dict(model.named_buffers())
    expected = set(params) | set(buffers)
    if set(state) != expected:
        missing = sorted(expected - set(state))
        unexpected = sorted(set(state) - expected)
        raise CheckpointError(f"state does not fit model: missing={missing} unexpected={unexpected}")
    for name, values in state.items():
        if name in params:
            params[name].assign(values)
        else:
            model.set_buffer(name, values)


def save_checkpoint(
    model: RelationshipNet,
    directory: PathLike,
    state: Optional[Dict[str, np.ndarray]] = None,
    metadata: Optional[dict] = None,
) -> Path:
    """Write `model` (or a `snapshot` of it) into `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = state if state is not None else snapshot(model)
    param_names = {name for name, _ in model.named_parameters()}
    entries, blobs, offset = [], [], 0
    for name, array in state.items():
        blob = np.ascontiguousarray(array, dtype=_WIRE_DTYPE).tobytes()
        entries.append(
            TensorEntry(
                name=name,
                kind="parameter" if name in param_names else "buffer",
                shape=list(np.shape(array)),
                offset=offset,
                nbytes=len(blob),
            )
        )
        blobs.append(blob)
        offset += len(blob)
    manifest = CheckpointManifest(
        model=model.config, seed=model.seed, tensors=entries, metadata=metadata or {}
    )
    (directory / WEIGHTS_NAME).write_bytes(b"".join(blobs))
    (directory / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2) + "\n")
    logger.info(f"checkpoint written to {directory} ({offset} bytes, {len(entries)} tensors)")
    return directory


def read_manifest(directory: PathLike) -> CheckpointManifest:
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        raise CheckpointError(f"no checkpoint manifest at {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint manifest {path}: {exc}") from exc
    if raw.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {raw.get('format_version')!r}, expected {CHECKPOINT_VERSION}"
        )
    try:
        return CheckpointManifest.model_validate(raw)
    except pydantic.ValidationError as exc:
        raise CheckpointError(f"invalid checkpoint manifest {path}: {exc}") from exc


def load_checkpoint(directory: PathLike) -> RelationshipNet:
    """Rebuild the model from its manifest and load the stored values bit-exactly."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    weights_path = directory / WEIGHTS_NAME
    if not weights_path.is_file():
        raise CheckpointError(f"no weights file at {weights_path}")
    blob = weights_path.read_bytes()
    state = {}
    for entry in manifest.tensors:
        end = entry.offset + entry.nbytes
        if end > len(blob) or entry.nbytes != int(np.prod(entry.shape)) * _WIRE_DTYPE.itemsize:
            raise CheckpointError(f"tensor {entry.name} does not fit {weights_path}")
        state[entry.name] = np.frombuffer(blob[entry.offset : end], dtype=_WIRE_DTYPE).reshape(entry.shape)
    model = RelationshipNet(manifest.model, seed=manifest.seed)
    restore(model, state)
    model.eval()
    logger.debug(f"loaded checkpoint {directory} ({len(state)} tensors)")
    return model
