"""
On-disk dataset layout:

    <root>/manifest.json        DatasetManifest (versioned; records with inline RLE masks)
    <root>/images/<id>.ppm      binary PPM (P6) RGB rasters
    <root>/scenes/<id>.json     SceneFile: every person and clothing mask of one image

Manifest paths are relative to the manifest's directory; a scene file's image path is relative
to the scene file.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import cv2
import numpy as np
import pydantic
from pydantic import ConfigDict, Field, model_validator

from .masks import BinaryMask
from .models import GeneratorConfig, Predicate
from .synth import PairSample, Scene
from .utils import DatasetFormatError, PathLike, derive_rng, validation_error_to_diagnostic

logger = logging.getLogger(__name__)

DATASET_VERSION = 1
MANIFEST_NAME = "manifest.json"
TRAIN_SPLIT = "train"


def fold_split(fold: int) -> str:
    return f"val-fold-{fold}"


class SampleRecord(pydantic.BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    index: int = Field(..., ge=0)
    scene_id: str
    image: str = Field(..., description="Image path relative to the manifest.")
    scene: Optional[str] = Field(default=None, description="Scene file path relative to the manifest.")
    s_mask: BinaryMask
    o_mask: BinaryMask
    label: Predicate
    split: str
    seed: int

    @property
    def fold(self) -> Optional[int]:
        if self.split.startswith("val-fold-"):
            return int(self.split.rsplit("-", 1)[1])
        return None


class DatasetManifest(pydantic.BaseModel):
    """Sample records, their split assignment and the generator settings that produced them."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    version: Literal[1] = DATASET_VERSION
    seed: int
    folds: int = Field(..., ge=1)
    generator: GeneratorConfig
    samples: List[SampleRecord]

    @model_validator(mode="after")
    def _check_splits(self):
        sizes = self.fold_sizes()
        unknown = {r.split for r in self.samples} - {TRAIN_SPLIT, *map(fold_split, range(1, self.folds + 1))}
        if unknown:
            raise ValueError(f"unknown split names {sorted(unknown)}")
        if sizes and max(sizes.values()) - min(sizes.values()) > 1:
            raise ValueError(f"fold sizes differ by more than one: {sizes}")
        return self

    def fold_sizes(self) -> Dict[int, int]:
        sizes = {fold: 0 for fold in range(1, self.folds + 1)}
        for record in self.samples:
            if record.fold is not None:
                sizes[record.fold] += 1
        return sizes if any(sizes.values()) else {}

    def records(self, split: str) -> List[SampleRecord]:
        return [r for r in self.samples if r.split == split]

    def class_counts(self) -> Dict[str, int]:
        counts = {predicate.value: 0 for predicate in Predicate}
        for record in self.samples:
            counts[record.label.value] += 1
        return counts


class SceneFile(pydantic.BaseModel):
    """Every mask of one image, for pairwise (person × clothing) prediction."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    version: Literal[1] = DATASET_VERSION
    scene_id: str
    image: str
    persons: List[BinaryMask]
    clothes: List[BinaryMask]
    owners: List[Optional[int]] = Field(
        default_factory=list, description="Wearer index per clothing mask; null for unworn. Optional."
    )


def assign_splits(count: int, val_count: int, folds: int, seed: int) -> List[str]:
    """
    Split name per sample index: a seeded shuffle, whose first `val_count` positions are dealt
    round-robin into `val-fold-1..folds`; the rest train. Fold sizes differ by at most one.
    """
    if not 0 <= val_count <= count:
        raise ValueError(f"val_count {val_count} outside [0, {count}]")
    if folds < 1:
        raise ValueError(f"folds must be positive, got {folds}")
    # length-2 spawn key, disjoint from the per-sample streams
    order = derive_rng(seed, 0, 0).permutation(count)
    splits = [TRAIN_SPLIT] * count
    for position, index in enumerate(order[:val_count]):
        splits[int(index)] = fold_split(position % folds + 1)
    return splits


def write_image(path: Path, image: np.ndarray) -> None:
    if not cv2.imwrite(str(path), cv2.cvtColor(image, cv2.COLOR_RGB2BGR)):
        raise OSError(f"could not write image {path}")


def read_image(path: Path) -> np.ndarray:
    raster = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if raster is None:
        raise DatasetFormatError(f"missing or unreadable image {path}")
    return cv2.cvtColor(raster, cv2.COLOR_BGR2RGB)


def _scene_file(scene: Scene, image: str) -> SceneFile:
    return SceneFile(
        scene_id=scene.scene_id,
        image=image,
        persons=[BinaryMask.from_array(m) for m in scene.persons],
        clothes=[BinaryMask.from_array(m) for m in scene.clothes],
        owners=list(scene.owners),
    )


def write_dataset(samples: List[PairSample], directory: PathLike, cfg: GeneratorConfig) -> DatasetManifest:
    """Write rasters, scene files and the manifest; splits come from `assign_splits`."""
    root = Path(directory)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "scenes").mkdir(exist_ok=True)
    splits = assign_splits(len(samples), int(round(len(samples) * cfg.val_fraction)), cfg.folds, cfg.seed)
    records = []
    for sample, split in zip(samples, splits):
        image = f"images/{sample.scene_id}.ppm"
        write_image(root / image, sample.image)
        scene = None
        if sample.scene is not None:
            scene = f"scenes/{sample.scene_id}.json"
            (root / scene).write_text(_scene_file(sample.scene, f"../{image}").model_dump_json() + "\n")
        records.append(
            SampleRecord(
                index=sample.index,
                scene_id=sample.scene_id,
                image=image,
                scene=scene,
                s_mask=BinaryMask.from_array(sample.s_mask),
                o_mask=BinaryMask.from_array(sample.o_mask),
                label=sample.label,
                split=split,
                seed=sample.seed,
            )
        )
    manifest = DatasetManifest(seed=cfg.seed, folds=cfg.folds, generator=cfg, samples=records)
    (root / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=1) + "\n")
    logger.info(f"wrote {len(records)} samples to {root} ({manifest.class_counts()})")
    return manifest


def _validate(model: type, raw: dict, path: Path):
    try:
        return model.model_validate(raw)
    except pydantic.ValidationError as exc:
        raise DatasetFormatError(validation_error_to_diagnostic(exc, prefix=f"invalid {path}")) from exc


def _load_json(path: Path) -> dict:
    if not path.is_file():
        raise DatasetFormatError(f"no such file {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"corrupt JSON in {path}: {exc}") from exc
    if raw.get("version") != DATASET_VERSION:
        raise DatasetFormatError(
            f"{path} has version {raw.get('version')!r}; this build reads version {DATASET_VERSION}"
        )
    return raw


def read_manifest(directory: PathLike) -> DatasetManifest:
    path = Path(directory) / MANIFEST_NAME
    return _validate(DatasetManifest, _load_json(path), path)


def read_dataset(directory: PathLike) -> Tuple[DatasetManifest, List[PairSample]]:
    """Manifest plus one `PairSample` per record, in manifest order.

    Raises:
        DatasetFormatError: version mismatch, corrupt RLE, missing raster or dims mismatch.
    """
    root = Path(directory)
    manifest = read_manifest(root)
    samples = []
    for record in manifest.samples:
        image = read_image(root / record.image)
        dims = (record.s_mask.height, record.s_mask.width)
        if image.shape[:2] != dims or (record.o_mask.height, record.o_mask.width) != dims:
            raise DatasetFormatError(f"sample {record.scene_id}: mask dims do not match image {image.shape[:2]}")
        samples.append(
            PairSample(
                image=image,
                s_mask=record.s_mask.to_array(),
                o_mask=record.o_mask.to_array(),
                label=record.label,
                scene_id=record.scene_id,
                seed=record.seed,
                index=record.index,
            )
        )
    logger.debug(f"read {len(samples)} samples from {root}")
    return manifest, samples


def select(manifest: DatasetManifest, samples: List[PairSample], split: str) -> List[PairSample]:
    """Samples whose record carries `split` (`train` or `val-fold-k`)."""
    return [sample for record, sample in zip(manifest.samples, samples) if record.split == split]


def read_scene(path: PathLike) -> Scene:
    """Load a scene file and its raster.

    Raises:
        DatasetFormatError: unreadable file, no person or no clothing mask, or dims mismatch.
    """
    path = Path(path)
    scene_file = _validate(SceneFile, _load_json(path), path)
    if not scene_file.persons or not scene_file.clothes:
        raise DatasetFormatError(
            f"scene {path} needs at least one person and one clothing mask "
            f"(has {len(scene_file.persons)} and {len(scene_file.clothes)})"
        )
    image = read_image(path.parent / scene_file.image)
    masks = [m.to_array() for m in (*scene_file.persons, *scene_file.clothes)]
    if any(m.shape != image.shape[:2] for m in masks):
        raise DatasetFormatError(f"scene {path}: mask dims do not match image {image.shape[:2]}")
    n = len(scene_file.persons)
    return Scene(
        scene_id=scene_file.scene_id,
        image=image,
        persons=masks[:n],
        clothes=masks[n:],
        owners=list(scene_file.owners) or [None] * len(scene_file.clothes),
    )
