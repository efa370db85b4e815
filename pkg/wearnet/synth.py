"""
Procedural person/clothing scenes and the overlay compositing that adds unworn garments.

Worn garments are drawn as bands of a person silhouette. Every scene also gets one standalone
garment, drawn on its own small canvas and pasted at a uniformly sampled offset that keeps at
least `min_overlap` of the overlay rectangle on the canvas. Pair samples are cells of the
scene's label matrix, so worn and unworn pairs share the same kind of image.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import cv2
import numpy as np

from .models import GeneratorConfig, Predicate
from .utils import EmptyMaskError, ShapeError, derive_rng

logger = logging.getLogger(__name__)

MAX_OFFSET_DRAWS = 1000

Dims = Tuple[int, int]


@dataclass
class Scene:
    """
    One RGB image with every person and clothing mask in it.

    `owners[j]` is the index of the person wearing clothing `j`, or None for a composited
    (unworn) garment.
    """

    scene_id: str
    image: np.ndarray
    persons: List[np.ndarray]
    clothes: List[np.ndarray]
    owners: List[Optional[int]]

    @property
    def dims(self) -> Dims:
        return self.image.shape[:2]

    def relationship(self, person: int, clothing: int) -> Predicate:
        return Predicate.WORN if self.owners[clothing] == person else Predicate.UNWORN

    def label_matrix(self) -> np.ndarray:
        return np.array(
            [[self.relationship(i, j).label for j in range(len(self.clothes))] for i in range(len(self.persons))],
            dtype=np.int64,
        )


@dataclass
class PairSample:
    """One person mask / clothing mask pairing with its predicate label."""

    image: np.ndarray
    s_mask: np.ndarray
    o_mask: np.ndarray
    label: Predicate
    scene_id: str
    seed: int
    index: int
    scene: Optional[Scene] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.s_mask.shape != self.image.shape[:2] or self.o_mask.shape != self.image.shape[:2]:
            raise ShapeError(
                f"sample {self.scene_id}: masks {self.s_mask.shape}/{self.o_mask.shape} "
                f"do not match image {self.image.shape[:2]}"
            )
        if not self.s_mask.any():
            raise EmptyMaskError(f"sample {self.scene_id} has an empty person mask")


def overlap_fraction(overlay_dims: Dims, offset: Tuple[int, int], canvas_dims: Dims) -> float:
    """Share of the overlay rectangle's area that lands on the canvas when placed at `offset`."""
    (oh, ow), (dr, dc), (ch, cw) = overlay_dims, offset, canvas_dims
    rows = max(0, min(ch, dr + oh) - max(0, dr))
    cols = max(0, min(cw, dc + ow) - max(0, dc))
    return rows * cols / (oh * ow)


def sample_offset(
    rng: np.random.Generator, overlay_dims: Dims, canvas_dims: Dims, min_overlap: float = 0.55
) -> Tuple[int, int]:
    """
    Uniform offset over [-oh+1, ch-1] × [-ow+1, cw-1], redrawn until at least `min_overlap` of
    the overlay is on the canvas. Falls back to (0, 0) after `MAX_OFFSET_DRAWS` rejections.
    """
    (oh, ow), (ch, cw) = overlay_dims, canvas_dims
    if oh > ch or ow > cw:
        raise ShapeError(f"overlay {overlay_dims} is larger than canvas {canvas_dims}")
    for _ in range(MAX_OFFSET_DRAWS):
        offset = (int(rng.integers(-oh + 1, ch)), int(rng.integers(-ow + 1, cw)))
        if overlap_fraction(overlay_dims, offset, canvas_dims) >= min_overlap:
            return offset
    logger.debug(f"no offset for overlay {overlay_dims} after {MAX_OFFSET_DRAWS} draws, using (0, 0)")
    return 0, 0


def _overlap_slices(overlay_dims: Dims, offset: Tuple[int, int], canvas_dims: Dims):
    """(canvas slices, overlay slices) of the region the placed overlay shares with the canvas."""
    (oh, ow), (dr, dc), (ch, cw) = overlay_dims, offset, canvas_dims
    r0, r1 = max(0, dr), min(ch, dr + oh)
    c0, c1 = max(0, dc), min(cw, dc + ow)
    if r0 >= r1 or c0 >= c1:
        return None
    canvas = (slice(r0, r1), slice(c0, c1))
    overlay = (slice(r0 - dr, r1 - dr), slice(c0 - dc, c1 - dc))
    return canvas, overlay


def translate_mask(mask: np.ndarray, offset: Tuple[int, int], canvas_dims: Dims) -> np.ndarray:
    """`mask` shifted by `offset` and cropped to the canvas."""
    out = np.zeros(canvas_dims, dtype=bool)
    region = _overlap_slices(mask.shape, offset, canvas_dims)
    if region is not None:
        canvas, overlay = region
        out[canvas] = mask[overlay]
    return out


def composite_overlay(
    underlay: np.ndarray, overlay_img: np.ndarray, overlay_mask: np.ndarray, offset: Tuple[int, int]
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Paste the masked overlay pixels onto a copy of `underlay`.

    Masks already in the scene are not touched, so a worn garment stays set where the
    overlay now hides it.

    Returns:
        The new image and the translated, canvas-cropped overlay mask.

    Raises:
        EmptyMaskError: a nonempty overlay mask lands entirely off the canvas.
    """
    overlay_mask = np.asarray(overlay_mask, dtype=bool)
    if overlay_img.shape[:2] != overlay_mask.shape:
        raise ShapeError(f"overlay image {overlay_img.shape[:2]} and mask {overlay_mask.shape} differ")
    translated = translate_mask(overlay_mask, offset, underlay.shape[:2])
    if overlay_mask.any() and not translated.any():
        raise EmptyMaskError(f"overlay mask at offset {offset} falls entirely off the canvas")
    image = underlay.copy()
    region = _overlap_slices(overlay_mask.shape, offset, underlay.shape[:2])
    if region is not None:
        canvas, overlay = region
        keep = overlay_mask[overlay]
        image[canvas][keep] = overlay_img[overlay][keep]
    return image, translated



def _color(rng: np.random.Generator, low: int = 0, high: int = 256) -> np.ndarray:
    return rng.integers(low, high, size=3).astype(np.int16)


def _textured(rng: np.random.Generator, dims: Dims, color: np.ndarray, amplitude: int = 12) -> np.ndarray:
    noise = rng.integers(-amplitude, amplitude + 1, size=(*dims, 3))
    return np.clip(color + noise, 0, 255).astype(np.uint8)


def _draw_person(rng: np.random.Generator, size: int, x0: int, x1: int) -> Tuple[np.ndarray, Tuple[int, int, int]]:
    """Silhouette mask (body ellipse + head circle) inside the column slot [x0, x1)."""
    slot = x1 - x0
    cx = int((x0 + x1) / 2 + rng.integers(-slot // 8, slot // 8 + 1))
    ax = max(2, int(slot * rng.uniform(0.22, 0.36)))
    ay = max(3, int(size * rng.uniform(0.26, 0.34)))
    cy = int(size * rng.uniform(0.56, 0.62))
    radius = max(2, int(min(ax, size * 0.09)))
    mask = np.zeros((size, size), dtype=np.uint8)
    cv2.ellipse(mask, (cx, cy), (ax, ay), 0, 0, 360, 1, -1)
    cv2.circle(mask, (cx, cy - ay - radius + 2), radius, 1, -1)
    return mask.astype(bool), (cy, ay, radius)


def _worn_garments(rng: np.random.Generator, person: np.ndarray, body: Tuple[int, int, int], max_worn: int):
    """Top and/or bottom bands of the body, intersected with the silhouette."""
    cy, ay, _ = body
    split = cy + int(ay * rng.uniform(0.0, 0.2))
    bands = {"top": (cy - int(ay * 0.85), split), "bottom": (split, cy + ay + 1)}
    count = int(rng.integers(1, max_worn + 1))
    kinds = ["top", "bottom"] if count == 2 else [str(rng.choice(["top", "bottom"]))]
    garments = []
    for kind in kinds:
        r0, r1 = bands[kind]
        band = np.zeros_like(person)
        band[max(r0, 0) : max(r1, 0)] = True
        garment = band & person
        if garment.any():
            garments.append(garment)
    return garments


def _overlay_garment(rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """A standalone garment on its own canvas; the shape always covers the canvas centre."""
    oh, ow = (int(v) for v in rng.integers(size // 4, size // 2 + 1, size=2))
    mask = np.zeros((oh, ow), dtype=np.uint8)
    if rng.random() < 0.5:
        cv2.ellipse(mask, (ow // 2, oh // 2), (max(1, ow // 2 - 1), max(1, oh // 2 - 1)), 0, 0, 360, 1, -1)
    else:
        shirt = np.array(
            [
                (0.25 * ow, 0),
                (0.75 * ow, 0),
                (ow - 1, 0.3 * oh),
                (0.8 * ow, 0.45 * oh),
                (0.75 * ow, oh - 1),
                (0.25 * ow, oh - 1),
                (0.2 * ow, 0.45 * oh),
                (0, 0.3 * oh),
            ],
            dtype=np.int32,
        )
        cv2.fillPoly(mask, [shirt], 1)
    image = _textured(rng, (oh, ow), _color(rng))
    return image, mask.astype(bool)


def generate_scene(
    rng: np.random.Generator, cfg: GeneratorConfig, with_unworn: bool = True, scene_id: str = ""
) -> Scene:
    """
    Background, 1..`max_persons` silhouettes side by side, 1..`max_worn` worn garments per
    person and, when `with_unworn`, one composited garment on top of everything.
    """
    size = cfg.image_size
    image = _textured(rng, (size, size), _color(rng, 0, 120), amplitude=20)
    n_persons = int(rng.integers(1, cfg.max_persons + 1))
    bounds = np.linspace(0, size, n_persons + 1).astype(int)
    persons, clothes, owners = [], [], []
    for index, (x0, x1) in enumerate(zip(bounds[:-1], bounds[1:])):
        person, body = _draw_person(rng, size, int(x0), int(x1))
        image[person] = _textured(rng, (size, size), _color(rng, 120, 256))[person]
        for garment in _worn_garments(rng, person, body, cfg.max_worn):
            image[garment] = _textured(rng, (size, size), _color(rng))[garment]
            clothes.append(garment)
            owners.append(index)
        persons.append(person)
    if with_unworn:
        overlay_img, overlay_mask = _overlay_garment(rng, size)
        offset = sample_offset(rng, overlay_mask.shape, (size, size), cfg.min_overlap)
        image, translated = composite_overlay(image, overlay_img, overlay_mask, offset)
        clothes.append(translated)
        owners.append(None)
    return Scene(scene_id=scene_id, image=image, persons=persons, clothes=clothes, owners=owners)


def draw_pair(rng: np.random.Generator, scene: Scene, label: Predicate) -> Tuple[int, int]:
    """
    A uniformly chosen (person, clothing) cell of `scene.label_matrix()` carrying `label`.

    Unworn cells are the composited garment against any person and, with several persons,
    every garment worn by someone else. Falls back to the other label when `label` has no cell.
    """
    cells = np.argwhere(scene.label_matrix() == label.label)
    if not len(cells):
        cells = np.argwhere(scene.label_matrix() != label.label)
    person, clothing = cells[int(rng.integers(len(cells)))]
    return int(person), int(clothing)


def generate_sample(cfg: GeneratorConfig, index: int) -> PairSample:
    """
    Sample `index` of the dataset described by `cfg`; depends only on (cfg, index).

    Every scene carries a composited garment, so both labels come from the same kind of image.
    """
    rng = derive_rng(cfg.seed, index)
    wanted = Predicate.UNWORN if rng.random() < cfg.unworn_ratio else Predicate.WORN
    scene = generate_scene(rng, cfg, scene_id=f"{index:06d}")
    person, clothing = draw_pair(rng, scene, wanted)
    return PairSample(
        image=scene.image,
        s_mask=scene.persons[person],
        o_mask=scene.clothes[clothing],
        label=scene.relationship(person, clothing),
        scene_id=scene.scene_id,
        seed=cfg.seed,
        index=index,
        scene=scene,
    )


def generate_samples(cfg: GeneratorConfig, threads: int = 1) -> List[PairSample]:
    """All `cfg.count` samples; any thread count gives the same list."""
    indices = range(cfg.count)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(lambda i: generate_sample(cfg, i), indices))
    else:
        samples = [generate_sample(cfg, i) for i in indices]
    worn = sum(s.label is Predicate.WORN for s in samples)
    logger.info(f"generated {len(samples)} samples: {worn} worn, {len(samples) - worn} unworn")
    return samples
