"""Mini-batch training with best-validation-accuracy checkpoint selection."""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import functional as F
from .checkpoint import restore, snapshot
from .models import TrainConfig
from .network import RelationshipNet
from .optim import Adam
from .synth import PairSample
from .tensor import Tape, Tensor, reverse_pass
from .utils import DatasetFormatError, ShapeError, chunked, derive_rng

logger = logging.getLogger(__name__)

# stream ids under the training seed
_SHUFFLE_STREAM = 2


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    train_accuracy: float
    val_accuracy: float
    best_val_accuracy: float
    is_best: bool


@dataclass
class TrainResult:
    best_epoch: int
    best_val_accuracy: float
    best_state: Dict[str, np.ndarray] = field(repr=False)
    history: List[EpochRecord]

    def history_rows(self) -> List[dict]:
        return [asdict(record) for record in self.history]


def stack_batch(samples: Sequence[PairSample]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Images (N×H×W×3 uint8), person masks, clothing masks and {0, 1} labels."""
    images = np.stack([s.image for s in samples])
    s_masks = np.stack([s.s_mask for s in samples])
    o_masks = np.stack([s.o_mask for s in samples])
    labels = np.array([s.label.label for s in samples], dtype=np.int64)
    return images, s_masks, o_masks, labels


def evaluate_scores(model: RelationshipNet, samples: Sequence[PairSample], batch_size: int = 64) -> np.ndarray:
    """Eval-mode p(P=worn) for every sample, in order."""
    if not samples:
        return np.zeros(0, dtype=np.float64)
    scores = []
    for batch in chunked(list(samples), batch_size):
        images, s_masks, o_masks, _ = stack_batch(batch)
        scores.append(model.predict(images, s_masks, o_masks))
    return np.concatenate(scores)


def accuracy(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> float:
    return float(np.mean((scores >= threshold).astype(np.int64) == labels))


def _labels(samples: Sequence[PairSample]) -> np.ndarray:
    return np.array([s.label.label for s in samples], dtype=np.int64)


def _check_inputs(model: RelationshipNet, train_samples, val_samples) -> None:
    if not train_samples:
        raise DatasetFormatError("training set is empty")
    if not val_samples:
        raise DatasetFormatError("validation fold is empty; checkpoint selection needs it")
    size = model.config.input_size
    for sample in (train_samples[0], val_samples[0]):
        if sample.image.shape[:2] != (size, size):
            raise ShapeError(
                f"dataset images are {sample.image.shape[:2]} but the model expects {size}x{size}"
            )


def train(
    model: RelationshipNet,
    train_samples: Sequence[PairSample],
    val_samples: Sequence[PairSample],
    cfg: TrainConfig,
) -> TrainResult:
    """
    Optimize mean binary cross-entropy for `cfg.epochs` epochs, scoring validation accuracy
    after every epoch.

    The model ends up holding the weights of the best epoch (ties go to the earliest), which
    are also returned as `best_state`.

    Raises:
        DatasetFormatError: the training or validation set is empty.
        ShapeError: the images do not match the model's input size.
    """
    train_samples, val_samples = list(train_samples), list(val_samples)
    _check_inputs(model, train_samples, val_samples)
    optimizer = Adam.from_config(model.parameters(), cfg)
    model.head.reseed(cfg.seed)
    train_labels, val_labels = _labels(train_samples), _labels(val_samples)
    history: List[EpochRecord] = []
    best_state, best_epoch, best_acc = None, 0, -1.0

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = derive_rng(cfg.seed, _SHUFFLE_STREAM, epoch).permutation(len(train_samples))
        total_loss = 0.0
        for batch_indices in chunked(order, cfg.batch_size):
            images, s_masks, o_masks, labels = stack_batch([train_samples[i] for i in batch_indices])
            x, att = model.prepare_inputs(images, s_masks, o_masks)
            with Tape() as tape:
                loss = F.bce_loss(model(x, att), Tensor(labels.reshape(-1, 1)))
            optimizer.step(reverse_pass(tape, loss))
            total_loss += loss.item() * len(batch_indices)

        train_acc = accuracy(evaluate_scores(model, train_samples), train_labels, cfg.threshold)
        val_acc = accuracy(evaluate_scores(model, val_samples), val_labels, cfg.threshold)
        is_best = val_acc > best_acc
        if is_best:
            best_state, best_epoch, best_acc = snapshot(model), epoch, val_acc
        record = EpochRecord(
            epoch=epoch,
            loss=total_loss / len(train_samples),
            train_accuracy=train_acc,
            val_accuracy=val_acc,
            best_val_accuracy=best_acc,
            is_best=is_best,
        )
        history.append(record)
        if epoch % cfg.log_every == 0 or epoch == cfg.epochs:
            logger.info(
                f"epoch {epoch}/{cfg.epochs} loss={record.loss:.4f} train_acc={train_acc:.4f} "
                f"val_acc={val_acc:.4f} best={best_acc:.4f} (epoch {best_epoch})"
            )

    restore(model, best_state)
    model.eval()
    return TrainResult(best_epoch=best_epoch, best_val_accuracy=best_acc, best_state=best_state, history=history)
