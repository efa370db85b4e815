"""
Classification metrics, ROC analysis and k-fold evaluation.

The positive class is `worn`; a score at or above the threshold predicts worn. Metrics with a
zero denominator are reported as undefined (None), never as 0.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import pydantic
from pydantic import ConfigDict, Field, NonNegativeInt
from sklearn.metrics import auc, roc_curve

from .dataset import DatasetManifest, fold_split, select
from .models import AttentionMode, Placement, RunConfig
from .network import RelationshipNet, build_model, count_parameters
from .synth import PairSample
from .train import evaluate_scores, train
from .utils import DatasetFormatError, PathLike, ShapeError, UndefinedMetricError, write_json

logger = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "precision", "recall", "specificity", "f1")


class ConfusionCounts(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    tp: NonNegativeInt
    fp: NonNegativeInt
    tn: NonNegativeInt
    fn: NonNegativeInt

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _labels_array(labels) -> np.ndarray:
    labels = np.asarray(labels).reshape(-1)
    if not np.isin(labels, (0, 1)).all():
        raise ValueError(f"labels must be 0 or 1, got {sorted(set(labels.tolist()))}")
    return labels.astype(np.int64)


def _check_lengths(scores: np.ndarray, labels: np.ndarray) -> None:
    if scores.shape != labels.shape:
        raise ShapeError(f"{scores.size} scores but {labels.size} labels")


def confusion(scores, labels, threshold: float = 0.5) -> ConfusionCounts:
    """Counts at `threshold`; score >= threshold predicts worn."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = _labels_array(labels)
    _check_lengths(scores, labels)
    predicted = scores >= threshold
    positive = labels == 1
    return ConfusionCounts(
        tp=int(np.sum(predicted & positive)),
        fp=int(np.sum(predicted & ~positive)),
        tn=int(np.sum(~predicted & ~positive)),
        fn=int(np.sum(~predicted & positive)),
    )


class Metrics(pydantic.BaseModel):
    """Threshold metrics; None marks a 0/0 value."""

    model_config = ConfigDict(frozen=True)

    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    specificity: Optional[float]
    f1: Optional[float]

    @property
    def sensitivity(self) -> Optional[float]:
        return self.recall

    @property
    def undefined(self) -> List[str]:
        return [name for name in METRIC_NAMES if getattr(self, name) is None]

    def require(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise UndefinedMetricError(f"{name} is undefined (zero denominator)")
        return value


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    return numerator / denominator if denominator else None


def metrics(c: ConfusionCounts) -> Metrics:
    """
    Raises:
        UndefinedMetricError: no samples were counted.
    """
    if c.total == 0:
        raise UndefinedMetricError("metrics of an empty confusion table are undefined")
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    f1 = None
    if precision is not None and recall is not None:
        f1 = _ratio(2 * precision * recall, precision + recall)
    return Metrics(
        accuracy=(c.tp + c.tn) / c.total,
        precision=precision,
        recall=recall,
        specificity=_ratio(c.tn, c.tn + c.fp),
        f1=f1,
    )


class RocCurve(pydantic.BaseModel):
    """Operating points for every distinct score, from (0, 0) to (1, 1)."""

    model_config = ConfigDict(frozen=True)

    thresholds: List[float] = Field(..., description="The first threshold lies above every score.")
    fpr: List[float]
    tpr: List[float]
    auc: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})


def roc_auc(scores, labels) -> RocCurve:
    """
    Full threshold sweep and trapezoid area under it.

    Raises:
        UndefinedMetricError: only one class is present.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = _labels_array(labels)
    _check_lengths(scores, labels)
    if labels.min(initial=1) == labels.max(initial=0):
        raise UndefinedMetricError("ROC needs both worn and unworn samples")
    fpr, tpr, thresholds = roc_curve(labels, scores, drop_intermediate=False)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    # older scikit-learn put max(score) + 1 here
    thresholds[0] = math.inf
    return RocCurve(
        thresholds=thresholds.tolist(), fpr=fpr.tolist(), tpr=tpr.tolist(), auc=float(auc(fpr, tpr))
    )


class MetricSummary(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: Optional[float]
    std: Optional[float] = Field(..., description="Sample standard deviation (n-1); None for one fold.")
    folds_defined: int

    def formatted(self) -> str:
        """Percentages like `98.55 ± 0.35`, or just the mean for a single fold."""
        if self.mean is None:
            return "undefined"
        if self.std is None:
            return f"{100 * self.mean:.2f}"
        return f"{100 * self.mean:.2f} ± {100 * self.std:.2f}"


def summarize(values: Sequence[Optional[float]]) -> MetricSummary:
    defined = np.array([v for v in values if v is not None], dtype=np.float64)
    if defined.size == 0:
        return MetricSummary(mean=None, std=None, folds_defined=0)
    std = float(np.std(defined, ddof=1)) if defined.size > 1 else None
    return MetricSummary(mean=float(defined.mean()), std=std, folds_defined=int(defined.size))


class FoldResult(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    fold: int
    samples: int
    counts: ConfusionCounts
    metrics: Metrics


class EvalReport(pydantic.BaseModel):
    """Per-fold metrics, their mean ± sample std, and the pooled ROC."""

    model_config = ConfigDict(frozen=True)

    attention_mode: AttentionMode
    threshold: float
    parameters: int
    folds: List[FoldResult]
    summary: Dict[str, MetricSummary]
    roc: Optional[RocCurve] = Field(default=None, description="Pooled over every fold; None if single-class.")

    def fold_frame(self) -> pd.DataFrame:
        """Long format, one row per fold per metric."""
        rows = [
            {"fold": result.fold, "metric": name, "value": getattr(result.metrics, name)}
            for result in self.folds
            for name in METRIC_NAMES
        ]
        return pd.DataFrame(rows, columns=["fold", "metric", "value"])

    def table(self) -> str:
        """One row, one column per metric, in percent."""
        frame = pd.DataFrame(
            [[self.summary[name].formatted() for name in METRIC_NAMES]],
            columns=[name.capitalize() if name != "f1" else "F1" for name in METRIC_NAMES],
            index=[str(self.attention_mode)],
        )
        return frame.to_string()

    def write(self, directory: PathLike) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(self.model_dump_json(indent=2) + "\n")
        self.write_folds_csv(directory / "folds.csv")
        if self.roc is not None:
            self.write_roc_csv(directory / "roc.csv")

    def write_folds_csv(self, path: PathLike) -> None:
        self.fold_frame().to_csv(path, index=False, na_rep="undefined", float_format="%.10g")

    def write_roc_csv(self, path: PathLike) -> None:
        if self.roc is None:
            raise UndefinedMetricError("report has no ROC curve (single-class data)")
        self.roc.to_frame().to_csv(path, index=False, float_format="%.10g")


def fold_samples(
    manifest: DatasetManifest, samples: Sequence[PairSample], k: int
) -> List[Tuple[int, List[PairSample]]]:
    """
    Raises:
        DatasetFormatError: the manifest has fewer than `k` folds or one of them is empty.
    """
    if k > manifest.folds:
        raise DatasetFormatError(f"asked for {k} folds but the manifest defines {manifest.folds}")
    folds = []
    for fold in range(1, k + 1):
        members = select(manifest, list(samples), fold_split(fold))
        if not members:
            raise DatasetFormatError(f"fold {fold} has no samples")
        folds.append((fold, members))
    return folds


def kfold_eval(
    model: RelationshipNet,
    manifest: DatasetManifest,
    samples: Sequence[PairSample],
    k: int = 10,
    threshold: float = 0.5,
    threads: int = 1,
) -> EvalReport:
    """Score each validation fold independently; any thread count gives the same report."""
    folds = fold_samples(manifest, samples, k)
    model.eval()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fold_scores = list(pool.map(lambda item: evaluate_scores(model, item[1]), folds))
    else:
        fold_scores = [evaluate_scores(model, members) for _, members in folds]

    results, pooled_scores, pooled_labels = [], [], []
    for (fold, members), scores in zip(folds, fold_scores):
        labels = np.array([s.label.label for s in members], dtype=np.int64)
        counts = confusion(scores, labels, threshold)
        results.append(FoldResult(fold=fold, samples=len(members), counts=counts, metrics=metrics(counts)))
        pooled_scores.append(scores)
        pooled_labels.append(labels)
        logger.debug(f"fold {fold}: {counts}")

    summary = {name: summarize([getattr(r.metrics, name) for r in results]) for name in METRIC_NAMES}
    for name, stats in summary.items():
        if stats.folds_defined < len(results):
            logger.warning(f"{name} undefined on {len(results) - stats.folds_defined} fold(s)")
    try:
        roc = roc_auc(np.concatenate(pooled_scores), np.concatenate(pooled_labels))
    except UndefinedMetricError:
        logger.warning("validation folds hold a single class; no ROC curve")
        roc = None
    return EvalReport(
        attention_mode=model.mode,
        threshold=threshold,
        parameters=count_parameters(model),
        folds=results,
        summary=summary,
        roc=roc,
    )


ABLATION_VARIANTS: Dict[str, Tuple[AttentionMode, Placement]] = {
    "soft-all": (AttentionMode.SOFT, Placement.ALL),
    "soft-first": (AttentionMode.SOFT, Placement.FIRST),
    "hard": (AttentionMode.HARD, Placement.ALL),
    "box-all": (AttentionMode.BOX, Placement.ALL),
    "box-first": (AttentionMode.BOX, Placement.FIRST),
    "none": (AttentionMode.NONE, Placement.ALL),
}


class AblationRow(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    variant: str
    seed: int
    attention_units: int
    parameters: int
    best_epoch: int
    accuracy: float
    auc: Optional[float]


def run_ablation(
    manifest: DatasetManifest,
    samples: Sequence[PairSample],
    config: RunConfig,
    variants: Sequence[str] = tuple(ABLATION_VARIANTS),
    seeds: Sequence[int] = (0,),
    k: Optional[int] = None,
) -> pd.DataFrame:
    """
    Train and k-fold evaluate every variant on the same data and seeds.

    Returns:
        One row per (variant, seed) with mean held-out accuracy and pooled AUC.
    """
    unknown = [v for v in variants if v not in ABLATION_VARIANTS]
    if unknown:
        raise ValueError(f"unknown ablation variants {unknown}; expected {list(ABLATION_VARIANTS)}")
    k = k or manifest.folds
    train_set = select(manifest, list(samples), "train")
    val_set = select(manifest, list(samples), fold_split(config.train.val_fold))
    rows = []
    for variant in variants:
        mode, placement = ABLATION_VARIANTS[variant]
        model_cfg = config.model.model_copy(update={"attention_mode": mode, "placement": placement})
        for seed in seeds:
            train_cfg = config.train.model_copy(update={"seed": seed})
            model = build_model(model_cfg, seed=seed)
            result = train(model, train_set, val_set, train_cfg)
            report = kfold_eval(model, manifest, samples, k=k, threshold=train_cfg.threshold)
            rows.append(
                AblationRow(
                    variant=variant,
                    seed=seed,
                    attention_units=model.attention_unit_count,
                    parameters=report.parameters,
                    best_epoch=result.best_epoch,
                    accuracy=report.summary["accuracy"].mean,
                    auc=report.roc.auc if report.roc else None,
                ).model_dump()
            )
            logger.info(f"ablation {variant} seed={seed}: accuracy={rows[-1]['accuracy']:.4f}")
    return pd.DataFrame(rows, columns=list(AblationRow.model_fields))


def write_ablation(frame: pd.DataFrame, directory: PathLike) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frame.to_csv(directory / "ablation.csv", index=False, float_format="%.10g")
    summary = [
        {
            "variant": variant,
            "mean_accuracy": float(accuracies.mean()),
            "std_accuracy": float(accuracies.std(ddof=1)) if len(accuracies) > 1 else None,
            "seeds": int(len(accuracies)),
        }
        for variant, accuracies in frame.groupby("variant", sort=False)["accuracy"]
    ]
    write_json(directory / "ablation_summary.json", summary)

