import json
import math

import numpy as np
import pandas as pd
import pytest

from wearnet.evaluation import (
    METRIC_NAMES,
    ConfusionCounts,
    MetricSummary,
    confusion,
    fold_samples,
    kfold_eval,
    metrics,
    roc_auc,
    run_ablation,
    summarize,
    write_ablation,
)
from wearnet.models import RunConfig, TrainConfig
from wearnet.network import RelationshipNet
from wearnet.utils import DatasetFormatError, ShapeError, UndefinedMetricError


def concordance_auc(scores, labels):
    """Probability that a random positive outscores a random negative, ties counting half."""
    positives = [s for s, y in zip(scores, labels) if y == 1]
    negatives = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in positives for n in negatives)
    return wins / (len(positives) * len(negatives))


def test_confusion_counts():
    counts = confusion([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0])
    assert (counts.tp, counts.fn, counts.fp, counts.tn) == (1, 1, 1, 1)
    assert counts.total == 4


def test_threshold_is_inclusive():
    assert confusion([0.5], [1]).tp == 1
    assert confusion([0.5], [1], threshold=0.6).fn == 1


def test_confusion_rejects_bad_input():
    with pytest.raises(ValueError):
        confusion([0.1], [2])
    with pytest.raises(ShapeError):
        confusion([0.1, 0.2], [1])


def test_metric_values():
    m = metrics(ConfusionCounts(tp=2, fp=1, fn=1, tn=6))
    assert m.accuracy == pytest.approx(0.8)
    assert m.precision == pytest.approx(2 / 3)
    assert m.recall == pytest.approx(2 / 3)
    assert m.sensitivity == m.recall
    assert m.specificity == pytest.approx(6 / 7)
    assert m.f1 == pytest.approx(2 / 3)
    assert m.undefined == []


def test_metrics_match_their_formulas():
    rng = np.random.default_rng(0)
    for _ in range(200):
        tp, fp, tn, fn = (int(v) for v in rng.integers(1, 50, size=4))
        m = metrics(ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn))
        precision, recall = tp / (tp + fp), tp / (tp + fn)
        assert abs(m.accuracy - (tp + tn) / (tp + fp + tn + fn)) < 1e-12
        assert abs(m.precision - precision) < 1e-12
        assert abs(m.recall - recall) < 1e-12
        assert abs(m.specificity - tn / (tn + fp)) < 1e-12
        assert abs(m.f1 - 2 * precision * recall / (precision + recall)) < 1e-12


def test_zero_denominators_are_undefined():
    m = metrics(ConfusionCounts(tp=0, fp=0, tn=5, fn=0))
    assert m.undefined == ["precision", "recall", "f1"]
    assert m.accuracy == 1.0 and m.specificity == 1.0
    with pytest.raises(UndefinedMetricError):
        m.require("precision")
    assert m.require("accuracy") == 1.0

    no_hits = metrics(ConfusionCounts(tp=0, fp=2, tn=1, fn=3))
    assert no_hits.precision == 0.0 and no_hits.recall == 0.0
    assert no_hits.f1 is None

    with pytest.raises(UndefinedMetricError):
        metrics(ConfusionCounts(tp=0, fp=0, tn=0, fn=0))


@pytest.mark.parametrize("seed", range(5))
def test_auc_matches_pairwise_concordance(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=60)
    labels[:2] = [0, 1]
    # coarse scores so ties occur
    scores = np.round(rng.random(60), 1)
    curve = roc_auc(scores, labels)
    assert curve.auc == pytest.approx(concordance_auc(scores, labels), abs=1e-12)


def test_roc_endpoints_and_thresholds():
    curve = roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
    assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
    assert curve.thresholds[0] == math.inf
    assert curve.thresholds[1:] == sorted(curve.thresholds[1:], reverse=True)
    assert curve.auc == pytest.approx(0.75)
    assert list(curve.to_frame().columns) == ["threshold", "fpr", "tpr"]


def test_identical_scores_give_chance_auc():
    assert roc_auc([0.5] * 4, [0, 1, 0, 1]).auc == pytest.approx(0.5)


def test_single_class_roc_is_undefined():
    with pytest.raises(UndefinedMetricError):
        roc_auc([0.2, 0.9], [1, 1])


def test_summarize_uses_sample_std():
    summary = summarize([0.9, 1.0])
    assert summary.mean == pytest.approx(0.95)
    assert summary.std == pytest.approx(0.0707107, abs=1e-6)
    assert summary.formatted() == "95.00 ± 7.07"


def test_summary_formatting():
    assert MetricSummary(mean=0.9855, std=0.0035, folds_defined=10).formatted() == "98.55 ± 0.35"
    single = summarize([0.9855])
    assert single.std is None
    assert single.formatted() == "98.55"
    assert summarize([None, None]).formatted() == "undefined"


def test_undefined_folds_are_left_out_of_the_mean():
    summary = summarize([None, 0.8, None, 0.6])
    assert summary.mean == pytest.approx(0.7)
    assert summary.folds_defined == 2


@pytest.fixture
def eval_model(tiny_model_config):
    return RelationshipNet(tiny_model_config, seed=1)


def test_kfold_eval(tiny_dataset, eval_model, tmp_path):
    _, manifest, samples = tiny_dataset
    report = kfold_eval(eval_model, manifest, samples, k=2)
    assert [result.fold for result in report.folds] == [1, 2]
    assert [result.samples for result in report.folds] == [8, 8]
    assert set(report.summary) == set(METRIC_NAMES)
    assert report.summary["accuracy"].folds_defined == 2
    assert report.roc is not None
    assert "Accuracy" in report.table() and "F1" in report.table()

    report.write(tmp_path)
    folds = pd.read_csv(tmp_path / "folds.csv")
    assert list(folds.columns) == ["fold", "metric", "value"]
    assert len(folds) == 2 * len(METRIC_NAMES)
    roc = pd.read_csv(tmp_path / "roc.csv")
    assert list(roc.columns) == ["threshold", "fpr", "tpr"]
    assert (roc["fpr"].iloc[0], roc["tpr"].iloc[0]) == (0.0, 0.0)
    assert (roc["fpr"].iloc[-1], roc["tpr"].iloc[-1]) == (1.0, 1.0)
    assert json.loads((tmp_path / "report.json").read_text())["attention_mode"] == "soft"


def test_kfold_eval_is_thread_count_independent(tiny_dataset, eval_model):
    _, manifest, samples = tiny_dataset
    sequential = kfold_eval(eval_model, manifest, samples, k=2)
    threaded = kfold_eval(eval_model, manifest, samples, k=2, threads=2)
    assert threaded == sequential


def test_too_many_folds(tiny_dataset):
    _, manifest, samples = tiny_dataset
    with pytest.raises(DatasetFormatError):
        fold_samples(manifest, samples, 3)


def test_ablation(tiny_dataset, tiny_model_config, tmp_path):
    _, manifest, samples = tiny_dataset
    config = RunConfig(model=tiny_model_config, train=TrainConfig(epochs=1, batch_size=8))
    frame = run_ablation(manifest, samples, config, variants=["soft-first", "none"], seeds=[0], k=2)
    assert list(frame["variant"]) == ["soft-first", "none"]
    assert list(frame["attention_units"]) == [1, 0]
    assert frame.loc[0, "parameters"] > frame.loc[1, "parameters"]
    assert frame["accuracy"].between(0.0, 1.0).all()

    write_ablation(frame, tmp_path)
    assert len(pd.read_csv(tmp_path / "ablation.csv")) == 2
    summary = json.loads((tmp_path / "ablation_summary.json").read_text())
    assert [row["variant"] for row in summary] == ["soft-first", "none"]
    assert all(row["seeds"] == 1 and row["std_accuracy"] is None for row in summary)

    with pytest.raises(ValueError, match="unknown ablation"):
        run_ablation(manifest, samples, config, variants=["sideways"])
