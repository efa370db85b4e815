import numpy as np
import pytest

from wearnet.checkpoint import snapshot
from wearnet.dataset import fold_split, select
from wearnet.layers import named_arrays
from wearnet.network import RelationshipNet
from wearnet.train import accuracy, evaluate_scores, stack_batch, train
from wearnet.utils import DatasetFormatError, ShapeError


@pytest.fixture
def splits(tiny_dataset):
    _, manifest, samples = tiny_dataset
    return select(manifest, samples, "train"), select(manifest, samples, fold_split(1))


def test_stack_batch(splits):
    train_set, _ = splits
    images, s_masks, o_masks, labels = stack_batch(train_set[:3])
    assert images.shape == (3, 16, 16, 3) and images.dtype == np.uint8
    assert s_masks.shape == o_masks.shape == (3, 16, 16)
    assert labels.tolist() == [s.label.label for s in train_set[:3]]


def test_accuracy():
    assert accuracy(np.array([0.2, 0.7, 0.5]), np.array([0, 1, 0])) == pytest.approx(2 / 3)


def test_training_keeps_the_best_epoch(splits, tiny_model_config, tiny_train_config):
    train_set, val_set = splits
    model = RelationshipNet(tiny_model_config, seed=0)
    initial = snapshot(model)
    result = train(model, train_set, val_set, tiny_train_config)

    assert [record.epoch for record in result.history] == [1, 2, 3]
    assert result.history[0].is_best
    val_accuracies = [record.val_accuracy for record in result.history]
    assert result.best_val_accuracy == max(val_accuracies)
    assert result.best_epoch == val_accuracies.index(max(val_accuracies)) + 1
    assert result.history[-1].best_val_accuracy == result.best_val_accuracy
    assert set(result.history_rows()[0]) == {
        "epoch",
        "loss",
        "train_accuracy",
        "val_accuracy",
        "best_val_accuracy",
        "is_best",
    }

    assert not model.training
    current = named_arrays(model)
    for name, value in result.best_state.items():
        np.testing.assert_array_equal(current[name], value, err_msg=name)
    assert any(not np.array_equal(initial[name], result.best_state[name]) for name in initial)

    labels = np.array([s.label.label for s in val_set])
    assert accuracy(evaluate_scores(model, val_set), labels) == result.best_val_accuracy


def test_training_is_deterministic(splits, tiny_model_config, tiny_train_config):
    train_set, val_set = splits
    runs = [
        train(RelationshipNet(tiny_model_config, seed=0), train_set, val_set, tiny_train_config)
        for _ in range(2)
    ]
    assert runs[0].history == runs[1].history
    for name, value in runs[0].best_state.items():
        np.testing.assert_array_equal(runs[1].best_state[name], value, err_msg=name)


def test_empty_sets_are_rejected(splits, tiny_model_config, tiny_train_config):
    train_set, val_set = splits
    model = RelationshipNet(tiny_model_config, seed=0)
    with pytest.raises(DatasetFormatError, match="validation"):
        train(model, train_set, [], tiny_train_config)
    with pytest.raises(DatasetFormatError, match="training"):
        train(model, [], val_set, tiny_train_config)


def test_image_size_must_match_the_model(splits, tiny_model_config, tiny_train_config):
    train_set, val_set = splits
    model = RelationshipNet(tiny_model_config.model_copy(update={"input_size": 32}), seed=0)
    with pytest.raises(ShapeError, match="32x32"):
        train(model, train_set, val_set, tiny_train_config)
