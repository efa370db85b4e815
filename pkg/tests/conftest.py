import os

import pytest

from wearnet.dataset import read_dataset, write_dataset
from wearnet.models import GeneratorConfig, ModelConfig, TrainConfig
from wearnet.synth import generate_samples


def pytest_collection_modifyitems(config, items):
    if os.environ.get("WEARNET_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="end-to-end run; set WEARNET_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_model_config():
    return ModelConfig(
        layout=[1, 1],
        base_width=2,
        expansion=2,
        stem_channels=4,
        input_size=16,
        head_widths=[8],
    )


@pytest.fixture
def tiny_train_config():
    return TrainConfig(epochs=3, batch_size=8, learning_rate=1e-2, seed=3)


@pytest.fixture(scope="session")
def tiny_generator_config():
    return GeneratorConfig(count=32, seed=5, image_size=16, unworn_ratio=0.5, folds=2, val_fraction=0.5)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory, tiny_generator_config):
    """(directory, manifest, samples) of a small dataset written once per session."""
    directory = tmp_path_factory.mktemp("dataset")
    write_dataset(generate_samples(tiny_generator_config), directory, tiny_generator_config)
    manifest, samples = read_dataset(directory)
    return directory, manifest, samples
