import pytest
from pydantic import ValidationError

from wearnet.models import (
    DEFAULT_UNWORN_RATIO,
    AttentionMode,
    ConfigBaseModel,
    GeneratorConfig,
    ModelConfig,
    Placement,
    RunConfig,
    TrainConfig,
    load_run_config,
)


def test_config_base_model():
    assert hasattr(ConfigBaseModel, "_schema_generator")
    with pytest.raises(ValidationError):
        TrainConfig(epochs=3, momentum=0.9)
    cfg = TrainConfig()
    with pytest.raises(ValidationError):
        cfg.epochs = 2


def test_model_config_widths():
    assert ModelConfig(layout=[3, 4, 6, 3], base_width=64).widths == [64, 128, 256, 512]
    assert ModelConfig(layout=[1, 1], stage_widths=[5, 7]).widths == [5, 7]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"layout": []},
        {"layout": [1, 0]},
        {"layout": [1, 1], "stage_widths": [4]},
        {"head_widths": [8, 0]},
        {"dropout_rate": 1.0},
        {"input_size": 4},
        {"attention_mode": "spotlight"},
    ],
)
def test_model_config_rejects(kwargs):
    with pytest.raises(ValidationError):
        ModelConfig(**kwargs)


def test_attention_unit_expectations():
    layout = [3, 4, 6, 3]
    assert ModelConfig(layout=layout).expected_attention_units == 16
    assert ModelConfig(layout=layout, placement=Placement.FIRST).expected_attention_units == 1
    assert ModelConfig(layout=layout, attention_mode="box").expected_attention_units == 16
    assert ModelConfig(layout=layout, attention_mode="none").expected_attention_units == 0
    hard = ModelConfig(layout=layout, attention_mode=AttentionMode.HARD)
    assert hard.expected_attention_units == 0 and hard.stem_in_channels == 5
    assert ModelConfig().stem_in_channels == 3


def test_generator_defaults():
    cfg = GeneratorConfig()
    assert cfg.unworn_ratio == pytest.approx(11126 / 29852)
    assert DEFAULT_UNWORN_RATIO == cfg.unworn_ratio
    assert cfg.min_overlap == 0.55
    assert GeneratorConfig(count=100, val_fraction=0.25).val_count == 25


def test_run_config_round_trip(tmp_path):
    run = RunConfig(model=ModelConfig(layout=[2, 2], attention_mode="box"), train=TrainConfig(epochs=4))
    path = tmp_path / "run.json"
    path.write_text(run.model_dump_json())
    loaded = load_run_config(path)
    assert loaded == run
    assert loaded.model.attention_mode is AttentionMode.BOX
    assert load_run_config(None) == RunConfig()


def test_run_config_version_is_checked():
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"schema_version": 2})
