import json
from pathlib import Path
from typing import List

from pydantic import Field

from wearnet.models import AttentionMode, ConfigBaseModel, RunConfig
from wearnet.schema_generators import JSON_SCHEMA_DIALECT, ConfigSchemaGenerator


class InnerModel(ConfigBaseModel):
    """An inner section."""

    item: str


class ExampleModel(ConfigBaseModel):
    """An example document."""

    title: str = Field(..., description="A field that happens to be called title.")
    mode: AttentionMode = AttentionMode.SOFT
    inner: List[InnerModel]
    section: InnerModel


def test_references_are_inlined():
    schema = ExampleModel.model_json_schema()
    assert "$defs" not in schema
    assert "$ref" not in str(schema)
    assert schema["properties"]["inner"]["items"]["properties"]["item"]["type"] == "string"
    assert schema["properties"]["section"]["description"] == "An inner section."
    assert schema["properties"]["mode"]["enum"] == ["soft", "hard", "box", "none"]
    assert schema["properties"]["mode"]["default"] == "soft"


def test_titles_are_dropped_but_title_properties_survive():
    schema = ExampleModel.model_json_schema()
    assert schema["title"] == "ExampleModel"
    assert "title" in schema["properties"]
    assert "title" not in schema["properties"]["title"]
    assert "title" not in schema["properties"]["section"]


def test_key_order():
    schema = ExampleModel.model_json_schema()
    assert list(schema)[:4] == ["$schema", "title", "type", "description"]
    assert schema["$schema"] == JSON_SCHEMA_DIALECT
    assert schema["additionalProperties"] is False


def test_explicit_generator_matches_default():
    assert RunConfig.model_json_schema(schema_generator=ConfigSchemaGenerator) == RunConfig.model_json_schema()


def test_run_config_schema_documents_every_section():
    schema = RunConfig.model_json_schema()
    assert schema["properties"]["schema_version"]["const"] == 1
    model = schema["properties"]["model"]
    assert model["properties"]["layout"]["minItems"] == 1
    assert "'first': A single attention unit" in model["properties"]["placement"]["description"]
    assert schema["properties"]["train"]["properties"]["val_fold"]["minimum"] == 1


def test_documented_schema_matches_the_models():
    documented = json.loads((Path(__file__).parents[1] / "docs" / "run_config.schema.json").read_text())
    schema = RunConfig.model_json_schema()
    assert documented["title"] == schema["title"]
    assert list(documented["properties"]) == list(schema["properties"])
    for section in ("model", "train", "generator"):
        expected = schema["properties"][section]["properties"]
        actual = documented["properties"][section]["properties"]
        assert list(actual) == list(expected), section
        for name, field in expected.items():
            assert actual[name].get("default") == field.get("default"), f"{section}.{name}"
            for bound in ("minimum", "exclusiveMinimum", "maximum", "exclusiveMaximum", "enum"):
                assert actual[name].get(bound) == field.get(bound), f"{section}.{name} {bound}"
