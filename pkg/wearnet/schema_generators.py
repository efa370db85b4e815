from typing import Any, Dict

from pydantic.json_schema import GenerateJsonSchema

JSON_SCHEMA_DIALECT = "https://json-schema.org/draft/2020-12/schema"


class ConfigSchemaGenerator(GenerateJsonSchema):
    """
    Schema generator for the configuration documents:
        1. Inlines every `$defs` reference so each section reads on its own.
        2. Orders keys so the type and description come before the properties.
        3. Drops the per-property titles pydantic derives from field names.
    """

    key_order = (
        "$schema",
        "title",
        "type",
        "description",
        "enum",
        "const",
        "default",
        "minimum",
        "exclusiveMinimum",
        "maximum",
        "exclusiveMaximum",
        "minItems",
        "items",
        "properties",
        "required",
        "additionalProperties",
    )

    def generate(self, schema, mode="validation"):
        json_schema = super().generate(schema, mode)
        title = json_schema.get("title")
        if "$defs" in json_schema:
            definitions = json_schema.pop("$defs")
            json_schema = self._inline_references(json_schema, definitions)
            json_schema = self._inline_all_of(json_schema)
        json_schema = self._remove_titles(json_schema)
        json_schema = {"$schema": JSON_SCHEMA_DIALECT, "title": title, **json_schema}
        return self._reorder_keys(json_schema)

    def _inline_references(self, schema, definitions: Dict[str, Any]):
        if isinstance(schema, dict):
            if "$ref" in schema:
                target = definitions[schema["$ref"].split("/")[-1]]
                merged = {**self._inline_references(dict(target), definitions)}
                merged.update({k: v for k, v in schema.items() if k != "$ref"})
                return merged
            return {k: self._inline_references(v, definitions) for k, v in schema.items()}
        if isinstance(schema, list):
            return [self._inline_references(item, definitions) for item in schema]
        return schema

    def _inline_all_of(self, schema):
        """Collapses `allOf` lists holding a single schema into their parent."""
        if isinstance(schema, dict):
            if "allOf" in schema and len(schema["allOf"]) == 1:
                inner = self._inline_all_of(schema.pop("allOf")[0])
                return {**inner, **{k: self._inline_all_of(v) for k, v in schema.items()}}
            return {k: self._inline_all_of(v) for k, v in schema.items()}
        if isinstance(schema, list):
            return [self._inline_all_of(item) for item in schema]
        return schema

    def _remove_titles(self, schema):
        if isinstance(schema, dict):
            # a property named "title" maps to a dict and survives
            return {
                k: self._remove_titles(v)
                for k, v in schema.items()
                if not (k == "title" and isinstance(v, str))
            }
        if isinstance(schema, list):
            return [self._remove_titles(item) for item in schema]
        return schema

    def _reorder_keys(self, schema):
        if not isinstance(schema, dict):
            if isinstance(schema, list):
                return [self._reorder_keys(item) for item in schema]
            return schema
        ordered = {k: schema[k] for k in self.key_order if k in schema}
        ordered.update({k: v for k, v in schema.items() if k not in ordered})
        return {k: self._reorder_keys(v) for k, v in ordered.items()}
