import argparse
import inspect
import logging
import types
from enum import Enum
from typing import Annotated, Any, Callable, Dict, Optional, Tuple, Type, Union, get_args, get_origin

import docstring_parser
import pydantic
from pydantic import Field

from .models import ConfigBaseModel
from .utils import CommandError

logger = logging.getLogger(__name__)

_Empty = inspect.Parameter.empty


class CommandArgs(ConfigBaseModel):
    """Validated arguments of one CLI command. Unknown arguments are rejected."""


class ArgumentModelBuilder:
    """
    Builds a pydantic model from a command function's signature. Parameter descriptions
    come from the function's docstring (`Args:` section); defaults and constraints come from
    the signature, including `Annotated[..., Field(...)]` metadata.
    """

    def __init__(self, base_model: Type[pydantic.BaseModel] = CommandArgs, **pydantic_kwargs):
        self.base_model = base_model
        self.pydantic_kwargs = pydantic_kwargs

    def model_from_function(
        self,
        func: Callable[..., Any],
        model_name: Optional[str] = None,
        model_description: Optional[str] = None,
    ) -> Type[pydantic.BaseModel]:
        parsed = docstring_parser.parse(func.__doc__ or "")
        descriptions = {p.arg_name: p.description for p in parsed.params}
        fields = {}
        for name, param in inspect.signature(func).parameters.items():
            if param.kind in (param.VAR_POSITIONAL, param.VAR_KEYWORD):
                continue
            if param.annotation is _Empty:
                raise CommandError(f"Parameter `{name}` in command `{func.__name__}` has no annotation.")
            fields[name] = self._process_field(param.annotation, param.default, descriptions.get(name))
        model_name = model_name or func.__name__
        model_description = model_description or parsed.short_description or " "
        logger.debug(f"argument model {model_name}: {list(fields)}")
        return pydantic.create_model(
            model_name,
            __base__=self.base_model,
            __doc__=model_description,
            **self.pydantic_kwargs,
            **fields,
        )

    def _process_field(self, annotation: Any, default: Any, description: Optional[str]) -> Tuple[Any, Any]:
        default = ... if default is _Empty else default
        if get_origin(annotation) is Annotated:
            field_type, *metadata = get_args(annotation)
            if all(isinstance(meta, str) for meta in metadata):
                return field_type, Field(default, description=description or metadata[0])
            return annotation, Field(default, description=description)
        return annotation, Field(default, description=description)


def _unwrap(annotation: Any) -> Any:
    """Strip Annotated and Optional layers."""
    while True:
        origin = get_origin(annotation)
        if origin is Annotated:
            annotation = get_args(annotation)[0]
        elif origin in (Union, types.UnionType):
            args = [a for a in get_args(annotation) if a is not type(None)]
            if len(args) != 1:
                return annotation
            annotation = args[0]
        else:
            return annotation


def flag_name(field_name: str) -> str:
    return "--" + field_name.replace("_", "-")


def add_model_arguments(parser: argparse.ArgumentParser, model: Type[pydantic.BaseModel]) -> None:
    """
    One flag per model field. Values reach the model as strings and are coerced and checked
    there; absent flags are left out so the model's own defaults apply.
    """
    for name, info in model.model_fields.items():
        annotation = _unwrap(info.annotation)
        kwargs: Dict[str, Any] = {"dest": name, "default": argparse.SUPPRESS, "help": info.description}
        if annotation is bool:
            kwargs["action"] = argparse.BooleanOptionalAction
        else:
            if get_origin(annotation) in (list, tuple):
                kwargs["nargs"] = "+"
                annotation = _unwrap(get_args(annotation)[0])
            if isinstance(annotation, type) and issubclass(annotation, Enum):
                kwargs["choices"] = [member.value for member in annotation]
            kwargs["metavar"] = name.upper()
        if info.is_required():
            kwargs["required"] = True
        elif info.default is not None and annotation is not bool and kwargs["help"]:
            kwargs["help"] += f" (default: {info.default})"
        parser.add_argument(flag_name(name), **kwargs)
