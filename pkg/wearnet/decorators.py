from __future__ import annotations

from functools import update_wrapper
from typing import Any, Callable, Optional

import pydantic

from .builder import ArgumentModelBuilder, CommandArgs


def command_name(func: Callable) -> str:
    """`cmd_gen_data` → `gen-data`."""
    name = func.__name__
    if name.startswith("cmd_"):
        name = name[len("cmd_") :]
    return name.replace("_", "-")


class Command:
    """
    A CLI command: the wrapped function plus a pydantic model of its arguments.

    Calling the command validates the keyword arguments against the model first, so the
    function body only ever sees checked, coerced values.

    Args:
        func: The command function. Every parameter must be annotated.
        name: Subcommand name; derived from the function name when omitted.
        description: Help text; the docstring's first paragraph when omitted.
        base_model: Base class of the generated argument model.

    Example:
        ```python
        @command
        def cmd_compose(ps: float, po: float, pp: float):
            '''Compose a triplet confidence.'''
        cmd_compose(ps="0.98", po=0.99, pp=0.96)  # ps coerced to float
        ```
    """

    def __init__(
        self,
        func: Callable,
        name: Optional[str] = None,
        description: Optional[str] = None,
        base_model: type[pydantic.BaseModel] = CommandArgs,
    ):
        self.func = func
        self.name = name or command_name(func)
        self.base_model = base_model
        self._model = None
        update_wrapper(self, func)
        self.description = description or self.Model.__doc__.strip()

    @property
    def Model(self) -> type[pydantic.BaseModel]:
        if self._model is None:
            self._model = ArgumentModelBuilder(base_model=self.base_model).model_from_function(
                self.func, model_name=self.func.__name__
            )
        return self._model

    def validate(self, **kwargs) -> dict:
        """
        Raises:
            pydantic.ValidationError: an argument is missing, unknown or invalid.
        """
        args = self.Model(**kwargs)
        return {name: getattr(args, name) for name in self.Model.model_fields}

    def model_json_schema(self, **kwargs):
        return self.Model.model_json_schema(**kwargs)

    def __call__(self, **kwargs) -> Any:
        return self.func(**self.validate(**kwargs))


def command(func: Optional[Callable] = None, *, name: Optional[str] = None, description: Optional[str] = None):
    """Decorator form of `Command`, usable bare or with keyword options."""

    def wrap(f: Callable) -> Command:
        return Command(f, name=name, description=description)

    return wrap(func) if func is not None else wrap
