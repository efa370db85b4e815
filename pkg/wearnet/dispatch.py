import argparse
from typing import Any, Callable, Iterator, Optional, Sequence, Tuple, Union

from .builder import add_model_arguments
from .decorators import Command


class CommandDispatch:
    """
    Named collection of commands that builds the argument parser and routes parsed
    arguments to the matching command.

    Args:
        *commands: `Command` instances or plain annotated functions (wrapped on the fly).
        prog: Program name shown in usage lines.
        description: Top-level help text.

    Example:
        ```python
        dispatch = CommandDispatch(cmd_compose, cmd_schema, prog="wearnet")
        name, kwargs, _ = dispatch.parse(["compose", "--ps", "0.9", "--po", "1", "--pp", "1"])
        dispatch[name](**kwargs)
        ```
    """

    def __init__(
        self,
        *commands: Union[Command, Callable],
        prog: Optional[str] = None,
        description: Optional[str] = None,
    ):
        self.prog = prog
        self.description = description
        self.commands = {}
        for cmd in commands:
            cmd = self._wrap(cmd)
            if cmd.name in self.commands:
                raise ValueError(f"Command '{cmd.name}' already exists in dispatcher.")
            self.commands[cmd.name] = cmd
        self._global_arguments = []

    def __len__(self):
        return len(self.commands)

    def __getitem__(self, key: str) -> Command:
        if key not in self.commands:
            raise KeyError(f"Command '{key}' not found in dispatcher.")
        return self.commands[key]

    def __contains__(self, key):
        return key in self.commands

    def __iter__(self) -> Iterator[str]:
        return iter(self.commands)

    @staticmethod
    def _wrap(cmd) -> Command:
        return cmd if isinstance(cmd, Command) else Command(cmd)

    def add_global_argument(self, *flags: str, **kwargs) -> None:
        """An option accepted before the subcommand name, e.g. `--verbose`."""
        self._global_arguments.append((flags, kwargs))

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog=self.prog, description=self.description)
        for flags, kwargs in self._global_arguments:
            parser.add_argument(*flags, **kwargs)
        subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
        for name, cmd in self.commands.items():
            sub = subparsers.add_parser(name, help=cmd.description, description=cmd.description)
            add_model_arguments(sub, cmd.Model)
        return parser

    def parse(self, argv: Sequence[str]) -> Tuple[str, dict, argparse.Namespace]:
        """
        Returns:
            The command name, its raw (unvalidated) keyword arguments, and the namespace of
            global options.

        Raises:
            SystemExit: argparse rejected the command line or printed help.
        """
        namespace = self.build_parser().parse_args(list(argv))
        values = vars(namespace)
        name = values.pop("command")
        model_fields = self.commands[name].Model.model_fields
        kwargs = {key: values.pop(key) for key in list(values) if key in model_fields}
        return name, kwargs, argparse.Namespace(**values)

    def dispatch(self, argv: Sequence[str]) -> Any:
        name, kwargs, _ = self.parse(argv)
        return self[name](**kwargs)

    def schemas(self) -> dict:
        return {name: cmd.model_json_schema() for name, cmd in self.commands.items()}
