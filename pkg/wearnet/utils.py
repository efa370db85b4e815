import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
import pydantic


class WearnetError(Exception):
    """Base class for exceptions raised by wearnet."""


class ShapeError(WearnetError, ValueError):
    """Tensor or raster extents do not agree."""


class TapeError(WearnetError, RuntimeError):
    """Reverse pass requested for a value the tape never recorded."""


class NonDeterministicError(WearnetError, RuntimeError):
    """A function under gradient check returned different values for the same input."""


class EmptyMaskError(WearnetError, ValueError):
    """An operation needs at least one set pixel."""


class RLEError(WearnetError, ValueError):
    """Run-length data does not describe a mask of the declared dims."""


class DatasetFormatError(WearnetError, ValueError):
    """Dataset or scene files are missing, corrupt or of an unsupported version."""


class CheckpointError(WearnetError, ValueError):
    """Checkpoint files are missing, corrupt or do not fit the model."""


class ProbabilityRangeError(WearnetError, ValueError):
    """A probability lies outside [0, 1]."""


class ModeMismatchError(WearnetError, ValueError):
    """Inputs were prepared for a different attention mode than the model was built for."""


class UndefinedMetricError(WearnetError, ArithmeticError):
    """A metric has a zero denominator."""


class CommandError(WearnetError):
    """A CLI command could not complete."""


PathLike = Union[str, Path]


def shape_mismatch(what: str, left: Sequence[int], right: Sequence[int]) -> ShapeError:
    return ShapeError(f"{what}: shape {tuple(left)} does not match {tuple(right)}")


def derive_rng(seed: int, *index: int) -> np.random.Generator:
    """Independent stream for `(seed, *index)`, identical whatever order the streams are drawn in."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(index)))


def check_probability(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ProbabilityRangeError(f"{name}={value} is not a probability in [0, 1]")
    return value


def file_digest(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def directory_digest(path: PathLike) -> str:
    """Digest over every file below `path` (relative names and contents), order independent."""
    root = Path(path)
    digest = hashlib.sha256()
    for file in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(file.relative_to(root).as_posix().encode())
        digest.update(file.read_bytes())
    return digest.hexdigest()


def write_json(path: PathLike, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")


def chunked(items: Sequence, size: int) -> Iterable[Sequence]:
    for start in range(0, len(items), size):
        yield items[start : start + size]


def validation_error_to_diagnostic(
    error: pydantic.ValidationError, prefix: str = "invalid arguments"
) -> str:
    """
    Convert a pydantic ValidationError into a compact diagnostic for the error stream.

    returns: str - one header line followed by one `  <location>: <message>` line per error
    """
    lines = [f"{prefix} ({error.error_count()} error(s)):"]
    for err in error.errors(include_url=False):
        location = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"  {location}: {err['msg']}")
    return "\n".join(lines)
