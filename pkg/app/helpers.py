# -*- coding: utf-8 -*-

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence


def get_normad_app():
    """
    Get the application singleton instance. Useful for logging.
    """
    from app import normad_app
    normad_app_singleton = normad_app.NormadApp.app()
    return normad_app_singleton


def require_positive(field: str, value: float, allow_zero: bool = False) -> None:
    """
    Validate that a numeric parameter is finite and positive.

    Args:
        field (str): Parameter name, used in the diagnostic.
        value (float): The value to check.
        allow_zero (bool): Accept zero as well.

    Raises:
        ConfigurationError: If the value is not finite or out of range.
    """
    from app.exceptions import ConfigurationError
    if not math.isfinite(value):
        raise ConfigurationError(field, f"must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ConfigurationError(field, f"must be {bound}, got {value}")


def dump_json(data: dict) -> str:
    """
    Serialize a dictionary deterministically: sorted keys, fixed indentation,
    trailing newline. Floats keep their shortest round-trip representation.

    Args:
        data (dict): JSON-compatible data.

    Returns:
        str: The serialized document.
    """
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: Path, data: dict) -> None:
    Path(path).write_text(dump_json(data), encoding="utf-8")


def read_json(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """
    Write rows to a CSV file with a header line and Unix line endings, so that
    the same rows always produce the same bytes.

    Args:
        path (Path): Destination file.
        header (Sequence[str]): Column names.
        rows (Iterable[Sequence]): Row values; floats are written with `repr`.
    """
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path: Path) -> tuple:
    """
    Read a CSV file written by `write_csv`.

    Returns:
        tuple: The header (list of str) and the remaining rows (list of lists of str).
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, [])
        return header, [row for row in reader]
