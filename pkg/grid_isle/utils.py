"""Small helpers shared across the package."""

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Type, TypeVar, cast

import numpy as np
from flatten_dict import flatten

T = TypeVar("T")


def assert_type(typ: Type[T], obj: Any) -> T:
    """Assert that an object is of a given type at runtime and return it."""
    if not isinstance(obj, typ):
        raise TypeError(f"Expected {typ.__name__}, got {type(obj).__name__}")

    return cast(typ, obj)


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy values, sets, tuples and paths for `json.dump`."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return [to_jsonable(v) for v in sorted(obj)]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, obj: Any):
    """Write `obj` as indented JSON, creating parent folders as needed."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_jsonable(obj), f, indent=2, sort_keys=True)


def flatten_row(obj: dict) -> dict[str, Any]:
    """Flatten a nested report into dotted column names for CSV export."""
    return flatten(to_jsonable(obj), reducer=_dotted, enumerate_types=(list,))


def _dotted(parent: Any, key: Any) -> str:
    return str(key) if parent is None else f"{parent}.{key}"


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]):
    """Write a header row followed by `rows`."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([to_jsonable(v) for v in row])
