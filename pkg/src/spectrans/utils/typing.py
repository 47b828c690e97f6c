"""
Typed loading and dumping of configuration objects and reports.
"""

import json
from functools import cache
from pathlib import Path
from typing import Any

import pydantic
import yaml

type TypeAnnot[T] = type[T] | object
"""
Type for a type annotation denoting type T (type aliases and unions are
allowed, which `type[T]` does not accept).
"""


ValidationError = pydantic.ValidationError


@cache
def type_adapter(type: TypeAnnot[Any]) -> pydantic.TypeAdapter[Any]:
    """
    Adapter for a type annotation, built once per annotation.
    """
    return pydantic.TypeAdapter(type)


def load_typed[T](type: TypeAnnot[T], obj: object) -> T:
    """
    Validate a JSON-like object against a type annotation.

    Raises ValidationError.
    """
    return type_adapter(type).validate_python(obj)


def dump_typed[T](
    type: TypeAnnot[T], x: T, *, exclude_defaults: bool = False
) -> Any:
    """
    Dump a value into a JSON-compatible object.
    """
    return type_adapter(type).dump_python(
        x, mode="json", exclude_defaults=exclude_defaults
    )


def read_document(path: Path) -> Any:
    """
    Read a JSON or YAML document (JSON being a subset of YAML, both are
    parsed with the YAML loader).
    """
    with open(path, "r") as f:
        return yaml.safe_load(f) or {}


def write_json(path: Path, obj: object) -> None:
    """
    Write a JSON-compatible object with a stable layout, so that
    identical objects produce byte-identical files.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=False)
        f.write("\n")
