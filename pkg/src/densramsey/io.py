"""File formats: exact rationals as "p/q", canonical JSON, instance files."""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import tower
from .errors import MalformedInput
from .families import FamilySpec, parse_family
from .grids import DenseFamily
from .measure_core import FiniteProbSpace
from .tree_core import TreeSubset


def parse_rational(text: Any, where: str = "value") -> Fraction:
    """Parse "p/q" or an integer; floats are rejected so nothing inexact gets in."""
    if isinstance(text, bool) or isinstance(text, float):
        raise MalformedInput(f"{where}: expected an exact rational, got {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise MalformedInput(f"{where}: expected a rational string, got {type(text).__name__}")
    s = text.strip()
    num, slash, den = s.partition("/")
    try:
        if slash:
            value = Fraction(int(num), int(den))
        else:
            value = Fraction(int(s))
    except (ValueError, ZeroDivisionError):
        raise MalformedInput(f"{where}: {text!r} is not of the form p/q") from None
    return value


def fmt_rational(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def to_jsonable(obj: Any) -> Any:
    """Convert Fractions, towers, numpy scalars and tuples to plain JSON values."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return fmt_rational(obj)
    if isinstance(obj, tower.Sym):
        return tower.to_prefix(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def loads(text: str, where: str = "input") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{where}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def read_json(path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MalformedInput(f"{path}: {exc.strerror}") from None
    return loads(text, str(path))


def digest(*texts: str) -> str:
    h = hashlib.sha256()
    for t in texts:
        h.update(t.encode())
        h.update(b"\0")
    return h.hexdigest()


def file_digest(*paths) -> str:
    return digest(*(Path(p).read_text() for p in paths))


# ---------------------------------------------------------------------------
# instance formats


def read_tree(path) -> TreeSubset:
    data = read_json(path)
    if not isinstance(data, dict):
        raise MalformedInput(f"{path}: expected a JSON object")
    try:
        return TreeSubset.from_dict(data)
    except MalformedInput as exc:
        raise MalformedInput(f"{path}: {exc}") from None


def read_space(path) -> tuple:
    """(space, {name: mask}) from {"weights": ["p/q", ...], "events": {name: [indices]}}."""
    data = read_json(path)
    if not isinstance(data, dict) or "weights" not in data:
        raise MalformedInput(f"{path}: expected an object with 'weights'")
    weights = [parse_rational(w, f"{path}: weights[{i}]") for i, w in enumerate(data["weights"])]
    space = FiniteProbSpace(weights)
    events = {}
    for name, idx in (data.get("events") or {}).items():
        if not isinstance(idx, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in idx):
            raise MalformedInput(f"{path}: events[{name}] must be a list of integers")
        try:
            events[name] = space.event(idx)
        except MalformedInput as exc:
            raise MalformedInput(f"{path}: events[{name}]: {exc}") from None
    return space, events


def read_grid(path) -> DenseFamily:
    data = read_json(path)
    if not isinstance(data, dict):
        raise MalformedInput(f"{path}: expected a JSON object")
    try:
        return DenseFamily.from_dict(data)
    except MalformedInput as exc:
        raise MalformedInput(f"{path}: {exc}") from None


def read_family(item: Any, where: str = "family") -> FamilySpec:
    if isinstance(item, str):
        return parse_family(item)
    if isinstance(item, dict):
        return FamilySpec.from_dict(item)
    raise MalformedInput(f"{where}: expected a family string or object")
