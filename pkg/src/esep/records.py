"""JSON-lines records for reports, with a decoder that restores the original
dataclasses (tuples, nested records and optionals included)."""

from __future__ import annotations

import dataclasses
import json
import math
import typing

from . import bounds, constraints, oracle, separation

_REGISTRY = {}


def register(*classes):
    for cls in classes:
        _REGISTRY[cls.__name__] = cls


register(separation.SeparationVerdict,
         constraints.EsepWitness, constraints.TestablePair, constraints.SliceVerdict,
         constraints.CheckReport, constraints.CompatibilityResult,
         bounds.BoundsResult, bounds.AcdeResult, bounds.BoundsEntry, bounds.Intersection,
         bounds.AcdeEntry, bounds.BoundsReport,
         oracle.SweepReport, oracle.Violation, oracle.PstarReport)


@dataclasses.dataclass(frozen=True)
class IvReport:
    score: float
    acde: tuple[tuple[int, float, float, bool], ...]
    violated: bool


@dataclasses.dataclass(frozen=True)
class EsepReport:
    subgraph: separation.SeparationVerdict
    cut_edges: separation.SeparationVerdict

    @property
    def agree(self) -> bool:
        return self.subgraph.separated == self.cut_edges.separated


@dataclasses.dataclass(frozen=True)
class FindReport:
    pairs: tuple[constraints.TestablePair, ...]
    witnesses: tuple[constraints.EsepWitness, ...]


register(IvReport, EsepReport, FindReport)


def to_record(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"type": type(obj).__name__}
        for f in dataclasses.fields(obj):
            out[f.name] = to_record(getattr(obj, f.name))
        return out
    if isinstance(obj, (tuple, list)):
        return [to_record(x) for x in obj]
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            raise ValueError("non-finite float in record")
        return obj
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    if hasattr(obj, "item"):        # numpy scalar
        return obj.item()
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _coerce(value, hint):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if value is None:
        return None
    if origin in (typing.Union, getattr(__import__("types"), "UnionType", None)):
        for arg in args:
            if arg is type(None):
                continue
            return _coerce(value, arg)
    if isinstance(value, dict) and "type" in value:
        return from_record(value)
    if origin is tuple:
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0]) for v in value)
        if args:
            return tuple(_coerce(v, a) for v, a in zip(value, args))
        return tuple(value)
    if hint is float:
        return float(value)
    return value


def from_record(rec: dict):
    cls = _REGISTRY[rec["type"]]
    hints = typing.get_type_hints(cls)
    kwargs = {f.name: _coerce(rec[f.name], hints[f.name])
              for f in dataclasses.fields(cls) if f.name in rec}
    obj = cls.__new__(cls)
    for k, v in kwargs.items():
        object.__setattr__(obj, k, v)
    return obj


def emit(obj) -> str:
    return json.dumps(to_record(obj), separators=(",", ":"))


def parse(line: str):
    return from_record(json.loads(line))


def emit_lines(report) -> str:
    """Multi-line form: one record per verdict for check reports, else one line."""
    if isinstance(report, constraints.CheckReport):
        return "".join(emit(v) + "\n" for v in report.verdicts)
    return emit(report) + "\n"


def parse_lines(text: str):
    objs = [parse(line) for line in text.splitlines() if line.strip()]
    if objs and all(isinstance(o, constraints.SliceVerdict) for o in objs):
        return constraints.CheckReport(tuple(objs))
    if len(objs) == 1:
        return objs[0]
    return objs
