"""Query model: aggregate type, block time window, condition tree.

A condition is one of four shapes. ``Single`` compares one column to one
value; ``Range`` bounds one numeric column on a closed interval; ``And``
conjoins singles over distinct columns; ``Or`` disjoins singles with
pairwise-distinct values on one column. At most one range leaf is allowed
per query and ranges cannot nest under And/Or.

The same dataclasses serve both the full query and its private form: in
the private form elided values are ``None`` (rendered ``?``).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Union

from ..errors import ConfigError, DecodeError

Value = Union[int, str]


class AggType(enum.Enum):
    SUM = "SUM"
    COUNT = "COUNT"
    AVG = "AVG"
    MIN = "MIN"
    MAX = "MAX"


@dataclass(frozen=True, slots=True)
class Single:
    column: str
    value: Optional[Value]


@dataclass(frozen=True, slots=True)
class Range:
    """Closed interval lo <= column <= hi. Strict text forms are closed
    during parsing, before this node exists."""

    column: str
    lo: Optional[int]
    hi: Optional[int]

    def __post_init__(self):
        if self.lo is not None and self.hi is not None and self.lo > self.hi:
            raise ConfigError(f"empty range [{self.lo}, {self.hi}] on "
                              f"{self.column}")


@dataclass(frozen=True, slots=True)
class And:
    parts: tuple[Single, ...]

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ConfigError("AND needs at least two conditions")
        cols = [p.column for p in self.parts]
        if len(set(cols)) != len(cols):
            raise ConfigError("AND conditions must use distinct columns")


@dataclass(frozen=True, slots=True)
class Or:
    parts: tuple[Single, ...]

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ConfigError("OR needs at least two conditions")
        cols = {p.column for p in self.parts}
        if len(cols) != 1:
            raise ConfigError("OR conditions must all use one column")
        values = [p.value for p in self.parts]
        if all(v is not None for v in values) and len(set(values)) != len(values):
            raise ConfigError("OR values must be pairwise distinct")


Condition = Union[Single, Range, And, Or]


def condition_leaves(cond: Condition) -> tuple[Union[Single, Range], ...]:
    if isinstance(cond, (And, Or)):
        return cond.parts
    return (cond,)


def condition_columns(cond: Condition) -> tuple[str, ...]:
    seen = []
    for leaf in condition_leaves(cond):
        if leaf.column not in seen:
            seen.append(leaf.column)
    return tuple(seen)


@dataclass(frozen=True, slots=True)
class Query:
    """A fully-specified query (all condition values present)."""

    agg_type: AggType
    agg_column: str
    t_start: int  # epoch seconds, window is closed [t_start, t_end]
    t_end: int
    condition: Condition

    def __post_init__(self):
        if self.t_start >= self.t_end:
            raise ConfigError(f"window start {self.t_start} must precede "
                              f"end {self.t_end}")
        for leaf in condition_leaves(self.condition):
            if isinstance(leaf, Single) and leaf.value is None:
                raise ConfigError(f"condition on {leaf.column} has no value")
            if isinstance(leaf, Range) and (leaf.lo is None or leaf.hi is None):
                raise ConfigError(f"range on {leaf.column} has no bounds")


@dataclass(frozen=True, slots=True)
class ColumnEncoding:
    column: str
    bits: int


@dataclass(frozen=True, slots=True)
class PrivateQuery:
    """The query as revealed to service providers: secret values elided.

    ``encoding`` lists the secret condition columns in concatenation order
    with their bit widths; ``domain_bits`` is the width of the resulting
    share input and must equal the sum of the listed widths.
    """

    agg_type: AggType
    agg_column: str
    t_start: int
    t_end: int
    condition: Condition
    encoding: tuple[ColumnEncoding, ...]
    domain_bits: int
    result_bits: int = 64
    avg_scale: int = 1

    def __post_init__(self):
        if self.domain_bits != sum(e.bits for e in self.encoding):
            raise ConfigError("domain_bits must equal the sum of encoded widths")
        if not 1 <= self.result_bits <= 64:
            raise ConfigError("result_bits must be in 1..64")
        if self.avg_scale < 1:
            raise ConfigError("avg_scale must be >= 1")


@dataclass(frozen=True, slots=True)
class SecretSpec:
    """Client-side record of what was elided: leaf values and the n-bit
    share input(s) they encode to. Never serialized onto the wire."""

    values: dict[str, Value] = field(default_factory=dict)   # column -> value
    range_bounds: Optional[tuple[int, int]] = None           # encoded lo, hi
    point_inputs: tuple[int, ...] = ()                       # encoded targets


# ---------------------------------------------------------------------------
# canonical private-query bytes (JSON, sorted keys; shared with transport)

def _cond_kind(cond: Condition) -> str:
    return {Single: "single", Range: "range", And: "and", Or: "or"}[type(cond)]


def _leaf_obj(leaf: Union[Single, Range]) -> dict:
    if isinstance(leaf, Single):
        return {"column": leaf.column, "op": "eq", "value": leaf.value}
    return {"column": leaf.column, "op": "between", "lo": leaf.lo, "hi": leaf.hi}


def private_query_to_obj(q: PrivateQuery) -> dict:
    return {
        "agg": q.agg_type.value,
        "agg_column": q.agg_column,
        "window": [q.t_start, q.t_end],
        "kind": _cond_kind(q.condition),
        "leaves": [_leaf_obj(l) for l in condition_leaves(q.condition)],
        "encoding": [{"column": e.column, "bits": e.bits} for e in q.encoding],
        "domain_bits": q.domain_bits,
        "result_bits": q.result_bits,
        "avg_scale": q.avg_scale,
    }


def private_query_to_bytes(q: PrivateQuery) -> bytes:
    return json.dumps(private_query_to_obj(q), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")


def _leaf_from_obj(obj: dict) -> Union[Single, Range]:
    try:
        if obj["op"] == "eq":
            return Single(obj["column"], obj["value"])
        if obj["op"] == "between":
            return Range(obj["column"], obj["lo"], obj["hi"])
    except (KeyError, TypeError) as exc:
        raise DecodeError(f"bad condition leaf: {exc}") from exc
    raise DecodeError(f"unknown condition op {obj.get('op')!r}")


def private_query_from_bytes(data: bytes) -> PrivateQuery:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"private query is not valid JSON: {exc}") from exc
    try:
        leaves = [_leaf_from_obj(l) for l in obj["leaves"]]
        kind = obj["kind"]
        if kind == "single":
            (cond,) = leaves
        elif kind == "range":
            (cond,) = leaves
            if not isinstance(cond, Range):
                raise DecodeError("kind 'range' without a range leaf")
        elif kind == "and":
            cond = And(tuple(leaves))
        elif kind == "or":
            cond = Or(tuple(leaves))
        else:
            raise DecodeError(f"unknown condition kind {kind!r}")
        return PrivateQuery(
            agg_type=AggType(obj["agg"]),
            agg_column=obj["agg_column"],
            t_start=int(obj["window"][0]),
            t_end=int(obj["window"][1]),
            condition=cond,
            encoding=tuple(ColumnEncoding(e["column"], int(e["bits"]))
                           for e in obj["encoding"]),
            domain_bits=int(obj["domain_bits"]),
            result_bits=int(obj["result_bits"]),
            avg_scale=int(obj["avg_scale"]),
        )
    except DecodeError:
        raise
    except (KeyError, ValueError, TypeError, ConfigError) as exc:
        raise DecodeError(f"bad private query: {exc}") from exc
