"""Column schema and the fixed-width encoding of condition values.

Share inputs are bit strings, so every condition column needs a declared
bit width. Numeric columns encode as their value (which must fit the
width). String columns encode through a schema-declared dictionary when
one exists, else through a 64-bit hash; the hash path trades a documented
collision risk (~N^2 / 2^64 for N distinct strings) for not having to
enumerate the domain.

Conjunctions concatenate the per-column encodings, first column in the
most significant position, exactly like joining the bit strings left to
right. Client and service providers must produce identical encodings,
which is why widths and order travel inside the private query.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from ..errors import ConfigError, SchemaError
from .ast import ColumnEncoding, Value

NUMERIC = "num"
STRING = "str"

DEFAULT_NUMERIC_BITS = 32
DEFAULT_STRING_BITS = 64


@dataclass(frozen=True, slots=True)
class ColumnSpec:
    name: str
    kind: str = NUMERIC
    bits: int = DEFAULT_NUMERIC_BITS
    dictionary: tuple[str, ...] = ()  # optional closed domain for strings

    def __post_init__(self):
        if self.kind not in (NUMERIC, STRING):
            raise ConfigError(f"column kind must be '{NUMERIC}' or '{STRING}'")
        if not 1 <= self.bits <= 64:
            raise ConfigError(f"column width must be 1..64 bits, got {self.bits}")
        if self.dictionary:
            if self.kind != STRING:
                raise ConfigError("dictionary only applies to string columns")
            if len(self.dictionary) > (1 << self.bits):
                raise ConfigError(f"dictionary of {len(self.dictionary)} entries "
                                  f"does not fit {self.bits} bits")
            if len(set(self.dictionary)) != len(self.dictionary):
                raise ConfigError("dictionary entries must be distinct")


@dataclass(frozen=True, slots=True)
class Schema:
    columns: tuple[ColumnSpec, ...]
    block_records: int = 16

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate column names in schema")
        if self.block_records < 1:
            raise ConfigError("block_records must be >= 1")

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"unknown column {name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)


def encode_condition_value(col: ColumnSpec, value: Value) -> int:
    """Deterministic fixed-width encoding of one condition value."""
    if col.kind == NUMERIC:
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaError(f"column {col.name} is numeric, got {value!r}")
        if not 0 <= value < (1 << col.bits):
            raise SchemaError(f"value {value} overflows {col.bits}-bit "
                              f"column {col.name}")
        return value
    if not isinstance(value, str):
        raise SchemaError(f"column {col.name} is a string column, got {value!r}")
    if col.dictionary:
        try:
            return col.dictionary.index(value)
        except ValueError:
            raise SchemaError(f"value {value!r} not in dictionary of "
                              f"column {col.name}") from None
    digest = hashlib.blake2b(value.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & ((1 << col.bits) - 1)


def concat_encodings(parts: list[tuple[int, int]]) -> int:
    """Join (encoded value, bits) pairs, first pair most significant."""
    out = 0
    for value, bits in parts:
        out = (out << bits) | value
    return out


def encoding_for(schema: Schema, columns: list[str]) -> tuple[ColumnEncoding, ...]:
    return tuple(ColumnEncoding(c, schema.column(c).bits) for c in columns)


def encode_record_key(schema: Schema, encoding: tuple[ColumnEncoding, ...],
                      values: dict[str, Value]) -> int:
    parts = []
    for enc in encoding:
        col = schema.column(enc.column)
        if col.bits != enc.bits:
            raise SchemaError(f"width mismatch on {enc.column}: query says "
                              f"{enc.bits}, schema says {col.bits}")
        parts.append((encode_condition_value(col, values[enc.column]), enc.bits))
    return concat_encodings(parts)


# --- schema files -----------------------------------------------------------

def schema_to_obj(schema: Schema) -> dict:
    return {
        "block_records": schema.block_records,
        "columns": [
            {"name": c.name, "kind": c.kind, "bits": c.bits,
             **({"dictionary": list(c.dictionary)} if c.dictionary else {})}
            for c in schema.columns
        ],
    }


def schema_from_obj(obj: dict) -> Schema:
    try:
        cols = tuple(
            ColumnSpec(c["name"], c.get("kind", NUMERIC),
                       int(c.get("bits", DEFAULT_NUMERIC_BITS)),
                       tuple(c.get("dictionary", ())))
            for c in obj["columns"])
        return Schema(cols, int(obj.get("block_records", 16)))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad schema object: {exc}") from exc


def load_schema(path) -> Schema:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"schema file is not valid JSON: {exc}") from exc
    return schema_from_obj(obj)


def save_schema(schema: Schema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_obj(schema), fh, indent=2)
        fh.write("\n")
