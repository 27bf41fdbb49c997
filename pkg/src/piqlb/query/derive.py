"""Deriving the private query: elide secret values, fix the encoding.

The private query keeps the condition *shape* (columns, operators, any
non-secret values) and carries the bit widths and concatenation order the
service providers must use, so both sides encode identically. The elided
values and their encoded share inputs stay client-side in a SecretSpec.
"""

from __future__ import annotations

from typing import Iterable

from ..errors import SchemaError
from .ast import (And, Or, PrivateQuery, Query, Range, SecretSpec, Single,
                  condition_columns)
from .encode import Schema, concat_encodings, encode_condition_value, encoding_for


def derive_private_query(q: Query, secret_columns: Iterable[str],
                         schema: Schema, result_bits: int = 64,
                         avg_scale: int = 1) -> tuple[PrivateQuery, SecretSpec]:
    secrets = list(dict.fromkeys(secret_columns))
    if not secrets:
        raise SchemaError("at least one secret column is required")
    cond_cols = condition_columns(q.condition)
    for name in secrets:
        if name not in cond_cols:
            raise SchemaError(f"{name} is not a condition column of this query")

    cond = q.condition
    if isinstance(cond, Single):
        if secrets != [cond.column]:
            raise SchemaError(f"single condition can only elide {cond.column}")
        col = schema.column(cond.column)
        encoded = encode_condition_value(col, cond.value)
        shape = Single(cond.column, None)
        spec = SecretSpec(values={cond.column: cond.value},
                          point_inputs=(encoded,))
        encoding = encoding_for(schema, [cond.column])
    elif isinstance(cond, Range):
        if secrets != [cond.column]:
            raise SchemaError(f"range condition can only elide {cond.column}")
        col = schema.column(cond.column)
        if col.kind != "num":
            raise SchemaError(f"range condition requires a numeric column, "
                              f"{cond.column} is not")
        lo = encode_condition_value(col, cond.lo)
        hi = encode_condition_value(col, cond.hi)
        shape = Range(cond.column, None, None)
        spec = SecretSpec(values={cond.column: cond.lo},
                          range_bounds=(lo, hi))
        encoding = encoding_for(schema, [cond.column])
    elif isinstance(cond, And):
        secret_set = set(secrets)
        secret_leaves = [p for p in cond.parts if p.column in secret_set]
        parts = []
        values: dict[str, object] = {}
        enc_parts = []
        for leaf in cond.parts:
            if leaf.column in secret_set:
                parts.append(Single(leaf.column, None))
                values[leaf.column] = leaf.value
                col = schema.column(leaf.column)
                enc_parts.append((encode_condition_value(col, leaf.value),
                                  col.bits))
            else:
                parts.append(leaf)
        shape = And(tuple(parts))
        spec = SecretSpec(values=values,
                          point_inputs=(concat_encodings(enc_parts),))
        # concatenation order = order the secret leaves appear in the condition
        encoding = encoding_for(schema, [l.column for l in secret_leaves])
    elif isinstance(cond, Or):
        column = cond.parts[0].column
        if secrets != [column]:
            raise SchemaError(f"or condition can only elide {column}")
        col = schema.column(column)
        encoded = tuple(encode_condition_value(col, p.value)
                        for p in cond.parts)
        if len(set(encoded)) != len(encoded):
            raise SchemaError("or values must encode to distinct inputs")
        shape = Or(tuple(Single(column, None) for _ in cond.parts))
        spec = SecretSpec(values={column: cond.parts[0].value},
                          point_inputs=encoded)
        encoding = encoding_for(schema, [column])
    else:  # pragma: no cover - condition types are closed
        raise SchemaError(f"unsupported condition {type(cond).__name__}")

    private = PrivateQuery(
        agg_type=q.agg_type,
        agg_column=q.agg_column,
        t_start=q.t_start,
        t_end=q.t_end,
        condition=shape,
        encoding=encoding,
        domain_bits=sum(e.bits for e in encoding),
        result_bits=result_bits,
        avg_scale=avg_scale,
    )
    return private, spec
