"""Direct plaintext evaluation of a query against a ledger.

This is the reference answer generator: it sees the full query (secrets
included), selects blocks with the same closed-window rule the providers
use, filters records, and aggregates. Averages apply the same
floor-with-scale rule as the share path so honest protocol runs must
match it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import SchemaError
from .ledger import Ledger, Record, records_in_window
from .query.ast import AggType, And, Condition, Or, Query, Single


@dataclass(frozen=True, slots=True)
class OracleAnswer:
    value: Union[int, Fraction]
    zero_or_absent: bool
    matches: int


def _leaf_matches(rec: Record, leaf) -> bool:
    if isinstance(leaf, Single):
        return rec.attrs.get(leaf.column) == leaf.value
    val = rec.attrs.get(leaf.column)
    return isinstance(val, int) and leaf.lo <= val <= leaf.hi


def condition_matches(rec: Record, cond: Condition) -> bool:
    if isinstance(cond, And):
        return all(_leaf_matches(rec, p) for p in cond.parts)
    if isinstance(cond, Or):
        return any(_leaf_matches(rec, p) for p in cond.parts)
    return _leaf_matches(rec, cond)


def evaluate_plain(ledger: Ledger, query: Query,
                   avg_scale: int = 1) -> OracleAnswer:
    if not ledger.schema.has_column(query.agg_column):
        raise SchemaError(f"unknown aggregate column {query.agg_column!r}")
    rows = [r for r in records_in_window(ledger, query.t_start, query.t_end)
            if condition_matches(r, query.condition)]
    if not rows:
        return OracleAnswer(0, zero_or_absent=True, matches=0)
    agg = query.agg_type
    if agg is AggType.COUNT:
        return OracleAnswer(len(rows), len(rows) == 0, len(rows))
    values = [int(r.attrs[query.agg_column]) for r in rows]
    if agg is AggType.SUM:
        out: Union[int, Fraction] = sum(values)
    elif agg is AggType.MIN:
        out = min(values)
    elif agg is AggType.MAX:
        out = max(values)
    elif agg is AggType.AVG:
        raw = (sum(values) * avg_scale) // len(values)
        out = Fraction(raw, avg_scale) if avg_scale != 1 else raw
    else:  # pragma: no cover - enum is closed
        raise SchemaError(f"unknown aggregate {agg}")
    return OracleAnswer(out, out == 0, len(rows))
