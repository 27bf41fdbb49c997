"""Service-provider evaluation.

From the replica and a private query the provider derives an intermediate
table: the per-group aggregates for equality-style conditions (grouped on
the concatenated secret-column encoding, ascending), or one row per record
for a range condition (ledger order, no grouping). The aggregate column
expands bitwise into an l-column matrix, and each response element is the
group sum over rows of the share evaluated at the row key, gated by that
row's bit — so the share is evaluated once per row *per bit position*,
which is what makes provider work scale as rows x result bits.

Nothing here sees a secret: inputs are the replica, the private query and
one function share.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EvalError, SchemaError
from .fss.shares import FunctionShare, fss_eval, fss_eval_batch
from . import kernels
from .ledger import Ledger, Record, select_blocks
from .query.ast import PrivateQuery, Range, Single, condition_leaves
from .query.encode import NUMERIC, encode_record_key
from .query.parse import QueryLimits


@dataclass(frozen=True, slots=True)
class IntermediateTable:
    """Aligned key/aggregate columns; ``grouped`` tells which build path ran."""

    keys: tuple[int, ...]
    values: tuple[int, ...]
    grouped: bool

    def __len__(self) -> int:
        return len(self.keys)


@dataclass(frozen=True, slots=True)
class BitMatrix:
    """Bitwise view of the aggregate column: entry (j, k) is bit k (LSB
    first) of values[j]."""

    values: tuple[int, ...]
    width: int

    def bit(self, row: int, k: int) -> int:
        return (self.values[row] >> k) & 1

    def row_bits(self, row: int) -> list[int]:
        return [(self.values[row] >> k) & 1 for k in range(self.width)]


@dataclass(frozen=True, slots=True)
class ShareOutput:
    """One provider's response: a group element per bit position."""

    party_index: int
    lambda_bits: int
    values: tuple[int, ...]


def _is_secret_range(private: PrivateQuery) -> bool:
    cond = private.condition
    return isinstance(cond, Range) and cond.lo is None


def _plaintext_filter(records: list[Record], private: PrivateQuery) -> list[Record]:
    checks = []
    for leaf in condition_leaves(private.condition):
        if isinstance(leaf, Single) and leaf.value is not None:
            checks.append((leaf.column, leaf.value))
    if not checks:
        return records
    return [r for r in records
            if all(r.attrs.get(col) == val for col, val in checks)]


def _aggregate(agg: str, rows: list[Record], column: str, scale: int) -> int:
    values = [int(r.attrs[column]) for r in rows]
    if agg == "SUM":
        return sum(values)
    if agg == "COUNT":
        return len(rows)
    if agg == "MIN":
        return min(values)
    if agg == "MAX":
        return max(values)
    if agg == "AVG":
        return (sum(values) * scale) // len(rows)
    raise ConfigError(f"unknown aggregate {agg!r}")


def build_intermediate_table(ledger: Ledger, private: PrivateQuery,
                             limits: QueryLimits | None = None
                             ) -> tuple[IntermediateTable, BitMatrix]:
    schema = ledger.schema
    agg = private.agg_type.value
    if not schema.has_column(private.agg_column):
        raise SchemaError(f"unknown aggregate column {private.agg_column!r}")
    if agg != "COUNT" and schema.column(private.agg_column).kind != NUMERIC:
        raise SchemaError(f"cannot {agg} over non-numeric column "
                          f"{private.agg_column!r}")
    for enc in private.encoding:
        col = schema.column(enc.column)
        if col.bits != enc.bits:
            raise EvalError(f"encoding width mismatch on {enc.column}: query "
                            f"says {enc.bits}, schema says {col.bits}")

    blocks = select_blocks(ledger, private.t_start, private.t_end)
    if limits is not None and len(blocks) > limits.max_blocks:
        raise EvalError(f"window selects {len(blocks)} blocks, above the "
                        f"configured cap of {limits.max_blocks}")
    records = [r for b in blocks for r in b.records]
    records = _plaintext_filter(records, private)

    scale = private.avg_scale
    if _is_secret_range(private):
        keys, values = [], []
        for rec in records:
            keys.append(encode_record_key(schema, private.encoding, rec.attrs))
            if agg == "COUNT":
                values.append(1)
            elif agg == "AVG":
                values.append(int(rec.attrs[private.agg_column]) * scale)
            else:
                values.append(int(rec.attrs[private.agg_column]))
        table = IntermediateTable(tuple(keys), tuple(values), grouped=False)
    else:
        groups: dict[int, list[Record]] = {}
        for rec in records:
            key = encode_record_key(schema, private.encoding, rec.attrs)
            groups.setdefault(key, []).append(rec)
        keys = sorted(groups)
        values = [_aggregate(agg, groups[k], private.agg_column, scale)
                  for k in keys]
        table = IntermediateTable(tuple(keys), tuple(values), grouped=True)

    limit = 1 << private.result_bits
    for v in table.values:
        if not 0 <= v < limit:
            raise EvalError(f"aggregate value {v} does not fit "
                            f"{private.result_bits} bits")
    return table, BitMatrix(table.values, private.result_bits)


def comp(share: FunctionShare, table: IntermediateTable, bits: BitMatrix,
         k: int) -> int:
    """Group sum over rows of Eval(share, key_j) * bit(j, k)."""
    if k >= bits.width:
        raise ConfigError(f"bit index {k} out of range for width {bits.width}")
    if len(bits.values) != len(table.keys):
        raise ConfigError("bit matrix and table row counts differ")
    if not table.keys:
        return 0
    if share.lambda_bits <= 64:
        evals = fss_eval_batch(share, list(table.keys))
        vals = np.fromiter(bits.values, dtype=np.uint64, count=len(bits.values))
        return kernels.masked_bit_sum(evals, vals, k, share.lambda_bits)
    mod = 1 << share.lambda_bits
    total = 0
    for key, value in zip(table.keys, bits.values):
        if (value >> k) & 1:
            total = (total + fss_eval(share, key).value) % mod
    return total


def evaluate(share: FunctionShare, ledger: Ledger, private: PrivateQuery,
             limits: QueryLimits | None = None) -> ShareOutput:
    """Full provider evaluation: table, bit expansion, one comp per bit."""
    if share.domain_bits != private.domain_bits:
        raise EvalError(f"share domain is {share.domain_bits} bits but the "
                        f"query encodes {private.domain_bits}")
    table, bits = build_intermediate_table(ledger, private, limits)
    out = [comp(share, table, bits, k) for k in range(private.result_bits)]
    return ShareOutput(share.party_index, share.lambda_bits, tuple(out))
