"""Canned datasets: the 4-record walkthrough fixture and seeded random data.

The walkthrough fixture holds one record per block on four consecutive
days; its per-query intermediate tables are small enough to check by hand
and the expected answers are frozen in the test suite.
"""

from __future__ import annotations

import json
import random
from datetime import datetime, timezone
from typing import Iterator

from .ledger import Ledger, Record, append_block
from .query.encode import ColumnSpec, Schema

DAY = 86400


def _utc(y: int, m: int, d: int) -> int:
    return int(datetime(y, m, d, tzinfo=timezone.utc).timestamp())


def fixture_schema() -> Schema:
    return Schema(
        columns=(
            ColumnSpec("Item", "num", 4),
            ColumnSpec("Price", "num", 8),
            ColumnSpec("Color", "str", 8,
                       dictionary=("red", "blue", "green", "black")),
        ),
        block_records=1,
    )


def fixture_ledger() -> Ledger:
    """Four records, one per block, 1..4 June 2022."""
    schema = fixture_schema()
    rows = [
        (1, _utc(2022, 6, 1), {"Item": 2, "Price": 4, "Color": "red"}),
        (2, _utc(2022, 6, 2), {"Item": 2, "Price": 5, "Color": "blue"}),
        (3, _utc(2022, 6, 3), {"Item": 3, "Price": 7, "Color": "red"}),
        (4, _utc(2022, 6, 4), {"Item": 5, "Price": 9, "Color": "red"}),
    ]
    ledger = Ledger(schema)
    for object_id, t, attrs in rows:
        rec = Record(object_id, t, attrs["Price"], attrs)
        append_block(ledger, [rec], t)
    return ledger


#: the five walkthrough queries over the fixture window
FIXTURE_QUERIES = {
    "q1": "SELECT SUM(Price) FROM (1/06/2022) < blk_range_cond < (4/06/2022) "
          "WHERE Item = 2",
    "q2": "SELECT COUNT(Item) FROM (1/06/2022) < blk_range_cond < (4/06/2022) "
          "WHERE 4 < Price < 10",
    "q3": "SELECT AVG(Price) FROM (1/06/2022) < blk_range_cond < (4/06/2022) "
          "WHERE Item = 2",
    "q4": "SELECT MAX(Price) FROM (1/06/2022) < blk_range_cond < (4/06/2022) "
          "WHERE Item = 2 AND Color = red",
    "q5": "SELECT MIN(Price) FROM (1/06/2022) < blk_range_cond < (4/06/2022) "
          "WHERE 2 <= Item <= 5",
}

#: which condition columns each walkthrough query hides
FIXTURE_SECRETS = {
    "q1": ("Item",),
    "q2": ("Price",),
    "q3": ("Item",),
    "q4": ("Item", "Color"),
    "q5": ("Item",),
}


def bench_schema(key_bits: int = 32) -> Schema:
    """High-cardinality key column plus a small numeric payload."""
    return Schema(
        columns=(
            ColumnSpec("Key", "num", key_bits),
            ColumnSpec("Price", "num", 16),
        ),
        block_records=64,
    )


def random_record_objs(schema: Schema, count: int, seed: int,
                       start_ts: int | None = None,
                       step: int = 60) -> Iterator[dict]:
    """Seeded record stream with strictly increasing timestamps."""
    rng = random.Random(seed)
    ts = start_ts if start_ts is not None else _utc(2022, 6, 1)
    for i in range(count):
        attrs = {}
        for col in schema.columns:
            if col.kind == "num":
                attrs[col.name] = rng.getrandbits(col.bits)
            elif col.dictionary:
                attrs[col.name] = rng.choice(col.dictionary)
            else:
                attrs[col.name] = f"s{rng.getrandbits(24)}"
        yield {"id": i + 1, "t": ts, "v": int(attrs.get("Price", 0) or 0),
               "w": attrs}
        ts += rng.randint(1, step)


def build_random_ledger(schema: Schema, count: int, seed: int,
                        start_ts: int | None = None,
                        step: int = 60) -> Ledger:
    ledger = Ledger(schema)
    pending: list[Record] = []
    for obj in random_record_objs(schema, count, seed, start_ts, step):
        pending.append(Record(obj["id"], obj["t"], obj["v"], obj["w"]))
        if len(pending) == schema.block_records:
            append_block(ledger, pending, pending[-1].t)
            pending = []
    if pending:
        append_block(ledger, pending, pending[-1].t)
    return ledger


def write_record_file(schema: Schema, count: int, seed: int, path,
                      start_ts: int | None = None, step: int = 60) -> int:
    """Write line-delimited records suitable for ``ingest``; returns count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for obj in random_record_objs(schema, count, seed, start_ts, step):
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
            n += 1
    return n


def fixture_record_file(path) -> int:
    """The walkthrough fixture in ingestion format (block size 1)."""
    ledger = fixture_ledger()
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for block in ledger.blocks:
            for rec in block.records:
                fh.write(json.dumps(
                    {"id": rec.object_id, "t": rec.t, "v": rec.v,
                     "w": rec.attrs}, sort_keys=True) + "\n")
                n += 1
    return n
