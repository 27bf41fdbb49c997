"""Append-only hash-chained block store.

Each block holds records of the form (object id, timestamp, numeric value,
attribute map). Headers chain through SHA-256: a block commits to its
record bytes via ``records_hash`` and to its predecessor via ``prev_hash``;
a stored ledger file additionally carries the digest of the final header,
so any single-byte change to stored block bytes breaks verification.

Block selection for a query window [t1, t2] is closed on both ends at
block-timestamp granularity; every replica and the plaintext oracle share
this one rule. Records belong to the block whose append sealed them, and
record timestamps must fall inside (previous block timestamp, block
timestamp].
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO, Union

from .errors import DecodeError, LedgerError, SchemaError
from .query.ast import Value
from .query.encode import NUMERIC, Schema
from .query.parse import parse_datetime

FILE_MAGIC = b"PQLB"
FILE_VERSION = 1
HEADER_VERSION = 1
ZERO_HASH = bytes(32)


@dataclass(frozen=True, slots=True)
class Record:
    object_id: int
    t: int
    v: int
    attrs: dict[str, Value]


@dataclass(frozen=True, slots=True)
class Block:
    height: int
    timestamp: int
    prev_hash: bytes
    records_hash: bytes
    records: tuple[Record, ...]

    def header_bytes(self) -> bytes:
        return (bytes([HEADER_VERSION])
                + self.height.to_bytes(8, "little")
                + self.timestamp.to_bytes(8, "little", signed=True)
                + self.prev_hash
                + self.records_hash)

    def header_digest(self) -> bytes:
        return hashlib.sha256(self.header_bytes()).digest()


@dataclass
class Ledger:
    schema: Schema
    blocks: list[Block] = field(default_factory=list)

    @property
    def genesis_time(self) -> int | None:
        return self.blocks[0].timestamp if self.blocks else None

    def record_count(self) -> int:
        return sum(len(b.records) for b in self.blocks)


# --- record validation and canonical bytes ---------------------------------

def validate_record(schema: Schema, rec: Record) -> None:
    for col in schema.columns:
        if col.name not in rec.attrs:
            raise SchemaError(f"record {rec.object_id} missing column "
                              f"{col.name!r}")
        val = rec.attrs[col.name]
        if col.kind == NUMERIC:
            if not isinstance(val, int) or isinstance(val, bool):
                raise SchemaError(f"column {col.name} of record "
                                  f"{rec.object_id} must be an integer")
            if not 0 <= val < (1 << col.bits):
                raise SchemaError(f"column {col.name} of record "
                                  f"{rec.object_id}: {val} does not fit "
                                  f"{col.bits} bits")
        else:
            if not isinstance(val, str):
                raise SchemaError(f"column {col.name} of record "
                                  f"{rec.object_id} must be a string")
            if col.dictionary and val not in col.dictionary:
                raise SchemaError(f"column {col.name} of record "
                                  f"{rec.object_id}: {val!r} not in "
                                  "dictionary")
    extra = set(rec.attrs) - {c.name for c in schema.columns}
    if extra:
        raise SchemaError(f"record {rec.object_id} has unknown columns "
                          f"{sorted(extra)}")


def record_bytes(schema: Schema, rec: Record) -> bytes:
    out = bytearray()
    out += rec.object_id.to_bytes(8, "little")
    out += rec.t.to_bytes(8, "little", signed=True)
    out += rec.v.to_bytes(8, "little", signed=True)
    for col in schema.columns:
        val = rec.attrs[col.name]
        if col.kind == NUMERIC:
            out += int(val).to_bytes(8, "little")
        else:
            enc = str(val).encode("utf-8")
            out += len(enc).to_bytes(4, "little")
            out += enc
    return bytes(out)


def record_from_bytes(schema: Schema, data: bytes, base_offset: int = 0) -> Record:
    r = _Cursor(data, base_offset)
    object_id = r.u64()
    t = r.i64()
    v = r.i64()
    attrs: dict[str, Value] = {}
    for col in schema.columns:
        if col.kind == NUMERIC:
            attrs[col.name] = r.u64()
        else:
            length = r.u32()
            raw = r.take(length)
            try:
                attrs[col.name] = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise DecodeError(f"bad utf-8 in column {col.name}",
                                  r.abs_off) from exc
    r.done()
    return Record(object_id, t, v, attrs)


def _records_region(schema: Schema, records: tuple[Record, ...]) -> bytes:
    out = bytearray()
    out += len(records).to_bytes(4, "little")
    for rec in records:
        rb = record_bytes(schema, rec)
        out += len(rb).to_bytes(4, "little")
        out += rb
    return bytes(out)


# --- chain operations -------------------------------------------------------

def append_block(ledger: Ledger, records: Iterable[Record],
                 timestamp: int) -> Block:
    records = tuple(records)
    prev_ts = ledger.blocks[-1].timestamp if ledger.blocks else None
    if prev_ts is not None and timestamp <= prev_ts:
        raise LedgerError(f"block timestamp {timestamp} does not advance "
                          f"past {prev_ts}")
    for rec in records:
        validate_record(ledger.schema, rec)
        if rec.t > timestamp:
            raise LedgerError(f"record {rec.object_id} is newer than its "
                              "block")
        if prev_ts is not None and rec.t <= prev_ts:
            raise LedgerError(f"record {rec.object_id} belongs to an "
                              "earlier block")
    block = Block(
        height=len(ledger.blocks),
        timestamp=timestamp,
        prev_hash=ledger.blocks[-1].header_digest() if ledger.blocks else ZERO_HASH,
        records_hash=hashlib.sha256(
            _records_region(ledger.schema, records)).digest(),
        records=records,
    )
    ledger.blocks.append(block)
    return block


def select_blocks(ledger: Ledger, t_start: int, t_end: int) -> list[Block]:
    """Blocks with t_start <= timestamp <= t_end, in height order."""
    if t_start >= t_end:
        raise LedgerError(f"bad window: {t_start} >= {t_end}")
    return [b for b in ledger.blocks if t_start <= b.timestamp <= t_end]


def records_in_window(ledger: Ledger, t_start: int, t_end: int) -> Iterator[Record]:
    for block in select_blocks(ledger, t_start, t_end):
        yield from block.records


def verify_chain(ledger: Ledger) -> None:
    """Recompute every digest; raise LedgerError on the first mismatch."""
    prev: Block | None = None
    for i, block in enumerate(ledger.blocks):
        if block.height != i:
            raise LedgerError(f"block {i} stores height {block.height}")
        want_prev = prev.header_digest() if prev else ZERO_HASH
        if block.prev_hash != want_prev:
            raise LedgerError(f"block {i} prev-hash mismatch")
        if prev and block.timestamp <= prev.timestamp:
            raise LedgerError(f"block {i} timestamp does not advance")
        want_records = hashlib.sha256(
            _records_region(ledger.schema, block.records)).digest()
        if block.records_hash != want_records:
            raise LedgerError(f"block {i} records-hash mismatch")
        prev = block


# --- bulk ingestion ---------------------------------------------------------

def _record_from_obj(obj: dict, line_no: int) -> Record:
    try:
        t = obj["t"]
        if isinstance(t, str):
            t = parse_datetime(t)
        return Record(
            object_id=int(obj["id"]),
            t=int(t),
            v=int(obj.get("v", 0)),
            attrs=dict(obj["w"]),
        )
    except Exception as exc:
        raise SchemaError(f"line {line_no}: bad record: {exc}") from exc


def ingest(source: Union[str, os.PathLike, TextIO, Iterable[str]],
           schema: Schema) -> Ledger:
    """Build a ledger from line-delimited JSON records.

    Records must be sorted by timestamp; a block is cut every
    ``schema.block_records`` records (the final block may be short).
    Errors cite the offending line number.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            return ingest(fh, schema)

    ledger = Ledger(schema)
    pending: list[Record] = []
    last_t: int | None = None
    for line_no, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {line_no}: not valid JSON: {exc}") from exc
        rec = _record_from_obj(obj, line_no)
        try:
            validate_record(schema, rec)
        except SchemaError as exc:
            raise SchemaError(f"line {line_no}: {exc}") from exc
        if last_t is not None and rec.t < last_t:
            raise SchemaError(f"line {line_no}: records not sorted by "
                              f"timestamp ({rec.t} after {last_t})")
        last_t = rec.t
        pending.append(rec)
        if len(pending) == schema.block_records:
            _flush(ledger, pending)
            pending = []
    if pending:
        _flush(ledger, pending)
    verify_chain(ledger)
    return ledger


def _flush(ledger: Ledger, pending: list[Record]) -> None:
    ts = pending[-1].t
    prev_ts = ledger.blocks[-1].timestamp if ledger.blocks else None
    if prev_ts is not None and ts <= prev_ts:
        raise SchemaError(
            f"cannot cut a block at timestamp {ts}: it does not advance past "
            f"the previous block ({prev_ts}); records too dense for the "
            "configured block size")
    append_block(ledger, pending, ts)


# --- stored form -------------------------------------------------------------

class _Cursor:
    def __init__(self, data: bytes, base: int = 0):
        self.data = data
        self.off = 0
        self.base = base

    @property
    def abs_off(self) -> int:
        return self.base + self.off

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise DecodeError("truncated ledger data", self.abs_off)
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "little")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "little")

    def i64(self) -> int:
        return int.from_bytes(self.take(8), "little", signed=True)

    def done(self):
        if self.off != len(self.data):
            raise DecodeError("trailing bytes", self.abs_off)


def ledger_to_bytes(ledger: Ledger) -> bytes:
    from .query.encode import schema_to_obj

    out = bytearray()
    out += FILE_MAGIC
    out.append(FILE_VERSION)
    schema_json = json.dumps(schema_to_obj(ledger.schema),
                             sort_keys=True).encode("utf-8")
    out += len(schema_json).to_bytes(4, "little")
    out += schema_json
    out += len(ledger.blocks).to_bytes(4, "little")
    for block in ledger.blocks:
        body = block.header_bytes() + _records_region(ledger.schema,
                                                      block.records)
        out += len(body).to_bytes(4, "little")
        out += body
    out += ledger.blocks[-1].header_digest() if ledger.blocks else ZERO_HASH
    return bytes(out)


def ledger_from_bytes(data: bytes, verify: bool = True) -> Ledger:
    from .query.encode import schema_from_obj

    cur = _Cursor(data)
    if cur.take(4) != FILE_MAGIC:
        raise DecodeError("not a ledger file (bad magic)", 0)
    version = cur.u8()
    if version != FILE_VERSION:
        raise DecodeError(f"unsupported ledger file version {version}",
                          cur.abs_off - 1)
    schema_len = cur.u32()
    try:
        schema = schema_from_obj(json.loads(cur.take(schema_len)))
    except (json.JSONDecodeError, SchemaError) as exc:
        raise DecodeError(f"bad schema block: {exc}") from exc
    n_blocks = cur.u32()
    ledger = Ledger(schema)
    for _ in range(n_blocks):
        body_len = cur.u32()
        body_base = cur.abs_off
        body = cur.take(body_len)
        ledger.blocks.append(_block_from_bytes(schema, body, body_base))
    tip = cur.take(32)
    cur.done()
    want_tip = ledger.blocks[-1].header_digest() if ledger.blocks else ZERO_HASH
    if tip != want_tip:
        raise LedgerError("ledger tip digest mismatch")
    if verify:
        verify_chain(ledger)
    return ledger


def _block_from_bytes(schema: Schema, body: bytes, base: int) -> Block:
    cur = _Cursor(body, base)
    version = cur.u8()
    if version != HEADER_VERSION:
        raise DecodeError(f"unsupported block header version {version}",
                          cur.abs_off - 1)
    height = cur.u64()
    timestamp = cur.i64()
    prev_hash = cur.take(32)
    records_hash = cur.take(32)
    region_start = cur.off
    n_records = cur.u32()
    records = []
    for _ in range(n_records):
        rec_len = cur.u32()
        rec_base = cur.abs_off
        records.append(record_from_bytes(schema, cur.take(rec_len), rec_base))
    cur.done()
    # the hash covers the stored region bytes, so any flip in it is visible
    stored_region = body[region_start:]
    if hashlib.sha256(stored_region).digest() != records_hash:
        raise LedgerError(f"block {height} records-hash mismatch in stored "
                          "bytes")
    return Block(height, timestamp, prev_hash, records_hash, tuple(records))


def save_ledger(ledger: Ledger, path) -> None:
    with open(path, "wb") as fh:
        fh.write(ledger_to_bytes(ledger))


def load_ledger(path) -> Ledger:
    with open(path, "rb") as fh:
        return ledger_from_bytes(fh.read())
