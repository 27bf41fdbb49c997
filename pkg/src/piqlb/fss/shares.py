"""Share generation, evaluation and the canonical share byte format.

A share is one party's key for a secret function. Two backends:

* ``naive`` — additive truth tables, any party count, domain capped.
* ``tree``  — PRG-tree keys, exactly two parties, O(n * lambda)-bit keys.

Sum functions keep per-part sub-keys inside the share so evaluation is the
group sum of the part evaluations.

Byte format (everything little-endian, fixed width):

    u8  format version (currently 1)
    u8  backend tag     (1 = naive, 2 = tree)
    u8  party index     (1-based)
    u8  lambda bits
    u16 domain bits
    u8  key kind        (1 = table, 2 = point, 3 = interval, 4 = sum)
    ... kind-specific payload (see _write_key/_read_key)

Deserializing and re-serializing reproduces the input bytes exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ConfigError, DecodeError, UnsupportedError
from ..group import GroupElement, SUPPORTED_LAMBDA
from . import naive, tree
from .functions import (IntervalFunction, PointFunction, SecretFunction,
                        SumFunction)

FORMAT_VERSION = 1

BACKEND_NAIVE = "naive"
BACKEND_TREE = "tree"

_BACKEND_TAGS = {BACKEND_NAIVE: 1, BACKEND_TREE: 2}
_TAG_BACKENDS = {v: k for k, v in _BACKEND_TAGS.items()}

_KIND_TABLE, _KIND_POINT, _KIND_INTERVAL, _KIND_SUM = 1, 2, 3, 4


@dataclass(frozen=True, slots=True)
class NaiveKey:
    table: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class SumKey:
    parts: tuple[Union["NaiveKey", tree.PointKey, tree.IntervalKey], ...]


ShareKey = Union[NaiveKey, tree.PointKey, tree.IntervalKey, SumKey]


@dataclass(frozen=True, slots=True)
class FunctionShare:
    """One party's key plus the parameters needed to use it."""

    party_index: int  # 1..p
    backend: str
    domain_bits: int
    lambda_bits: int
    key: ShareKey


def fss_gen(lambda_bits: int, f: SecretFunction, p: int, backend: str,
            rng: random.Random | None = None,
            max_table_bits: int = naive.DEFAULT_MAX_DOMAIN_BITS) -> list[FunctionShare]:
    """Split ``f`` into p shares whose evaluations sum to f(x) everywhere."""
    if lambda_bits not in SUPPORTED_LAMBDA:
        raise ConfigError(f"lambda_bits must be one of {SUPPORTED_LAMBDA}")
    if p < 2:
        raise ConfigError(f"need at least 2 parties, got {p}")
    if rng is None:
        rng = random.SystemRandom()
    if backend == BACKEND_NAIVE:
        keys = _gen_naive(lambda_bits, f, p, rng, max_table_bits)
    elif backend == BACKEND_TREE:
        if p != 2:
            raise UnsupportedError("tree backend supports exactly 2 parties; "
                                   "use the naive backend for p > 2")
        keys = _gen_tree(lambda_bits, f, rng)
    else:
        raise ConfigError(f"unknown backend {backend!r}")
    return [FunctionShare(i + 1, backend, f.domain_bits, lambda_bits, k)
            for i, k in enumerate(keys)]


def _gen_naive(lambda_bits, f, p, rng, max_table_bits) -> list[ShareKey]:
    if isinstance(f, SumFunction):
        per_part = [_gen_naive(lambda_bits, part, p, rng, max_table_bits)
                    for part in f.parts]
        return [SumKey(tuple(part_keys[i] for part_keys in per_part))
                for i in range(p)]
    tables = naive.gen_tables(f, p, lambda_bits, rng, max_table_bits)
    return [NaiveKey(tuple(t)) for t in tables]


def _gen_tree(lambda_bits, f, rng) -> list[ShareKey]:
    if isinstance(f, SumFunction):
        per_part = [_gen_tree(lambda_bits, part, rng) for part in f.parts]
        return [SumKey(tuple(pk[b] for pk in per_part)) for b in (0, 1)]
    if isinstance(f, PointFunction):
        return list(tree.gen_point(lambda_bits, f.domain_bits, f.target,
                                   f.output, rng))
    if isinstance(f, IntervalFunction):
        return list(tree.gen_interval(lambda_bits, f.domain_bits, f.lo, f.hi,
                                      f.output, rng))
    raise ConfigError(f"cannot share {type(f).__name__}")


def fss_eval(share: FunctionShare, x: int) -> GroupElement:
    """Evaluate one share at one input. Pure and deterministic."""
    return GroupElement(_eval_key(share, share.key, x), share.lambda_bits)


def _eval_key(share: FunctionShare, key: ShareKey, x: int) -> int:
    if isinstance(key, NaiveKey):
        return naive.eval_table(key.table, share.domain_bits, x)
    if isinstance(key, tree.PointKey):
        return tree.eval_point(key, x)
    if isinstance(key, tree.IntervalKey):
        return tree.eval_interval(key, x)
    if isinstance(key, SumKey):
        mod = 1 << share.lambda_bits
        return sum(_eval_key(share, part, x) for part in key.parts) % mod
    raise ConfigError(f"cannot evaluate {type(key).__name__}")


def fss_eval_batch(share: FunctionShare, xs: list[int]) -> np.ndarray:
    """Evaluate at many inputs. Returns uint64 values reduced to lambda bits.

    Requires lambda_bits <= 64 (the engine's hot path); wider groups are
    evaluated point-wise through :func:`fss_eval`.
    """
    if share.lambda_bits > 64:
        raise ConfigError("batch evaluation requires lambda_bits <= 64")
    return _eval_key_batch(share, share.key, xs)


def _eval_key_batch(share: FunctionShare, key: ShareKey, xs: list[int]) -> np.ndarray:
    if isinstance(key, NaiveKey):
        from ..errors import InputError
        try:
            arr = np.asarray(xs, dtype=np.uint64)
        except (OverflowError, ValueError) as exc:
            raise InputError(f"input outside {share.domain_bits}-bit "
                             f"domain: {exc}") from exc
        if len(xs) and int(arr.max()) >> share.domain_bits:
            raise InputError(f"input outside {share.domain_bits}-bit domain")
        return naive.eval_table_batch(list(key.table), arr)
    if isinstance(key, tree.PointKey):
        return tree.eval_point_batch(key, xs)
    if isinstance(key, tree.IntervalKey):
        return tree.eval_interval_batch(key, xs)
    if isinstance(key, SumKey):
        mask = np.uint64((1 << share.lambda_bits) - 1 if share.lambda_bits < 64
                         else 0xFFFFFFFFFFFFFFFF)
        total = np.zeros(len(xs), dtype=np.uint64)
        for part in key.parts:
            total = (total + _eval_key_batch(share, part, xs)) & mask
        return total
    raise ConfigError(f"cannot evaluate {type(key).__name__}")


# ---------------------------------------------------------------------------
# canonical bytes

class _Writer:
    def __init__(self):
        self.buf = bytearray()

    def u8(self, v: int):
        self.buf.append(v & 0xFF)

    def u16(self, v: int):
        self.buf += int(v).to_bytes(2, "little")

    def u32(self, v: int):
        self.buf += int(v).to_bytes(4, "little")

    def elem(self, v: int, width: int):
        self.buf += int(v).to_bytes(width, "little")

    def raw(self, b: bytes):
        self.buf += b


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def _take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise DecodeError(f"truncated: needed {n} more bytes", self.off)
        chunk = self.data[self.off:self.off + n]
        self.off += n
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self._take(2), "little")

    def u32(self) -> int:
        return int.from_bytes(self._take(4), "little")

    def elem(self, width: int) -> int:
        return int.from_bytes(self._take(width), "little")

    def done(self):
        if self.off != len(self.data):
            raise DecodeError(f"{len(self.data) - self.off} trailing bytes",
                              self.off)


def serialize_share(share: FunctionShare) -> bytes:
    w = _Writer()
    w.u8(FORMAT_VERSION)
    w.u8(_BACKEND_TAGS[share.backend])
    w.u8(share.party_index)
    w.u8(share.lambda_bits)
    w.u16(share.domain_bits)
    _write_key(w, share, share.key)
    return bytes(w.buf)


def _write_key(w: _Writer, share: FunctionShare, key: ShareKey):
    width = share.lambda_bits // 8
    if isinstance(key, NaiveKey):
        w.u8(_KIND_TABLE)
        for v in key.table:
            w.elem(v, width)
    elif isinstance(key, tree.PointKey):
        w.u8(_KIND_POINT)
        w.elem(key.seed, width)
        for scw, ctrl in zip(key.seed_cw, key.ctrl_cw):
            w.elem(scw, width)
            w.u8(ctrl)
        w.elem(key.final_cw, width)
    elif isinstance(key, tree.IntervalKey):
        w.u8(_KIND_INTERVAL)
        flags = ((1 if key.lower is not None else 0)
                 | (2 if key.upper is not None else 0)
                 | (4 if key.const_share is not None else 0))
        w.u8(flags)
        if key.const_share is not None:
            w.elem(key.const_share, width)
        if key.upper is not None:
            _write_less_than(w, key.upper, width)
        if key.lower is not None:
            _write_less_than(w, key.lower, width)
    elif isinstance(key, SumKey):
        w.u8(_KIND_SUM)
        w.u16(len(key.parts))
        for part in key.parts:
            sub = serialize_share(FunctionShare(
                share.party_index, share.backend, share.domain_bits,
                share.lambda_bits, part))
            w.u32(len(sub))
            w.raw(sub)
    else:
        raise ConfigError(f"cannot serialize {type(key).__name__}")


def _write_less_than(w: _Writer, key: tree.LessThanKey, width: int):
    w.elem(key.seed, width)
    for scw, vcw, ctrl in zip(key.seed_cw, key.value_cw, key.ctrl_cw):
        w.elem(scw, width)
        w.elem(vcw, width)
        w.u8(ctrl)
    w.elem(key.final_cw, width)


def deserialize_share(data: bytes) -> FunctionShare:
    r = _Reader(data)
    share = _read_share(r)
    r.done()
    return share


def _read_share(r: _Reader) -> FunctionShare:
    version = r.u8()
    if version != FORMAT_VERSION:
        raise DecodeError(f"unsupported share format version {version}, "
                          f"expected {FORMAT_VERSION}", r.off - 1)
    tag = r.u8()
    backend = _TAG_BACKENDS.get(tag)
    if backend is None:
        raise DecodeError(f"unknown backend tag {tag}", r.off - 1)
    party_index = r.u8()
    if party_index < 1:
        raise DecodeError("party index must be >= 1", r.off - 1)
    lambda_bits = r.u8()
    if lambda_bits not in SUPPORTED_LAMBDA:
        raise DecodeError(f"unsupported lambda_bits {lambda_bits}", r.off - 1)
    domain_bits = r.u16()
    if not 1 <= domain_bits <= 128:
        raise DecodeError(f"domain_bits {domain_bits} out of range", r.off - 2)
    key = _read_key(r, backend, party_index, lambda_bits, domain_bits)
    return FunctionShare(party_index, backend, domain_bits, lambda_bits, key)


def _read_key(r: _Reader, backend: str, party_index: int, lambda_bits: int,
              domain_bits: int) -> ShareKey:
    width = lambda_bits // 8
    kind = r.u8()
    if kind == _KIND_TABLE:
        if backend != BACKEND_NAIVE:
            raise DecodeError("table key requires naive backend", r.off - 1)
        if domain_bits > naive.DEFAULT_MAX_DOMAIN_BITS:
            raise DecodeError(f"table domain too large ({domain_bits} bits)",
                              r.off - 1)
        return NaiveKey(tuple(r.elem(width) for _ in range(1 << domain_bits)))
    if kind == _KIND_POINT:
        if backend != BACKEND_TREE:
            raise DecodeError("point key requires tree backend", r.off - 1)
        seed = r.elem(width)
        seed_cw, ctrl_cw = [], []
        for _ in range(domain_bits):
            seed_cw.append(r.elem(width))
            ctrl_cw.append(r.u8())
        final_cw = r.elem(width)
        return tree.PointKey(party_index - 1, lambda_bits, domain_bits, seed,
                             tuple(seed_cw), tuple(ctrl_cw), final_cw)
    if kind == _KIND_INTERVAL:
        if backend != BACKEND_TREE:
            raise DecodeError("interval key requires tree backend", r.off - 1)
        flags = r.u8()
        if flags & 2 and flags & 4:
            raise DecodeError("interval key cannot have both upper key and "
                              "constant share", r.off - 1)
        const_share = r.elem(width) if flags & 4 else None
        upper = _read_less_than(r, party_index, lambda_bits, domain_bits) \
            if flags & 2 else None
        lower = _read_less_than(r, party_index, lambda_bits, domain_bits) \
            if flags & 1 else None
        return tree.IntervalKey(party_index - 1, lambda_bits, domain_bits,
                                upper, lower, const_share)
    if kind == _KIND_SUM:
        count = r.u16()
        if count < 2:
            raise DecodeError(f"sum key needs >= 2 parts, got {count}", r.off - 2)
        parts = []
        for _ in range(count):
            length = r.u32()
            start = r.off
            sub = _read_share(_Reader(r._take(length)))
            if (sub.backend, sub.party_index, sub.lambda_bits, sub.domain_bits) != \
                    (backend, party_index, lambda_bits, domain_bits):
                raise DecodeError("sum part header disagrees with envelope", start)
            if isinstance(sub.key, SumKey):
                raise DecodeError("nested sum keys are not allowed", start)
            parts.append(sub.key)
        return SumKey(tuple(parts))
    raise DecodeError(f"unknown key kind {kind}", r.off - 1)


def _read_less_than(r: _Reader, party_index: int, lambda_bits: int,
                    domain_bits: int) -> tree.LessThanKey:
    width = lambda_bits // 8
    seed = r.elem(width)
    seed_cw, value_cw, ctrl_cw = [], [], []
    for _ in range(domain_bits):
        seed_cw.append(r.elem(width))
        value_cw.append(r.elem(width))
        ctrl_cw.append(r.u8())
    final_cw = r.elem(width)
    return tree.LessThanKey(party_index - 1, lambda_bits, domain_bits, seed,
                            tuple(seed_cw), tuple(value_cw), tuple(ctrl_cw),
                            final_cw)
