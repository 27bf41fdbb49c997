"""Two-party PRG-tree sharing for point and interval functions.

Point functions use the classic two-party construction: both parties walk
a binary tree of seeds that stay equal off the secret path and independent
on it, with one correction word per level; the final leaf seed converts to
a group element, and the parties' signed outputs sum to y exactly at the
target input.

Intervals build on a one-sided comparison key ("output y when x < a"),
which additionally accumulates a value word per level so the whole subtree
left of the secret path pays out y. A closed interval [a, b] is the
difference of two one-sided keys, f_{<b+1} - f_{<a}; each boundary key is
dropped when degenerate (a = 0, or b at the top of the domain, where the
upper term collapses to a plain additive sharing of y).

Key material is O(n * lambda) bits. Only p = 2 is supported here; wider
party counts use the table backend.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from .. import kernels
from .prg import expand_interval, expand_point

#: widest lambda the batch kernels accept; beyond this the scalar path runs.
KERNEL_LAMBDA_MAX = 64


def _bit(x: int, nbits: int, level: int) -> int:
    # level counts 1..n from the most significant bit
    return (x >> (nbits - level)) & 1


@dataclass(frozen=True, slots=True)
class PointKey:
    """One party's key for a shared point function."""

    party: int  # 0 or 1
    lambda_bits: int
    domain_bits: int
    seed: int
    seed_cw: tuple[int, ...]
    ctrl_cw: tuple[int, ...]  # bit0 = left correction, bit1 = right
    final_cw: int


@dataclass(frozen=True, slots=True)
class LessThanKey:
    """One party's key for f(x) = y when x < threshold."""

    party: int
    lambda_bits: int
    domain_bits: int
    seed: int
    seed_cw: tuple[int, ...]
    value_cw: tuple[int, ...]
    ctrl_cw: tuple[int, ...]
    final_cw: int


@dataclass(frozen=True, slots=True)
class IntervalKey:
    """Closed-interval key: upper one-sided key minus lower one-sided key.

    ``const_share`` replaces the upper key when the interval reaches the
    top of the domain and the upper comparison degenerates to the constant
    function y.
    """

    party: int
    lambda_bits: int
    domain_bits: int
    upper: LessThanKey | None
    lower: LessThanKey | None
    const_share: int | None


def gen_point(lambda_bits: int, domain_bits: int, target: int, output: int,
              rng: random.Random) -> tuple[PointKey, PointKey]:
    mod = 1 << lambda_bits
    s = [rng.getrandbits(lambda_bits), rng.getrandbits(lambda_bits)]
    seeds0, seeds1 = s[0], s[1]
    t = [0, 1]
    seed_cw: list[int] = []
    ctrl_cw: list[int] = []
    for i in range(1, domain_bits + 1):
        e0 = expand_point(s[0], lambda_bits)
        e1 = expand_point(s[1], lambda_bits)
        ab = _bit(target, domain_bits, i)
        if ab == 0:
            keep = ((e0[0], e0[1]), (e1[0], e1[1]))
            lose = (e0[2], e1[2])
        else:
            keep = ((e0[2], e0[3]), (e1[2], e1[3]))
            lose = (e0[0], e1[0])
        scw = lose[0] ^ lose[1]
        tcw_l = e0[1] ^ e1[1] ^ ab ^ 1
        tcw_r = e0[3] ^ e1[3] ^ ab
        tcw_keep = tcw_r if ab else tcw_l
        ns, nt = [], []
        for b in (0, 1):
            sk, tk = keep[b]
            ns.append(sk ^ (scw if t[b] else 0))
            nt.append(tk ^ (tcw_keep if t[b] else 0))
        seed_cw.append(scw)
        ctrl_cw.append(tcw_l | (tcw_r << 1))
        s, t = ns, nt
    sign = -1 if t[1] else 1
    final_cw = (sign * (output - s[0] + s[1])) % mod
    k0 = PointKey(0, lambda_bits, domain_bits, seeds0,
                  tuple(seed_cw), tuple(ctrl_cw), final_cw)
    k1 = PointKey(1, lambda_bits, domain_bits, seeds1,
                  tuple(seed_cw), tuple(ctrl_cw), final_cw)
    return k0, k1


def gen_less_than(lambda_bits: int, domain_bits: int, threshold: int, output: int,
                  rng: random.Random) -> tuple[LessThanKey, LessThanKey]:
    """Keys for the one-sided comparison f(x) = output iff x < threshold."""
    mod = 1 << lambda_bits
    s = [rng.getrandbits(lambda_bits), rng.getrandbits(lambda_bits)]
    seeds0, seeds1 = s[0], s[1]
    t = [0, 1]
    carry = 0  # running value-correction the next level must cancel
    seed_cw: list[int] = []
    value_cw: list[int] = []
    ctrl_cw: list[int] = []
    for i in range(1, domain_bits + 1):
        e0 = expand_interval(s[0], lambda_bits)  # sl, vl, tl, sr, vr, tr
        e1 = expand_interval(s[1], lambda_bits)
        ab = _bit(threshold, domain_bits, i)
        if ab == 0:
            keep0, lose0 = (e0[0], e0[1], e0[2]), (e0[3], e0[4], e0[5])
            keep1, lose1 = (e1[0], e1[1], e1[2]), (e1[3], e1[4], e1[5])
        else:
            keep0, lose0 = (e0[3], e0[4], e0[5]), (e0[0], e0[1], e0[2])
            keep1, lose1 = (e1[3], e1[4], e1[5]), (e1[0], e1[1], e1[2])
        scw = lose0[0] ^ lose1[0]
        sign = -1 if t[1] else 1
        vcw = (sign * (lose1[1] - lose0[1] - carry)) % mod
        if ab == 1:
            # the abandoned left subtree holds exactly the x with this
            # prefix below the threshold: it must contribute the output
            vcw = (vcw + sign * output) % mod
        carry = (carry - keep1[1] + keep0[1] + sign * vcw) % mod
        tcw_l = e0[2] ^ e1[2] ^ ab ^ 1
        tcw_r = e0[5] ^ e1[5] ^ ab
        tcw_keep = tcw_r if ab else tcw_l
        ns, nt = [], []
        for b in (0, 1):
            sk, _, tk = keep0 if b == 0 else keep1
            ns.append(sk ^ (scw if t[b] else 0))
            nt.append(tk ^ (tcw_keep if t[b] else 0))
        seed_cw.append(scw)
        value_cw.append(vcw)
        ctrl_cw.append(tcw_l | (tcw_r << 1))
        s, t = ns, nt
    sign = -1 if t[1] else 1
    final_cw = (sign * (s[1] - s[0] - carry)) % mod
    k0 = LessThanKey(0, lambda_bits, domain_bits, seeds0,
                     tuple(seed_cw), tuple(value_cw), tuple(ctrl_cw), final_cw)
    k1 = LessThanKey(1, lambda_bits, domain_bits, seeds1,
                     tuple(seed_cw), tuple(value_cw), tuple(ctrl_cw), final_cw)
    return k0, k1


def gen_interval(lambda_bits: int, domain_bits: int, lo: int, hi: int, output: int,
                 rng: random.Random) -> tuple[IntervalKey, IntervalKey]:
    mod = 1 << lambda_bits
    top = (1 << domain_bits) - 1
    if hi == top:
        share0 = rng.getrandbits(lambda_bits)
        share1 = (output - share0) % mod
        uppers = (None, None)
        consts = (share0, share1)
    else:
        uppers = gen_less_than(lambda_bits, domain_bits, hi + 1, output, rng)
        consts = (None, None)
    lowers = (None, None) if lo == 0 else \
        gen_less_than(lambda_bits, domain_bits, lo, output, rng)
    keys = tuple(
        IntervalKey(b, lambda_bits, domain_bits, uppers[b], lowers[b], consts[b])
        for b in (0, 1))
    return keys[0], keys[1]


def _check_input(x: int, domain_bits: int) -> None:
    if not 0 <= x < (1 << domain_bits):
        raise InputError(f"input {x} outside {domain_bits}-bit domain")


def eval_point(key: PointKey, x: int) -> int:
    _check_input(x, key.domain_bits)
    mod = 1 << key.lambda_bits
    s, t = key.seed, key.party
    for i in range(1, key.domain_bits + 1):
        sl, tl, sr, tr = expand_point(s, key.lambda_bits)
        if t:
            sl ^= key.seed_cw[i - 1]
            sr ^= key.seed_cw[i - 1]
            tl ^= key.ctrl_cw[i - 1] & 1
            tr ^= (key.ctrl_cw[i - 1] >> 1) & 1
        s, t = (sr, tr) if _bit(x, key.domain_bits, i) else (sl, tl)
    v = (s + t * key.final_cw) % mod
    return v if key.party == 0 else (-v) % mod


def eval_less_than(key: LessThanKey, x: int) -> int:
    _check_input(x, key.domain_bits)
    mod = 1 << key.lambda_bits
    s, t = key.seed, key.party
    acc = 0
    for i in range(1, key.domain_bits + 1):
        sl, vl, tl, sr, vr, tr = expand_interval(s, key.lambda_bits)
        if t:
            sl ^= key.seed_cw[i - 1]
            sr ^= key.seed_cw[i - 1]
            tl ^= key.ctrl_cw[i - 1] & 1
            tr ^= (key.ctrl_cw[i - 1] >> 1) & 1
        if _bit(x, key.domain_bits, i):
            acc = (acc + vr + (key.value_cw[i - 1] if t else 0)) % mod
            s, t = sr, tr
        else:
            acc = (acc + vl + (key.value_cw[i - 1] if t else 0)) % mod
            s, t = sl, tl
    acc = (acc + s + (key.final_cw if t else 0)) % mod
    return acc if key.party == 0 else (-acc) % mod


def eval_interval(key: IntervalKey, x: int) -> int:
    _check_input(x, key.domain_bits)
    mod = 1 << key.lambda_bits
    total = key.const_share if key.const_share is not None else 0
    if key.upper is not None:
        total = (total + eval_less_than(key.upper, x)) % mod
    if key.lower is not None:
        total = (total - eval_less_than(key.lower, x)) % mod
    return total


def _split_words(xs: list[int], domain_bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Inputs as (low, high) word arrays, bounds-checked against the domain."""
    if domain_bits <= 64:
        try:
            lo = np.asarray(xs, dtype=np.uint64)
        except (OverflowError, ValueError) as exc:
            raise InputError(f"input outside {domain_bits}-bit domain: "
                             f"{exc}") from exc
        hi = np.zeros(len(xs), dtype=np.uint64)
        bad = lo >> np.uint64(domain_bits) if domain_bits < 64 else None
        if bad is not None and bad.any():
            raise InputError(f"input outside {domain_bits}-bit domain")
        return lo, hi
    lo = np.fromiter((x & 0xFFFFFFFFFFFFFFFF for x in xs), dtype=np.uint64,
                     count=len(xs))
    hi = np.fromiter((x >> 64 for x in xs), dtype=np.uint64, count=len(xs))
    if int(hi.max(initial=0)) >> (domain_bits - 64):
        raise InputError(f"input outside {domain_bits}-bit domain")
    return lo, hi


def eval_point_batch(key: PointKey, xs: list[int]) -> np.ndarray:
    """Batch evaluation; uses the active kernel lane when lambda fits."""
    if key.lambda_bits > KERNEL_LAMBDA_MAX:
        mod_mask = (1 << 64) - 1  # scalar path returns python ints
        return np.array([eval_point(key, x) & mod_mask for x in xs],
                        dtype=np.uint64)
    lo, hi = _split_words(xs, key.domain_bits)
    return kernels.dpf_eval_batch(
        key.party, key.lambda_bits, key.domain_bits, key.seed,
        np.array(key.seed_cw, dtype=np.uint64),
        np.array(key.ctrl_cw, dtype=np.uint8),
        key.final_cw, lo, hi)


def _eval_less_than_batch(key: LessThanKey, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return kernels.dcf_eval_batch(
        key.party, key.lambda_bits, key.domain_bits, key.seed,
        np.array(key.seed_cw, dtype=np.uint64),
        np.array(key.value_cw, dtype=np.uint64),
        np.array(key.ctrl_cw, dtype=np.uint8),
        key.final_cw, lo, hi)


def eval_interval_batch(key: IntervalKey, xs: list[int]) -> np.ndarray:
    if key.lambda_bits > KERNEL_LAMBDA_MAX:
        return np.array([eval_interval(key, x) & ((1 << 64) - 1) for x in xs],
                        dtype=np.uint64)
    lo, hi = _split_words(xs, key.domain_bits)
    mask = np.uint64((1 << key.lambda_bits) - 1 if key.lambda_bits < 64
                     else 0xFFFFFFFFFFFFFFFF)
    total = np.full(len(xs), np.uint64(key.const_share or 0), dtype=np.uint64)
    if key.upper is not None:
        total = (total + _eval_less_than_batch(key.upper, lo, hi)) & mask
    if key.lower is not None:
        total = (total - _eval_less_than_batch(key.lower, lo, hi)) & mask
    return total
