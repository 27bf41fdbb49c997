"""Numpy implementation of the hot evaluation kernels.

This is the fallback lane selected when the compiled extension is absent.
Tree walks are vectorized across evaluation points: one level of the GGM
tree becomes a handful of whole-array operations instead of a per-point
Python loop. All arithmetic is uint64 with natural wraparound; group
elements narrower than 64 bits are masked after every step that could
carry past lambda bits.

Supports lambda_bits <= 64 and domains up to 128 bits (inputs split into
low/high words). Wider groups take the scalar path in ``fss.tree``.
"""

from __future__ import annotations

import numpy as np

NAME = "python"

_PARITY = np.uint64(0x1BD11BDAA9FC1A22)
_ROT = (16, 42, 12, 31, 16, 32, 24, 21)
_U1 = np.uint64(1)
_U64 = np.uint64(64)


def _threefry(k0, k1, c0: int, c1: int):
    """Vectorized Threefry-2x64-20; keys are arrays, counters scalars."""
    ks2 = k0 ^ k1 ^ _PARITY
    ks = (k0, k1, ks2)
    x0 = k0 + np.uint64(c0)
    x1 = k1 + np.uint64(c1)
    for r in range(20):
        x0 = x0 + x1
        rot = np.uint64(_ROT[r % 8])
        x1 = ((x1 << rot) | (x1 >> (_U64 - rot))) ^ x0
        if (r + 1) % 4 == 0:
            s = (r + 1) // 4
            x0 = x0 + ks[s % 3]
            x1 = x1 + ks[(s + 1) % 3] + np.uint64(s)
    return x0, x1


def _level_bit(xs_lo, xs_hi, j: int):
    if j < 64:
        return (xs_lo >> np.uint64(j)) & _U1
    return (xs_hi >> np.uint64(j - 64)) & _U1


def _negate_masked(v, mask):
    return (np.uint64(0) - v) & mask


def dpf_eval_batch(party, lambda_bits, nbits, seed0, scw, tcw, final_cw, xs_lo, xs_hi):
    """Evaluate a two-party point-function key at many inputs.

    scw: uint64[nbits] seed corrections; tcw: uint8[nbits] packed control
    corrections (bit0 left, bit1 right). Returns uint64[len(xs)] outputs
    already reduced to lambda_bits.
    """
    mask = np.uint64((1 << lambda_bits) - 1 if lambda_bits < 64 else 0xFFFFFFFFFFFFFFFF)
    n = xs_lo.shape[0]
    zero = np.zeros(n, dtype=np.uint64)
    s = np.full(n, np.uint64(seed0), dtype=np.uint64)
    t = np.full(n, np.uint64(party), dtype=np.uint64)
    for i in range(nbits):
        w0, w1 = _threefry(s, zero, 0, 0)
        w2, _ = _threefry(s, zero, 1, 0)
        sl = (w0 & mask) ^ (t * np.uint64(int(scw[i])))
        sr = (w1 & mask) ^ (t * np.uint64(int(scw[i])))
        tl = (w2 & _U1) ^ (t * np.uint64(int(tcw[i]) & 1))
        tr = ((w2 >> _U1) & _U1) ^ (t * np.uint64((int(tcw[i]) >> 1) & 1))
        xb = _level_bit(xs_lo, xs_hi, nbits - 1 - i)
        go_right = xb.astype(bool)
        s = np.where(go_right, sr, sl)
        t = np.where(go_right, tr, tl)
    out = (s + t * np.uint64(final_cw)) & mask
    if party == 1:
        out = _negate_masked(out, mask)
    return out


def dcf_eval_batch(party, lambda_bits, nbits, seed0, scw, vcw, tcw, final_cw, xs_lo, xs_hi):
    """Evaluate a two-party one-sided comparison key (f(x)=y for x < a)."""
    mask = np.uint64((1 << lambda_bits) - 1 if lambda_bits < 64 else 0xFFFFFFFFFFFFFFFF)
    n = xs_lo.shape[0]
    zero = np.zeros(n, dtype=np.uint64)
    s = np.full(n, np.uint64(seed0), dtype=np.uint64)
    t = np.full(n, np.uint64(party), dtype=np.uint64)
    acc = np.zeros(n, dtype=np.uint64)
    for i in range(nbits):
        w0, w1 = _threefry(s, zero, 0, 0)
        w2, w3 = _threefry(s, zero, 1, 0)
        w4, _ = _threefry(s, zero, 2, 0)
        sl = (w0 & mask) ^ (t * np.uint64(int(scw[i])))
        sr = (w1 & mask) ^ (t * np.uint64(int(scw[i])))
        vl = w2 & mask
        vr = w3 & mask
        tl = (w4 & _U1) ^ (t * np.uint64(int(tcw[i]) & 1))
        tr = ((w4 >> _U1) & _U1) ^ (t * np.uint64((int(tcw[i]) >> 1) & 1))
        xb = _level_bit(xs_lo, xs_hi, nbits - 1 - i)
        go_right = xb.astype(bool)
        step = np.where(go_right, vr, vl) + t * np.uint64(int(vcw[i]))
        acc = (acc + step) & mask
        s = np.where(go_right, sr, sl)
        t = np.where(go_right, tr, tl)
    acc = (acc + s + t * np.uint64(final_cw)) & mask
    if party == 1:
        acc = _negate_masked(acc, mask)
    return acc


def masked_bit_sum(evals, values, k, lambda_bits):
    """Sum of evals[j] over rows whose aggregate has bit k set, in the group."""
    mask = (1 << lambda_bits) - 1
    bits = (values >> np.uint64(k)) & _U1
    total = int(np.sum(evals * bits, dtype=np.uint64))
    return total & mask


def gather(table, xs_lo):
    """Truth-table lookup for the additive-table backend."""
    return table[xs_lo]
