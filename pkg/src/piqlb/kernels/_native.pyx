# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled evaluation kernels (hot loops of the share-evaluation path).

Mirrors kernels._py exactly: same PRG, same word layout, same outputs.
"""

import numpy as np

from libc.stdint cimport uint8_t, uint64_t

NAME = "native"

cdef uint64_t PARITY = 0x1BD11BDAA9FC1A22u


cdef inline uint64_t rotl(uint64_t x, int r) nogil:
    return (x << r) | (x >> (64 - r))


cdef inline void threefry(uint64_t k0, uint64_t k1, uint64_t c0, uint64_t c1,
                          uint64_t* y0, uint64_t* y1) nogil:
    # 20 rounds unrolled; key injected every 4th round per the 2x64 schedule
    cdef uint64_t ks0 = k0
    cdef uint64_t ks1 = k1
    cdef uint64_t ks2 = k0 ^ k1 ^ PARITY
    cdef uint64_t x0 = c0 + k0
    cdef uint64_t x1 = c1 + k1

    x0 += x1; x1 = rotl(x1, 16) ^ x0
    x0 += x1; x1 = rotl(x1, 42) ^ x0
    x0 += x1; x1 = rotl(x1, 12) ^ x0
    x0 += x1; x1 = rotl(x1, 31) ^ x0
    x0 += ks1; x1 += ks2 + 1u

    x0 += x1; x1 = rotl(x1, 16) ^ x0
    x0 += x1; x1 = rotl(x1, 32) ^ x0
    x0 += x1; x1 = rotl(x1, 24) ^ x0
    x0 += x1; x1 = rotl(x1, 21) ^ x0
    x0 += ks2; x1 += ks0 + 2u

    x0 += x1; x1 = rotl(x1, 16) ^ x0
    x0 += x1; x1 = rotl(x1, 42) ^ x0
    x0 += x1; x1 = rotl(x1, 12) ^ x0
    x0 += x1; x1 = rotl(x1, 31) ^ x0
    x0 += ks0; x1 += ks1 + 3u

    x0 += x1; x1 = rotl(x1, 16) ^ x0
    x0 += x1; x1 = rotl(x1, 32) ^ x0
    x0 += x1; x1 = rotl(x1, 24) ^ x0
    x0 += x1; x1 = rotl(x1, 21) ^ x0
    x0 += ks1; x1 += ks2 + 4u

    x0 += x1; x1 = rotl(x1, 16) ^ x0
    x0 += x1; x1 = rotl(x1, 42) ^ x0
    x0 += x1; x1 = rotl(x1, 12) ^ x0
    x0 += x1; x1 = rotl(x1, 31) ^ x0
    x0 += ks2; x1 += ks0 + 5u

    y0[0] = x0
    y1[0] = x1


def dpf_eval_batch(int party, int lambda_bits, int nbits, object seed0,
                   scw_arr, tcw_arr, object final_cw, xs_lo_arr, xs_hi_arr):
    # level-outer walk over all points at once: the per-row body is
    # branchless and independent across rows, so the compiler can
    # vectorize the cipher chain over adjacent rows
    cdef uint64_t[::1] scw = np.ascontiguousarray(scw_arr, dtype=np.uint64)
    cdef uint8_t[::1] tcw = np.ascontiguousarray(tcw_arr, dtype=np.uint8)
    cdef uint64_t[::1] xs_lo = np.ascontiguousarray(xs_lo_arr, dtype=np.uint64)
    cdef uint64_t[::1] xs_hi = np.ascontiguousarray(xs_hi_arr, dtype=np.uint64)
    cdef Py_ssize_t n = xs_lo.shape[0]
    out_arr = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    seeds_arr = np.full(n, np.uint64(<uint64_t> seed0), dtype=np.uint64)
    ts_arr = np.full(n, np.uint64(party), dtype=np.uint64)
    cdef uint64_t[::1] seeds = seeds_arr
    cdef uint64_t[::1] ts = ts_arr
    cdef uint64_t mask
    if lambda_bits < 64:
        mask = (<uint64_t> 1 << lambda_bits) - 1u
    else:
        mask = <uint64_t> 0xFFFFFFFFFFFFFFFFu
    cdef uint64_t fcw = <uint64_t> final_cw
    cdef Py_ssize_t j
    cdef int i, bit_index
    cdef uint64_t s, tmask, xmask, xb
    cdef uint64_t w0, w1, w2, w3, sl, sr, tl, tr, v
    cdef uint64_t scw_i, tl_cw, tr_cw
    with nogil:
        for i in range(nbits):
            scw_i = scw[i]
            tl_cw = tcw[i] & 1u
            tr_cw = (tcw[i] >> 1) & 1u
            bit_index = nbits - 1 - i
            for j in range(n):
                s = seeds[j]
                tmask = 0u - ts[j]  # all ones when the control bit is set
                threefry(s, 0, 0, 0, &w0, &w1)
                threefry(s, 0, 1, 0, &w2, &w3)
                sl = (w0 & mask) ^ (scw_i & tmask)
                sr = (w1 & mask) ^ (scw_i & tmask)
                tl = (w2 & 1u) ^ (tl_cw & tmask)
                tr = ((w2 >> 1) & 1u) ^ (tr_cw & tmask)
                if bit_index < 64:
                    xb = (xs_lo[j] >> bit_index) & 1u
                else:
                    xb = (xs_hi[j] >> (bit_index - 64)) & 1u
                xmask = 0u - xb
                seeds[j] = (sl & ~xmask) | (sr & xmask)
                ts[j] = (tl & ~xmask) | (tr & xmask)
        for j in range(n):
            v = (seeds[j] + ts[j] * fcw) & mask
            if party == 1:
                v = (0u - v) & mask
            out[j] = v
    return out_arr


def dcf_eval_batch(int party, int lambda_bits, int nbits, object seed0,
                   scw_arr, vcw_arr, tcw_arr, object final_cw, xs_lo_arr, xs_hi_arr):
    cdef uint64_t[::1] scw = np.ascontiguousarray(scw_arr, dtype=np.uint64)
    cdef uint64_t[::1] vcw = np.ascontiguousarray(vcw_arr, dtype=np.uint64)
    cdef uint8_t[::1] tcw = np.ascontiguousarray(tcw_arr, dtype=np.uint8)
    cdef uint64_t[::1] xs_lo = np.ascontiguousarray(xs_lo_arr, dtype=np.uint64)
    cdef uint64_t[::1] xs_hi = np.ascontiguousarray(xs_hi_arr, dtype=np.uint64)
    cdef Py_ssize_t n = xs_lo.shape[0]
    out_arr = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    seeds_arr = np.full(n, np.uint64(<uint64_t> seed0), dtype=np.uint64)
    ts_arr = np.full(n, np.uint64(party), dtype=np.uint64)
    acc_arr = np.zeros(n, dtype=np.uint64)
    cdef uint64_t[::1] seeds = seeds_arr
    cdef uint64_t[::1] ts = ts_arr
    cdef uint64_t[::1] accs = acc_arr
    cdef uint64_t mask
    if lambda_bits < 64:
        mask = (<uint64_t> 1 << lambda_bits) - 1u
    else:
        mask = <uint64_t> 0xFFFFFFFFFFFFFFFFu
    cdef uint64_t fcw = <uint64_t> final_cw
    cdef Py_ssize_t j
    cdef int i, bit_index
    cdef uint64_t s, tmask, xmask, xb, t
    cdef uint64_t w0, w1, w2, w3, w4, w5, sl, sr, vl, vr, tl, tr, step, acc
    cdef uint64_t scw_i, vcw_i, tl_cw, tr_cw
    with nogil:
        for i in range(nbits):
            scw_i = scw[i]
            vcw_i = vcw[i]
            tl_cw = tcw[i] & 1u
            tr_cw = (tcw[i] >> 1) & 1u
            bit_index = nbits - 1 - i
            for j in range(n):
                s = seeds[j]
                t = ts[j]
                tmask = 0u - t
                threefry(s, 0, 0, 0, &w0, &w1)
                threefry(s, 0, 1, 0, &w2, &w3)
                threefry(s, 0, 2, 0, &w4, &w5)
                sl = (w0 & mask) ^ (scw_i & tmask)
                sr = (w1 & mask) ^ (scw_i & tmask)
                vl = w2 & mask
                vr = w3 & mask
                tl = (w4 & 1u) ^ (tl_cw & tmask)
                tr = ((w4 >> 1) & 1u) ^ (tr_cw & tmask)
                if bit_index < 64:
                    xb = (xs_lo[j] >> bit_index) & 1u
                else:
                    xb = (xs_hi[j] >> (bit_index - 64)) & 1u
                xmask = 0u - xb
                step = ((vl & ~xmask) | (vr & xmask)) + (vcw_i & tmask)
                accs[j] = (accs[j] + step) & mask
                seeds[j] = (sl & ~xmask) | (sr & xmask)
                ts[j] = (tl & ~xmask) | (tr & xmask)
        for j in range(n):
            acc = (accs[j] + seeds[j] + ts[j] * fcw) & mask
            if party == 1:
                acc = (0u - acc) & mask
            out[j] = acc
    return out_arr


def masked_bit_sum(evals_arr, values_arr, int k, int lambda_bits):
    cdef uint64_t[::1] evals = np.ascontiguousarray(evals_arr, dtype=np.uint64)
    cdef uint64_t[::1] values = np.ascontiguousarray(values_arr, dtype=np.uint64)
    cdef Py_ssize_t n = evals.shape[0]
    cdef uint64_t mask
    if lambda_bits < 64:
        mask = (<uint64_t> 1 << lambda_bits) - 1u
    else:
        mask = <uint64_t> 0xFFFFFFFFFFFFFFFFu
    cdef uint64_t total = 0
    cdef Py_ssize_t j
    with nogil:
        for j in range(n):
            if (values[j] >> k) & 1u:
                total = total + evals[j]
    return int(total & mask)


def gather(table, xs_lo):
    return np.asarray(table)[np.asarray(xs_lo)]
