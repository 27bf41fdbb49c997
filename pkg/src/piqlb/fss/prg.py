"""Length-doubling PRG used by the tree-based share backend.

The generator is Threefry-2x64 (20 rounds) run in counter mode with the
node seed as the cipher key. The choice is a build-time constant: every
party must expand seeds identically, so the outputs are pinned by a hex
test-vector file and the compiled/numpy/scalar implementations are all
checked against it.

Word layout per expansion (W = ceil(lambda/64) words per seed):

    point nodes:    [s_left (W)] [s_right (W)] [control word]
    interval nodes: [s_left (W)] [s_right (W)] [v_left (W)] [v_right (W)] [control word]

Control bits are taken from bits 0 and 1 of the control word. Child seeds
and value words are truncated to lambda bits.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
_PARITY = 0x1BD11BDAA9FC1A22
_ROT = (16, 42, 12, 31, 16, 32, 24, 21)


def threefry2x64(k0: int, k1: int, c0: int, c1: int) -> tuple[int, int]:
    """One 20-round Threefry-2x64 block: (key, counter) -> two 64-bit words."""
    ks = (k0, k1, k0 ^ k1 ^ _PARITY)
    x0 = (c0 + k0) & MASK64
    x1 = (c1 + k1) & MASK64
    for r in range(20):
        x0 = (x0 + x1) & MASK64
        rot = _ROT[r % 8]
        x1 = (((x1 << rot) | (x1 >> (64 - rot))) & MASK64) ^ x0
        if (r + 1) % 4 == 0:
            s = (r + 1) // 4
            x0 = (x0 + ks[s % 3]) & MASK64
            x1 = (x1 + ks[(s + 1) % 3] + s) & MASK64
    return x0, x1


def words_per_seed(lambda_bits: int) -> int:
    return (lambda_bits + 63) // 64


def prg_words(seed: int, count: int) -> list[int]:
    """First ``count`` 64-bit words of the keystream for ``seed``."""
    k0 = seed & MASK64
    k1 = (seed >> 64) & MASK64
    out: list[int] = []
    for block in range((count + 1) // 2):
        w0, w1 = threefry2x64(k0, k1, block, 0)
        out.append(w0)
        out.append(w1)
    return out[:count]


def _join(words: list[int], lambda_bits: int) -> int:
    v = 0
    for i, w in enumerate(words):
        v |= w << (64 * i)
    return v & ((1 << lambda_bits) - 1)


def expand_point(seed: int, lambda_bits: int) -> tuple[int, int, int, int]:
    """seed -> (s_left, t_left, s_right, t_right)."""
    w = words_per_seed(lambda_bits)
    ws = prg_words(seed, 2 * w + 1)
    ctrl = ws[2 * w]
    return (_join(ws[0:w], lambda_bits), ctrl & 1,
            _join(ws[w:2 * w], lambda_bits), (ctrl >> 1) & 1)


def expand_interval(seed: int, lambda_bits: int) -> tuple[int, int, int, int, int, int]:
    """seed -> (s_left, v_left, t_left, s_right, v_right, t_right)."""
    w = words_per_seed(lambda_bits)
    ws = prg_words(seed, 4 * w + 1)
    ctrl = ws[4 * w]
    return (_join(ws[0:w], lambda_bits), _join(ws[2 * w:3 * w], lambda_bits), ctrl & 1,
            _join(ws[w:2 * w], lambda_bits), _join(ws[3 * w:4 * w], lambda_bits), (ctrl >> 1) & 1)
