"""Additive truth-table sharing: works for any party count.

Party i < p holds a uniformly random table; the last party holds the
original function minus the sum of the others. Exact security (each
strict subset of tables is independent of the function) makes this
backend the correctness and confidentiality oracle for the tree backend.
"""

from __future__ import annotations

import random

import numpy as np

from ..errors import InputError, ResourceLimitError
from .functions import SecretFunction, truth_table

DEFAULT_MAX_DOMAIN_BITS = 24


def gen_tables(f: SecretFunction, p: int, lambda_bits: int, rng: random.Random,
               max_domain_bits: int = DEFAULT_MAX_DOMAIN_BITS) -> list[list[int]]:
    if f.domain_bits > max_domain_bits:
        raise ResourceLimitError(
            f"table backend capped at {max_domain_bits} domain bits, "
            f"got {f.domain_bits}")
    size = 1 << f.domain_bits
    mask = (1 << lambda_bits) - 1
    tables = [[rng.getrandbits(lambda_bits) for _ in range(size)]
              for _ in range(p - 1)]
    last = truth_table(f, lambda_bits)
    for tbl in tables:
        for x in range(size):
            last[x] = (last[x] - tbl[x]) & mask
    tables.append(last)
    return tables


def eval_table(table: list[int], domain_bits: int, x: int) -> int:
    if not 0 <= x < (1 << domain_bits):
        raise InputError(f"input {x} outside {domain_bits}-bit domain")
    return table[x]


def eval_table_batch(table: list[int], xs: np.ndarray) -> np.ndarray:
    """Vectorized lookups; only valid for lambda_bits <= 64."""
    arr = np.asarray(table, dtype=np.uint64)
    return arr[xs]
