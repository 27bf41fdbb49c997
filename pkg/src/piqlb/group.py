"""Arithmetic in the additive group Z_{2^lambda}.

Every share, evaluation output and verification element lives in this group.
The modulus is a power of two so addition is plain wrapping machine
arithmetic; ``lambda_bits`` is the security parameter (default 64, byte
aligned so elements serialize to ``lambda_bits / 8`` bytes).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import ConfigError

DEFAULT_LAMBDA = 64

#: lambda values accepted by configuration. Production deployments use
#: 32/64/128; the small sizes exist for exhaustive and statistical tests.
SUPPORTED_LAMBDA = (8, 16, 24, 32, 48, 64, 128)


def _check_lambda(bits: int) -> None:
    if bits not in SUPPORTED_LAMBDA:
        raise ConfigError(f"unsupported group size 2^{bits}; "
                          f"lambda_bits must be one of {SUPPORTED_LAMBDA}")


@dataclass(frozen=True, slots=True)
class GroupElement:
    """An element of Z_{2^bits}, reduced on construction."""

    value: int
    bits: int = DEFAULT_LAMBDA

    def __post_init__(self):
        _check_lambda(self.bits)
        object.__setattr__(self, "value", self.value & ((1 << self.bits) - 1))

    @property
    def byte_width(self) -> int:
        return self.bits // 8

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(self.byte_width, "little")

    @classmethod
    def from_bytes(cls, data: bytes, bits: int) -> "GroupElement":
        return cls(int.from_bytes(data, "little"), bits)


def group_add(a: GroupElement, b: GroupElement) -> GroupElement:
    if a.bits != b.bits:
        raise ConfigError(f"group size mismatch: 2^{a.bits} vs 2^{b.bits}")
    return GroupElement(a.value + b.value, a.bits)


def group_neg(a: GroupElement) -> GroupElement:
    return GroupElement(-a.value, a.bits)


def group_scale_bit(a: GroupElement, bit: int) -> GroupElement:
    """Multiply by a single bit (the only scalar the protocol needs)."""
    if bit not in (0, 1):
        raise ConfigError(f"scale factor must be a bit, got {bit}")
    return GroupElement(a.value * bit, a.bits)


def group_sum(elements, bits: int) -> GroupElement:
    total = 0
    for e in elements:
        if e.bits != bits:
            raise ConfigError(f"group size mismatch: 2^{e.bits} vs 2^{bits}")
        total += e.value
    return GroupElement(total, bits)


def mask(bits: int) -> int:
    return (1 << bits) - 1


def sample(bits: int, rng: random.Random) -> int:
    """Uniform element of Z_{2^bits} as a plain int."""
    _check_lambda(bits)
    return rng.getrandbits(bits)


def sample_nonzero(bits: int, rng: random.Random) -> int:
    while True:
        v = sample(bits, rng)
        if v:
            return v


def system_rng() -> random.Random:
    """Cryptographically secure randomness source (os.urandom backed)."""
    return random.SystemRandom()
