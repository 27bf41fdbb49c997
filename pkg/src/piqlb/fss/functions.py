"""Secret functions the sharing layer can split.

Three shapes: a point function (one nonzero input), an interval function
(nonzero on a closed range), and a disjoint sum of those, all mapping
n-bit inputs into Z_{2^lambda}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..errors import ConfigError, InputError

MAX_DOMAIN_BITS = 128


def _check_domain(domain_bits: int) -> None:
    if not 1 <= domain_bits <= MAX_DOMAIN_BITS:
        raise ConfigError(f"domain_bits must be in 1..{MAX_DOMAIN_BITS}, got {domain_bits}")


def _check_input(x: int, domain_bits: int) -> None:
    if not 0 <= x < (1 << domain_bits):
        raise InputError(f"input {x} outside {domain_bits}-bit domain")


@dataclass(frozen=True, slots=True)
class PointFunction:
    """f(x) = y when x == target, 0 elsewhere."""

    domain_bits: int
    target: int
    output: int

    def __post_init__(self):
        _check_domain(self.domain_bits)
        if not 0 <= self.target < (1 << self.domain_bits):
            raise ConfigError(f"point target {self.target} outside "
                              f"{self.domain_bits}-bit domain")

    def value_at(self, x: int) -> int:
        _check_input(x, self.domain_bits)
        return self.output if x == self.target else 0


@dataclass(frozen=True, slots=True)
class IntervalFunction:
    """f(x) = y when lo <= x <= hi (closed), 0 elsewhere."""

    domain_bits: int
    lo: int
    hi: int
    output: int

    def __post_init__(self):
        _check_domain(self.domain_bits)
        top = 1 << self.domain_bits
        if not (0 <= self.lo <= self.hi < top):
            raise ConfigError(f"bad interval [{self.lo}, {self.hi}] for "
                              f"{self.domain_bits}-bit domain")

    def value_at(self, x: int) -> int:
        _check_input(x, self.domain_bits)
        return self.output if self.lo <= x <= self.hi else 0


@dataclass(frozen=True, slots=True)
class SumFunction:
    """Sum of pairwise-disjoint point/interval parts sharing one output.

    Disjointness keeps f's image in {0, y}, which the per-bit verification
    step depends on.
    """

    parts: tuple[Union[PointFunction, IntervalFunction], ...]

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ConfigError("sum function needs at least two parts")
        first = self.parts[0]
        spans = []
        for p in self.parts:
            if p.domain_bits != first.domain_bits:
                raise ConfigError("sum parts must share domain_bits")
            if p.output != first.output:
                raise ConfigError("sum parts must share the same output value")
            if isinstance(p, PointFunction):
                spans.append((p.target, p.target))
            else:
                spans.append((p.lo, p.hi))
        spans.sort()
        for (lo1, hi1), (lo2, _) in zip(spans, spans[1:]):
            if lo2 <= hi1:
                raise ConfigError(f"sum parts overlap near input {lo2}")

    @property
    def domain_bits(self) -> int:
        return self.parts[0].domain_bits

    @property
    def output(self) -> int:
        return self.parts[0].output

    def value_at(self, x: int) -> int:
        return sum(p.value_at(x) for p in self.parts)


SecretFunction = Union[PointFunction, IntervalFunction, SumFunction]


def truth_table(f: SecretFunction, lambda_bits: int) -> list[int]:
    """Full table of f over its domain, reduced mod 2^lambda."""
    m = (1 << lambda_bits) - 1
    return [f.value_at(x) & m for x in range(1 << f.domain_bits)]
