"""Client side of the protocol: session setup, verification, decoding.

Setup turns the query's condition into a secret function, splits it into
shares, and picks the verification element y — a uniformly random nonzero
group element. Providers never see y: an honest run makes every bit
position sum to exactly 0 or y across parties, so the client can read off
the result bits while any additive tampering lands outside {0, y} with
probability 1 - 2/2^lambda per corrupted position.

Zero is excluded from y because it would make both branches of the bit
test identical; the resulting VALUE(0)-vs-no-match ambiguity is instead
surfaced through ``zero_or_absent``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

from .engine import ShareOutput
from .errors import ConfigError, ProtocolError
from .fss.functions import IntervalFunction, PointFunction, SumFunction
from .fss.shares import FunctionShare, fss_gen
from .group import SUPPORTED_LAMBDA, sample_nonzero, system_rng
from .query.ast import (AggType, PrivateQuery, Query, Range, SecretSpec,
                        Single, And, Or)
from .query.derive import derive_private_query
from .query.encode import Schema


@dataclass(frozen=True, slots=True)
class QuerySession:
    """Everything the client must remember between dispatch and verify.

    ``check_value`` is y; it never leaves the client."""

    query: Query
    private_query: PrivateQuery
    secret: SecretSpec
    check_value: int
    lambda_bits: int
    shares: tuple[FunctionShare, ...]

    @property
    def parties(self) -> int:
        return len(self.shares)


@dataclass(frozen=True, slots=True)
class QueryResult:
    """Either a verified value or an integrity abort."""

    ok: bool
    value: Optional[Union[int, Fraction]] = None
    zero_or_absent: bool = False
    abort_position: Optional[int] = None
    abort_observed: Optional[int] = None

    @classmethod
    def aborted(cls, position: int, observed: int) -> "QueryResult":
        return cls(ok=False, abort_position=position, abort_observed=observed)

    def __str__(self) -> str:
        if not self.ok:
            return (f"ABORT: bit {self.abort_position} reconstructed to an "
                    f"unexpected group element")
        suffix = " (zero-or-absent)" if self.zero_or_absent else ""
        return f"VALUE({self.value}){suffix}"


def _secret_function(private: PrivateQuery, secret: SecretSpec,
                     check_value: int):
    n = private.domain_bits
    cond = private.condition
    if isinstance(cond, (Single, And)):
        (target,) = secret.point_inputs
        return PointFunction(n, target, check_value)
    if isinstance(cond, Range):
        lo, hi = secret.range_bounds
        return IntervalFunction(n, lo, hi, check_value)
    if isinstance(cond, Or):
        parts = tuple(PointFunction(n, t, check_value)
                      for t in secret.point_inputs)
        return SumFunction(parts)
    raise ConfigError(f"unsupported condition {type(cond).__name__}")


def prepare(query: Query, secret_columns: Iterable[str], schema: Schema,
            parties: int = 2, lambda_bits: int = 64, backend: str = "tree",
            result_bits: int = 64, avg_scale: int = 1,
            rng: random.Random | None = None) -> QuerySession:
    """Build the private query and the per-provider shares."""
    if lambda_bits not in SUPPORTED_LAMBDA:
        raise ConfigError(f"lambda_bits must be one of {SUPPORTED_LAMBDA}")
    if parties < 2:
        raise ConfigError("need at least two providers")
    if rng is None:
        rng = system_rng()
    private, secret = derive_private_query(query, secret_columns, schema,
                                           result_bits=result_bits,
                                           avg_scale=avg_scale)
    y = sample_nonzero(lambda_bits, rng)
    f = _secret_function(private, secret, y)
    shares = fss_gen(lambda_bits, f, parties, backend, rng)
    return QuerySession(query, private, secret, y, lambda_bits, tuple(shares))


def decode_result(bits: list[int], agg_type: AggType,
                  scale: int = 1) -> Union[int, Fraction]:
    """LSB-first bit vector to value; averages divide by the scale."""
    raw = 0
    for k, b in enumerate(bits):
        raw |= (b & 1) << k
    if agg_type is AggType.AVG and scale != 1:
        return Fraction(raw, scale)
    return raw


def verify(session: QuerySession, outputs: list[ShareOutput]) -> QueryResult:
    """Per-bit reconstruction: sum to 0 -> bit 0, sum to y -> bit 1,
    anything else -> abort naming the bit position."""
    expected = session.private_query.result_bits
    if len(outputs) != session.parties:
        raise ProtocolError(f"expected {session.parties} outputs, got "
                            f"{len(outputs)}")
    seen = sorted(o.party_index for o in outputs)
    if seen != list(range(1, session.parties + 1)):
        raise ProtocolError(f"party indices {seen} do not cover "
                            f"1..{session.parties}")
    for o in outputs:
        if o.lambda_bits != session.lambda_bits:
            raise ProtocolError(f"party {o.party_index} answered in "
                                f"Z_2^{o.lambda_bits}, expected "
                                f"Z_2^{session.lambda_bits}")
        if len(o.values) != expected:
            raise ProtocolError(f"party {o.party_index} returned "
                                f"{len(o.values)} elements, expected "
                                f"{expected}")
    mod = 1 << session.lambda_bits
    bits = []
    for position in range(expected):
        total = sum(o.values[position] for o in outputs) % mod
        if total == 0:
            bits.append(0)
        elif total == session.check_value:
            bits.append(1)
        else:
            return QueryResult.aborted(position, total)
    value = decode_result(bits, session.query.agg_type,
                          session.private_query.avg_scale)
    return QueryResult(ok=True, value=value,
                       zero_or_absent=not any(bits))


def run_local(session: QuerySession, ledgers: list,
              limits=None) -> QueryResult:
    """Evaluate all shares against in-memory replicas and verify. Test and
    benchmark convenience; the transport layer is the deployed path."""
    from .engine import evaluate

    if len(ledgers) != session.parties:
        raise ProtocolError(f"need {session.parties} replicas")
    outputs = [evaluate(share, ledger, session.private_query, limits)
               for share, ledger in zip(session.shares, ledgers)]
    return verify(session, outputs)
