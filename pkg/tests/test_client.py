"""Session setup, per-bit verification, result decoding."""

from fractions import Fraction

import pytest

from piqlb.client import decode_result, prepare, run_local, verify
from piqlb.engine import ShareOutput
from piqlb.errors import ProtocolError, SchemaError
from piqlb.fixtures import FIXTURE_QUERIES, fixture_ledger
from piqlb.query import AggType, parse_query


def make_session(schema, rng, name="q1", secrets=("Item",), result_bits=8,
                 lambda_bits=16, backend="naive", parties=2):
    q = parse_query(FIXTURE_QUERIES[name])
    return prepare(q, list(secrets), schema, parties=parties,
                   lambda_bits=lambda_bits, backend=backend,
                   result_bits=result_bits, rng=rng)


def outputs_for(session, bits):
    """Fabricate honest-looking outputs whose sums spell the given bits."""
    y = session.check_value
    mod = 1 << session.lambda_bits
    import random
    r = random.Random(7)
    parts = []
    for index in range(1, session.parties + 1):
        parts.append([r.randrange(mod) for _ in bits])
    for k, bit in enumerate(bits):
        want = y if bit else 0
        correction = (want - sum(p[k] for p in parts)) % mod
        parts[-1][k] = (parts[-1][k] + correction) % mod
    return [ShareOutput(i + 1, session.lambda_bits, tuple(p))
            for i, p in enumerate(parts)]


def test_all_zero_outputs_decode_to_zero(schema, rng):
    session = make_session(schema, rng)
    outs = [ShareOutput(i + 1, 16, (0,) * 8) for i in range(2)]
    result = verify(session, outs)
    assert result.ok and result.value == 0 and result.zero_or_absent


def test_honest_walkthrough_value(schema, ledger, rng):
    session = make_session(schema, rng)
    result = run_local(session, [ledger, fixture_ledger()])
    assert result.ok and result.value == 9 and not result.zero_or_absent


def test_fabricated_bits_decode(schema, rng):
    session = make_session(schema, rng)
    result = verify(session, outputs_for(session, [1, 0, 0, 1, 0, 0, 0, 0]))
    assert result.ok and result.value == 9


def test_delta_at_bit_three_aborts(schema, rng):
    session = make_session(schema, rng, lambda_bits=64)
    outs = outputs_for(session, [1, 0, 0, 1, 0, 0, 0, 0])
    tampered = list(outs[0].values)
    tampered[3] = (tampered[3] + 5) % (1 << 64)
    outs[0] = ShareOutput(1, 64, tuple(tampered))
    result = verify(session, outs)
    assert not result.ok
    assert result.abort_position == 3
    assert "ABORT" in str(result)


def test_length_mismatch_is_protocol_error(schema, rng):
    session = make_session(schema, rng)
    outs = outputs_for(session, [0] * 8)
    outs[0] = ShareOutput(1, 16, outs[0].values[:5])
    with pytest.raises(ProtocolError, match="elements"):
        verify(session, outs)


def test_missing_party_is_protocol_error(schema, rng):
    session = make_session(schema, rng)
    outs = outputs_for(session, [0] * 8)
    with pytest.raises(ProtocolError):
        verify(session, outs[:1])
    outs2 = outputs_for(session, [0] * 8)
    outs2[1] = ShareOutput(1, 16, outs2[1].values)  # duplicate index
    with pytest.raises(ProtocolError, match="indices"):
        verify(session, outs2)


def test_wrong_group_size_is_protocol_error(schema, rng):
    session = make_session(schema, rng)
    outs = outputs_for(session, [0] * 8)
    outs[0] = ShareOutput(1, 64, outs[0].values)
    with pytest.raises(ProtocolError, match="Z_2"):
        verify(session, outs)


def test_decode_lsb_first():
    assert decode_result([1, 0, 0, 1, 0, 0, 0, 0], AggType.SUM) == 9
    assert decode_result([1] * 8, AggType.SUM) == 255
    assert decode_result([0] * 4, AggType.COUNT) == 0


def test_decode_avg_scale():
    bits = [(450 >> k) & 1 for k in range(16)]
    value = decode_result(bits, AggType.AVG, scale=100)
    assert value == Fraction(9, 2)
    assert float(value) == 4.5


def test_check_value_never_zero(schema, rng):
    for _ in range(50):
        session = make_session(schema, rng, lambda_bits=8)
        assert session.check_value != 0


def test_secret_function_shapes(schema, rng):
    s1 = make_session(schema, rng, "q1", ("Item",))
    assert isinstance(s1.shares[0].key.table if hasattr(s1.shares[0].key, "table")
                      else None, tuple)
    from piqlb.query import Or, Range
    q_or = parse_query("SELECT SUM(Price) FROM (1/06/2022) < blk_range_cond "
                       "< (4/06/2022) WHERE Item = 2 OR Item = 5")
    s_or = prepare(q_or, ["Item"], schema, lambda_bits=16, backend="naive",
                   result_bits=8, rng=rng)
    assert isinstance(s_or.private_query.condition, Or)
    q_rng = parse_query(FIXTURE_QUERIES["q2"])
    s_rng = prepare(q_rng, ["Price"], schema, lambda_bits=16,
                    backend="naive", result_bits=8, rng=rng)
    assert isinstance(s_rng.private_query.condition, Range)


def test_prepare_rejects_bad_secret(schema, rng):
    q = parse_query(FIXTURE_QUERIES["q1"])
    with pytest.raises(SchemaError):
        prepare(q, ["Price"], schema, rng=rng)


def test_or_single_present_value(schema, ledger, rng):
    # one of the two OR values exists in the window: exact group aggregate
    q = parse_query("SELECT SUM(Price) FROM (1/06/2022) < blk_range_cond < "
                    "(4/06/2022) WHERE Item = 3 OR Item = 9")
    session = prepare(q, ["Item"], schema, lambda_bits=64, backend="tree",
                      result_bits=8, rng=rng)
    result = run_local(session, [ledger, fixture_ledger()])
    assert result.ok and result.value == 7


def test_or_over_string_column(schema, ledger, rng):
    q = parse_query("SELECT SUM(Price) FROM (1/06/2022) < blk_range_cond < "
                    "(4/06/2022) WHERE Color = 'green' OR Color = 'black'")
    session = prepare(q, ["Color"], schema, lambda_bits=64, backend="tree",
                      result_bits=8, rng=rng)
    result = run_local(session, [ledger, fixture_ledger()])
    assert result.ok and result.value == 0 and result.zero_or_absent
    q2 = parse_query("SELECT SUM(Price) FROM (1/06/2022) < blk_range_cond < "
                     "(4/06/2022) WHERE Color = 'blue' OR Color = 'green'")
    session = prepare(q2, ["Color"], schema, lambda_bits=64, backend="tree",
                      result_bits=8, rng=rng)
    result = run_local(session, [ledger, fixture_ledger()])
    assert result.ok and result.value == 5  # only the blue group exists


def test_three_column_conjunction(schema, ledger, rng):
    q = parse_query("SELECT SUM(Price) FROM (1/06/2022) < blk_range_cond < "
                    "(4/06/2022) WHERE Item = 2 AND Price = 4 AND "
                    "Color = 'red'")
    session = prepare(q, ["Item", "Price", "Color"], schema, lambda_bits=64,
                      backend="tree", result_bits=8, rng=rng)
    assert session.private_query.domain_bits == 20
    result = run_local(session, [ledger, fixture_ledger()])
    assert result.ok and result.value == 4


def test_absent_secret_returns_zero_flagged(schema, ledger, rng):
    q = parse_query("SELECT SUM(Price) FROM (1/06/2022) < blk_range_cond < "
                    "(4/06/2022) WHERE Item = 9")
    session = prepare(q, ["Item"], schema, lambda_bits=64, backend="tree",
                      result_bits=8, rng=rng)
    result = run_local(session, [ledger, fixture_ledger()])
    assert result.ok and result.value == 0 and result.zero_or_absent
