"""Query text grammar, parser and printer.

EBNF (keywords case-insensitive, ``∧``/``∨`` accepted for AND/OR)::

    query   = "SELECT" type "(" column ")"
              "FROM" datetime "<" "blk_range_cond" "<" datetime
              "WHERE" condition ;
    type    = "SUM" | "COUNT" | "AVG" | "MIN" | "MAX" ;
    condition = leaf { "AND" leaf } | leaf { "OR" leaf } | leaf ;
    leaf    = column "=" value
            | number lt column lt number ;        (* one range leaf max *)
    lt      = "<" | "<=" ;
    value   = number | quoted-string | bare-word ;
    datetime = [ "(" ] date-or-epoch [ ")" ] ;
    date-or-epoch = D "/" MM "/" YYYY | ISO-8601 date or datetime | integer ;

Strict range bounds are closed immediately: ``4 < x < 10`` parses to the
closed interval [5, 9]. The block window keeps its literal endpoints; block
selection treats them as a closed interval (see ledger.select_blocks).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime, timezone
from typing import Optional

from ..errors import ParseError
from .ast import AggType, And, Condition, Or, Query, Range, Single, Value

_KEYWORDS = {"SELECT", "FROM", "WHERE", "AND", "OR", "BLK_RANGE_COND",
             "SUM", "COUNT", "AVG", "MIN", "MAX"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<date>\d{1,2}/\d{1,2}/\d{4}
      |\d{4}-\d{2}-\d{2}(?:[T ]\d{2}:\d{2}:\d{2})?)
  | (?P<number>\d+)
  | (?P<string>'[^']*'|"[^"]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<le><=|≤)
  | (?P<sym>[()<>=,])
  | (?P<logic>[∧∨])
""", re.VERBOSE)


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str  # date number string ident le sym logic end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


def parse_datetime(text: str) -> int:
    """Accepts D/MM/YYYY, ISO-8601 date/datetime, or epoch seconds."""
    text = text.strip()
    if re.fullmatch(r"\d+", text):
        return int(text)
    m = re.fullmatch(r"(\d{1,2})/(\d{1,2})/(\d{4})", text)
    if m:
        d, mo, y = (int(g) for g in m.groups())
        try:
            return int(datetime(y, mo, d, tzinfo=timezone.utc).timestamp())
        except ValueError as exc:
            raise ParseError(f"bad date {text!r}: {exc}", 0) from exc
    try:
        if "T" in text or " " in text:
            dt = datetime.fromisoformat(text)
        else:
            d0 = date.fromisoformat(text)
            dt = datetime(d0.year, d0.month, d0.day)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    except ValueError as exc:
        raise ParseError(f"bad date {text!r}: {exc}", 0) from exc


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%S")


@dataclass(frozen=True, slots=True)
class QueryLimits:
    """Client/server window policy. ``max_window_seconds`` bounds t2 - t1 at
    parse time when set; ``max_blocks`` bounds the selected block count and
    is enforced where a ledger is present."""

    max_window_seconds: Optional[int] = None
    max_blocks: int = 4096


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.cur
        self.i += 1
        return tok

    def fail(self, *expected: str):
        got = self.cur.text or "end of input"
        raise ParseError(f"unexpected {got!r}", self.cur.pos, expected)

    def expect_sym(self, sym: str) -> _Token:
        if self.cur.kind in ("sym", "le") and self.cur.text == sym:
            return self.advance()
        self.fail(sym)

    def expect_keyword(self, word: str) -> _Token:
        if self.cur.kind == "ident" and self.cur.text.upper() == word:
            return self.advance()
        self.fail(word)

    def ident(self, what: str) -> str:
        if self.cur.kind == "ident" and self.cur.text.upper() not in _KEYWORDS:
            return self.advance().text
        self.fail(what)

    # -- pieces --------------------------------------------------------

    def agg_type(self) -> AggType:
        if self.cur.kind == "ident":
            try:
                agg = AggType(self.cur.text.upper())
            except ValueError:
                self.fail("SUM", "COUNT", "AVG", "MIN", "MAX")
            self.advance()
            return agg
        self.fail("SUM", "COUNT", "AVG", "MIN", "MAX")

    def window_endpoint(self) -> int:
        wrapped = False
        if self.cur.kind == "sym" and self.cur.text == "(":
            wrapped = True
            self.advance()
        if self.cur.kind not in ("date", "number"):
            self.fail("date", "epoch seconds")
        tok = self.advance()
        ts = parse_datetime(tok.text)
        if wrapped:
            self.expect_sym(")")
        return ts

    def value(self) -> Value:
        tok = self.cur
        if tok.kind == "number":
            self.advance()
            return int(tok.text)
        if tok.kind == "string":
            self.advance()
            return tok.text[1:-1]
        if tok.kind == "ident" and tok.text.upper() not in _KEYWORDS:
            self.advance()
            return tok.text
        self.fail("value")

    def comparator(self) -> bool:
        """Returns True when the bound is inclusive (<=)."""
        if self.cur.kind == "le":
            self.advance()
            return True
        if self.cur.kind == "sym" and self.cur.text == "<":
            self.advance()
            return False
        self.fail("<", "<=")

    def leaf(self):
        if self.cur.kind == "number":
            lo_tok = self.advance()
            lo_inc = self.comparator()
            column = self.ident("column name")
            hi_inc = self.comparator()
            hi_tok = self.cur
            if hi_tok.kind != "number":
                self.fail("number")
            self.advance()
            lo = int(lo_tok.text) + (0 if lo_inc else 1)
            hi = int(hi_tok.text) - (0 if hi_inc else 1)
            if lo > hi:
                raise ParseError(
                    f"range on {column} is empty after closing strict bounds",
                    lo_tok.pos)
            return Range(column, lo, hi)
        column = self.ident("column name or range bound")
        self.expect_sym("=")
        return Single(column, self.value())

    def condition(self) -> Condition:
        leaves = [self.leaf()]
        connective = None
        while True:
            tok = self.cur
            if tok.kind == "ident" and tok.text.upper() in ("AND", "OR"):
                word = tok.text.upper()
            elif tok.kind == "logic":
                word = "AND" if tok.text == "∧" else "OR"
            else:
                break
            if connective is None:
                connective = word
            elif connective != word:
                raise ParseError("mixing AND and OR is not supported",
                                 tok.pos)
            self.advance()
            leaves.append(self.leaf())

        ranges = [l for l in leaves if isinstance(l, Range)]
        if len(ranges) > 1:
            raise ParseError("more than one range condition", self.cur.pos)
        if len(leaves) == 1:
            return leaves[0]
        if ranges:
            raise ParseError("a range condition cannot be combined with "
                             "AND/OR", self.cur.pos)
        if connective == "AND":
            return And(tuple(leaves))
        return Or(tuple(leaves))


def parse_query(text: str, limits: QueryLimits | None = None) -> Query:
    """Parse and validate query text; raises ParseError with position."""
    p = _Parser(_tokenize(text))
    p.expect_keyword("SELECT")
    agg = p.agg_type()
    p.expect_sym("(")
    agg_column = p.ident("column name")
    p.expect_sym(")")
    p.expect_keyword("FROM")
    t_start = p.window_endpoint()
    p.expect_sym("<")
    p.expect_keyword("BLK_RANGE_COND")
    p.expect_sym("<")
    t_end = p.window_endpoint()
    p.expect_keyword("WHERE")
    cond = p.condition()
    if p.cur.kind != "end":
        p.fail("end of query")

    if t_start >= t_end:
        raise ParseError(f"window start {format_timestamp(t_start)} is not "
                         f"before end {format_timestamp(t_end)}", 0)
    if limits and limits.max_window_seconds is not None:
        if t_end - t_start > limits.max_window_seconds:
            raise ParseError(
                f"window of {t_end - t_start}s exceeds the configured "
                f"threshold of {limits.max_window_seconds}s", 0)
    return Query(agg, agg_column, t_start, t_end, cond)


# ---------------------------------------------------------------------------

def _value_text(v: Optional[Value]) -> str:
    if v is None:
        return "?"
    if isinstance(v, int):
        return str(v)
    return "'" + v + "'"


def _leaf_text(leaf) -> str:
    if isinstance(leaf, Single):
        return f"{leaf.column} = {_value_text(leaf.value)}"
    lo = "?" if leaf.lo is None else str(leaf.lo)
    hi = "?" if leaf.hi is None else str(leaf.hi)
    return f"{lo} <= {leaf.column} <= {hi}"


def condition_to_text(cond: Condition) -> str:
    if isinstance(cond, And):
        return " AND ".join(_leaf_text(l) for l in cond.parts)
    if isinstance(cond, Or):
        return " OR ".join(_leaf_text(l) for l in cond.parts)
    return _leaf_text(cond)


def query_to_text(q) -> str:
    """Canonical text form; reparsing yields a structurally equal query."""
    return (f"SELECT {q.agg_type.value}({q.agg_column}) "
            f"FROM ({format_timestamp(q.t_start)}) < blk_range_cond < "
            f"({format_timestamp(q.t_end)}) "
            f"WHERE {condition_to_text(q.condition)}")
