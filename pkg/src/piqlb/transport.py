"""Wire protocol and process plumbing.

Framing is a 4-byte little-endian length prefix over a reliable stream.
The request envelope carries the private query and one serialized share;
the response carries either exactly ``result_bits`` fixed-width group
elements — a size that depends only on (result_bits, lambda) and never on
the ledger — or a typed error. Channel secrecy is out of scope here: run
the stream over TLS at deployment if the network is hostile.

Request envelope (little-endian)::

    u8  version (1)
    16B request id (random, echoed back)
    u8  lambda bits
    u16 result bits
    u32 private-query length | canonical private-query JSON
    u32 share length         | canonical share bytes

Response envelope::

    u8  version (1)
    16B request id (echoed)
    u8  party index
    u8  status (0 = ok, else error code)
    ok:    u16 element count | u8 element width | count * width value bytes
    error: u16 code | u32 message length | utf-8 message

The fault policy hooks model malicious providers for tests and benchmarks:
honest, add-delta (corrupt one response element), random-output, tampered
replica, or answering a substituted query. At most p-1 providers may run
a non-honest policy in any harness.
"""

from __future__ import annotations

import random
import socket
import socketserver
import threading
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .client import QueryResult, QuerySession, verify
from .engine import ShareOutput, evaluate
from .errors import DecodeError, ProtocolError
from .fss.shares import deserialize_share
from .group import SUPPORTED_LAMBDA
from .ledger import Ledger
from .query.ast import private_query_from_bytes, private_query_to_bytes
from .query.parse import QueryLimits

WIRE_VERSION = 1
REQUEST_ID_LEN = 16
MAX_FRAME = 16 * 1024 * 1024

STATUS_OK = 0
ERR_DECODE = 1
ERR_VERSION = 2
ERR_QUERY = 3
ERR_EVAL = 4
ERR_INTERNAL = 5
ERR_LIMIT = 6

_ERROR_NAMES = {ERR_DECODE: "DECODE", ERR_VERSION: "VERSION",
                ERR_QUERY: "QUERY", ERR_EVAL: "EVAL",
                ERR_INTERNAL: "INTERNAL", ERR_LIMIT: "LIMIT"}


# --- envelopes ---------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class RequestEnvelope:
    request_id: bytes
    lambda_bits: int
    result_bits: int
    private_query: bytes  # canonical bytes, parsed lazily
    share: bytes

    def to_bytes(self) -> bytes:
        out = bytearray([WIRE_VERSION])
        out += self.request_id
        out.append(self.lambda_bits)
        out += self.result_bits.to_bytes(2, "little")
        out += len(self.private_query).to_bytes(4, "little")
        out += self.private_query
        out += len(self.share).to_bytes(4, "little")
        out += self.share
        return bytes(out)


@dataclass(frozen=True, slots=True)
class ResponseEnvelope:
    request_id: bytes
    party_index: int
    status: int
    values: tuple[int, ...] = ()
    lambda_bits: int = 64
    error_message: str = ""

    def to_bytes(self) -> bytes:
        out = bytearray([WIRE_VERSION])
        out += self.request_id
        out.append(self.party_index)
        if self.status == STATUS_OK:
            out.append(STATUS_OK)
            width = self.lambda_bits // 8
            out += len(self.values).to_bytes(2, "little")
            out.append(width)
            for v in self.values:
                out += int(v).to_bytes(width, "little")
        else:
            out.append(1)
            out += self.status.to_bytes(2, "little")
            msg = self.error_message.encode("utf-8")
            out += len(msg).to_bytes(4, "little")
            out += msg
        return bytes(out)


class _View:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.off + n > len(self.data):
            raise DecodeError("truncated envelope", self.off)
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "little")

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "little")

    def done(self):
        if self.off != len(self.data):
            raise DecodeError("trailing bytes in envelope", self.off)


def parse_request(data: bytes) -> RequestEnvelope:
    v = _View(data)
    version = v.u8()
    if version != WIRE_VERSION:
        raise DecodeError(f"unsupported wire version {version}", 0)
    request_id = v.take(REQUEST_ID_LEN)
    lambda_bits = v.u8()
    if lambda_bits not in SUPPORTED_LAMBDA:
        raise DecodeError(f"unsupported lambda {lambda_bits}", v.off - 1)
    result_bits = v.u16()
    if not 1 <= result_bits <= 64:
        raise DecodeError(f"result_bits {result_bits} out of range", v.off - 2)
    qlen = v.u32()
    private_query = v.take(qlen)
    klen = v.u32()
    share = v.take(klen)
    v.done()
    return RequestEnvelope(request_id, lambda_bits, result_bits,
                           private_query, share)


def request_debug_obj(env: RequestEnvelope) -> dict:
    """JSON-friendly rendering for troubleshooting; the binary form is
    normative."""
    import json as _json
    try:
        query = _json.loads(env.private_query.decode("utf-8"))
    except (UnicodeDecodeError, ValueError):
        query = env.private_query.hex()
    return {
        "version": WIRE_VERSION,
        "request_id": env.request_id.hex(),
        "lambda_bits": env.lambda_bits,
        "result_bits": env.result_bits,
        "private_query": query,
        "share_bytes": len(env.share),
    }


def response_debug_obj(env: ResponseEnvelope) -> dict:
    obj = {
        "version": WIRE_VERSION,
        "request_id": env.request_id.hex(),
        "party_index": env.party_index,
        "status": "OK" if env.status == STATUS_OK
                  else _ERROR_NAMES.get(env.status, str(env.status)),
    }
    if env.status == STATUS_OK:
        obj["values"] = [f"{v:x}" for v in env.values]
    else:
        obj["error"] = env.error_message
    return obj


def parse_response(data: bytes) -> ResponseEnvelope:
    v = _View(data)
    version = v.u8()
    if version != WIRE_VERSION:
        raise DecodeError(f"unsupported wire version {version}", 0)
    request_id = v.take(REQUEST_ID_LEN)
    party_index = v.u8()
    ok_flag = v.u8()
    if ok_flag == STATUS_OK:
        count = v.u16()
        width = v.u8()
        if width not in (1, 2, 3, 4, 6, 8, 16):
            raise DecodeError(f"bad element width {width}", v.off - 1)
        values = tuple(int.from_bytes(v.take(width), "little")
                       for _ in range(count))
        v.done()
        return ResponseEnvelope(request_id, party_index, STATUS_OK, values,
                                width * 8)
    code = v.u16()
    mlen = v.u32()
    message = v.take(mlen).decode("utf-8", errors="replace")
    v.done()
    return ResponseEnvelope(request_id, party_index, code,
                            error_message=message)


# --- fault policies ----------------------------------------------------------

HONEST = "honest"
ADD_DELTA = "add-delta"
RANDOM_OUTPUT = "random-output"
TAMPER_LEDGER = "tamper-ledger"
WRONG_QUERY = "wrong-query"


@dataclass(frozen=True, slots=True)
class FaultPolicy:
    """What a (possibly malicious) provider does to its answers."""

    mode: str = HONEST
    bit_position: int = 0
    delta: int = 1
    record_index: int = 0          # flat index across blocks
    column: str = ""               # '' tampers the stored numeric value v
    new_value: Union[int, str] = 0
    substitute_query: bytes = b""  # canonical private-query bytes
    seed: Optional[int] = None     # for reproducible random-output

    def __post_init__(self):
        valid = (HONEST, ADD_DELTA, RANDOM_OUTPUT, TAMPER_LEDGER, WRONG_QUERY)
        if self.mode not in valid:
            raise ProtocolError(f"unknown fault mode {self.mode!r}")


def _tampered_ledger(ledger: Ledger, policy: FaultPolicy) -> Ledger:
    """Rebuild the chain with one record changed (a malicious replica is
    internally consistent; only cross-provider agreement exposes it)."""
    from .ledger import Record, append_block

    flat = [(b.timestamp, list(b.records)) for b in ledger.blocks]
    idx = policy.record_index
    count = sum(len(records) for _, records in flat)
    if count == 0:
        return ledger
    idx %= count
    for _, records in flat:
        if idx < len(records):
            rec = records[idx]
            if policy.column:
                attrs = dict(rec.attrs)
                attrs[policy.column] = policy.new_value
                records[idx] = Record(rec.object_id, rec.t, rec.v, attrs)
            else:
                records[idx] = Record(rec.object_id, rec.t,
                                      int(policy.new_value), rec.attrs)
            break
        idx -= len(records)
    tampered = Ledger(ledger.schema)
    for ts, records in flat:
        append_block(tampered, records, ts)
    return tampered


class RequestProcessor:
    """Shared request handling for the TCP server and in-process endpoints."""

    def __init__(self, ledger: Ledger, fault: FaultPolicy = FaultPolicy(),
                 limits: QueryLimits | None = None):
        self.fault = fault
        self.limits = limits
        self._rng = random.Random(fault.seed) if fault.seed is not None \
            else random.SystemRandom()
        if fault.mode == TAMPER_LEDGER:
            self.ledger = _tampered_ledger(ledger, fault)
        else:
            self.ledger = ledger

    def handle_frame(self, frame: bytes) -> bytes:
        request_id = bytes(REQUEST_ID_LEN)
        party_index = 0
        try:
            req = parse_request(frame)
            request_id = req.request_id
            share = deserialize_share(req.share)
            party_index = share.party_index
            if share.lambda_bits != req.lambda_bits:
                return ResponseEnvelope(
                    request_id, party_index, ERR_QUERY,
                    error_message="share and envelope disagree on lambda",
                ).to_bytes()
            query_bytes = req.private_query
            if self.fault.mode == WRONG_QUERY and self.fault.substitute_query:
                query_bytes = self.fault.substitute_query
            private = private_query_from_bytes(query_bytes)
            if private.result_bits != req.result_bits:
                return ResponseEnvelope(
                    request_id, party_index, ERR_QUERY,
                    error_message="result_bits mismatch",
                ).to_bytes()
            output = evaluate(share, self.ledger, private, self.limits)
            values = self._apply_fault(output, req)
            return ResponseEnvelope(request_id, party_index, STATUS_OK,
                                    values, req.lambda_bits).to_bytes()
        except DecodeError as exc:
            return ResponseEnvelope(request_id, party_index, ERR_DECODE,
                                    error_message=str(exc)).to_bytes()
        except ProtocolError as exc:
            return ResponseEnvelope(request_id, party_index, ERR_QUERY,
                                    error_message=str(exc)).to_bytes()
        except Exception as exc:
            from .errors import EvalError, ResourceLimitError
            code = ERR_EVAL if isinstance(exc, EvalError) else (
                ERR_LIMIT if isinstance(exc, ResourceLimitError) else ERR_INTERNAL)
            return ResponseEnvelope(request_id, party_index, code,
                                    error_message=str(exc)).to_bytes()

    def _apply_fault(self, output: ShareOutput, req: RequestEnvelope) -> tuple[int, ...]:
        mode = self.fault.mode
        mod = 1 << req.lambda_bits
        values = list(output.values)
        if mode == ADD_DELTA:
            pos = self.fault.bit_position % len(values)
            values[pos] = (values[pos] + self.fault.delta) % mod
        elif mode == RANDOM_OUTPUT:
            values = [self._rng.randrange(mod) for _ in values]
        return tuple(values)


# --- framing -----------------------------------------------------------------

def write_frame(sock: socket.socket, payload: bytes) -> None:
    if len(payload) > MAX_FRAME:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds the "
                            f"{MAX_FRAME}-byte cap")
    sock.sendall(len(payload).to_bytes(4, "little") + payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            raise ProtocolError("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> bytes:
    header = _recv_exact(sock, 4)
    length = int.from_bytes(header, "little")
    if length > MAX_FRAME:
        raise ProtocolError(f"peer announced a {length}-byte frame, above "
                            f"the {MAX_FRAME}-byte cap")
    return _recv_exact(sock, length)


# --- server ------------------------------------------------------------------

class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        processor: RequestProcessor = self.server.processor  # type: ignore[attr-defined]
        sock = self.request
        sock.settimeout(30)
        while True:
            try:
                frame = read_frame(sock)
            except (ProtocolError, OSError):
                return  # client went away or misframed; nothing to answer
            try:
                reply = processor.handle_frame(frame)
            except Exception as exc:  # absolute backstop: never crash the loop
                reply = ResponseEnvelope(
                    bytes(REQUEST_ID_LEN), 0, ERR_INTERNAL,
                    error_message=f"unhandled: {exc}").to_bytes()
            try:
                write_frame(sock, reply)
            except OSError:
                return


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


@dataclass
class ServerHandle:
    server: _Server
    thread: threading.Thread

    @property
    def address(self) -> str:
        host, port = self.server.server_address[:2]
        return f"{host}:{port}"

    def close(self) -> None:
        self.server.shutdown()
        self.server.server_close()


def serve_sp(ledger: Ledger, host: str = "127.0.0.1", port: int = 0,
             fault: FaultPolicy = FaultPolicy(),
             limits: QueryLimits | None = None) -> ServerHandle:
    """Start a provider on a background thread; port 0 picks a free port."""
    server = _Server((host, port), _Handler)
    server.processor = RequestProcessor(ledger, fault, limits)  # type: ignore[attr-defined]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return ServerHandle(server, thread)


class InProcessEndpoint:
    """Loopback endpoint: same bytes in, same bytes out, no socket."""

    def __init__(self, ledger: Ledger, fault: FaultPolicy = FaultPolicy(),
                 limits: QueryLimits | None = None):
        self.processor = RequestProcessor(ledger, fault, limits)

    def call(self, frame: bytes) -> bytes:
        return self.processor.handle_frame(frame)


Endpoint = Union[str, InProcessEndpoint]


# --- client driver -----------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ExchangeStats:
    endpoint: str
    request_bytes: int
    response_bytes: int
    elapsed_s: float
    request_frame: bytes = b""
    response_frame: bytes = b""


@dataclass(frozen=True, slots=True)
class ExecutionReport:
    result: QueryResult
    exchanges: tuple[ExchangeStats, ...]
    elapsed_s: float


def _call_tcp(address: str, frame: bytes, timeout: float) -> bytes:
    host, _, port = address.rpartition(":")
    try:
        with socket.create_connection((host, int(port)), timeout=timeout) as sock:
            sock.settimeout(timeout)
            write_frame(sock, frame)
            return read_frame(sock)
    except (OSError, ValueError) as exc:
        raise ProtocolError(f"provider {address} unreachable: {exc}") from exc


def _call_endpoint(endpoint: Endpoint, frame: bytes, timeout: float) -> bytes:
    if isinstance(endpoint, InProcessEndpoint):
        return endpoint.call(frame)
    return _call_tcp(endpoint, frame, timeout)


def _exchange(endpoint: Endpoint, frame: bytes,
              timeout: float) -> tuple[str, bytes, float]:
    name = endpoint if isinstance(endpoint, str) else "in-process"
    start = time.perf_counter()
    try:
        reply = _call_endpoint(endpoint, frame, timeout)
    except ProtocolError:
        if not isinstance(endpoint, str):
            raise
        # single retry for transient socket failures
        reply = _call_endpoint(endpoint, frame, timeout)
    return name, reply, time.perf_counter() - start


def client_execute(endpoints: Sequence[Endpoint], session: QuerySession,
                   timeout: float = 10.0, keep_frames: bool = False,
                   rng: random.Random | None = None) -> ExecutionReport:
    """Dispatch one share to each provider, collect, verify.

    Transport failures, malformed echoes and provider-side errors raise
    ProtocolError; only a failed integrity check yields an aborted result.
    """
    from concurrent.futures import ThreadPoolExecutor
    from .fss.shares import serialize_share

    if len(endpoints) != session.parties:
        raise ProtocolError(f"need {session.parties} endpoints, got "
                            f"{len(endpoints)}")
    if rng is None:
        rng = random.SystemRandom()

    q_bytes = private_query_to_bytes(session.private_query)
    frames = []
    ids = []
    for share in session.shares:
        request_id = rng.getrandbits(REQUEST_ID_LEN * 8).to_bytes(
            REQUEST_ID_LEN, "little")
        ids.append(request_id)
        frames.append(RequestEnvelope(
            request_id, session.lambda_bits,
            session.private_query.result_bits, q_bytes,
            serialize_share(share)).to_bytes())

    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=len(endpoints)) as pool:
        futures = [pool.submit(_exchange, ep, frame, timeout)
                   for ep, frame in zip(endpoints, frames)]
        replies = [f.result() for f in futures]
    elapsed = time.perf_counter() - start

    outputs = []
    exchanges = []
    for (name, reply, dt), frame, request_id in zip(replies, frames, ids):
        exchanges.append(ExchangeStats(
            name, len(frame) + 4, len(reply) + 4, dt,
            frame if keep_frames else b"", reply if keep_frames else b""))
        env = parse_response(reply)
        if env.request_id != request_id:
            raise ProtocolError(f"provider {name} echoed a foreign request id")
        if env.status != STATUS_OK:
            err = _ERROR_NAMES.get(env.status, str(env.status))
            raise ProtocolError(f"provider {name} failed: "
                                f"{err}: {env.error_message}")
        if env.lambda_bits != session.lambda_bits:
            raise ProtocolError(f"provider {name} answered with "
                                f"{env.lambda_bits}-bit elements")
        outputs.append(ShareOutput(env.party_index, env.lambda_bits,
                                   env.values))
    result = verify(session, outputs)
    return ExecutionReport(result, tuple(exchanges), elapsed)
