"""Benchmarks: provider cost scaling, bandwidth shape, kernel lanes.

A scenario fixes the data sizes and protocol parameters, then each
repetition builds a seeded ledger, runs one provider evaluation with the
per-bit loop timed separately from table construction, and drives a full
two-provider round trip for latency and byte counts. Providers run
in-process by default so the numbers measure computation, not the network;
``tcp=True`` moves them onto real sockets.

The companion checks assert the two claims the protocol makes about these
curves: response bytes do not move with the record count, and evaluation
time is linear in records x result bits.
"""

from __future__ import annotations

import csv
import json
import random
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Iterable

from . import kernels
from .client import prepare
from .engine import build_intermediate_table, comp
from .errors import ConfigError
from .fixtures import bench_schema, build_random_ledger
from .ledger import Ledger
from .query.ast import AggType, Query, Single
from .query.parse import QueryLimits
from .transport import InProcessEndpoint, client_execute, serve_sp

_WINDOW_START = 1654041600  # 2022-06-01T00:00:00Z
_WINDOW_END = 1685577600    # 2023-06-01T00:00:00Z


@dataclass(frozen=True, slots=True)
class BenchScenario:
    record_counts: tuple[int, ...] = (1000, 10000)
    result_bits: int = 64
    lambda_bits: int = 64
    parties: int = 2
    backend: str = "tree"
    repetitions: int = 5
    key_bits: int = 32
    kernel_lanes: tuple[str, ...] = ()  # empty = whatever is active
    tcp: bool = False
    seed: int = 1

    def __post_init__(self):
        if self.repetitions < 3:
            raise ConfigError("benchmark needs at least 3 repetitions")
        if not self.record_counts:
            raise ConfigError("benchmark needs at least one record count")


@dataclass(frozen=True, slots=True)
class BenchRow:
    n_records: int
    table_rows: int
    result_bits: int
    lambda_bits: int
    backend: str
    kernel: str
    rep: int
    table_ms: float
    eval_ms: float
    e2e_ms: float
    client_bytes: int
    server_bytes: int


CSV_FIELDS = [f.name for f in BenchRow.__dataclass_fields__.values()]


def scenario_to_file(scenario: BenchScenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(scenario), fh, indent=2)
        fh.write("\n")


def scenario_from_file(path) -> BenchScenario:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    lists = {"record_counts", "kernel_lanes"}
    kwargs = {k: tuple(v) if k in lists else v for k, v in obj.items()}
    return BenchScenario(**kwargs)


def _bench_query(ledger: Ledger, scenario: BenchScenario,
                 rng: random.Random) -> tuple[Query, str]:
    # pick a key that exists so the answer is a real group aggregate
    block = rng.choice(ledger.blocks)
    record = rng.choice(block.records)
    q = Query(AggType.SUM, "Price", _WINDOW_START, _WINDOW_END,
              Single("Key", record.attrs["Key"]))
    return q, "Key"


def _run_one(ledger: Ledger, scenario: BenchScenario, rep: int, kernel: str,
             rng: random.Random) -> BenchRow:
    query, secret_col = _bench_query(ledger, scenario, rng)
    session = prepare(query, [secret_col], ledger.schema,
                      parties=scenario.parties,
                      lambda_bits=scenario.lambda_bits,
                      backend=scenario.backend,
                      result_bits=scenario.result_bits, rng=rng)
    limits = QueryLimits(max_blocks=10 ** 9)

    t0 = time.perf_counter()
    table, bits = build_intermediate_table(ledger, session.private_query,
                                           limits)
    table_ms = (time.perf_counter() - t0) * 1e3

    share = session.shares[0]
    t0 = time.perf_counter()
    for k in range(scenario.result_bits):
        comp(share, table, bits, k)
    eval_ms = (time.perf_counter() - t0) * 1e3

    if scenario.tcp:
        handles = [serve_sp(ledger, limits=limits)
                   for _ in range(scenario.parties)]
        endpoints: list = [h.address for h in handles]
    else:
        handles = []
        endpoints = [InProcessEndpoint(ledger, limits=limits)
                     for _ in range(scenario.parties)]
    try:
        report = client_execute(endpoints, session, timeout=120.0)
    finally:
        for h in handles:
            h.close()
    if not report.result.ok:
        raise ConfigError("benchmark run unexpectedly failed verification")

    return BenchRow(
        n_records=ledger.record_count(),
        table_rows=len(table),
        result_bits=scenario.result_bits,
        lambda_bits=scenario.lambda_bits,
        backend=scenario.backend,
        kernel=kernel,
        rep=rep,
        table_ms=round(table_ms, 3),
        eval_ms=round(eval_ms, 3),
        e2e_ms=round(report.elapsed_s * 1e3, 3),
        client_bytes=report.exchanges[0].request_bytes,
        server_bytes=report.exchanges[0].response_bytes,
    )


def run_bench(scenario: BenchScenario,
              progress=None) -> list[BenchRow]:
    lanes = scenario.kernel_lanes or (kernels.active(),)
    for lane in lanes:
        if lane not in kernels.lanes():
            raise ConfigError(f"kernel lane {lane!r} not available")
    rows: list[BenchRow] = []
    schema = bench_schema(scenario.key_bits)
    for n in scenario.record_counts:
        ledger = build_random_ledger(schema, n, scenario.seed,
                                     start_ts=_WINDOW_START + 1, step=1)
        for lane in lanes:
            previous = kernels.use(lane)
            try:
                for rep in range(scenario.repetitions):
                    rng = random.Random(scenario.seed * 7919 + rep)
                    row = _run_one(ledger, scenario, rep, lane, rng)
                    rows.append(row)
                    if progress:
                        progress(row)
            finally:
                kernels.use(previous)
    return rows


def write_csv(rows: Iterable[BenchRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))


def read_csv(path) -> list[BenchRow]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for obj in csv.DictReader(fh):
            out.append(BenchRow(
                n_records=int(obj["n_records"]),
                table_rows=int(obj["table_rows"]),
                result_bits=int(obj["result_bits"]),
                lambda_bits=int(obj["lambda_bits"]),
                backend=obj["backend"],
                kernel=obj["kernel"],
                rep=int(obj["rep"]),
                table_ms=float(obj["table_ms"]),
                eval_ms=float(obj["eval_ms"]),
                e2e_ms=float(obj["e2e_ms"]),
                client_bytes=int(obj["client_bytes"]),
                server_bytes=int(obj["server_bytes"]),
            ))
    return out


# --- companion checks --------------------------------------------------------

@dataclass(frozen=True, slots=True)
class CheckOutcome:
    name: str
    passed: bool
    detail: str


def check_constant_bandwidth(rows: list[BenchRow]) -> CheckOutcome:
    """Server response bytes must not depend on the record count."""
    by_key: dict[tuple, set[int]] = {}
    for r in rows:
        by_key.setdefault((r.result_bits, r.lambda_bits), set()).add(
            r.server_bytes)
    bad = {k: sorted(v) for k, v in by_key.items() if len(v) != 1}
    if bad:
        return CheckOutcome("constant-server-bandwidth", False,
                            f"response size varies: {bad}")
    sizes = {k: next(iter(v)) for k, v in by_key.items()}
    return CheckOutcome("constant-server-bandwidth", True,
                        f"constant at {sizes}")


def check_linear_scaling(rows: list[BenchRow],
                         tolerance: float = 2.0) -> CheckOutcome:
    """Median eval time must track a linear fit in rows x bits within the
    given factor across scenario points."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault((r.kernel, r.table_rows, r.result_bits), []).append(
            r.eval_ms)
    if len({(rows_, bits) for _, rows_, bits in groups}) < 2:
        return CheckOutcome("linear-compute-scaling", False,
                            "need at least two (rows, bits) points")
    by_kernel: dict[str, list[tuple[float, float]]] = {}
    for (kernel, table_rows, bits), times in groups.items():
        by_kernel.setdefault(kernel, []).append(
            (table_rows * bits, statistics.median(times)))
    worst = 1.0
    for kernel, points in by_kernel.items():
        slopes = [t / work for work, t in points if work > 0]
        mid = statistics.median(slopes)
        for work, t in points:
            ratio = (t / work) / mid
            worst = max(worst, ratio, 1 / ratio)
    passed = worst <= tolerance
    return CheckOutcome("linear-compute-scaling", passed,
                        f"worst deviation from linear fit: {worst:.2f}x "
                        f"(tolerance {tolerance}x)")


def run_checks(rows: list[BenchRow]) -> list[CheckOutcome]:
    return [check_constant_bandwidth(rows), check_linear_scaling(rows)]
