"""Command-line entry points.

Exit codes: 0 success, 2 integrity abort, 3 protocol error, 4 usage or
input error.
"""

from __future__ import annotations

import os
import sys

import click

from . import bench as bench_mod
from .client import prepare
from .errors import PiqlbError, ProtocolError
from .fixtures import (FIXTURE_QUERIES, FIXTURE_SECRETS, bench_schema,
                       fixture_ledger, fixture_record_file, fixture_schema,
                       write_record_file)
from .ledger import ingest, load_ledger, save_ledger, verify_chain
from .oracle import evaluate_plain
from .query.encode import load_schema, save_schema
from .query.parse import QueryLimits, parse_query
from .transport import (ADD_DELTA, FaultPolicy, HONEST, InProcessEndpoint,
                        RANDOM_OUTPUT, TAMPER_LEDGER, WRONG_QUERY,
                        client_execute, serve_sp)

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_PROTOCOL = 3
EXIT_USAGE = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Confidential, integrity-verifiable aggregate queries over a
    replicated append-only ledger."""


# --- gen-data ----------------------------------------------------------------

@main.command("gen-data")
@click.option("--preset", type=click.Choice(["paper-fixture"]), default=None,
              help="Write a named fixture instead of random data.")
@click.option("--schema", "schema_path", type=click.Path(exists=True),
              default=None, help="Schema JSON for random data.")
@click.option("--count", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Output records file (line-delimited JSON).")
@click.option("--ledger-out", type=click.Path(), default=None,
              help="Also build and store the binary ledger.")
@click.option("--schema-out", type=click.Path(), default=None,
              help="Where to copy the effective schema JSON.")
def cmd_gen_data(preset, schema_path, count, seed, out_path, ledger_out,
                 schema_out):
    """Generate a record file (and optionally the chained ledger)."""
    try:
        if preset == "paper-fixture":
            schema = fixture_schema()
            n = fixture_record_file(out_path)
        else:
            schema = load_schema(schema_path) if schema_path \
                else bench_schema()
            if count < 0:
                _fail(EXIT_USAGE, "--count must be >= 0")
            n = write_record_file(schema, count, seed, out_path)
        ledger = ingest(out_path, schema)
        if ledger_out:
            save_ledger(ledger, ledger_out)
        if schema_out:
            save_schema(schema, schema_out)
    except PiqlbError as exc:
        _fail(EXIT_USAGE, str(exc))
    click.echo(f"wrote {n} records in {len(ledger.blocks)} blocks to "
               f"{out_path}")


# --- serve-sp ----------------------------------------------------------------

def _fault_from_options(fault, fault_bit, fault_delta, fault_record,
                        fault_column, fault_value, fault_query) -> FaultPolicy:
    if fault == HONEST:
        return FaultPolicy()
    if fault == ADD_DELTA:
        return FaultPolicy(mode=ADD_DELTA, bit_position=fault_bit,
                           delta=fault_delta)
    if fault == RANDOM_OUTPUT:
        return FaultPolicy(mode=RANDOM_OUTPUT)
    if fault == TAMPER_LEDGER:
        value: object = fault_value
        if value is not None and value.isdigit():
            value = int(value)
        return FaultPolicy(mode=TAMPER_LEDGER, record_index=fault_record,
                           column=fault_column or "", new_value=value or 0)
    if fault == WRONG_QUERY:
        if not fault_query:
            raise ProtocolError("--fault wrong-query needs --fault-query")
        return FaultPolicy(mode=WRONG_QUERY,
                           substitute_query=fault_query.encode("utf-8"))
    raise ProtocolError(f"unknown fault {fault!r}")


_FAULT_CHOICES = [HONEST, ADD_DELTA, RANDOM_OUTPUT, TAMPER_LEDGER, WRONG_QUERY]


def _demo_fault(fault, ledger, query) -> FaultPolicy:
    """A fault for the in-process query path that visibly affects the
    asked-for aggregate (used by `piqlb query --ledger --fault ...`)."""
    if fault == HONEST:
        return FaultPolicy()
    if fault == ADD_DELTA:
        return FaultPolicy(mode=ADD_DELTA, bit_position=0, delta=1)
    if fault == RANDOM_OUTPUT:
        return FaultPolicy(mode=RANDOM_OUTPUT)
    if fault == TAMPER_LEDGER:
        column = query.agg_column
        spec = ledger.schema.column(column)
        old = ledger.blocks[0].records[0].attrs[column] if ledger.blocks \
            else 0
        new = (old + 1) % (1 << spec.bits) if spec.kind == "num" else old
        return FaultPolicy(mode=TAMPER_LEDGER, record_index=0, column=column,
                           new_value=new)
    raise ProtocolError("wrong-query fault needs a substituted private "
                        "query; use serve-sp --fault wrong-query "
                        "--fault-query instead")


@main.command("serve-sp")
@click.option("--ledger", "ledger_path", type=click.Path(exists=True),
              required=True, help="Binary ledger file.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=7401, show_default=True)
@click.option("--max-blocks", type=int, default=4096, show_default=True,
              help="Reject queries whose window selects more blocks.")
@click.option("--fault", type=click.Choice(_FAULT_CHOICES), default=HONEST,
              show_default=True, help="Misbehaviour model for testing.")
@click.option("--fault-bit", type=int, default=0)
@click.option("--fault-delta", type=int, default=1)
@click.option("--fault-record", type=int, default=0)
@click.option("--fault-column", default="")
@click.option("--fault-value", default=None)
@click.option("--fault-query", default=None,
              help="Substituted private-query JSON for wrong-query mode.")
def cmd_serve_sp(ledger_path, host, port, max_blocks, fault, fault_bit,
                 fault_delta, fault_record, fault_column, fault_value,
                 fault_query):
    """Run one service provider until interrupted."""
    try:
        ledger = load_ledger(ledger_path)
        verify_chain(ledger)
        policy = _fault_from_options(fault, fault_bit, fault_delta,
                                     fault_record, fault_column, fault_value,
                                     fault_query)
        handle = serve_sp(ledger, host, port, policy,
                          QueryLimits(max_blocks=max_blocks))
    except PiqlbError as exc:
        _fail(EXIT_USAGE, str(exc))
    except OSError as exc:
        _fail(EXIT_PROTOCOL, f"cannot bind {host}:{port}: {exc}")
    click.echo(f"provider listening on {handle.address} "
               f"({ledger.record_count()} records, fault={fault})")
    try:
        handle.thread.join()
    except KeyboardInterrupt:
        handle.close()


# --- oracle ------------------------------------------------------------------

@main.command("oracle")
@click.option("--ledger", "ledger_path", type=click.Path(exists=True),
              required=True)
@click.option("--query", "query_text", required=True)
@click.option("--avg-scale", type=int, default=1, show_default=True)
def cmd_oracle(ledger_path, query_text, avg_scale):
    """Evaluate the query directly (plaintext reference answer)."""
    try:
        ledger = load_ledger(ledger_path)
        query = parse_query(query_text)
        answer = evaluate_plain(ledger, query, avg_scale)
    except PiqlbError as exc:
        _fail(EXIT_USAGE, str(exc))
    suffix = " (zero-or-absent)" if answer.zero_or_absent else ""
    click.echo(f"{answer.value}{suffix}")


# --- query -------------------------------------------------------------------

@main.command("query")
@click.option("--endpoints", default=None,
              help="Comma-separated host:port list; defaults to "
                   "$PIQLB_SP_ADDRS.")
@click.option("--ledger", "ledger_path", type=click.Path(exists=True),
              default=None,
              help="Run in-process providers over this ledger instead of "
                   "connecting out.")
@click.option("--schema", "schema_path", type=click.Path(exists=True),
              default=None, help="Schema JSON (defaults to the ledger's).")
@click.option("--query", "query_text", required=True)
@click.option("--secret", "secrets", multiple=True, required=True,
              help="Condition column(s) to hide; repeatable.")
@click.option("--parties", type=int, default=2, show_default=True)
@click.option("--lambda", "lambda_bits", type=int, default=64,
              show_default=True)
@click.option("--backend", type=click.Choice(["tree", "naive"]),
              default="tree", show_default=True)
@click.option("--result-bits", type=int, default=64, show_default=True)
@click.option("--avg-scale", type=int, default=1, show_default=True)
@click.option("--timeout", type=float, default=10.0, show_default=True)
@click.option("--fault", type=click.Choice(_FAULT_CHOICES), default=HONEST,
              show_default=True,
              help="With --ledger: run one in-process provider under this "
                   "fault model.")
def cmd_query(endpoints, ledger_path, schema_path, query_text, secrets,
              parties, lambda_bits, backend, result_bits, avg_scale, timeout,
              fault):
    """Execute a query through the private protocol and verify the result."""
    try:
        query = parse_query(query_text)
        if ledger_path:
            ledger = load_ledger(ledger_path)
            schema = load_schema(schema_path) if schema_path else ledger.schema
            faulty = _demo_fault(fault, ledger, query)
            eps = [InProcessEndpoint(ledger) for _ in range(parties - 1)]
            eps.append(InProcessEndpoint(ledger, faulty))
        else:
            addr_text = endpoints or os.environ.get("PIQLB_SP_ADDRS", "")
            eps = [a.strip() for a in addr_text.split(",") if a.strip()]
            if len(eps) != parties:
                _fail(EXIT_USAGE,
                      f"need {parties} endpoints, got {len(eps)} "
                      "(set --endpoints or PIQLB_SP_ADDRS)")
            if not schema_path:
                _fail(EXIT_USAGE, "--schema is required with --endpoints")
            schema = load_schema(schema_path)
        session = prepare(query, list(secrets), schema, parties=parties,
                          lambda_bits=lambda_bits, backend=backend,
                          result_bits=result_bits, avg_scale=avg_scale)
    except PiqlbError as exc:
        _fail(EXIT_USAGE, str(exc))

    try:
        report = client_execute(eps, session, timeout=timeout)
    except ProtocolError as exc:
        _fail(EXIT_PROTOCOL, str(exc))
    except PiqlbError as exc:
        _fail(EXIT_USAGE, str(exc))

    for ex in report.exchanges:
        click.echo(f"  {ex.endpoint}: sent {ex.request_bytes} B, "
                   f"received {ex.response_bytes} B in "
                   f"{ex.elapsed_s * 1e3:.1f} ms", err=True)
    click.echo(f"  total {report.elapsed_s * 1e3:.1f} ms", err=True)
    click.echo(str(report.result))
    sys.exit(EXIT_OK if report.result.ok else EXIT_ABORT)


# --- bench -------------------------------------------------------------------

@main.command("bench")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True),
              default=None, help="Scenario JSON (overrides other options).")
@click.option("--counts", default="1000,10000",
              show_default=True, help="Comma-separated record counts.")
@click.option("--result-bits", type=int, default=64, show_default=True)
@click.option("--lambda", "lambda_bits", type=int, default=64,
              show_default=True)
@click.option("--reps", type=int, default=5, show_default=True)
@click.option("--backend", type=click.Choice(["tree", "naive"]),
              default="tree", show_default=True)
@click.option("--kernels", "kernel_lanes", default="",
              help="Comma-separated lanes to compare (e.g. native,python).")
@click.option("--tcp", is_flag=True, help="Real sockets instead of "
              "in-process providers.")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="CSV output path.")
@click.option("--check", is_flag=True,
              help="Assert bandwidth/scaling shapes after the run.")
def cmd_bench(scenario_path, counts, result_bits, lambda_bits, reps, backend,
              kernel_lanes, tcp, seed, out_path, check):
    """Measure provider cost and transport shape; write CSV."""
    try:
        if scenario_path:
            scenario = bench_mod.scenario_from_file(scenario_path)
        else:
            scenario = bench_mod.BenchScenario(
                record_counts=tuple(int(c) for c in counts.split(",")),
                result_bits=result_bits,
                lambda_bits=lambda_bits,
                repetitions=reps,
                backend=backend,
                kernel_lanes=tuple(k for k in kernel_lanes.split(",") if k),
                tcp=tcp,
                seed=seed,
            )
        rows = bench_mod.run_bench(
            scenario,
            progress=lambda r: click.echo(
                f"  N={r.n_records} kernel={r.kernel} rep={r.rep} "
                f"eval={r.eval_ms:.1f}ms e2e={r.e2e_ms:.1f}ms "
                f"server_bytes={r.server_bytes}", err=True))
        bench_mod.write_csv(rows, out_path)
    except PiqlbError as exc:
        _fail(EXIT_USAGE, str(exc))
    click.echo(f"wrote {len(rows)} rows to {out_path}")
    if check:
        outcomes = bench_mod.run_checks(rows)
        failed = False
        for oc in outcomes:
            click.echo(f"[{'PASS' if oc.passed else 'FAIL'}] {oc.name}: "
                       f"{oc.detail}")
            failed |= not oc.passed
        if failed:
            sys.exit(EXIT_PROTOCOL)


# --- demo --------------------------------------------------------------------

@main.command("demo")
@click.option("--parties", type=int, default=2, show_default=True)
def cmd_demo(parties):
    """Run the walkthrough fixture end to end, including one tampered run."""
    ledger = fixture_ledger()
    schema = fixture_schema()
    click.echo(f"fixture: {ledger.record_count()} records in "
               f"{len(ledger.blocks)} blocks")
    for name in ("q1", "q3", "q4", "q5", "q2"):
        text = FIXTURE_QUERIES[name]
        query = parse_query(text)
        secrets = FIXTURE_SECRETS[name]
        oracle = evaluate_plain(ledger, query)
        backend = "tree" if parties == 2 else "naive"
        session = prepare(query, list(secrets), schema, parties=parties,
                          backend=backend, result_bits=16)
        eps = [InProcessEndpoint(ledger) for _ in range(parties)]
        report = client_execute(eps, session)
        click.echo(f"\n{name}: {text}")
        click.echo(f"  secret columns: {', '.join(secrets)}")
        click.echo(f"  oracle: {oracle.value} ({oracle.matches} matching "
                   "records)")
        click.echo(f"  protocol: {report.result}")
        if not report.result.ok and oracle.matches > 1:
            click.echo("  note: several records match this range/OR "
                       "condition; per-bit verification only supports a "
                       "single match, so the abort is the documented "
                       "behaviour")

    query = parse_query(FIXTURE_QUERIES["q1"])
    session = prepare(query, ["Item"], schema, parties=parties,
                      backend="tree" if parties == 2 else "naive",
                      result_bits=16)
    eps = [InProcessEndpoint(ledger) for _ in range(parties - 1)]
    eps.append(InProcessEndpoint(
        ledger, FaultPolicy(mode=ADD_DELTA, bit_position=3, delta=5)))
    report = client_execute(eps, session)
    click.echo(f"\nq1 with one provider corrupting bit 3: {report.result}")


if __name__ == "__main__":
    main()
