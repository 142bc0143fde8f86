"""Command-line front end: validate, flows, optimize, pareto, ingest, serve.

Stdout carries only the declared machine-readable output (JSON or CSV);
all diagnostics go to stderr.  Exit codes are stable: 0 success, 1 runtime
error, 2 usage error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import socket
import sys
from pathlib import Path
from typing import Any, Sequence

from . import ingest as ingest_mod
from .flow import flow_report
from .model import (
    GraphValidationError,
    PortfolioError,
    baseline_portfolio,
    graph_to_document,
    load_graph,
    naked_portfolio,
    portfolio_from_document,
    save_graph,
    validate_graph,
)
from .solver import (
    METHODS,
    FrontierResult,
    SearchSpaceError,
    SolveOptions,
    optimize,
    pareto_frontier,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3


def _print_json(payload: Any) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


def _info(message: str) -> None:
    sys.stderr.write(message + "\n")


def _workers_arg(value: str) -> int | str:
    if value == "auto":
        return "auto"
    count = int(value)
    if count < 1:
        raise argparse.ArgumentTypeError("workers must be >= 1 or 'auto'")
    return count


def _nonnegative_float(value: str) -> float:
    budget = float(value)
    if budget < 0:
        raise argparse.ArgumentTypeError("budget must be >= 0")
    return budget


def _solve_options(args: argparse.Namespace) -> SolveOptions:
    return SolveOptions(
        method=args.method,
        workers=args.workers,
        time_limit=args.time_limit,
    )


def _load_or_fail(path: str):
    try:
        return load_graph(path)
    except FileNotFoundError as exc:
        _info(f"error: {exc}")
        raise SystemExit(EXIT_RUNTIME)
    except GraphValidationError as exc:
        for issue in exc.report.errors:
            _info(f"error: {issue.message} [{issue.location}]")
        raise SystemExit(EXIT_VALIDATION)


def _portfolio_for(graph, spec: str):
    if spec == "baseline":
        return baseline_portfolio(graph)
    if spec == "naked":
        return naked_portfolio(graph)
    try:
        with open(spec, encoding="utf-8") as fh:
            return portfolio_from_document(json.load(fh))
    except FileNotFoundError as exc:
        _info(f"error: {exc}")
        raise SystemExit(EXIT_RUNTIME)
    except (json.JSONDecodeError, PortfolioError) as exc:
        _info(f"error: invalid portfolio document: {exc}")
        raise SystemExit(EXIT_VALIDATION)


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        raw = Path(args.graph).read_bytes()
    except OSError as exc:
        _info(f"error: {exc}")
        return EXIT_RUNTIME
    report = validate_graph(raw)
    _print_json(report.to_json_dict())
    for issue in report.errors:
        _info(f"error: {issue.message} [{issue.location}]")
    for issue in report.warnings:
        _info(f"warning: {issue.message} [{issue.location}]")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_flows(args: argparse.Namespace) -> int:
    graph = _load_or_fail(args.graph)
    portfolio = _portfolio_for(graph, args.portfolio)
    try:
        report = flow_report(graph, portfolio)
    except PortfolioError as exc:
        _info(f"error: {exc}")
        return EXIT_VALIDATION
    _print_json(report.to_json_dict())
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    graph = _load_or_fail(args.graph)
    try:
        result = optimize(graph, args.budget, _solve_options(args))
    except SearchSpaceError as exc:
        _info(f"error: {exc}")
        return EXIT_RUNTIME
    body = result.point.to_json_dict()
    body["proven"] = result.proven
    _print_json(body)
    if not result.proven:
        _info("warning: time limit hit; best-found result, optimality not proven")
    if args.apply:
        with open(args.apply, "w", encoding="utf-8") as fh:
            json.dump({"selections": dict(result.point.portfolio.selections)}, fh, indent=2)
            fh.write("\n")
        _info(f"portfolio written to {args.apply}")
    return EXIT_OK


def frontier_csv(result: FrontierResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["direct_cost", "indirect_cost", "damage", "portfolio"])
    for point in result.points:
        portfolio = ";".join(f"{gid}={lvl}" for gid, lvl in point.portfolio.selections.items())
        writer.writerow([repr(point.direct_cost), repr(point.indirect_cost), repr(point.damage), portfolio])
    return buf.getvalue()


def cmd_pareto(args: argparse.Namespace) -> int:
    graph = _load_or_fail(args.graph)
    try:
        result = pareto_frontier(graph, _solve_options(args))
    except SearchSpaceError as exc:
        _info(f"error: {exc}")
        return EXIT_RUNTIME
    if args.format == "csv":
        output = frontier_csv(result)
    else:
        output = (
            json.dumps(
                {
                    "points": [p.to_json_dict() for p in result.points],
                    "proven": result.proven,
                    "elapsed_ms": result.elapsed_ms,
                },
                indent=2,
                ensure_ascii=False,
            )
            + "\n"
        )
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)
    _info(f"{len(result.points)} frontier points in {result.elapsed_ms} ms")
    if not result.proven:
        _info("warning: time limit hit; frontier may be partial")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    tactics = {t.strip() for t in args.tactics.split(",") if t.strip()}
    if not tactics:
        _info("error: --tactics must name at least one tactic")
        return EXIT_USAGE
    try:
        with open(args.bundle, "rb") as fh:
            records = ingest_mod.parse_bundle(fh)
    except FileNotFoundError as exc:
        _info(f"error: {exc}")
        return EXIT_RUNTIME
    except ingest_mod.BundleParseError as exc:
        _info(f"error: {exc}")
        return EXIT_VALIDATION
    table = ingest_mod.compute_risk(records, tactics)

    if args.bind or args.graph:
        if not (args.bind and args.graph):
            _info("error: --bind and --graph must be used together")
            return EXIT_USAGE
        graph = _load_or_fail(args.graph)
        try:
            with open(args.bind, encoding="utf-8") as fh:
                binding = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            _info(f"error: cannot read binding map: {exc}")
            return EXIT_RUNTIME
        try:
            rebound = ingest_mod.bind_risks(graph, table, binding)
        except ingest_mod.BindingError as exc:
            for failure in exc.failures:
                _info(f"error: {failure}")
            return EXIT_VALIDATION
        if args.out:
            save_graph(rebound, args.out)
            _info(f"re-bound graph written to {args.out}")
        else:
            _print_json(graph_to_document(rebound))
        return EXIT_OK

    sys.stdout.write(table.to_csv())
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import ApiConfig, create_app

    host, _, port_text = args.listen.rpartition(":")
    if not host or not port_text.isdigit():
        _info(f"error: --listen must look like HOST:PORT, got {args.listen!r}")
        return EXIT_USAGE
    port = int(port_text)

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        _info(f"error: cannot listen on {host}:{port}: {exc}")
        return EXIT_RUNTIME
    finally:
        probe.close()

    config = ApiConfig(
        models_dir=Path(args.models) if args.models else None,
        default_workers=args.workers,
        cors_origin=os.environ.get("SECPARETO_CORS"),
        ui_dir=Path(args.ui) if args.ui else None,
    )
    _info(f"serving on http://{host}:{port} (models: {config.models_dir or 'none'})")
    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="secpareto",
        description="Cost-optimal security-control portfolios over probabilistic attack graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a model document")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("flows", help="flow report for a portfolio")
    p.add_argument("graph")
    p.add_argument("--portfolio", required=True, help="portfolio file, or 'baseline' / 'naked'")
    p.set_defaults(func=cmd_flows)

    def add_solver_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--method", choices=METHODS, default="best_first")
        p.add_argument("--workers", type=_workers_arg, default=1)
        p.add_argument("--time-limit", dest="time_limit", type=float, default=None)

    p = sub.add_parser("optimize", help="best portfolio within a budget")
    p.add_argument("graph")
    p.add_argument("--budget", type=_nonnegative_float, required=True)
    p.add_argument("--apply", help="write the chosen portfolio document here")
    add_solver_args(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("pareto", help="enumerate the cost/damage frontier")
    p.add_argument("graph")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", help="write the frontier here instead of stdout")
    add_solver_args(p)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("ingest", help="compute technique risks from an intel bundle")
    p.add_argument("bundle")
    p.add_argument("--tactics", required=True, help="comma-separated tactic names")
    p.add_argument("--bind", help="edge-to-technique binding map (JSON)")
    p.add_argument("--graph", help="graph to re-bind with the computed risks")
    p.add_argument("--out", help="write the re-bound graph here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("serve", help="run the HTTP API (and UI when present)")
    p.add_argument("--listen", default=os.environ.get("SECPARETO_LISTEN", "127.0.0.1:8080"))
    p.add_argument("--models", default=os.environ.get("SECPARETO_MODELS"))
    p.add_argument("--workers", type=_workers_arg, default=_workers_arg(os.environ.get("SECPARETO_WORKERS", "1")))
    p.add_argument("--ui", default=os.environ.get("SECPARETO_UI"))
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except KeyboardInterrupt:
        _info("interrupted")
        return EXIT_RUNTIME
    except Exception as exc:  # keep scripting exit codes stable
        _info(f"error: {type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
