"""Command-line front end: compile, check, run, graph."""

from __future__ import annotations

import argparse
import pathlib
import sys

from .compiler import CompileError, compile_model
from .explore import LimitExceeded, explore, render_trace
from .model import TickSemantics
from .parser import ParseError, parse_btf
from .props import (
    PropertyError,
    check as check_property,
    default_properties,
    parse_properties,
)
from .runtime import (
    ProviderError,
    RunConfig,
    ScriptedProvider,
    ScriptError,
    emit_trace,
    parse_script,
    run as run_model,
)
from .validate import ValidationFailed, validate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NO_INPUT = 2
EXIT_EXPECT_MISMATCH = 3
EXIT_LIMIT = 4
EXIT_STOPPED = 5
EXIT_PROVIDER = 6


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="btverify",
        description="Compile behavior trees to communicating automata, "
                    "model-check them, and execute them in real time.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("input", help="tree definition (.btf)")
        p.add_argument("--tick-semantics", choices=["root", "leaves", "all"],
                       default="root")
        p.add_argument("--tree", help="tree name if the file defines several")

    p = sub.add_parser("compile", help="translate and dump the model")
    common(p)
    p.add_argument("--out", help="directory for the model dump and "
                                 "per-process automaton graphs")

    p = sub.add_parser("check", help="explore the state space and "
                                     "evaluate properties")
    common(p)
    p.add_argument("--props", help="property file")
    p.add_argument("--default-props", action="store_true",
                   help="also check the generated per-node suite")
    p.add_argument("--max-states", type=int, default=5_000_000)
    p.add_argument("--max-seconds", type=float, default=600.0)
    p.add_argument("--out", help="verdict report file (witness traces are "
                                 "written alongside it)")

    p = sub.add_parser("run", help="execute the model in real time")
    common(p)
    p.add_argument("--script", help="outcome script file")
    p.add_argument("--seed", type=int, help="seed for unscripted outcomes")
    p.add_argument("--tick-ms", type=float, default=100.0,
                   help="tick period; 0 runs on a virtual clock")
    p.add_argument("--max-ticks", type=int)
    p.add_argument("--trace", help="trace output file ('-' for stdout)")
    p.add_argument("--format", choices=["lines", "jsonl"], default="lines")

    p = sub.add_parser("graph", help="explore and dump the state graph")
    common(p)
    p.add_argument("--max-states", type=int, default=5_000_000)
    p.add_argument("--max-seconds", type=float, default=600.0)
    p.add_argument("--out", help="output file (default stdout)")

    args = parser.parse_args(argv)
    try:
        model = _load_model(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INPUT
    except (ParseError, ValidationFailed, CompileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "compile":
        return cmd_compile(args, model)
    if args.command == "check":
        return cmd_check(args, model)
    if args.command == "run":
        return cmd_run(args, model)
    return cmd_graph(args, model)


def _load_model(args):
    path = pathlib.Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    vspec = validate(parse_btf(path.read_text()))
    for warning in vspec.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return compile_model(vspec, tick_semantics=args.tick_semantics,
                         tree_name=args.tree)


def cmd_compile(args, model):
    print(f"{len(model.processes)} processes")
    if args.out:
        out = pathlib.Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "model.txt").write_text(model.dump())
        for proc in model.processes:
            safe = proc.name.replace("/", "_").replace(":", "_")
            (out / f"{safe}.dot").write_text(model.process_dot(proc))
        print(f"wrote model dump and {len(model.processes)} graphs to {out}")
    else:
        sys.stdout.write(model.dump())
    return EXIT_OK


def _gather_properties(args, model):
    props = []
    if args.props:
        path = pathlib.Path(args.props)
        if not path.exists():
            raise FileNotFoundError(f"no such file: {path}")
        props.extend(parse_properties(path.read_text()))
    if args.default_props or not props:
        props.extend(default_properties(model))
    return props


def cmd_check(args, model):
    try:
        props = _gather_properties(args, model)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INPUT
    except PropertyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    limit_hit = False
    try:
        graph = explore(model, max_states=args.max_states,
                        max_seconds=args.max_seconds)
    except LimitExceeded as exc:
        print(f"warning: {exc}", file=sys.stderr)
        graph = exc.graph
        limit_hit = True

    report = []
    mismatch = False
    out_path = pathlib.Path(args.out) if args.out else None
    for prop in props:
        try:
            verdict = check_property(graph, prop)
        except PropertyError as exc:
            print(f"error: property {prop.name}: {exc}", file=sys.stderr)
            return EXIT_INVALID
        witness_path = None
        if verdict.witness is not None and out_path is not None:
            witness_path = out_path.with_name(
                f"{out_path.stem}.{prop.name}.witness")
            witness_path.write_text(render_trace(graph, verdict.witness))
        report.append(verdict.report_line(witness_path))
        if not verdict.matches_expectation:
            mismatch = True

    text = "\n".join(report) + "\n"
    if out_path is not None:
        out_path.write_text(text)
    sys.stdout.write(text)
    if limit_hit:
        return EXIT_LIMIT
    return EXIT_EXPECT_MISMATCH if mismatch else EXIT_OK


def cmd_run(args, model):
    script = None
    if args.script:
        path = pathlib.Path(args.script)
        if not path.exists():
            print(f"error: no such file: {path}", file=sys.stderr)
            return EXIT_NO_INPUT
        try:
            script = parse_script(path.read_text())
        except ScriptError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
    seed = args.seed if args.seed is not None else 0
    provider = ScriptedProvider(model, script=script, seed=seed)
    config = RunConfig(tick_ms=args.tick_ms, max_ticks=args.max_ticks,
                       seed=seed)
    try:
        result = run_model(model, provider, config)
    except ProviderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.result is not None:
            _write_trace(args, exc.result.trace)
        return EXIT_PROVIDER
    _write_trace(args, result.trace)
    print(f"{result.final} after {result.ticks} ticks "
          f"({len(result.trace.events)} events)", file=sys.stderr)
    return {"success": EXIT_OK, "failure": EXIT_INVALID}.get(
        result.final, EXIT_STOPPED)


def _write_trace(args, trace):
    if not args.trace:
        return
    data = emit_trace(trace, args.format)
    if args.trace == "-":
        sys.stdout.buffer.write(data)
    else:
        pathlib.Path(args.trace).write_bytes(data)


def cmd_graph(args, model):
    try:
        graph = explore(model, max_states=args.max_states,
                        max_seconds=args.max_seconds)
    except LimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    text = graph.dump()
    if args.out:
        pathlib.Path(args.out).write_text(text)
        print(f"{graph.n_states} states, {graph.n_edges} edges -> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
