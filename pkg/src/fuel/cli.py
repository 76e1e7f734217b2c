"""The `fuel` command-line tool.

Subcommands: check, run, fuzz, oracle, serve.  Each is a thin wrapper over
the handlers in fuel.service, so the CLI and the HTTP API cannot drift.

Exit codes are a stable contract:

    0   success
    1   type errors
    2   parse errors
    3   runtime fault (or step limit exceeded)
    4   completed but leaked heap cells
    5   harness property violation (fuzz or oracle)
    64  usage error
    66  input file unreadable
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import NoReturn, Optional

from . import __version__, harness
from .diagnostics import render_human, to_record, use_color
from .service import handlers, models

EX_OK = 0
EX_TYPE = 1
EX_PARSE = 2
EX_FAULT = 3
EX_LEAK = 4
EX_PROPERTY = 5
EX_USAGE = 64
EX_NOINPUT = 66


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which collides with our parse-error
    # code, so usage problems are remapped to 64.  --help still exits 0.
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EX_USAGE)


def _read_source(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        print(f"fuel: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(EX_NOINPUT)


def _emit_record(record: dict) -> None:
    sys.stdout.write(json.dumps(record) + "\n")


def _emit_diagnostics(args, raw, source: str) -> None:
    if args.json:
        for diag in raw:
            _emit_record(to_record(diag))
    else:
        color = use_color(sys.stderr)
        for diag in raw:
            print(render_human(diag, source, color), file=sys.stderr)


def _cmd_check(args) -> int:
    source = _read_source(args.path)
    raw: list = []
    resp = handlers.check_source(
        models.CheckRequest(source=source, filename=args.path), collect=raw
    )
    _emit_diagnostics(args, raw, source)
    if resp.ok:
        return EX_OK
    return EX_PARSE if resp.phase == "parse" else EX_TYPE


def _cmd_run(args) -> int:
    source = _read_source(args.path)
    raw: list = []
    resp = handlers.run_source(
        models.RunRequest(
            source=source,
            filename=args.path,
            entry=args.entry,
            unchecked=args.unchecked,
            max_steps=args.max_steps,
            max_call_depth=args.max_call_depth,
        ),
        trace_stream=sys.stderr if args.trace else None,
        collect=raw,
    )
    if resp.phase in ("parse", "type"):
        _emit_diagnostics(args, raw, source)
        return EX_PARSE if resp.phase == "parse" else EX_TYPE

    if resp.phase == "faulted":
        fault = resp.fault
        if args.json:
            record = {"severity": "fault", **fault.model_dump()}
            _emit_record(record)
        else:
            where = (
                f" ({fault.file}:{fault.line}:{fault.col})"
                if fault.file is not None
                else ""
            )
            print(f"fault[{fault.kind}]: {fault.message}{where}", file=sys.stderr)
        return EX_FAULT
    if resp.phase == "step-limit":
        if args.json:
            _emit_record(
                {"severity": "summary", "status": "step-limit", "steps": resp.steps}
            )
        else:
            print(f"step limit exceeded after {resp.steps} steps", file=sys.stderr)
        return EX_FAULT

    for leak in resp.leaks:
        if args.json:
            _emit_record({"severity": "leak", **leak.model_dump()})
        else:
            print(f"leak: {leak.message}", file=sys.stderr)
    if args.json:
        _emit_record(
            {
                "severity": "summary",
                "status": "completed",
                "steps": resp.steps,
                "result": resp.result,
                "leaks": len(resp.leaks),
            }
        )
    elif resp.result is not None:
        print(f"result = {resp.result}")
    return EX_OK if resp.ok else EX_LEAK


def _parse_features(parser: _Parser, text: Optional[str]) -> list[str]:
    if text is None:
        return sorted(harness.FEATURES)
    names = [part.strip() for part in text.split(",") if part.strip()]
    unknown = sorted(set(names) - harness.FEATURES)
    if unknown:
        known = ", ".join(sorted(harness.FEATURES))
        parser.error(f"unknown features {unknown}; choose from: {known}")
    return names


def _cmd_fuzz(args) -> int:
    if args.seeds < 0:
        args.parser_ref.error("--seeds must be non-negative")
    features = _parse_features(args.parser_ref, args.features)
    resp = handlers.run_fuzz(
        models.FuzzRequest(count=args.seeds, seed=args.seed, features=features)
    )
    if args.json:
        for failure in resp.failures:
            _emit_record({"severity": "failure", **failure.model_dump()})
        _emit_record(
            {
                "severity": "summary",
                "programs": resp.programs,
                "static_rejections": resp.static_rejections,
                "faults": resp.faults,
                "roundtrip_failures": resp.roundtrip_failures,
            }
        )
    else:
        for failure in resp.failures:
            print(
                f"seed {failure.seed}: {failure.kind}: {failure.detail}",
                file=sys.stderr,
            )
        print(
            f"programs={resp.programs} static_rejections={resp.static_rejections} "
            f"faults={resp.faults} roundtrip_failures={resp.roundtrip_failures}"
        )
    return EX_OK if resp.ok else EX_PROPERTY


def _cmd_oracle(args) -> int:
    resp = handlers.run_oracle(
        models.OracleRequest(max_instrs=args.max_instrs, max_cells=args.max_cells)
    )
    if args.json:
        for line in resp.disagreements:
            _emit_record({"severity": "disagreement", "detail": line})
        _emit_record(
            {
                "severity": "summary",
                "programs": resp.programs,
                "accepted": resp.accepted,
                "rejected": resp.rejected,
                "disagreements": len(resp.disagreements),
            }
        )
    else:
        for line in resp.disagreements:
            print(f"disagreement: {line}", file=sys.stderr)
        print(
            f"programs={resp.programs} accepted={resp.accepted} "
            f"rejected={resp.rejected} disagreements={len(resp.disagreements)}"
        )
    return EX_OK if resp.ok else EX_PROPERTY


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EX_OK


def _build_parser() -> _Parser:
    top = _Parser(prog="fuel", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"fuel {__version__}")
    sub = top.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    p_check = sub.add_parser("check", help="parse and type-check a module")
    p_check.add_argument("path", metavar="FILE")
    p_check.add_argument("--json", action="store_true", help="line-delimited records")
    p_check.set_defaults(func=_cmd_check)

    p_run = sub.add_parser("run", help="type-check then interpret a module")
    p_run.add_argument("path", metavar="FILE")
    p_run.add_argument("--entry", default="main", metavar="NAME")
    p_run.add_argument("--trace", action="store_true", help="step trace on stderr")
    p_run.add_argument(
        "--unchecked", action="store_true", help="skip the static checker"
    )
    p_run.add_argument("--max-steps", type=int, default=10_000_000, metavar="N")
    p_run.add_argument("--max-call-depth", type=int, default=10_000, metavar="N")
    p_run.add_argument("--json", action="store_true", help="line-delimited records")
    p_run.set_defaults(func=_cmd_run)

    p_fuzz = sub.add_parser("fuzz", help="generate and run well-typed programs")
    p_fuzz.add_argument("--seeds", type=int, default=100, metavar="N")
    p_fuzz.add_argument("--seed", type=int, default=0, metavar="BASE")
    p_fuzz.add_argument(
        "--features",
        default=None,
        metavar="LIST",
        help="comma-separated subset of: " + ", ".join(sorted(harness.FEATURES)),
    )
    p_fuzz.add_argument("--json", action="store_true", help="line-delimited records")
    p_fuzz.set_defaults(func=_cmd_fuzz, parser_ref=p_fuzz)

    p_oracle = sub.add_parser(
        "oracle", help="exhaustive checker-vs-oracle agreement sweep"
    )
    p_oracle.add_argument("--max-instrs", type=int, default=4, metavar="N")
    p_oracle.add_argument("--max-cells", type=int, default=2, metavar="N")
    p_oracle.add_argument("--json", action="store_true", help="line-delimited records")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_serve = sub.add_parser("serve", help="start the HTTP API")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=_cmd_serve)

    return top


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


def entrypoint() -> None:
    raise SystemExit(main(sys.argv[1:]))
