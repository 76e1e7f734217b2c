"""The operations behind both the HTTP endpoints and the CLI subcommands."""

from __future__ import annotations

from typing import Optional, TextIO

from .. import checker, harness, interp, oracle, parser, printer
from ..diagnostics import Diagnostic, to_record
from . import models


def _records(diags: list) -> list[models.DiagnosticRecord]:
    return [models.DiagnosticRecord(**to_record(d)) for d in diags]


def check_source(
    req: models.CheckRequest, collect: Optional[list[Diagnostic]] = None
) -> models.CheckResponse:
    """Parse then type-check.  `collect`, when given, receives the raw
    diagnostic objects so in-process callers can render source excerpts."""
    try:
        module = parser.parse_module(req.source, req.filename)
    except parser.ParseFailure as failure:
        if collect is not None:
            collect.extend(failure.diagnostics)
        return models.CheckResponse(
            ok=False, phase="parse", diagnostics=_records(failure.diagnostics)
        )
    diags = checker.check_module(module)
    if diags:
        if collect is not None:
            collect.extend(diags)
        return models.CheckResponse(ok=False, phase="type", diagnostics=_records(diags))
    return models.CheckResponse(ok=True, phase="ok")


def _fault_record(fault: interp.Fault) -> models.FaultRecord:
    record = models.FaultRecord(kind=fault.kind.value, message=fault.detail)
    if fault.span is not None:
        record.file = fault.span.file
        record.line = fault.span.start_line
        record.col = fault.span.start_col
    return record


def _leak_records(report: interp.ExitReport) -> list[models.LeakRecord]:
    return [
        models.LeakRecord(
            cell=f"{leak.static_name}#{leak.activation}",
            function=leak.function,
            layout=leak.layout.value,
            message=(
                f"heap cell {leak.static_name}#{leak.activation} "
                f"({leak.layout.value}) allocated in {leak.function!r} was "
                f"never freed"
            ),
        )
        for leak in report.leaked
    ]


def run_source(
    req: models.RunRequest,
    trace_stream: Optional[TextIO] = None,
    collect: Optional[list[Diagnostic]] = None,
) -> models.RunResponse:
    try:
        module = parser.parse_module(req.source, req.filename)
    except parser.ParseFailure as failure:
        if collect is not None:
            collect.extend(failure.diagnostics)
        return models.RunResponse(
            ok=False, phase="parse", diagnostics=_records(failure.diagnostics)
        )
    if not req.unchecked:
        diags = checker.check_module(module)
        if diags:
            if collect is not None:
                collect.extend(diags)
            return models.RunResponse(
                ok=False, phase="type", diagnostics=_records(diags)
            )
    options = interp.RunOptions(
        trace=trace_stream is not None,
        trace_stream=trace_stream,
        max_steps=req.max_steps,
        max_call_depth=req.max_call_depth,
    )
    report = interp.run_module(module, entry=req.entry, options=options)
    if report.status is interp.RunStatus.FAULTED:
        return models.RunResponse(
            ok=False, phase="faulted", steps=report.steps,
            fault=_fault_record(report.fault),
        )
    if report.status is interp.RunStatus.STEP_LIMIT:
        return models.RunResponse(ok=False, phase="step-limit", steps=report.steps)
    leaks = _leak_records(report)
    # A Void entry has no observable result; report None rather than unit.
    result = report.result
    if result is not None and result.tag is interp.ValueTag.UNIT:
        result = None
    return models.RunResponse(
        ok=not leaks,
        phase="completed",
        steps=report.steps,
        result=str(result) if result is not None else None,
        leaks=leaks,
    )


def run_fuzz(req: models.FuzzRequest) -> models.FuzzResponse:
    features = frozenset(req.features)
    programs = static_rejections = faults = roundtrip_failures = 0
    failures: list[models.FuzzFailure] = []

    def record(seed: int, kind: str, detail: str) -> None:
        if len(failures) < 10:
            failures.append(models.FuzzFailure(seed=seed, kind=kind, detail=detail))

    for seed in range(req.seed, req.seed + req.count):
        cfg = harness.GenConfig(
            seed=seed,
            max_instrs=req.max_instrs,
            max_cells=req.max_cells,
            features=features,
        )
        module = harness.generate_program(cfg)
        programs += 1
        diags = checker.check_module(module)
        if diags:
            static_rejections += 1
            record(seed, "static", f"{diags[0].code.value}: {diags[0].message}")
            continue
        text = printer.print_module(module)
        try:
            reparsed = parser.parse_module(text, f"<seed {seed}>")
            if reparsed != module:
                raise ValueError("reparsed module differs")
        except (parser.ParseFailure, ValueError) as exc:
            roundtrip_failures += 1
            record(seed, "roundtrip", str(exc))
            continue
        report = interp.run_module(
            module, options=interp.RunOptions(max_call_depth=64)
        )
        if report.fault is not None:
            faults += 1
            record(seed, "fault", str(report.fault))
    ok = not (static_rejections or faults or roundtrip_failures)
    return models.FuzzResponse(
        ok=ok,
        programs=programs,
        static_rejections=static_rejections,
        faults=faults,
        roundtrip_failures=roundtrip_failures,
        failures=failures,
    )


def run_oracle(req: models.OracleRequest) -> models.OracleResponse:
    bounds = oracle.OracleBounds(max_instrs=req.max_instrs, max_cells=req.max_cells)
    report = oracle.agreement_report(bounds)
    return models.OracleResponse(
        ok=report.ok,
        programs=report.programs,
        accepted=report.accepted,
        rejected=report.rejected,
        disagreements=[
            f"checker={'accept' if d.checker_accepts else 'reject'} "
            f"oracle={'accept' if d.oracle_accepts else 'reject'} "
            f"codes={list(d.diagnostics)}\n{d.program}"
            for d in report.disagreements
        ],
    )
