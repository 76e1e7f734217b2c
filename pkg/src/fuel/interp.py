"""Instrumented reference interpreter.

Execution models memory as numbered runtime cells with a state machine
(junk, initialised, freed) and a type tag fixed at allocation.  Memory
discipline violations surface as faults rather than undefined behaviour,
which is what makes the interpreter usable as a soundness oracle for the
static checker: a checked program must never fault.

Dynamic capabilities exist at runtime as a registry of claimable cells;
`assuming` consults it and silently skips its body when the guard fails.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, TextIO

from . import ir
from .diagnostics import SourceSpan


class FaultKind(Enum):
    JUNK_READ = "JunkRead"
    USE_AFTER_FREE = "UseAfterFree"
    DOUBLE_FREE = "DoubleFree"
    FREE_OF_STACK = "FreeOfStack"
    TYPE_TAG_MISMATCH = "TypeTagMismatch"
    MISSING_BODY = "MissingBody"
    STACK_OVERFLOW_GUARD = "StackOverflowGuard"


class Fault(Exception):
    def __init__(
        self,
        kind: FaultKind,
        detail: str,
        span: Optional[SourceSpan] = None,
        cell_id: Optional[int] = None,
    ) -> None:
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail
        self.span = span
        self.cell_id = cell_id


class _StepLimit(Exception):
    pass


class ValueTag(Enum):
    BOOL = "Bool"
    I32 = "I32"
    F32 = "F32"
    ADDR = "Addr"
    UNIT = "Unit"


@dataclass(frozen=True)
class Value:
    tag: ValueTag
    payload: object = None

    def __str__(self) -> str:
        if self.tag is ValueTag.BOOL:
            return "true" if self.payload else "false"
        if self.tag is ValueTag.I32:
            return str(self.payload)
        if self.tag is ValueTag.F32:
            return repr(self.payload)
        if self.tag is ValueTag.ADDR:
            return f"#{self.payload}"
        return "()"


UNIT_VALUE = Value(ValueTag.UNIT)

_LIT_TAGS = {
    ir.Layout.BOOL: ValueTag.BOOL,
    ir.Layout.INT32: ValueTag.I32,
    ir.Layout.FLOAT32: ValueTag.F32,
    ir.Layout.ADDRESS: ValueTag.ADDR,
}

_VALUE_LAYOUTS = {
    ValueTag.BOOL: ir.Layout.BOOL,
    ValueTag.I32: ir.Layout.INT32,
    ValueTag.F32: ir.Layout.FLOAT32,
    ValueTag.ADDR: ir.Layout.ADDRESS,
}


class CellState(Enum):
    JUNK = "junk"
    INIT = "init"
    FREED = "freed"


@dataclass
class RuntimeCell:
    cell_id: int
    static_name: str
    function: str
    activation: int
    region: ir.Region
    layout: ir.Layout
    state: CellState = CellState.JUNK
    value: Optional[Value] = None  # retained after free for inspection
    claimed: bool = False


@dataclass(frozen=True)
class LeakedCell:
    cell_id: int
    static_name: str
    function: str
    activation: int
    layout: ir.Layout


class RunStatus(Enum):
    COMPLETED = "completed"
    FAULTED = "faulted"
    STEP_LIMIT = "step-limit"


@dataclass(frozen=True)
class ExitReport:
    status: RunStatus
    steps: int
    fault: Optional[Fault] = None
    leaked: tuple = ()
    result: Optional[Value] = None


@dataclass(frozen=True)
class RunOptions:
    trace: bool = False
    max_steps: int = 10_000_000
    max_call_depth: int = 10_000
    trace_stream: Optional[TextIO] = None


@dataclass
class _Frame:
    function: str
    activation: int
    regs: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)  # static cell name -> cell id


@dataclass(frozen=True)
class _Ret:
    value: Value


# Rough number of Python frames per interpreted call, used to size the
# recursion limit when running with a deep call budget.
_FRAMES_PER_CALL = 10
_WORKER_STACK_BYTES = 512 * 1024 * 1024


class Interpreter:
    def __init__(self, module: ir.Module, options: Optional[RunOptions] = None) -> None:
        self.module = module
        self.options = options or RunOptions()
        self.functions = {f.name: f for f in module.functions}
        self.cells: dict[int, RuntimeCell] = {}
        self.registry: set[int] = set()
        self.steps = 0
        self._next_id = 0
        self._activations: dict[str, int] = {}

    # -- public API --

    def run(self, entry: str = "main") -> ExitReport:
        needed = self.options.max_call_depth * _FRAMES_PER_CALL + 2000
        if needed < sys.getrecursionlimit() - 200:
            return self._run(entry)
        return self._run_big_stack(entry, needed)

    def _run_big_stack(self, entry: str, limit: int) -> ExitReport:
        outcome: list = []

        def work() -> None:
            old = sys.getrecursionlimit()
            sys.setrecursionlimit(limit)
            try:
                outcome.append(self._run(entry))
            except BaseException as exc:  # re-raised on the caller's thread
                outcome.append(exc)
            finally:
                sys.setrecursionlimit(old)

        old_size = threading.stack_size(_WORKER_STACK_BYTES)
        try:
            worker = threading.Thread(target=work, name="fuel-run")
            worker.start()
            worker.join()
        finally:
            threading.stack_size(old_size)
        result = outcome[0]
        if isinstance(result, BaseException):
            raise result
        return result

    def _run(self, entry: str) -> ExitReport:
        try:
            fn = self.functions.get(entry)
            if fn is None:
                raise Fault(FaultKind.MISSING_BODY, f"no function named {entry!r}")
            if fn.body is None:
                raise Fault(FaultKind.MISSING_BODY, f"function {entry!r} has no body")
            if fn.sig.param_types or fn.sig.pre_caps:
                raise Fault(
                    FaultKind.MISSING_BODY,
                    f"entry function {entry!r} must take no arguments and "
                    f"no capabilities",
                )
            result = self._invoke(fn, [], depth=1)
        except Fault as fault:
            return ExitReport(RunStatus.FAULTED, self.steps, fault=fault)
        except _StepLimit:
            return ExitReport(RunStatus.STEP_LIMIT, self.steps)
        leaked = tuple(
            LeakedCell(c.cell_id, c.static_name, c.function, c.activation, c.layout)
            for c in self.cells.values()
            if c.region is ir.Region.HEAP and c.state is not CellState.FREED
        )
        return ExitReport(RunStatus.COMPLETED, self.steps, leaked=leaked, result=result)

    def find_cell(
        self, static_name: str, function: str = "main", activation: int = 0
    ) -> Optional[RuntimeCell]:
        for cell in self.cells.values():
            if (
                cell.static_name == static_name
                and cell.function == function
                and cell.activation == activation
            ):
                return cell
        return None

    # -- execution --

    def _invoke(self, fn: ir.Function, args: list, depth: int) -> Value:
        if depth > self.options.max_call_depth:
            raise Fault(
                FaultKind.STACK_OVERFLOW_GUARD,
                f"call depth exceeded {self.options.max_call_depth}",
                span=fn.span,
            )
        activation = self._activations.get(fn.name, 0)
        self._activations[fn.name] = activation + 1
        frame = _Frame(fn.name, activation)
        if len(args) != len(fn.param_regs):
            raise Fault(
                FaultKind.TYPE_TAG_MISMATCH,
                f"{fn.name!r} expects {len(fn.param_regs)} argument(s), "
                f"got {len(args)}",
                span=fn.span,
            )
        for reg, value in zip(fn.param_regs, args):
            frame.regs[reg] = value
        result = self._exec_block(frame, fn.body, depth)
        if isinstance(result, _Ret):
            return result.value
        return UNIT_VALUE

    def _exec_block(self, frame: _Frame, block: ir.Block, depth: int):
        my_stack_cells: list[int] = []
        try:
            for instr in block.instrs:
                result = self._exec_instr(frame, instr, depth, my_stack_cells)
                if isinstance(result, _Ret):
                    return result
            return None
        finally:
            for cid in my_stack_cells:
                cell = self.cells[cid]
                if cell.state is not CellState.FREED:
                    cell.state = CellState.FREED
                    cell.claimed = False
                    self.registry.discard(cid)

    def _exec_instr(self, frame: _Frame, instr: ir.Instruction, depth: int, stack_cells: list):
        if self.steps >= self.options.max_steps:
            raise _StepLimit()
        self.steps += 1
        result = self._dispatch(frame, instr, depth, stack_cells)
        if self.options.trace:
            self._trace(instr)
        return result

    def _dispatch(self, frame: _Frame, instr: ir.Instruction, depth: int, stack_cells: list):
        if isinstance(instr, (ir.SAlloc, ir.HAlloc)):
            self._exec_alloc(frame, instr, stack_cells)
        elif isinstance(instr, ir.Store):
            self._exec_store(frame, instr)
        elif isinstance(instr, ir.Load):
            self._exec_load(frame, instr)
        elif isinstance(instr, ir.Free):
            self._exec_free(frame, instr)
        elif isinstance(instr, ir.Call):
            self._exec_call(frame, instr, depth)
        elif isinstance(instr, ir.If):
            return self._exec_if(frame, instr, depth)
        elif isinstance(instr, ir.Assuming):
            self._exec_assuming(frame, instr, depth)
        elif isinstance(instr, ir.Return):
            value = UNIT_VALUE if instr.value is None else self._eval(frame, instr.value, instr.span)
            return _Ret(value)
        else:
            raise TypeError(f"unknown instruction {instr!r}")
        return None

    def _exec_alloc(self, frame: _Frame, instr, stack_cells: list) -> None:
        try:
            layout = ir.layout_of(instr.ty)
        except ir.NoLayoutError:
            raise Fault(
                FaultKind.TYPE_TAG_MISMATCH,
                f"type {instr.ty} cannot be allocated",
                span=instr.span,
            ) from None
        region = ir.Region.STACK if isinstance(instr, ir.SAlloc) else ir.Region.HEAP
        cid = self._next_id
        self._next_id += 1
        cell = RuntimeCell(cid, instr.cell, frame.function, frame.activation, region, layout)
        self.cells[cid] = cell
        frame.cells[instr.cell] = cid
        if region is ir.Region.STACK:
            stack_cells.append(cid)
        if instr.dst is not None:
            frame.regs[instr.dst] = Value(ValueTag.ADDR, cid)

    def _exec_store(self, frame: _Frame, instr: ir.Store) -> None:
        value = self._eval(frame, instr.value, instr.span)
        cell = self._cell_at(frame, instr.target, instr.span, "store target")
        if cell.state is CellState.FREED:
            raise Fault(
                FaultKind.USE_AFTER_FREE,
                f"store to freed cell {self._describe(cell)}",
                span=instr.span,
                cell_id=cell.cell_id,
            )
        got = _VALUE_LAYOUTS.get(value.tag)
        if got is not cell.layout:
            raise Fault(
                FaultKind.TYPE_TAG_MISMATCH,
                f"cell {self._describe(cell)} is tagged {cell.layout.value} but "
                f"the stored value is {value.tag.value}",
                span=instr.span,
                cell_id=cell.cell_id,
            )
        cell.value = value
        cell.state = CellState.INIT

    def _exec_load(self, frame: _Frame, instr: ir.Load) -> None:
        cell = self._cell_at(frame, instr.src, instr.span, "load source")
        if cell.state is CellState.FREED:
            raise Fault(
                FaultKind.USE_AFTER_FREE,
                f"load from freed cell {self._describe(cell)}",
                span=instr.span,
                cell_id=cell.cell_id,
            )
        if cell.state is CellState.JUNK:
            raise Fault(
                FaultKind.JUNK_READ,
                f"load from uninitialised cell {self._describe(cell)}",
                span=instr.span,
                cell_id=cell.cell_id,
            )
        if instr.dst is not None:
            frame.regs[instr.dst] = cell.value

    def _exec_free(self, frame: _Frame, instr: ir.Free) -> None:
        cell = self._cell_at(frame, instr.target, instr.span, "free target")
        if cell.region is ir.Region.STACK:
            raise Fault(
                FaultKind.FREE_OF_STACK,
                f"free of stack cell {self._describe(cell)}",
                span=instr.span,
                cell_id=cell.cell_id,
            )
        if cell.state is CellState.FREED:
            raise Fault(
                FaultKind.DOUBLE_FREE,
                f"double free of cell {self._describe(cell)}",
                span=instr.span,
                cell_id=cell.cell_id,
            )
        cell.state = CellState.FREED
        cell.claimed = False
        self.registry.discard(cell.cell_id)

    def _exec_call(self, frame: _Frame, instr: ir.Call, depth: int) -> None:
        args = [self._eval(frame, a, instr.span) for a in instr.args]
        fn = self.functions.get(instr.callee)
        if fn is None:
            if instr.callee in ir.INTRINSIC_NAMES:
                value = _intrinsic(instr.callee, args, instr.span)
                if instr.dst is not None:
                    frame.regs[instr.dst] = value
                return
            raise Fault(
                FaultKind.MISSING_BODY,
                f"call to unknown function {instr.callee!r}",
                span=instr.span,
            )
        if fn.body is None:
            raise Fault(
                FaultKind.MISSING_BODY,
                f"function {instr.callee!r} has no body",
                span=instr.span,
            )
        self._register_dynamic_args(fn, args)
        value = self._invoke(fn, args, depth + 1)
        if instr.dst is not None:
            frame.regs[instr.dst] = value

    def _register_dynamic_args(self, fn: ir.Function, args: list) -> None:
        """Cells handed over under a dynamic capability become claimable."""
        sig = fn.sig
        for cap in sig.pre_caps:
            if cap.qual is not ir.Qualifier.DYNAMIC:
                continue
            for i, pty in enumerate(sig.param_types):
                if i >= len(args):
                    break
                if pty == ir.AddrType(cap.cell):
                    value = args[i]
                    if value.tag is ValueTag.ADDR:
                        cell = self.cells.get(value.payload)
                        if (
                            cell is not None
                            and cell.state is not CellState.FREED
                            and not cell.claimed
                        ):
                            self.registry.add(cell.cell_id)
                    break

    def _exec_if(self, frame: _Frame, instr: ir.If, depth: int):
        cond = self._eval(frame, instr.cond, instr.span)
        if cond.tag is not ValueTag.BOOL:
            raise Fault(
                FaultKind.TYPE_TAG_MISMATCH,
                f"if condition is {cond.tag.value}, not Bool",
                span=instr.span,
            )
        block = instr.then_block if cond.payload else instr.else_block
        return self._exec_block(frame, block, depth)

    def _exec_assuming(self, frame: _Frame, instr: ir.Assuming, depth: int) -> None:
        # A missing register binding is a runtime protocol violation; any
        # other irregularity just fails the guard and skips the body.
        reg_value = frame.regs.get(instr.reg)
        if reg_value is None:
            raise Fault(
                FaultKind.TYPE_TAG_MISMATCH,
                f"register {instr.reg!r} has no value",
                span=instr.span,
            )
        if reg_value.tag is not ValueTag.ADDR:
            return
        cell = self.cells.get(reg_value.payload)
        if cell is None:
            return
        try:
            claimed_layout = ir.layout_of(instr.ty)
        except ir.NoLayoutError:
            return
        guard = (
            cell.cell_id in self.registry
            and cell.state is CellState.INIT
            and cell.layout is claimed_layout
            and not cell.claimed
        )
        if not guard:
            return
        cell.claimed = True
        self.registry.discard(cell.cell_id)
        result = self._exec_block(frame, instr.body, depth)
        assert result is None, "return inside assuming is rejected earlier"
        if cell.state is not CellState.FREED:
            cell.claimed = False
            self.registry.add(cell.cell_id)

    # -- small helpers --

    def _eval(self, frame: _Frame, op: ir.Operand, span: Optional[SourceSpan]) -> Value:
        if isinstance(op, ir.LitOperand):
            tag = _LIT_TAGS[ir.layout_of(op.ty)]
            return Value(tag, op.value)
        value = frame.regs.get(op.name)
        if value is None:
            raise Fault(
                FaultKind.TYPE_TAG_MISMATCH,
                f"register {op.name!r} has no value",
                span=span,
            )
        return value

    def _cell_at(self, frame: _Frame, op: ir.Operand, span, what: str) -> RuntimeCell:
        value = self._eval(frame, op, span)
        if value.tag is not ValueTag.ADDR:
            raise Fault(
                FaultKind.TYPE_TAG_MISMATCH,
                f"{what} is {value.tag.value}, not an address",
                span=span,
            )
        cell = self.cells.get(value.payload)
        if cell is None:
            raise Fault(
                FaultKind.TYPE_TAG_MISMATCH,
                f"{what} points at no allocated cell",
                span=span,
            )
        return cell

    def _describe(self, cell: RuntimeCell) -> str:
        return f"{cell.static_name}#{cell.activation} (id {cell.cell_id})"

    def _trace(self, instr: ir.Instruction) -> None:
        stream = self.options.trace_stream or sys.stderr
        summary = ", ".join(
            f"{c.static_name}#{c.activation}={self._state_repr(c)}"
            for c in self.cells.values()
        )
        stream.write(f"step {self.steps}: {_instr_repr(instr)} ; cells: {summary}\n")

    @staticmethod
    def _state_repr(cell: RuntimeCell) -> str:
        if cell.state is CellState.JUNK:
            return "junk"
        if cell.state is CellState.FREED:
            return "freed"
        return str(cell.value)


def _instr_repr(instr: ir.Instruction) -> str:
    from . import printer

    if isinstance(instr, ir.If):
        return f"if {printer.print_operand(instr.cond)}"
    if isinstance(instr, ir.Assuming):
        return f"assuming {instr.reg}: {printer.print_type(instr.ty)}"
    return printer._print_instr(instr, 0)[0]


def _intrinsic(name: str, args: list, span: Optional[SourceSpan]) -> Value:
    if len(args) != 2:
        raise Fault(
            FaultKind.TYPE_TAG_MISMATCH,
            f"intrinsic {name!r} expects 2 arguments, got {len(args)}",
            span=span,
        )
    left, right = args
    if left.tag is ValueTag.I32 and right.tag is ValueTag.I32:
        a, b = left.payload, right.payload
        if name == "add":
            return Value(ValueTag.I32, ir.wrap_i32(a + b))
        if name == "sub":
            return Value(ValueTag.I32, ir.wrap_i32(a - b))
        if name == "mul":
            return Value(ValueTag.I32, ir.wrap_i32(a * b))
        if name == "eq":
            return Value(ValueTag.BOOL, a == b)
        return Value(ValueTag.BOOL, a < b)
    if left.tag is ValueTag.F32 and right.tag is ValueTag.F32:
        a, b = left.payload, right.payload
        if name == "add":
            return Value(ValueTag.F32, ir.round_f32(a + b))
        if name == "sub":
            return Value(ValueTag.F32, ir.round_f32(a - b))
        if name == "mul":
            return Value(ValueTag.F32, ir.round_f32(a * b))
        if name == "eq":
            return Value(ValueTag.BOOL, a == b)
        return Value(ValueTag.BOOL, a < b)
    raise Fault(
        FaultKind.TYPE_TAG_MISMATCH,
        f"intrinsic {name!r} needs two I32 or two F32 values",
        span=span,
    )


def run_module(
    module: ir.Module, entry: str = "main", options: Optional[RunOptions] = None
) -> ExitReport:
    """Run `entry` and summarise the outcome; see Interpreter for details."""
    return Interpreter(module, options).run(entry)
