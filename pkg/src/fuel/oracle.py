"""Exhaustive cross-check of the checker on small straight-line programs.

Every program within the bounds is enumerated purely syntactically (no
filtering), then judged twice: once by the real checker and once by a naive
reference simulation written directly against the memory rules.  The two
verdicts must agree on every program; any disagreement is a checker bug or a
rules bug worth looking at by hand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from . import checker, ir, printer

_TYPES = (ir.BOOL, ir.I32, ir.ExistsAddrType())
_LITERALS = (
    ir.LitOperand(ir.BOOL, True),
    ir.LitOperand(ir.I32, 0),
    ir.LitOperand(ir.I32, 1),
)


@dataclass(frozen=True)
class OracleBounds:
    max_instrs: int = 4
    max_cells: int = 2

    def __post_init__(self) -> None:
        if self.max_instrs < 0 or self.max_cells < 0:
            raise ValueError("bounds must be non-negative")


def _wrap(instrs: tuple) -> ir.Module:
    main = ir.Function("main", (), ir.Signature((), (), ir.UNIT, (), ()),
                       ir.Block(instrs))
    return ir.Module((main,))


def enumerate_programs(bounds: OracleBounds) -> Iterator[ir.Module]:
    """All straight-line mains within the bounds, shortest first per branch.

    Store values range over registers and the literal pool; store targets,
    load sources, and free targets are registers (a literal in those
    positions is rejected the same way by both judges, so enumerating them
    would only inflate the space).
    """

    def rec(instrs: tuple, n_regs: int, n_cells: int) -> Iterator[ir.Module]:
        yield _wrap(instrs)
        if len(instrs) >= bounds.max_instrs:
            return
        reg_ops = tuple(ir.RegOperand(f"v{i}") for i in range(n_regs))
        operands = reg_ops + _LITERALS
        if n_cells < bounds.max_cells:
            for cls in (ir.SAlloc, ir.HAlloc):
                for ty in _TYPES:
                    instr = cls(f"v{n_regs}", ty, f"m{n_cells}")
                    yield from rec(instrs + (instr,), n_regs + 1, n_cells + 1)
        for value in operands:
            for target in reg_ops:
                yield from rec(instrs + (ir.Store(value, target),), n_regs, n_cells)
        for src in reg_ops:
            instr = ir.Load(f"v{n_regs}", src)
            yield from rec(instrs + (instr,), n_regs + 1, n_cells)
        for target in reg_ops:
            yield from rec(instrs + (ir.Free(target),), n_regs, n_cells)

    yield from rec((), 0, 0)


def count_programs(bounds: OracleBounds) -> int:
    return sum(1 for _ in enumerate_programs(bounds))


# -- the reference judgement ---------------------------------------------------

# Register descriptors: "bool" | "i32" | "f32" | "eaddr" | ("addr", cell).
# Cell records: layout tag, alive flag, initialised flag, region, contents.


@dataclass
class _CellSim:
    layout: str
    region: str
    alive: bool = True
    init: bool = False
    content: object = None


def _desc_layout(desc: object) -> str:
    if isinstance(desc, tuple) or desc == "eaddr":
        return "addr"
    return desc


def _lit_desc(op: ir.LitOperand) -> str:
    if isinstance(op.ty, ir.BoolType):
        return "bool"
    if isinstance(op.ty, ir.I32Type):
        return "i32"
    return "f32"


def _alloc_layout(ty: ir.Type) -> str:
    if isinstance(ty, ir.BoolType):
        return "bool"
    if isinstance(ty, ir.I32Type):
        return "i32"
    if isinstance(ty, ir.F32Type):
        return "f32"
    return "addr"


def oracle_verdict(module: ir.Module) -> bool:
    """Accept/reject a straight-line single-function module by direct
    simulation of the memory rules."""
    fn = module.functions[0]
    regs: dict[str, object] = {}
    cells: dict[str, _CellSim] = {}

    def operand_desc(op: ir.Operand) -> Optional[object]:
        if isinstance(op, ir.LitOperand):
            return _lit_desc(op)
        return regs.get(op.name)

    for instr in fn.body.instrs:
        if isinstance(instr, (ir.SAlloc, ir.HAlloc)):
            region = "stack" if isinstance(instr, ir.SAlloc) else "heap"
            cells[instr.cell] = _CellSim(_alloc_layout(instr.ty), region)
            regs[instr.dst] = ("addr", instr.cell)
        elif isinstance(instr, ir.Store):
            value = operand_desc(instr.value)
            target = operand_desc(instr.target)
            if value is None or not isinstance(target, tuple):
                return False
            cell = cells[target[1]]
            if not cell.alive:
                return False
            if _desc_layout(value) != cell.layout:
                return False
            cell.init = True
            cell.content = value
        elif isinstance(instr, ir.Load):
            src = operand_desc(instr.src)
            if not isinstance(src, tuple):
                return False
            cell = cells[src[1]]
            if not cell.alive or not cell.init:
                return False
            regs[instr.dst] = cell.content
        elif isinstance(instr, ir.Free):
            target = operand_desc(instr.target)
            if not isinstance(target, tuple):
                return False
            cell = cells[target[1]]
            if not cell.alive or cell.region == "stack":
                return False
            cell.alive = False
        else:
            return False
    return all(not (c.alive and c.region == "heap") for c in cells.values())


@dataclass(frozen=True)
class Disagreement:
    program: str
    checker_accepts: bool
    oracle_accepts: bool
    diagnostics: tuple


@dataclass(frozen=True)
class AgreementReport:
    programs: int
    accepted: int
    rejected: int
    disagreements: tuple

    @property
    def ok(self) -> bool:
        return not self.disagreements


def agreement_report(
    bounds: Optional[OracleBounds] = None, max_examples: int = 10
) -> AgreementReport:
    """Run the checker against the reference judgement on the whole space."""
    bounds = bounds or OracleBounds()
    programs = accepted = rejected = 0
    disagreements: list[Disagreement] = []
    for module in enumerate_programs(bounds):
        programs += 1
        diags = checker.check_module(module)
        check_ok = not diags
        sim_ok = oracle_verdict(module)
        if check_ok:
            accepted += 1
        else:
            rejected += 1
        if check_ok != sim_ok and len(disagreements) < max_examples:
            disagreements.append(
                Disagreement(
                    printer.print_module(module),
                    check_ok,
                    sim_ok,
                    tuple(d.code.value for d in diags),
                )
            )
    return AgreementReport(programs, accepted, rejected, tuple(disagreements))
