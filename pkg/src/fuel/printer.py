"""Canonical pretty-printer for Fuel modules.

Printing is the inverse of parsing up to layout: parse(print(m)) == m for any
structurally valid module, and printing a freshly parsed module twice yields
byte-identical text.  The canonical form uses two-space indentation, one
instruction per line, and the `@brw(cell: type)` spelling for qualified
capabilities.
"""

from __future__ import annotations

from . import ir


def format_f32(value: float) -> str:
    """Shortest decimal literal that parses back to the same single float.

    The token grammar has no exponent form, so very large or small magnitudes
    fall back to plain positional notation.
    """
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("non-finite floats are not printable literals")
    for precision in range(1, 18):
        cand = f"{value:.{precision}g}"
        if "e" in cand or "E" in cand:
            continue
        if ir.round_f32(float(cand)) == value:
            if "." not in cand:
                cand += ".0"
            return cand + "f"
    # Positional expansion always round-trips for finite singles.
    cand = f"{value:.60f}".rstrip("0")
    if cand.endswith("."):
        cand += "0"
    return cand + "f"


def print_type(ty: ir.Type) -> str:
    return str(ty)


def print_operand(op: ir.Operand) -> str:
    if isinstance(op, ir.RegOperand):
        return op.name
    assert isinstance(op, ir.LitOperand)
    if isinstance(op.ty, ir.BoolType):
        return "true" if op.value else "false"
    if isinstance(op.ty, ir.I32Type):
        return str(op.value)
    return format_f32(op.value)


def print_cap(cap: ir.CellCap) -> str:
    if cap.qual is ir.Qualifier.LINEAR:
        return f"{cap.cell}: {print_type(cap.ty)}"
    marker = "@brw" if cap.qual is ir.Qualifier.BORROWED else "@dyn"
    return f"{marker}({cap.cell}: {print_type(cap.ty)})"


def print_signature(sig: ir.Signature) -> str:
    parts = []
    if sig.cell_vars:
        parts.append("forall " + ", ".join(sig.cell_vars) + ".")
    parts.append("(" + ", ".join(print_type(t) for t in sig.param_types) + ")")
    if sig.pre_caps:
        parts.append("+[" + ", ".join(print_cap(c) for c in sig.pre_caps) + "]")
    parts.append(" -> " + print_type(sig.return_type))
    if sig.post_caps:
        parts.append("+[" + ", ".join(print_cap(c) for c in sig.post_caps) + "]")
    return "".join(parts)


def _print_instr(instr: ir.Instruction, indent: int) -> list[str]:
    pad = "  " * indent
    dst = getattr(instr, "dst", None)
    lhs = f"{dst if dst is not None else '_'} = "
    if isinstance(instr, ir.SAlloc):
        return [f"{pad}{lhs}salloc {print_type(instr.ty)} at {instr.cell}"]
    if isinstance(instr, ir.HAlloc):
        return [f"{pad}{lhs}halloc {print_type(instr.ty)} at {instr.cell}"]
    if isinstance(instr, ir.Load):
        return [f"{pad}{lhs}load {print_operand(instr.src)}"]
    if isinstance(instr, ir.Call):
        args = "".join(", " + print_operand(a) for a in instr.args)
        return [f"{pad}{lhs}call {instr.callee}{args}"]
    if isinstance(instr, ir.Store):
        return [f"{pad}store {print_operand(instr.value)}, {print_operand(instr.target)}"]
    if isinstance(instr, ir.Free):
        return [f"{pad}free {print_operand(instr.target)}"]
    if isinstance(instr, ir.Return):
        if instr.value is None:
            return [f"{pad}return"]
        return [f"{pad}return {print_operand(instr.value)}"]
    if isinstance(instr, ir.If):
        lines = [f"{pad}if {print_operand(instr.cond)} {{"]
        lines.extend(_print_block(instr.then_block, indent + 1))
        if instr.else_block.instrs:
            lines.append(f"{pad}}} else {{")
            lines.extend(_print_block(instr.else_block, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    if isinstance(instr, ir.Assuming):
        lines = [f"{pad}assuming {instr.reg}: {print_type(instr.ty)} {{"]
        lines.extend(_print_block(instr.body, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    raise TypeError(f"unknown instruction {instr!r}")


def _print_block(block: ir.Block, indent: int) -> list[str]:
    lines: list[str] = []
    for instr in block.instrs:
        lines.extend(_print_instr(instr, indent))
    return lines


def print_function(fn: ir.Function) -> str:
    header = f"func {fn.name}({', '.join(fn.param_regs)}): {print_signature(fn.sig)}"
    if fn.body is None:
        return header
    lines = [header + " {"]
    lines.extend(_print_block(fn.body, 1))
    lines.append("}")
    return "\n".join(lines)


def print_module(module: ir.Module) -> str:
    if not module.functions:
        return ""
    return "\n\n".join(print_function(f) for f in module.functions) + "\n"
