"""Core data model for the Fuel intermediate language.

A module is a list of functions.  Function bodies are blocks of register
instructions; memory is modelled as named cells introduced by `salloc`/`halloc`
and governed by capabilities.  Types are immutable values with structural
equality; instruction spans are carried for diagnostics but excluded from
equality so that parse -> print -> parse round-trips compare equal.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Iterable, Iterator, Optional, Union

from .diagnostics import SourceSpan


class NoLayoutError(Exception):
    """Raised when a type has no machine layout (unit, tuples)."""


class UnboundCellVar(Exception):
    """Raised by substitution when a quantified cell variable has no binding."""

    def __init__(self, var: str) -> None:
        super().__init__(f"unbound cell variable {var!r}")
        self.var = var


def round_f32(value: float) -> float:
    """Round a Python float to the nearest IEEE-754 single precision value.

    Doubles beyond the single range overflow to a signed infinity, as the
    hardware rounding would.
    """
    try:
        return struct.unpack("<f", struct.pack("<f", value))[0]
    except OverflowError:
        return math.copysign(math.inf, value)


I32_MIN = -(2**31)
I32_MAX = 2**31 - 1


def wrap_i32(value: int) -> int:
    """Two's-complement wrap-around into the signed 32-bit range."""
    return (value + 2**31) % 2**32 - 2**31


# -- types --------------------------------------------------------------------


class Type:
    """Base class for Fuel types.  Concrete types are frozen dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class BoolType(Type):
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class I32Type(Type):
    def __str__(self) -> str:
        return "I32"


@dataclass(frozen=True)
class F32Type(Type):
    def __str__(self) -> str:
        return "F32"


@dataclass(frozen=True)
class UnitType(Type):
    def __str__(self) -> str:
        return "()"


@dataclass(frozen=True)
class AddrType(Type):
    """Singleton address type: the address of exactly the cell `cell`."""

    cell: str

    def __str__(self) -> str:
        return f"!{self.cell}"


class ExistsAddrType(Type):
    """The erased address type `exists a.!a`.

    The binder name is kept for printing only; all existential address types
    compare equal regardless of binder choice.
    """

    __slots__ = ("binder",)

    def __init__(self, binder: str = "a") -> None:
        self.binder = binder

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExistsAddrType)

    def __hash__(self) -> int:
        return hash(ExistsAddrType)

    def __repr__(self) -> str:
        return f"ExistsAddrType(binder={self.binder!r})"

    def __str__(self) -> str:
        return f"exists {self.binder}.!{self.binder}"


@dataclass(frozen=True)
class JunkType(Type):
    """Wrapper marking possibly-uninitialised contents.  Junk<Junk<t>> = Junk<t>."""

    inner: Type

    def __post_init__(self) -> None:
        inner = self.inner
        while isinstance(inner, JunkType):
            inner = inner.inner
        object.__setattr__(self, "inner", inner)

    def __str__(self) -> str:
        return f"Junk<{self.inner}>"


@dataclass(frozen=True)
class TupleType(Type):
    elems: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "elems", tuple(self.elems))
        if len(self.elems) < 2:
            raise ValueError("tuple types need at least two elements")

    def __str__(self) -> str:
        return "(" + ", ".join(str(e) for e in self.elems) + ")"


BOOL = BoolType()
I32 = I32Type()
F32 = F32Type()
UNIT = UnitType()


class Layout(Enum):
    BOOL = "Bool"
    INT32 = "Int32"
    FLOAT32 = "Float32"
    ADDRESS = "Address"


def layout_of(ty: Type) -> Layout:
    """Machine layout of a type; junk wrapping is transparent."""
    if isinstance(ty, JunkType):
        return layout_of(ty.inner)
    if isinstance(ty, BoolType):
        return Layout.BOOL
    if isinstance(ty, I32Type):
        return Layout.INT32
    if isinstance(ty, F32Type):
        return Layout.FLOAT32
    if isinstance(ty, (AddrType, ExistsAddrType)):
        return Layout.ADDRESS
    raise NoLayoutError(f"type {ty} has no layout")


def normalize_type(ty: Type) -> Type:
    """Rebuild a type so nested junk collapses everywhere. Idempotent."""
    if isinstance(ty, JunkType):
        return JunkType(normalize_type(ty.inner))
    if isinstance(ty, TupleType):
        return TupleType(tuple(normalize_type(e) for e in ty.elems))
    return ty


def free_cell_names(ty: Type) -> set[str]:
    """Cell names occurring free in a type.  The existential binder is closed."""
    if isinstance(ty, AddrType):
        return {ty.cell}
    if isinstance(ty, JunkType):
        return free_cell_names(ty.inner)
    if isinstance(ty, TupleType):
        out: set[str] = set()
        for e in ty.elems:
            out |= free_cell_names(e)
        return out
    return set()


def substitute_cells(ty: Type, subst: dict, variables: Optional[set] = None) -> Type:
    """Replace cell names in `ty` using `subst`.

    When `variables` is given, any name in it that is not covered by `subst`
    raises UnboundCellVar; names outside `variables` are left alone even if
    absent from the substitution.
    """
    if isinstance(ty, AddrType):
        cell = ty.cell
        if cell in subst:
            return AddrType(subst[cell])
        if variables is not None and cell in variables:
            raise UnboundCellVar(cell)
        return ty
    if isinstance(ty, JunkType):
        return JunkType(substitute_cells(ty.inner, subst, variables))
    if isinstance(ty, TupleType):
        return TupleType(tuple(substitute_cells(e, subst, variables) for e in ty.elems))
    return ty


# -- capabilities and signatures ----------------------------------------------


class Qualifier(Enum):
    LINEAR = "linear"
    BORROWED = "borrowed"
    DYNAMIC = "dynamic"


class Region(Enum):
    STACK = "stack"
    HEAP = "heap"


@dataclass(frozen=True)
class CellCap:
    """Capability over a memory cell as written in a signature."""

    cell: str
    ty: Type
    qual: Qualifier = Qualifier.LINEAR

    def __post_init__(self) -> None:
        object.__setattr__(self, "ty", normalize_type(self.ty))


@dataclass(frozen=True)
class RegisterCap:
    """A register binding.  Registers never hold junk."""

    reg: str
    ty: Type

    def __post_init__(self) -> None:
        if isinstance(self.ty, JunkType):
            raise ValueError(f"register {self.reg!r} cannot have a junk type")


@dataclass(frozen=True)
class Signature:
    cell_vars: tuple = ()
    param_types: tuple = ()
    return_type: Type = UNIT
    pre_caps: tuple = ()
    post_caps: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "cell_vars", tuple(self.cell_vars))
        object.__setattr__(
            self, "param_types", tuple(normalize_type(t) for t in self.param_types)
        )
        object.__setattr__(self, "return_type", normalize_type(self.return_type))
        object.__setattr__(self, "pre_caps", tuple(self.pre_caps))
        object.__setattr__(self, "post_caps", tuple(self.post_caps))


# -- operands and instructions ------------------------------------------------


@dataclass(frozen=True)
class RegOperand:
    name: str


@dataclass(frozen=True)
class LitOperand:
    ty: Type
    value: object

    def __post_init__(self) -> None:
        if isinstance(self.ty, BoolType) and not isinstance(self.value, bool):
            raise ValueError("boolean literal needs a bool value")
        if isinstance(self.ty, I32Type):
            if isinstance(self.value, bool) or not isinstance(self.value, int):
                raise ValueError("integer literal needs an int value")
            if not I32_MIN <= self.value <= I32_MAX:
                raise ValueError("integer literal out of 32-bit range")
        if isinstance(self.ty, F32Type):
            if not isinstance(self.value, float):
                raise ValueError("float literal needs a float value")
            object.__setattr__(self, "value", round_f32(self.value))
        if not isinstance(self.ty, (BoolType, I32Type, F32Type)):
            raise ValueError(f"literals of type {self.ty} are not expressible")


Operand = Union[RegOperand, LitOperand]


class Instruction:
    __slots__ = ()


def _span_field():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SAlloc(Instruction):
    dst: Optional[str]
    ty: Type
    cell: str
    span: Optional[SourceSpan] = _span_field()

    def __post_init__(self) -> None:
        object.__setattr__(self, "ty", normalize_type(self.ty))


@dataclass(frozen=True)
class HAlloc(Instruction):
    dst: Optional[str]
    ty: Type
    cell: str
    span: Optional[SourceSpan] = _span_field()

    def __post_init__(self) -> None:
        object.__setattr__(self, "ty", normalize_type(self.ty))


@dataclass(frozen=True)
class Store(Instruction):
    value: Operand
    target: Operand
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Load(Instruction):
    dst: Optional[str]
    src: Operand
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Free(Instruction):
    target: Operand
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Call(Instruction):
    dst: Optional[str]
    callee: str
    args: tuple = ()
    span: Optional[SourceSpan] = _span_field()

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Block:
    instrs: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "instrs", tuple(self.instrs))


@dataclass(frozen=True)
class If(Instruction):
    cond: Operand
    then_block: Block = Block()
    else_block: Block = Block()
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Assuming(Instruction):
    reg: str
    ty: Type
    body: Block = Block()
    span: Optional[SourceSpan] = _span_field()

    def __post_init__(self) -> None:
        object.__setattr__(self, "ty", normalize_type(self.ty))


@dataclass(frozen=True)
class Return(Instruction):
    value: Optional[Operand] = None
    span: Optional[SourceSpan] = _span_field()


@dataclass(frozen=True)
class Function:
    name: str
    param_regs: tuple
    sig: Signature
    body: Optional[Block] = None
    span: Optional[SourceSpan] = _span_field()

    def __post_init__(self) -> None:
        object.__setattr__(self, "param_regs", tuple(self.param_regs))

    @property
    def is_extern(self) -> bool:
        return self.body is None


@dataclass(frozen=True)
class Module:
    functions: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "functions", tuple(self.functions))

    def function(self, name: str) -> Optional[Function]:
        for f in self.functions:
            if f.name == name:
                return f
        return None


# Builtin arithmetic/comparison helpers available without declaration.
INTRINSIC_ARITH = frozenset({"add", "sub", "mul"})
INTRINSIC_CMP = frozenset({"eq", "lt"})
INTRINSIC_NAMES = INTRINSIC_ARITH | INTRINSIC_CMP


# -- structural validation -----------------------------------------------------


@dataclass(frozen=True)
class StructuralIssue:
    """A shape problem that makes a module unsuitable for checking or running."""

    kind: str  # "duplicate" | "unbound" | "syntax"
    message: str
    span: Optional[SourceSpan] = _span_field()


def _walk_instrs(block: Block) -> Iterator[Instruction]:
    for instr in block.instrs:
        yield instr
        if isinstance(instr, If):
            yield from _walk_instrs(instr.then_block)
            yield from _walk_instrs(instr.else_block)
        elif isinstance(instr, Assuming):
            yield from _walk_instrs(instr.body)


def walk_instructions(fn: Function) -> Iterator[Instruction]:
    """Preorder traversal of a function body; nested blocks follow their header."""
    if fn.body is not None:
        yield from _walk_instrs(fn.body)


def _terminates(instr: Instruction) -> bool:
    if isinstance(instr, Return):
        return True
    if isinstance(instr, If):
        return (
            bool(instr.then_block.instrs)
            and _terminates(instr.then_block.instrs[-1])
            and bool(instr.else_block.instrs)
            and _terminates(instr.else_block.instrs[-1])
        )
    return False


def _operands(instr: Instruction) -> Iterable[Operand]:
    if isinstance(instr, Store):
        return (instr.value, instr.target)
    if isinstance(instr, Load):
        return (instr.src,)
    if isinstance(instr, Free):
        return (instr.target,)
    if isinstance(instr, Call):
        return instr.args
    if isinstance(instr, If):
        return (instr.cond,)
    if isinstance(instr, Return):
        return (instr.value,) if instr.value is not None else ()
    return ()


def validate_module(module: Module) -> list[StructuralIssue]:
    """Check module shape: naming discipline, arities, return placement.

    The parser funnels these into parse diagnostics; programmatic users get
    the raw issues.  A module with issues must not reach the checker or the
    interpreter.
    """
    issues: list[StructuralIssue] = []
    seen_fns: set[str] = set()
    for fn in module.functions:
        if fn.name in seen_fns:
            issues.append(
                StructuralIssue("duplicate", f"duplicate function name {fn.name!r}", fn.span)
            )
            continue
        seen_fns.add(fn.name)
        issues.extend(_validate_function(fn))
    return issues


def _validate_function(fn: Function) -> list[StructuralIssue]:
    issues: list[StructuralIssue] = []
    sig = fn.sig

    if len(fn.param_regs) != len(sig.param_types):
        issues.append(
            StructuralIssue(
                "syntax",
                f"function {fn.name!r} declares {len(fn.param_regs)} parameter(s) "
                f"but its signature lists {len(sig.param_types)} type(s)",
                fn.span,
            )
        )

    defined: set[str] = set()
    for reg in fn.param_regs:
        if reg in defined:
            issues.append(
                StructuralIssue("duplicate", f"duplicate parameter register {reg!r}", fn.span)
            )
        defined.add(reg)

    seen_vars: set[str] = set()
    for var in sig.cell_vars:
        if var in seen_vars:
            issues.append(
                StructuralIssue("duplicate", f"duplicate cell variable {var!r}", fn.span)
            )
        seen_vars.add(var)

    if fn.body is None:
        return issues

    # First pass: collect every register assignment and cell introduction.
    cells: set[str] = set()
    for instr in walk_instructions(fn):
        if isinstance(instr, (SAlloc, HAlloc)):
            if instr.cell in cells or instr.cell in seen_vars:
                issues.append(
                    StructuralIssue(
                        "duplicate", f"cell name {instr.cell!r} introduced twice", instr.span
                    )
                )
            cells.add(instr.cell)
        dst = getattr(instr, "dst", None)
        if dst is not None:
            if dst in defined:
                issues.append(
                    StructuralIssue(
                        "duplicate", f"register {dst!r} assigned more than once", instr.span
                    )
                )
            defined.add(dst)

    # Cell names a body type may mention: locally introduced cells, the
    # signature's quantified variables, and any concrete cells in its caps.
    known_cells = set(cells) | seen_vars
    for cap in sig.pre_caps + sig.post_caps:
        known_cells.add(cap.cell)
        known_cells |= free_cell_names(cap.ty)

    for instr in walk_instructions(fn):
        for op in _operands(instr):
            if isinstance(op, RegOperand) and op.name not in defined:
                issues.append(
                    StructuralIssue(
                        "unbound", f"register {op.name!r} is never assigned", instr.span
                    )
                )
        if isinstance(instr, Assuming) and instr.reg not in defined:
            issues.append(
                StructuralIssue(
                    "unbound", f"register {instr.reg!r} is never assigned", instr.span
                )
            )
        for ty in _instr_types(instr):
            for cell in free_cell_names(ty):
                if cell not in known_cells:
                    issues.append(
                        StructuralIssue(
                            "unbound", f"cell name {cell!r} is not in scope", instr.span
                        )
                    )

    issues.extend(_validate_block_shape(fn.body, in_assuming=False))
    return issues


def _instr_types(instr: Instruction) -> Iterable[Type]:
    if isinstance(instr, (SAlloc, HAlloc, Assuming)):
        return (instr.ty,)
    return ()


def _validate_block_shape(block: Block, in_assuming: bool) -> list[StructuralIssue]:
    issues: list[StructuralIssue] = []
    for i, instr in enumerate(block.instrs):
        if isinstance(instr, Return) and in_assuming:
            issues.append(
                StructuralIssue("syntax", "return is not allowed inside assuming", instr.span)
            )
        if _terminates(instr) and i != len(block.instrs) - 1:
            issues.append(
                StructuralIssue(
                    "syntax", "unreachable code after a returning statement", block.instrs[i + 1].span
                )
            )
        if isinstance(instr, If):
            issues.extend(_validate_block_shape(instr.then_block, in_assuming))
            issues.extend(_validate_block_shape(instr.else_block, in_assuming))
        elif isinstance(instr, Assuming):
            issues.extend(_validate_block_shape(instr.body, in_assuming=True))
    return issues
