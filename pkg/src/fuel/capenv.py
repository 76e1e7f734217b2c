"""Typing environment for the capability checker.

The environment tracks register bindings (lexically scoped, single
assignment) and one capability per memory cell.  Cell capabilities are
flow-sensitive: stores update them in place, frees consume them, and control
flow joins require both sides to agree exactly.  Consumed cells leave a
tombstone so later uses can be reported as use-after-consume rather than a
bare missing capability.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional

from . import ir
from .ir import Qualifier, Region


class CapEnvError(Exception):
    """Internal environment violation; `kind` names the broken precondition."""

    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


class JoinError(Exception):
    """Two branch environments disagree; `cell` is the first divergent cell."""

    def __init__(self, cell: str, message: str) -> None:
        super().__init__(message)
        self.cell = cell


class UnifyError(Exception):
    """Parameter unification failure; `kind` is one of ArityMismatch,
    TypeMismatch, Conflict, UnboundVar."""

    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class CellEntry:
    """The capability currently held for one cell."""

    ty: ir.Type
    qual: Qualifier
    region: Region
    depth: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ty", ir.normalize_type(self.ty))


@dataclass(frozen=True)
class CapDelta:
    """Net capability effect of a step: cells consumed and caps produced."""

    consumed: tuple = ()
    produced: tuple = ()


class TypingEnv:
    """Mutable checker state for one function body."""

    def __init__(self) -> None:
        self._scopes: list[dict[str, ir.Type]] = []
        self._cells: dict[str, CellEntry] = {}
        self._consumed: set[str] = set()

    # -- register scopes --

    def push_scope(self) -> None:
        self._scopes.append({})

    def pop_scope(self) -> None:
        self._scopes.pop()

    def bind_register(self, reg: str, ty: ir.Type) -> None:
        ty = ir.normalize_type(ty)
        if isinstance(ty, ir.JunkType):
            raise CapEnvError("JunkRegister", f"register {reg!r} cannot hold junk")
        for scope in self._scopes:
            if reg in scope:
                raise CapEnvError("Rebind", f"register {reg!r} is already bound")
        if not self._scopes:
            raise CapEnvError("NoScope", "no open register scope")
        self._scopes[-1][reg] = ty

    def lookup_register(self, reg: str) -> Optional[ir.Type]:
        for scope in reversed(self._scopes):
            if reg in scope:
                return scope[reg]
        return None

    def register_caps(self) -> list[ir.RegisterCap]:
        out = []
        for scope in self._scopes:
            for reg, ty in scope.items():
                out.append(ir.RegisterCap(reg, ty))
        return out

    # -- cell capabilities --

    def cell(self, cell: str) -> Optional[CellEntry]:
        return self._cells.get(cell)

    def cells(self) -> dict[str, CellEntry]:
        return dict(self._cells)

    def was_consumed(self, cell: str) -> bool:
        return cell in self._consumed

    def produce_cell(
        self,
        cell: str,
        ty: ir.Type,
        region: Region,
        depth: int = 0,
        qual: Qualifier = Qualifier.LINEAR,
    ) -> None:
        if cell in self._cells:
            raise CapEnvError("CellExists", f"cell {cell!r} already has a capability")
        self._cells[cell] = CellEntry(ty, qual, region, depth)
        self._consumed.discard(cell)

    def strong_update(self, cell: str, ty: ir.Type) -> None:
        entry = self._require(cell)
        if entry.qual is not Qualifier.LINEAR:
            raise CapEnvError("NotLinear", f"cell {cell!r} is not held linearly")
        self._cells[cell] = replace(entry, ty=ir.normalize_type(ty))

    def consume_cell(self, cell: str) -> None:
        entry = self._require(cell)
        if entry.qual is not Qualifier.LINEAR:
            raise CapEnvError("NotLinear", f"cell {cell!r} is not held linearly")
        del self._cells[cell]
        self._consumed.add(cell)

    def weaken_to_dynamic(self, cell: str) -> None:
        entry = self._require(cell)
        if entry.qual is not Qualifier.LINEAR:
            raise CapEnvError("NotLinear", f"cell {cell!r} is not held linearly")
        self._cells[cell] = replace(entry, qual=Qualifier.DYNAMIC)

    def set_cell(self, cell: str, entry: CellEntry) -> None:
        self._cells[cell] = entry
        self._consumed.discard(cell)

    def remove_cell(self, cell: str) -> None:
        """Settle a capability without marking the cell consumed."""
        self._require(cell)
        del self._cells[cell]

    def consume_stack_at_depth(self, depth: int) -> list[str]:
        """Drop every stack-region capability introduced at `depth`.

        Models automatic reclamation when a lexical block ends.  Returns the
        affected cell names (sorted, for deterministic reporting).
        """
        gone = sorted(
            c for c, e in self._cells.items()
            if e.region is Region.STACK and e.depth >= depth
        )
        for cell in gone:
            del self._cells[cell]
            self._consumed.add(cell)
        return gone

    def _require(self, cell: str) -> CellEntry:
        entry = self._cells.get(cell)
        if entry is None:
            raise CapEnvError("NoCap", f"no capability for cell {cell!r}")
        return entry

    # -- whole-environment operations --

    def clone(self) -> "TypingEnv":
        out = TypingEnv()
        out._scopes = [dict(s) for s in self._scopes]
        out._cells = dict(self._cells)
        out._consumed = set(self._consumed)
        return out

    def assign_from(self, other: "TypingEnv") -> None:
        self._scopes = [dict(s) for s in other._scopes]
        self._cells = dict(other._cells)
        self._consumed = set(other._consumed)

    def first_cell_divergence(self, other: "TypingEnv") -> Optional[str]:
        """Name of the lowest-sorted cell on which the two cell maps differ."""
        names = sorted(set(self._cells) | set(other._cells))
        for name in names:
            if self._cells.get(name) != other._cells.get(name):
                return name
        return None

    def diff(self, later: "TypingEnv") -> CapDelta:
        """Capability delta from this environment to a later one."""
        consumed = tuple(sorted(c for c in self._cells if c not in later._cells))
        produced = tuple(
            ir.CellCap(c, e.ty, e.qual)
            for c, e in sorted(later._cells.items())
            if self._cells.get(c) != e
        )
        return CapDelta(consumed, produced)


def join_envs(left: TypingEnv, right: TypingEnv) -> TypingEnv:
    """Join two branch environments; they must agree cell-for-cell.

    The register scopes are expected to be identical because branches cannot
    leak bindings; a mismatch there is a caller bug, not a program error.
    """
    if left._scopes != right._scopes:
        raise ValueError("join applied to environments with different registers")
    divergent = left.first_cell_divergence(right)
    if divergent is not None:
        l, r = left.cell(divergent), right.cell(divergent)
        raise JoinError(
            divergent,
            f"cell {divergent!r} diverges between branches: "
            f"{_describe(l)} vs {_describe(r)}",
        )
    out = left.clone()
    out._consumed |= right._consumed
    return out


def _describe(entry: Optional[CellEntry]) -> str:
    if entry is None:
        return "no capability"
    return f"{entry.qual.value} {entry.ty}"


def unify_params(sig: ir.Signature, arg_types: list) -> dict:
    """Match declared parameter types against argument types.

    Returns the substitution for the signature's quantified cell variables.
    Unification is first-order and syntactic: quantified variables bind cell
    names, everything else must match exactly.
    """
    if len(arg_types) != len(sig.param_types):
        raise UnifyError(
            "ArityMismatch",
            f"expected {len(sig.param_types)} argument(s), got {len(arg_types)}",
        )
    variables = set(sig.cell_vars)
    subst: dict[str, str] = {}

    def go(param: ir.Type, arg: ir.Type) -> None:
        if isinstance(param, ir.AddrType):
            if param.cell in variables:
                if not isinstance(arg, ir.AddrType):
                    raise UnifyError(
                        "TypeMismatch", f"expected an address for {param}, got {arg}"
                    )
                bound = subst.get(param.cell)
                if bound is not None and bound != arg.cell:
                    raise UnifyError(
                        "Conflict",
                        f"cell variable {param.cell!r} bound to both "
                        f"{bound!r} and {arg.cell!r}",
                    )
                subst[param.cell] = arg.cell
                return
            if param != arg:
                raise UnifyError("TypeMismatch", f"expected {param}, got {arg}")
            return
        if isinstance(param, ir.JunkType):
            if not isinstance(arg, ir.JunkType):
                raise UnifyError("TypeMismatch", f"expected {param}, got {arg}")
            go(param.inner, arg.inner)
            return
        if isinstance(param, ir.TupleType):
            if not isinstance(arg, ir.TupleType) or len(param.elems) != len(arg.elems):
                raise UnifyError("TypeMismatch", f"expected {param}, got {arg}")
            for p, a in zip(param.elems, arg.elems):
                go(p, a)
            return
        if param != arg:
            raise UnifyError("TypeMismatch", f"expected {param}, got {arg}")

    for param, arg in zip(sig.param_types, arg_types):
        go(ir.normalize_type(param), ir.normalize_type(arg))
    for var in sig.cell_vars:
        if var not in subst:
            raise UnifyError(
                "UnboundVar",
                f"cell variable {var!r} is not determined by the arguments",
            )
    return subst
