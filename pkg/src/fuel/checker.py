"""Flow-sensitive capability checker.

Each function body is checked against its signature in isolation: the
signature's capability preconditions are installed as hypothetical cells, the
body is walked updating a `TypingEnv`, and every return point must settle the
promised postconditions exactly.  Checking a function stops at its first
error; checking a module accumulates one verdict per function so a single
broken function does not hide problems elsewhere.
"""

from __future__ import annotations

from typing import Callable, Optional

from . import ir
from .capenv import (
    CellEntry,
    JoinError,
    TypingEnv,
    UnifyError,
    join_envs,
    unify_params,
)
from .diagnostics import ErrorCode, SourceSpan, TypeDiagnostic
from .ir import Qualifier, Region

RETURNED = object()

_FALLBACK_SPAN = SourceSpan.point("<module>", 1, 1)

OnStep = Callable[[ir.Instruction, dict, dict], None]


class _Abort(Exception):
    def __init__(self, diag: TypeDiagnostic) -> None:
        super().__init__(diag.message)
        self.diag = diag


def check_signature(sig: ir.Signature) -> list[str]:
    """Well-formedness of a signature, independent of any body.

    Returns human-readable problem descriptions; an empty list means the
    signature is usable.  Signatures must be closed: every cell name they
    mention is bound by the quantifier, and each quantified variable must be
    determinable from the parameter types alone.
    """
    problems: list[str] = []
    variables = set(sig.cell_vars)

    param_cells: set[str] = set()
    for ty in sig.param_types:
        param_cells |= ir.free_cell_names(ty)
    for var in sig.cell_vars:
        if var not in param_cells:
            problems.append(
                f"cell variable {var!r} does not occur in the parameter types"
            )

    mentioned: set[str] = set(param_cells) | ir.free_cell_names(sig.return_type)
    for cap in sig.pre_caps + sig.post_caps:
        mentioned.add(cap.cell)
        mentioned |= ir.free_cell_names(cap.ty)
    for cell in sorted(mentioned - variables):
        problems.append(f"cell name {cell!r} is not bound by the quantifier")

    for ty in sig.param_types:
        if _contains_junk(ty):
            problems.append(f"parameter type {ty} mentions junk")
    if _contains_junk(sig.return_type):
        problems.append(f"return type {sig.return_type} mentions junk")

    pre_by_cell: dict[str, ir.CellCap] = {}
    for cap in sig.pre_caps:
        if cap.cell in pre_by_cell:
            problems.append(f"cell {cap.cell!r} appears twice in the preconditions")
        pre_by_cell[cap.cell] = cap

    seen_post: set[str] = set()
    for cap in sig.post_caps:
        if cap.cell in seen_post:
            problems.append(f"cell {cap.cell!r} appears twice in the postconditions")
        seen_post.add(cap.cell)
        if cap.qual is Qualifier.BORROWED:
            problems.append(
                f"cell {cap.cell!r}: a borrowed capability cannot be a postcondition"
            )
            continue
        pre = pre_by_cell.get(cap.cell)
        if pre is None:
            problems.append(
                f"cell {cap.cell!r} is promised after the call but never required before it"
            )
            continue
        if pre.qual is Qualifier.BORROWED:
            problems.append(
                f"cell {cap.cell!r} is only borrowed, it cannot be promised back"
            )
        elif pre.qual is Qualifier.DYNAMIC and cap.qual is not Qualifier.DYNAMIC:
            problems.append(
                f"cell {cap.cell!r} comes in dynamic and cannot be promised as "
                f"{cap.qual.value}"
            )
    return problems


def _contains_junk(ty: ir.Type) -> bool:
    if isinstance(ty, ir.JunkType):
        return True
    if isinstance(ty, ir.TupleType):
        return any(_contains_junk(e) for e in ty.elems)
    return False


def check_module(module: ir.Module) -> list[TypeDiagnostic]:
    """Check every function; returns all diagnostics in module order.

    The module must be structurally valid (see `ir.validate_module`);
    structural breakage is a programming error here, not a reportable
    diagnostic.
    """
    issues = ir.validate_module(module)
    if issues:
        raise ValueError(f"module is structurally invalid: {issues[0].message}")

    functions = {f.name: f for f in module.functions}
    invalid_sigs: set[str] = set()
    sig_diags: dict[str, TypeDiagnostic] = {}
    for fn in module.functions:
        problems = check_signature(fn.sig)
        if problems:
            invalid_sigs.add(fn.name)
            sig_diags[fn.name] = TypeDiagnostic(
                fn.span or _FALLBACK_SPAN,
                ErrorCode.SIGNATURE_ERROR,
                f"invalid signature for {fn.name!r}: {problems[0]}",
            )

    diags: list[TypeDiagnostic] = []
    for fn in module.functions:
        if fn.name in sig_diags:
            diags.append(sig_diags[fn.name])
            continue
        if fn.body is None:
            continue
        diag = check_function(fn, functions, invalid_sigs=invalid_sigs)
        if diag is not None:
            diags.append(diag)
    return diags


def check_function(
    fn: ir.Function,
    functions: dict,
    invalid_sigs: Optional[set] = None,
    on_step: Optional[OnStep] = None,
) -> Optional[TypeDiagnostic]:
    """Check one body; returns the first diagnostic or None.

    `on_step` is an audit hook invoked after each straight-line instruction
    with the instruction and the cell maps before and after it.
    """
    checker = _FunctionChecker(fn, functions, invalid_sigs or set(), on_step)
    try:
        checker.run()
    except _Abort as abort:
        return abort.diag
    return None


class _FunctionChecker:
    def __init__(
        self,
        fn: ir.Function,
        functions: dict,
        invalid_sigs: set,
        on_step: Optional[OnStep],
    ) -> None:
        self.fn = fn
        self.functions = functions
        self.invalid_sigs = invalid_sigs
        self.on_step = on_step

    def run(self) -> None:
        sig = self.fn.sig
        env = TypingEnv()
        env.push_scope()
        for cap in sig.pre_caps:
            env.produce_cell(cap.cell, cap.ty, Region.HEAP, depth=0, qual=cap.qual)
        for reg, ty in zip(self.fn.param_regs, sig.param_types):
            env.bind_register(reg, ty)
        if self._check_block(env, self.fn.body, depth=0) is not RETURNED:
            self._do_return(env, None, self.fn.span or _FALLBACK_SPAN)

    # -- helpers --

    def _span(self, instr: ir.Instruction) -> SourceSpan:
        return instr.span or self.fn.span or _FALLBACK_SPAN

    def _abort(self, code: ErrorCode, span: SourceSpan, message: str) -> None:
        raise _Abort(TypeDiagnostic(span, code, message))

    def _operand_type(self, env: TypingEnv, op: ir.Operand, span: SourceSpan) -> ir.Type:
        if isinstance(op, ir.LitOperand):
            return op.ty
        ty = env.lookup_register(op.name)
        if ty is None:
            self._abort(
                ErrorCode.UNBOUND_REGISTER, span,
                f"register {op.name!r} is not bound at this point",
            )
        return ty

    def _cell_entry(self, env: TypingEnv, cell: str, span: SourceSpan, verb: str) -> CellEntry:
        entry = env.cell(cell)
        if entry is not None:
            return entry
        if env.was_consumed(cell):
            self._abort(
                ErrorCode.USE_AFTER_CONSUME, span,
                f"cannot {verb} cell {cell!r}: its capability was already consumed",
            )
        self._abort(
            ErrorCode.NO_CAPABILITY, span,
            f"cannot {verb} cell {cell!r}: no capability for it is in scope",
        )

    def _addr_cell(self, env: TypingEnv, op: ir.Operand, span: SourceSpan, what: str) -> str:
        ty = self._operand_type(env, op, span)
        if not isinstance(ty, ir.AddrType):
            self._abort(
                ErrorCode.TYPE_MISMATCH, span,
                f"{what} must be a singleton address, got {ty}",
            )
        return ty.cell

    def _layout(self, ty: ir.Type, span: SourceSpan, what: str) -> ir.Layout:
        try:
            return ir.layout_of(ty)
        except ir.NoLayoutError:
            self._abort(
                ErrorCode.LAYOUT_MISMATCH, span, f"{what} {ty} has no machine layout"
            )

    # -- blocks and instructions --

    def _check_block(self, env: TypingEnv, block: ir.Block, depth: int):
        env.push_scope()
        returned = False
        for instr in block.instrs:
            if self._check_instr(env, instr, depth) is RETURNED:
                returned = True
                break
        if not returned:
            env.consume_stack_at_depth(depth)
        env.pop_scope()
        return RETURNED if returned else None

    def _check_instr(self, env: TypingEnv, instr: ir.Instruction, depth: int):
        audit = self.on_step is not None and not isinstance(
            instr, (ir.If, ir.Assuming, ir.Return)
        )
        before = env.cells() if audit else None
        result = self._dispatch(env, instr, depth)
        if audit:
            self.on_step(instr, before, env.cells())
        return result

    def _dispatch(self, env: TypingEnv, instr: ir.Instruction, depth: int):
        span = self._span(instr)
        if isinstance(instr, (ir.SAlloc, ir.HAlloc)):
            self._check_alloc(env, instr, depth, span)
        elif isinstance(instr, ir.Store):
            self._check_store(env, instr, span)
        elif isinstance(instr, ir.Load):
            self._check_load(env, instr, span)
        elif isinstance(instr, ir.Free):
            self._check_free(env, instr, span)
        elif isinstance(instr, ir.Call):
            self._check_call(env, instr, depth, span)
        elif isinstance(instr, ir.If):
            return self._check_if(env, instr, depth, span)
        elif isinstance(instr, ir.Assuming):
            self._check_assuming(env, instr, depth, span)
        elif isinstance(instr, ir.Return):
            return self._do_return(env, instr.value, span)
        else:
            raise TypeError(f"unknown instruction {instr!r}")
        return None

    def _check_alloc(self, env, instr, depth, span) -> None:
        self._layout(instr.ty, span, "allocated type")
        region = Region.STACK if isinstance(instr, ir.SAlloc) else Region.HEAP
        env.produce_cell(instr.cell, ir.JunkType(instr.ty), region, depth)
        if instr.dst is not None:
            env.bind_register(instr.dst, ir.AddrType(instr.cell))

    def _check_store(self, env, instr, span) -> None:
        value_ty = self._operand_type(env, instr.value, span)
        cell = self._addr_cell(env, instr.target, span, "store target")
        entry = self._cell_entry(env, cell, span, "store to")
        if entry.qual is Qualifier.BORROWED:
            self._abort(
                ErrorCode.NOT_LINEAR, span,
                f"cannot store to cell {cell!r}: the capability is only borrowed",
            )
        if entry.qual is Qualifier.DYNAMIC:
            self._abort(
                ErrorCode.UNGUARDED_DYNAMIC_USE, span,
                f"cannot store to cell {cell!r}: the capability is dynamic and "
                f"must be claimed with 'assuming' first",
            )
        value_layout = self._layout(value_ty, span, "stored value of type")
        cell_layout = self._layout(entry.ty, span, "cell content type")
        if value_layout is not cell_layout:
            self._abort(
                ErrorCode.LAYOUT_MISMATCH, span,
                f"cannot store a {value_layout.value} value into cell {cell!r} "
                f"laid out for {cell_layout.value}",
            )
        env.strong_update(cell, value_ty)

    def _check_load(self, env, instr, span) -> None:
        cell = self._addr_cell(env, instr.src, span, "load source")
        entry = self._cell_entry(env, cell, span, "load from")
        if entry.qual is Qualifier.DYNAMIC:
            self._abort(
                ErrorCode.UNGUARDED_DYNAMIC_USE, span,
                f"cannot load from cell {cell!r}: the capability is dynamic and "
                f"must be claimed with 'assuming' first",
            )
        if isinstance(entry.ty, ir.JunkType):
            self._abort(
                ErrorCode.USE_OF_JUNK, span,
                f"cannot load from cell {cell!r}: it holds uninitialised {entry.ty}",
            )
        if instr.dst is not None:
            env.bind_register(instr.dst, entry.ty)

    def _check_free(self, env, instr, span) -> None:
        cell = self._addr_cell(env, instr.target, span, "free target")
        entry = self._cell_entry(env, cell, span, "free")
        if entry.qual is Qualifier.BORROWED:
            self._abort(
                ErrorCode.NOT_LINEAR, span,
                f"cannot free cell {cell!r}: the capability is only borrowed",
            )
        if entry.qual is Qualifier.DYNAMIC:
            self._abort(
                ErrorCode.UNGUARDED_DYNAMIC_USE, span,
                f"cannot free cell {cell!r}: the capability is dynamic and "
                f"must be claimed with 'assuming' first",
            )
        if entry.region is Region.STACK:
            self._abort(
                ErrorCode.FREE_OF_STACK_CELL, span,
                f"cannot free cell {cell!r}: stack cells are reclaimed "
                f"automatically when their block ends",
            )
        env.consume_cell(cell)

    def _check_if(self, env, instr, depth, span):
        cond_ty = self._operand_type(env, instr.cond, span)
        if not isinstance(cond_ty, ir.BoolType):
            self._abort(
                ErrorCode.TYPE_MISMATCH, span,
                f"if condition must be Bool, got {cond_ty}",
            )
        then_env = env.clone()
        r_then = self._check_block(then_env, instr.then_block, depth + 1)
        else_env = env.clone()
        r_else = self._check_block(else_env, instr.else_block, depth + 1)
        if r_then is RETURNED and r_else is RETURNED:
            return RETURNED
        if r_then is RETURNED:
            env.assign_from(else_env)
            return None
        if r_else is RETURNED:
            env.assign_from(then_env)
            return None
        try:
            merged = join_envs(then_env, else_env)
        except JoinError as err:
            self._abort(ErrorCode.BRANCH_CAPABILITY_MISMATCH, span, str(err))
        env.assign_from(merged)
        return None

    def _check_assuming(self, env, instr, depth, span) -> None:
        reg_ty = env.lookup_register(instr.reg)
        if reg_ty is None:
            self._abort(
                ErrorCode.UNBOUND_REGISTER, span,
                f"register {instr.reg!r} is not bound at this point",
            )
        if not isinstance(reg_ty, ir.AddrType):
            self._abort(
                ErrorCode.TYPE_MISMATCH, span,
                f"assuming needs a register of singleton address type, "
                f"got {reg_ty}; an erased address must be loaded into a "
                f"singleton first",
            )
        cell = reg_ty.cell
        entry = self._cell_entry(env, cell, span, "claim")
        if entry.qual is not Qualifier.DYNAMIC:
            self._abort(
                ErrorCode.TYPE_MISMATCH, span,
                f"assuming requires a dynamic capability for cell {cell!r}, "
                f"but it is held {entry.qual.value}",
            )
        claimed_ty = instr.ty
        if entry.ty != claimed_ty:
            self._abort(
                ErrorCode.TYPE_MISMATCH, span,
                f"assuming claims {claimed_ty} for cell {cell!r} but the "
                f"capability records {entry.ty}",
            )
        inner = env.clone()
        inner.set_cell(cell, CellEntry(claimed_ty, Qualifier.LINEAR, Region.HEAP, entry.depth))
        result = self._check_block(inner, instr.body, depth + 1)
        assert result is not RETURNED, "return inside assuming is rejected earlier"

        after = inner.cell(cell)
        if after is None:
            restored = CellEntry(claimed_ty, Qualifier.DYNAMIC, entry.region, entry.depth)
        elif after.qual is Qualifier.LINEAR:
            restored = CellEntry(after.ty, Qualifier.DYNAMIC, entry.region, entry.depth)
        else:
            self._abort(
                ErrorCode.BRANCH_CAPABILITY_MISMATCH, span,
                f"the assuming body must leave cell {cell!r} linear or freed, "
                f"but it is {after.qual.value}",
            )

        expected = env.cells()
        expected.pop(cell, None)
        actual = inner.cells()
        actual.pop(cell, None)
        for name in sorted(set(expected) | set(actual)):
            if expected.get(name) != actual.get(name):
                self._abort(
                    ErrorCode.BRANCH_CAPABILITY_MISMATCH, span,
                    f"the assuming body must leave other cells untouched, but "
                    f"cell {name!r} changed",
                )
        env.set_cell(cell, restored)

    def _check_call(self, env, instr, depth, span) -> None:
        callee = self.functions.get(instr.callee)
        if callee is None:
            if instr.callee in ir.INTRINSIC_NAMES:
                self._check_intrinsic(env, instr, span)
                return
            self._abort(
                ErrorCode.UNKNOWN_CALLEE, span,
                f"call to unknown function {instr.callee!r}",
            )
        if instr.callee in self.invalid_sigs:
            self._abort(
                ErrorCode.SIGNATURE_ERROR, span,
                f"cannot call {instr.callee!r}: its signature is invalid",
            )
        sig = callee.sig
        arg_types = [self._operand_type(env, a, span) for a in instr.args]
        if len(arg_types) != len(sig.param_types):
            self._abort(
                ErrorCode.ARITY_MISMATCH, span,
                f"{instr.callee!r} expects {len(sig.param_types)} argument(s), "
                f"got {len(arg_types)}",
            )
        try:
            subst = unify_params(sig, arg_types)
        except UnifyError as err:
            code = (
                ErrorCode.ARITY_MISMATCH
                if err.kind == "ArityMismatch"
                else ErrorCode.TYPE_MISMATCH
            )
            self._abort(code, span, f"call to {instr.callee!r}: {err}")

        # The substituted precondition must stay one-capability-per-cell; two
        # requirements collapsing onto one cell would alias a consumed or
        # borrowed cell inside the callee.
        resolved: dict[str, str] = {}
        for pc in sig.pre_caps:
            cell = subst.get(pc.cell, pc.cell)
            if cell in resolved:
                self._abort(
                    ErrorCode.TYPE_MISMATCH, span,
                    f"call to {instr.callee!r} requires separate capabilities "
                    f"for {resolved[cell]!r} and {pc.cell!r}, but both resolve "
                    f"to cell {cell!r}",
                )
            resolved[cell] = pc.cell

        restored_linear = {
            subst.get(pc.cell, pc.cell)
            for pc in sig.post_caps
            if pc.qual is Qualifier.LINEAR
        }
        suspended: dict[str, tuple] = {}

        for pc in sig.pre_caps:
            cell = subst.get(pc.cell, pc.cell)
            need_ty = ir.substitute_cells(pc.ty, subst)
            entry = self._cell_entry(env, cell, span, f"pass to {instr.callee!r}")
            if entry.ty != need_ty:
                self._abort(
                    ErrorCode.TYPE_MISMATCH, span,
                    f"call to {instr.callee!r} needs cell {cell!r} to hold "
                    f"{need_ty}, but it holds {entry.ty}",
                )
            if pc.qual is Qualifier.LINEAR:
                if entry.qual is Qualifier.BORROWED:
                    self._abort(
                        ErrorCode.NOT_LINEAR, span,
                        f"call to {instr.callee!r} consumes cell {cell!r}, "
                        f"but the capability is only borrowed",
                    )
                if entry.qual is Qualifier.DYNAMIC:
                    self._abort(
                        ErrorCode.UNGUARDED_DYNAMIC_USE, span,
                        f"call to {instr.callee!r} consumes cell {cell!r}, "
                        f"but the capability is dynamic and must be claimed first",
                    )
                if entry.region is Region.STACK and cell not in restored_linear:
                    self._abort(
                        ErrorCode.FREE_OF_STACK_CELL, span,
                        f"call to {instr.callee!r} takes ownership of stack "
                        f"cell {cell!r} without promising it back",
                    )
                suspended[cell] = (entry.region, entry.depth)
                env.consume_cell(cell)
            elif pc.qual is Qualifier.BORROWED:
                if entry.qual is Qualifier.DYNAMIC:
                    self._abort(
                        ErrorCode.UNGUARDED_DYNAMIC_USE, span,
                        f"call to {instr.callee!r} borrows cell {cell!r}, "
                        f"but the capability is dynamic and must be claimed first",
                    )
                # Linear or borrowed callers lend freely; nothing changes.
            else:  # pc is dynamic
                if entry.qual is Qualifier.LINEAR:
                    if entry.region is Region.STACK:
                        self._abort(
                            ErrorCode.FREE_OF_STACK_CELL, span,
                            f"call to {instr.callee!r} would let stack cell "
                            f"{cell!r} be freed through a dynamic capability",
                        )
                    env.weaken_to_dynamic(cell)
                elif entry.qual is Qualifier.BORROWED:
                    self._abort(
                        ErrorCode.NOT_LINEAR, span,
                        f"call to {instr.callee!r} needs a dynamic capability "
                        f"for cell {cell!r}, but it is only borrowed",
                    )
                # Already dynamic: passes through unchanged.

        for pc in sig.post_caps:
            cell = subst.get(pc.cell, pc.cell)
            ty = ir.substitute_cells(pc.ty, subst)
            if env.cell(cell) is not None:
                # Dynamic-in, dynamic-out: the capability never left.
                continue
            region, cell_depth = suspended[cell]
            env.produce_cell(cell, ty, region, cell_depth, qual=pc.qual)

        if instr.dst is not None:
            env.bind_register(instr.dst, ir.substitute_cells(sig.return_type, subst))

    def _check_intrinsic(self, env, instr, span) -> None:
        arg_types = [self._operand_type(env, a, span) for a in instr.args]
        if len(arg_types) != 2:
            self._abort(
                ErrorCode.ARITY_MISMATCH, span,
                f"intrinsic {instr.callee!r} expects 2 arguments, got {len(arg_types)}",
            )
        left, right = arg_types
        if isinstance(left, ir.I32Type) and isinstance(right, ir.I32Type):
            result = ir.I32 if instr.callee in ir.INTRINSIC_ARITH else ir.BOOL
        elif isinstance(left, ir.F32Type) and isinstance(right, ir.F32Type):
            result = ir.F32 if instr.callee in ir.INTRINSIC_ARITH else ir.BOOL
        else:
            self._abort(
                ErrorCode.TYPE_MISMATCH, span,
                f"intrinsic {instr.callee!r} needs two I32 or two F32 operands, "
                f"got {left} and {right}",
            )
        if instr.dst is not None:
            env.bind_register(instr.dst, result)

    def _do_return(self, env: TypingEnv, value: Optional[ir.Operand], span: SourceSpan):
        sig = self.fn.sig
        value_ty = ir.UNIT if value is None else self._operand_type(env, value, span)
        if value_ty != sig.return_type:
            self._abort(
                ErrorCode.RETURN_TYPE_MISMATCH, span,
                f"function returns {value_ty} but the signature says "
                f"{sig.return_type}",
            )
        for pc in sig.post_caps:
            entry = env.cell(pc.cell)
            if entry is None:
                why = (
                    "its capability was consumed"
                    if env.was_consumed(pc.cell)
                    else "no capability for it is left"
                )
                self._abort(
                    ErrorCode.MISSING_POST_CAPABILITY, span,
                    f"the signature promises cell {pc.cell!r} at return, but {why}",
                )
            if entry.ty != pc.ty:
                self._abort(
                    ErrorCode.MISSING_POST_CAPABILITY, span,
                    f"cell {pc.cell!r} must hold {pc.ty} at return, but it "
                    f"holds {entry.ty}",
                )
            ok = (
                entry.qual is Qualifier.LINEAR
                if pc.qual is Qualifier.LINEAR
                else entry.qual in (Qualifier.LINEAR, Qualifier.DYNAMIC)
            )
            if not ok:
                self._abort(
                    ErrorCode.MISSING_POST_CAPABILITY, span,
                    f"cell {pc.cell!r} must be {pc.qual.value} at return, but "
                    f"it is {entry.qual.value}",
                )
            env.remove_cell(pc.cell)
        for cell, entry in sorted(env.cells().items()):
            if entry.qual is Qualifier.LINEAR and entry.region is Region.HEAP:
                self._abort(
                    ErrorCode.MEMORY_LEAK, span,
                    f"heap cell {cell!r} is still owned at return and is "
                    f"never freed",
                )
        return RETURNED
