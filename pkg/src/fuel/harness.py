"""Program generator and mutation engine for differential testing.

The generator is constructive: it tracks a mirror of the checker's typing
state and only ever emits instructions that are legal in that state, so
every generated module both checks cleanly and runs without faults.  It
never generates and then filters.

Mutations break one well-formed program in one deliberate way; the catalog
at the bottom pairs fixture programs with mutations and the diagnostics a
correct checker must raise against them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Union

from . import ir

FEATURES = frozenset({"heap", "branches", "calls", "borrows", "dynamics", "assuming"})


@dataclass(frozen=True)
class GenConfig:
    seed: int
    max_instrs: int = 16
    max_cells: int = 8
    max_branch_depth: int = 2
    features: frozenset = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", frozenset(self.features))
        unknown = self.features - FEATURES
        if unknown:
            raise ValueError(f"unknown feature(s): {sorted(unknown)}")
        if self.max_instrs < 1 or self.max_cells < 1 or self.max_branch_depth < 0:
            raise ValueError("generation budgets must be positive")


_SCALARS = (ir.BOOL, ir.I32, ir.F32)

_LITERALS = {
    ir.BOOL: (True, False),
    ir.I32: (0, 1, 7, 42, -3),
    ir.F32: (1.0, 2.5, 13.37, -0.5),
}

_TYPE_TAG = {ir.BOOL: "bool", ir.I32: "i32", ir.F32: "f32"}


@dataclass
class _Cell:
    name: str
    ty: ir.Type          # current recorded content type
    qual: ir.Qualifier
    region: ir.Region
    reg: str             # register holding the cell's address


@dataclass
class _Gen:
    cfg: GenConfig
    rng: random.Random
    regs: dict = field(default_factory=dict)      # name -> type
    cells: dict = field(default_factory=dict)     # name -> _Cell
    instrs: list = field(default_factory=list)
    emitted: int = 0
    next_reg: int = 0
    next_cell: int = 0
    used: set = field(default_factory=set)        # features actually exercised

    def fresh_reg(self) -> str:
        name = f"r{self.next_reg}"
        self.next_reg += 1
        return name

    def fresh_cell(self) -> Optional[str]:
        if self.next_cell >= self.cfg.max_cells:
            return None
        name = f"m{self.next_cell}"
        self.next_cell += 1
        return name

    def budget(self) -> int:
        return self.cfg.max_instrs - self.emitted


def _helper_templates(features: frozenset) -> list[ir.Function]:
    """Fixed callee shapes; bodies are small and obviously well-typed."""
    fns: list[ir.Function] = []
    wants_calls = "calls" in features
    wants_borrows = "borrows" in features
    wants_dyn = "dynamics" in features or "assuming" in features

    for ty in _SCALARS:
        tag = _TYPE_TAG[ty]
        lit = ir.LitOperand(ty, _LITERALS[ty][0])
        if wants_calls:
            fns.append(ir.Function(
                f"writer_{tag}", ("_0",),
                ir.Signature(("c",), (ir.AddrType("c"),), ir.UNIT,
                             (ir.CellCap("c", ty),), (ir.CellCap("c", ty),)),
                ir.Block((ir.Store(lit, ir.RegOperand("_0")),)),
            ))
            fns.append(ir.Function(
                f"consumer_{tag}", ("_0",),
                ir.Signature(("c",), (ir.AddrType("c"),), ir.UNIT,
                             (ir.CellCap("c", ty),), ()),
                ir.Block((ir.Free(ir.RegOperand("_0")),)),
            ))
        if wants_borrows:
            fns.append(ir.Function(
                f"reader_{tag}", ("_0",),
                ir.Signature(("c",), (ir.AddrType("c"),), ty,
                             (ir.CellCap("c", ty, ir.Qualifier.BORROWED),), ()),
                ir.Block((
                    ir.Load("v", ir.RegOperand("_0")),
                    ir.Return(ir.RegOperand("v")),
                )),
            ))
            fns.append(ir.Function(
                f"chain_{tag}", ("_0",),
                ir.Signature(("c",), (ir.AddrType("c"),), ty,
                             (ir.CellCap("c", ty, ir.Qualifier.BORROWED),), ()),
                ir.Block((
                    ir.Call("v", f"reader_{tag}", (ir.RegOperand("_0"),)),
                    ir.Return(ir.RegOperand("v")),
                )),
            ))
        if wants_dyn:
            fns.append(ir.Function(
                f"dyn_free_{tag}", ("_0",),
                ir.Signature(("c",), (ir.AddrType("c"),), ir.UNIT,
                             (ir.CellCap("c", ty, ir.Qualifier.DYNAMIC),), ()),
                ir.Block((
                    ir.Assuming("_0", ty, ir.Block((ir.Free(ir.RegOperand("_0")),))),
                )),
            ))
    if wants_calls:
        fns.append(ir.Function(
            "combine_i32", ("_0", "_1"),
            ir.Signature((), (ir.I32, ir.I32), ir.I32, (), ()),
            ir.Block((
                ir.Call("s", "add", (ir.RegOperand("_0"), ir.RegOperand("_1"))),
                ir.Return(ir.RegOperand("s")),
            )),
        ))
    return fns


def generate_program(cfg: GenConfig) -> ir.Module:
    """Build a deterministic, checkable, fault-free module from a seed."""
    rng = random.Random(cfg.seed)
    gen = _Gen(cfg, rng)
    helpers = _helper_templates(cfg.features)

    target = rng.randint(max(2, cfg.max_instrs // 2), cfg.max_instrs)
    stall = 0
    while gen.emitted < target and stall < 12:
        if _step(gen):
            stall = 0
        else:
            stall += 1
    _force_coverage(gen)
    _cleanup(gen)

    main = ir.Function("main", (), ir.Signature((), (), ir.UNIT, (), ()),
                       ir.Block(tuple(gen.instrs)))
    return ir.Module(tuple(helpers) + (main,))


def _step(gen: _Gen) -> bool:
    moves: list[Callable[[_Gen], bool]] = [_mv_alloc, _mv_store, _mv_store]
    if _loadable_cells(gen):
        moves.append(_mv_load)
        moves.append(_mv_load)
    if "heap" in gen.cfg.features:
        moves.append(_mv_free)
    if "branches" in gen.cfg.features:
        moves.append(_mv_branch)
    if "calls" in gen.cfg.features:
        moves.extend([_mv_call_writer, _mv_call_consumer, _mv_call_combine])
    if "borrows" in gen.cfg.features:
        moves.append(_mv_call_reader)
    if "dynamics" in gen.cfg.features or "assuming" in gen.cfg.features:
        moves.append(_mv_call_dyn_free)
    if "assuming" in gen.cfg.features:
        moves.append(_mv_assuming)
    move = gen.rng.choice(moves)
    return move(gen)


def _linear_cells(gen: _Gen, ty: Optional[ir.Type] = None,
                  region: Optional[ir.Region] = None) -> list[_Cell]:
    out = []
    for cell in gen.cells.values():
        if cell.qual is not ir.Qualifier.LINEAR:
            continue
        if ty is not None and cell.ty != ty:
            continue
        if region is not None and cell.region is not region:
            continue
        out.append(cell)
    return out


def _loadable_cells(gen: _Gen) -> list[_Cell]:
    return [c for c in _linear_cells(gen) if not isinstance(c.ty, ir.JunkType)]


def _value_operand(gen: _Gen, ty: ir.Type, regs_ok: bool = True) -> Optional[ir.Operand]:
    options: list[ir.Operand] = []
    if ty in _LITERALS:
        options.extend(ir.LitOperand(ty, v) for v in _LITERALS[ty])
    if regs_ok:
        options.extend(
            ir.RegOperand(name) for name, rty in gen.regs.items() if rty == ty
        )
    if not options:
        return None
    return gen.rng.choice(options)


def _emit(gen: _Gen, instr: ir.Instruction) -> None:
    gen.instrs.append(instr)
    gen.emitted += 1


def _mv_alloc(gen: _Gen) -> bool:
    name = gen.fresh_cell()
    if name is None or gen.budget() < 1:
        return False
    choices: list[ir.Type] = list(_SCALARS)
    if gen.cells:
        choices.append(ir.ExistsAddrType())
    ty = gen.rng.choice(choices)
    heap = "heap" in gen.cfg.features and gen.rng.random() < 0.5
    reg = gen.fresh_reg()
    cls = ir.HAlloc if heap else ir.SAlloc
    _emit(gen, cls(reg, ty, name))
    region = ir.Region.HEAP if heap else ir.Region.STACK
    gen.cells[name] = _Cell(name, ir.JunkType(ty), ir.Qualifier.LINEAR, region, reg)
    gen.regs[reg] = ir.AddrType(name)
    if heap:
        gen.used.add("heap")
    return True


def _mv_store(gen: _Gen) -> bool:
    targets = _linear_cells(gen)
    if not targets or gen.budget() < 1:
        return False
    cell = gen.rng.choice(targets)
    base = cell.ty.inner if isinstance(cell.ty, ir.JunkType) else cell.ty
    if isinstance(base, (ir.AddrType, ir.ExistsAddrType)):
        addr_regs = [n for n, t in gen.regs.items()
                     if isinstance(t, (ir.AddrType, ir.ExistsAddrType))]
        if not addr_regs:
            return False
        reg = gen.rng.choice(addr_regs)
        value: ir.Operand = ir.RegOperand(reg)
        new_ty = gen.regs[reg]
    else:
        op = _value_operand(gen, base)
        if op is None:
            return False
        value = op
        new_ty = base
    _emit(gen, ir.Store(value, ir.RegOperand(cell.reg)))
    cell.ty = new_ty
    return True


def _mv_load(gen: _Gen) -> bool:
    sources = _loadable_cells(gen)
    if not sources or gen.budget() < 1:
        return False
    cell = gen.rng.choice(sources)
    reg = gen.fresh_reg()
    _emit(gen, ir.Load(reg, ir.RegOperand(cell.reg)))
    gen.regs[reg] = cell.ty
    return True


def _mv_free(gen: _Gen) -> bool:
    victims = _linear_cells(gen, region=ir.Region.HEAP)
    if not victims or gen.budget() < 1:
        return False
    cell = gen.rng.choice(victims)
    _emit(gen, ir.Free(ir.RegOperand(cell.reg)))
    del gen.cells[cell.name]
    gen.used.add("heap")
    return True


def _mv_call_writer(gen: _Gen) -> bool:
    return _call_cell_helper(gen, "writer", consume=False)


def _mv_call_consumer(gen: _Gen) -> bool:
    return _call_cell_helper(gen, "consumer", consume=True, region=ir.Region.HEAP)


def _call_cell_helper(gen: _Gen, archetype: str, consume: bool,
                      region: Optional[ir.Region] = None) -> bool:
    if gen.budget() < 1:
        return False
    eligible = []
    for ty in _SCALARS:
        for cell in _linear_cells(gen, ty=ty, region=region):
            eligible.append((ty, cell))
    if not eligible:
        return False
    ty, cell = gen.rng.choice(eligible)
    _emit(gen, ir.Call(None, f"{archetype}_{_TYPE_TAG[ty]}", (ir.RegOperand(cell.reg),)))
    if consume:
        del gen.cells[cell.name]
    gen.used.add("calls")
    return True


def _mv_call_combine(gen: _Gen) -> bool:
    if gen.budget() < 1:
        return False
    left = _value_operand(gen, ir.I32)
    right = _value_operand(gen, ir.I32)
    if left is None or right is None:
        return False
    reg = gen.fresh_reg()
    _emit(gen, ir.Call(reg, "combine_i32", (left, right)))
    gen.regs[reg] = ir.I32
    gen.used.add("calls")
    return True


def _mv_call_reader(gen: _Gen) -> bool:
    if gen.budget() < 1:
        return False
    eligible = []
    for ty in _SCALARS:
        for cell in _linear_cells(gen, ty=ty):
            eligible.append((ty, cell))
    if not eligible:
        return False
    ty, cell = gen.rng.choice(eligible)
    helper = gen.rng.choice(["reader", "chain"])
    reg = gen.fresh_reg()
    _emit(gen, ir.Call(reg, f"{helper}_{_TYPE_TAG[ty]}", (ir.RegOperand(cell.reg),)))
    gen.regs[reg] = ty
    gen.used.add("borrows")
    return True


def _mv_call_dyn_free(gen: _Gen) -> bool:
    if gen.budget() < 1:
        return False
    eligible = []
    for ty in _SCALARS:
        for cell in _linear_cells(gen, ty=ty, region=ir.Region.HEAP):
            eligible.append((ty, cell))
    if not eligible:
        return False
    ty, cell = gen.rng.choice(eligible)
    _emit(gen, ir.Call(None, f"dyn_free_{_TYPE_TAG[ty]}", (ir.RegOperand(cell.reg),)))
    cell.qual = ir.Qualifier.DYNAMIC
    gen.used.add("dynamics")
    return True


def _mv_assuming(gen: _Gen) -> bool:
    if gen.budget() < 2:
        return False
    dyn_cells = [c for c in gen.cells.values()
                 if c.qual is ir.Qualifier.DYNAMIC and c.ty in _SCALARS]
    if not dyn_cells:
        return False
    cell = gen.rng.choice(dyn_cells)
    body: list[ir.Instruction] = []
    shape = gen.rng.choice(["free", "store", "store_free", "empty"])
    if shape in ("store", "store_free"):
        value = _value_operand(gen, cell.ty, regs_ok=False)
        body.append(ir.Store(value, ir.RegOperand(cell.reg)))
    if shape in ("free", "store_free"):
        body.append(ir.Free(ir.RegOperand(cell.reg)))
    _emit(gen, ir.Assuming(cell.reg, cell.ty, ir.Block(tuple(body))))
    gen.emitted += len(body)
    gen.used.add("assuming")
    return True


def _mv_branch(gen: _Gen, depth: int = 0) -> bool:
    if gen.budget() < 3 or depth >= gen.cfg.max_branch_depth:
        return False
    cond = _value_operand(gen, ir.BOOL)
    if cond is None:
        return False
    header_cost = 1
    gen.emitted += header_cost
    then_block = _branch_block(gen, depth + 1)
    else_block = _branch_block(gen, depth + 1)
    gen.instrs.append(ir.If(cond, then_block, else_block))
    gen.used.add("branches")
    return True


def _branch_block(gen: _Gen, depth: int) -> ir.Block:
    """A block that provably leaves the outer capability state untouched.

    Stores hit only initialised outer cells and preserve their type; local
    allocations are stack cells or heap cells freed before the block ends.
    """
    instrs: list[ir.Instruction] = []
    local_heap: list[tuple[str, str]] = []  # (cell name, addr reg)
    n = gen.rng.randint(0, 3)
    for _ in range(n):
        if gen.budget() < 2:
            break
        kind = gen.rng.choice(["load", "store", "alloc", "nest"])
        if kind == "load":
            sources = _loadable_cells(gen)
            if not sources:
                continue
            cell = gen.rng.choice(sources)
            reg = gen.fresh_reg()
            instrs.append(ir.Load(reg, ir.RegOperand(cell.reg)))
            gen.emitted += 1
            # Branch-local registers must not escape into later code.
        elif kind == "store":
            candidates = [c for c in _loadable_cells(gen) if c.ty in _SCALARS]
            if not candidates:
                continue
            cell = gen.rng.choice(candidates)
            value = _value_operand(gen, cell.ty, regs_ok=False)
            instrs.append(ir.Store(value, ir.RegOperand(cell.reg)))
            gen.emitted += 1
        elif kind == "alloc":
            name = gen.fresh_cell()
            if name is None:
                continue
            ty = gen.rng.choice(_SCALARS)
            reg = gen.fresh_reg()
            heap = "heap" in gen.cfg.features and gen.rng.random() < 0.3
            cls = ir.HAlloc if heap else ir.SAlloc
            instrs.append(cls(reg, ty, name))
            gen.emitted += 1
            if heap:
                local_heap.append((name, reg))
        else:  # nested branch
            if depth >= gen.cfg.max_branch_depth or gen.budget() < 3:
                continue
            cond = _value_operand(gen, ir.BOOL, regs_ok=False)
            gen.emitted += 1
            inner_then = _branch_block(gen, depth + 1)
            inner_else = _branch_block(gen, depth + 1)
            instrs.append(ir.If(cond, inner_then, inner_else))
    for _, reg in local_heap:
        instrs.append(ir.Free(ir.RegOperand(reg)))
        gen.emitted += 1
    return ir.Block(tuple(instrs))


def _force_coverage(gen: _Gen) -> None:
    """Give every requested feature at least one occurrence, budget allowing."""
    features = gen.cfg.features
    if "heap" in features and "heap" not in gen.used and gen.budget() >= 2:
        name = gen.fresh_cell()
        if name is not None:
            reg = gen.fresh_reg()
            _emit(gen, ir.HAlloc(reg, ir.I32, name))
            gen.cells[name] = _Cell(name, ir.JunkType(ir.I32), ir.Qualifier.LINEAR,
                                    ir.Region.HEAP, reg)
            gen.regs[reg] = ir.AddrType(name)
            gen.used.add("heap")
    if "branches" in features and "branches" not in gen.used and gen.budget() >= 1:
        _emit(gen, ir.If(ir.LitOperand(ir.BOOL, True), ir.Block(), ir.Block()))
        gen.used.add("branches")
    if "calls" in features and "calls" not in gen.used and gen.budget() >= 1:
        reg = gen.fresh_reg()
        _emit(gen, ir.Call(reg, "combine_i32",
                           (ir.LitOperand(ir.I32, 1), ir.LitOperand(ir.I32, 2))))
        gen.regs[reg] = ir.I32
        gen.used.add("calls")
    if "borrows" in features and "borrows" not in gen.used:
        cell = _ensure_init_cell(gen, min_budget=2)
        if cell is not None and gen.budget() >= 1:
            ty = cell.ty
            reg = gen.fresh_reg()
            _emit(gen, ir.Call(reg, f"reader_{_TYPE_TAG[ty]}", (ir.RegOperand(cell.reg),)))
            gen.regs[reg] = ty
            gen.used.add("borrows")
    needs_dyn = ("dynamics" in features and "dynamics" not in gen.used) or (
        "assuming" in features and "assuming" not in gen.used
    )
    if needs_dyn:
        cell = _ensure_init_cell(gen, min_budget=3, region=ir.Region.HEAP)
        if cell is not None and gen.budget() >= 1:
            ty = cell.ty
            _emit(gen, ir.Call(None, f"dyn_free_{_TYPE_TAG[ty]}", (ir.RegOperand(cell.reg),)))
            cell.qual = ir.Qualifier.DYNAMIC
            gen.used.add("dynamics")
            if "assuming" in features and gen.budget() >= 1:
                _emit(gen, ir.Assuming(cell.reg, ty,
                                       ir.Block((ir.Free(ir.RegOperand(cell.reg)),))))
                gen.emitted += 1
                gen.used.add("assuming")


def _ensure_init_cell(gen: _Gen, min_budget: int,
                      region: Optional[ir.Region] = None) -> Optional[_Cell]:
    """Find or make a linear scalar-typed initialised cell."""
    ready = [c for c in _linear_cells(gen, region=region) if c.ty in _SCALARS]
    if ready:
        return gen.rng.choice(ready)
    if gen.budget() < min_budget:
        return None
    name = gen.fresh_cell()
    if name is None:
        return None
    ty = gen.rng.choice(_SCALARS)
    reg = gen.fresh_reg()
    heap = region is ir.Region.HEAP
    cls = ir.HAlloc if heap else ir.SAlloc
    _emit(gen, cls(reg, ty, name))
    _emit(gen, ir.Store(ir.LitOperand(ty, _LITERALS[ty][0]), ir.RegOperand(reg)))
    cell = _Cell(name, ty, ir.Qualifier.LINEAR,
                 ir.Region.HEAP if heap else ir.Region.STACK, reg)
    gen.cells[name] = cell
    gen.regs[reg] = ir.AddrType(name)
    return cell


def _cleanup(gen: _Gen) -> None:
    """Free the linear heap cells that remain; dynamic ones may leak but
    never fault."""
    for cell in list(gen.cells.values()):
        if cell.qual is ir.Qualifier.LINEAR and cell.region is ir.Region.HEAP:
            gen.instrs.append(ir.Free(ir.RegOperand(cell.reg)))
            del gen.cells[cell.name]


# -- mutations ----------------------------------------------------------------


class MutationKind(Enum):
    DELETE_STORE = "DeleteStore"
    DELETE_FREE = "DeleteFree"
    DUPLICATE_FREE = "DuplicateFree"
    SWAP_STORE_BEFORE_AFTER_LOAD = "SwapStoreBeforeAfterLoad"
    FREE_STACK_CELL = "FreeStackCell"
    DROP_ASSUMING_GUARD = "DropAssumingGuard"
    REMOVE_POST_CAP_RESTORE = "RemovePostCapRestore"


@dataclass(frozen=True)
class Mutation:
    kind: MutationKind
    index: int = -1
    function: Optional[str] = None


class InvalidMutationTarget(Exception):
    pass


def subtree_size(instr: ir.Instruction) -> int:
    size = 1
    if isinstance(instr, ir.If):
        for block in (instr.then_block, instr.else_block):
            size += sum(subtree_size(i) for i in block.instrs)
    elif isinstance(instr, ir.Assuming):
        size += sum(subtree_size(i) for i in instr.body.instrs)
    return size


def instruction_index(
    module: ir.Module, pred: Callable[[ir.Instruction], bool], occurrence: int = 1
) -> int:
    """Flat preorder index (across all functions) of the n-th match."""
    seen = 0
    index = 0
    for fn in module.functions:
        for instr in ir.walk_instructions(fn):
            if pred(instr):
                seen += 1
                if seen == occurrence:
                    return index
            index += 1
    raise InvalidMutationTarget(f"no instruction matches (occurrence {occurrence})")


def mutate(module: ir.Module, mutation: Mutation) -> ir.Module:
    """Apply one mutation; raises InvalidMutationTarget if it does not fit."""
    if mutation.kind is MutationKind.REMOVE_POST_CAP_RESTORE:
        return _remove_post_caps(module, mutation.function)
    state = {"index": 0, "hit": False}
    functions = []
    for fn in module.functions:
        if fn.body is None:
            functions.append(fn)
            continue
        body = _mutate_block(fn.body, mutation, state)
        functions.append(replace(fn, body=body))
    if not state["hit"]:
        raise InvalidMutationTarget(
            f"index {mutation.index} does not match a {mutation.kind.value} target"
        )
    return ir.Module(tuple(functions))


def _remove_post_caps(module: ir.Module, name: Optional[str]) -> ir.Module:
    fn = module.function(name) if name else None
    if fn is None:
        raise InvalidMutationTarget(f"no function named {name!r}")
    if not fn.sig.post_caps:
        raise InvalidMutationTarget(f"{name!r} promises no capabilities to remove")
    stripped = replace(fn, sig=replace(fn.sig, post_caps=()))
    return ir.Module(tuple(stripped if f.name == name else f for f in module.functions))


def _mutate_block(block: ir.Block, mutation: Mutation, state: dict) -> ir.Block:
    out: list[ir.Instruction] = []
    instrs = list(block.instrs)
    k = 0
    while k < len(instrs):
        instr = instrs[k]
        here = state["index"]
        state["index"] += 1
        if here == mutation.index and not state["hit"]:
            out.extend(_apply_at(instr, instrs, k, mutation, state))
            if state.get("skip_next"):
                state["index"] += 1  # the swapped load keeps its slot
                del state["skip_next"]
                k += 2
                continue
            k += 1
            continue
        if isinstance(instr, ir.If):
            then_block = _mutate_block(instr.then_block, mutation, state)
            else_block = _mutate_block(instr.else_block, mutation, state)
            out.append(replace(instr, then_block=then_block, else_block=else_block))
        elif isinstance(instr, ir.Assuming):
            body = _mutate_block(instr.body, mutation, state)
            out.append(replace(instr, body=body))
        else:
            out.append(instr)
        k += 1
    return ir.Block(tuple(out))


def _apply_at(
    instr: ir.Instruction,
    siblings: list,
    k: int,
    mutation: Mutation,
    state: dict,
) -> list[ir.Instruction]:
    kind = mutation.kind
    if kind is MutationKind.DELETE_STORE:
        _require(isinstance(instr, ir.Store), kind, instr)
        state["hit"] = True
        return []
    if kind is MutationKind.DELETE_FREE:
        _require(isinstance(instr, ir.Free), kind, instr)
        state["hit"] = True
        return []
    if kind is MutationKind.DUPLICATE_FREE:
        _require(isinstance(instr, ir.Free), kind, instr)
        state["hit"] = True
        return [instr, replace(instr)]
    if kind is MutationKind.SWAP_STORE_BEFORE_AFTER_LOAD:
        follows = siblings[k + 1] if k + 1 < len(siblings) else None
        _require(isinstance(instr, ir.Store) and isinstance(follows, ir.Load), kind, instr)
        state["hit"] = True
        state["skip_next"] = True
        return [follows, instr]
    if kind is MutationKind.FREE_STACK_CELL:
        _require(isinstance(instr, ir.SAlloc) and instr.dst is not None, kind, instr)
        state["hit"] = True
        return [instr, ir.Free(ir.RegOperand(instr.dst), span=instr.span)]
    if kind is MutationKind.DROP_ASSUMING_GUARD:
        _require(isinstance(instr, ir.Assuming), kind, instr)
        state["hit"] = True
        # Nested instructions keep their preorder slots even though the
        # guard header is gone.
        return list(instr.body.instrs)
    raise InvalidMutationTarget(f"unsupported mutation kind {kind}")


def _require(ok: bool, kind: MutationKind, instr: ir.Instruction) -> None:
    if not ok:
        raise InvalidMutationTarget(
            f"{kind.value} cannot target {type(instr).__name__}"
        )


# -- the curated mutation catalog ---------------------------------------------


@dataclass(frozen=True)
class CatalogEntry:
    """One fixture/mutation pair with its expected verdicts.

    `static_codes` must all appear among the checker diagnostics for the
    mutant.  `runtime` is the expected unchecked behaviour: a FaultKind
    value, "leak" for a completed run with leak reports, or None when the
    rejection is purely static (conservative) and the mutant misbehaves in
    no observable way at runtime.
    """

    name: str
    base: str
    kind: MutationKind
    find: Callable[[ir.Module], Union[int, str]]
    static_codes: tuple
    runtime: Optional[str]
    fixture: str  # pre-rendered mutant fixture stem


def _first_store_of_bool(m: ir.Module) -> int:
    return instruction_index(
        m, lambda i: isinstance(i, ir.Store) and isinstance(i.value, ir.LitOperand)
        and isinstance(i.value.ty, ir.BoolType))


def _first_salloc(m: ir.Module) -> int:
    return instruction_index(m, lambda i: isinstance(i, ir.SAlloc))


def _store_of_float(m: ir.Module) -> int:
    return instruction_index(
        m, lambda i: isinstance(i, ir.Store) and isinstance(i.value, ir.LitOperand)
        and isinstance(i.value.ty, ir.F32Type))


def _store_of_reg(name: str) -> Callable[[ir.Module], int]:
    def find(m: ir.Module) -> int:
        return instruction_index(
            m, lambda i: isinstance(i, ir.Store)
            and isinstance(i.value, ir.RegOperand) and i.value.name == name)
    return find


def _nth_free(n: int) -> Callable[[ir.Module], int]:
    def find(m: ir.Module) -> int:
        return instruction_index(m, lambda i: isinstance(i, ir.Free), occurrence=n)
    return find


def _nth_assuming(n: int) -> Callable[[ir.Module], int]:
    def find(m: ir.Module) -> int:
        return instruction_index(m, lambda i: isinstance(i, ir.Assuming), occurrence=n)
    return find


CATALOG: tuple = (
    CatalogEntry(
        "fig1b-delete-store", "fig1b", MutationKind.DELETE_STORE,
        _first_store_of_bool, ("UseOfJunk",), "JunkRead", "fig1b_no_store"),
    CatalogEntry(
        "fig1b-store-after-load", "fig1b", MutationKind.SWAP_STORE_BEFORE_AFTER_LOAD,
        _first_store_of_bool, ("UseOfJunk",), "JunkRead", "fig1b_load_before_store"),
    CatalogEntry(
        "fig1b-free-stack", "fig1b", MutationKind.FREE_STACK_CELL,
        _first_salloc, ("FreeOfStackCell",), "FreeOfStack", "fig1b_free_stack"),
    CatalogEntry(
        "fig2b-delete-float-store", "fig2b", MutationKind.DELETE_STORE,
        _store_of_float, ("UseOfJunk",), "JunkRead", "fig2b_no_store_foo"),
    CatalogEntry(
        "fig2b-delete-addr-store", "fig2b", MutationKind.DELETE_STORE,
        _store_of_reg("foo"), ("UseOfJunk",), "JunkRead", "fig2b_no_store_bar"),
    CatalogEntry(
        "fig5-double-free", "fig5", MutationKind.DUPLICATE_FREE,
        _nth_free(1), ("UseAfterConsume",), "DoubleFree", "fig5_double_free"),
    CatalogEntry(
        "fig5-unguarded-first", "fig5", MutationKind.DROP_ASSUMING_GUARD,
        _nth_assuming(2), ("UnguardedDynamicUse",), "DoubleFree", "fig5_unguarded_free"),
    CatalogEntry(
        "fig5-unguarded-second", "fig5", MutationKind.DROP_ASSUMING_GUARD,
        _nth_assuming(3), ("UnguardedDynamicUse",), None, "fig5_unguarded_free_second"),
    CatalogEntry(
        "heap-no-free", "heap_roundtrip", MutationKind.DELETE_FREE,
        _nth_free(1), ("MemoryLeak",), "leak", "heap_roundtrip_no_free"),
    CatalogEntry(
        "heap-double-free", "heap_roundtrip", MutationKind.DUPLICATE_FREE,
        _nth_free(1), ("UseAfterConsume",), "DoubleFree", "heap_roundtrip_double_free"),
    CatalogEntry(
        "fig4-extern-no-restore", "fig4", MutationKind.REMOVE_POST_CAP_RESTORE,
        lambda m: "libfoo_f", ("FreeOfStackCell",), None, "fig4_no_postcap"),
    CatalogEntry(
        "fig4-body-no-restore", "fig4_run", MutationKind.REMOVE_POST_CAP_RESTORE,
        lambda m: "libfoo_f", ("MemoryLeak", "FreeOfStackCell"), None,
        "fig4_run_no_postcap"),
)


def mutation_for(entry: CatalogEntry, module: ir.Module) -> Mutation:
    target = entry.find(module)
    if isinstance(target, str):
        return Mutation(entry.kind, function=target)
    return Mutation(entry.kind, index=target)
