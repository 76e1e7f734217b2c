import struct

import pytest
from hypothesis import given, strategies as st

from fuel import ir


def f32_oracle(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


class TestNumerics:
    def test_wrap_boundaries(self):
        assert ir.wrap_i32(2**31) == -(2**31)
        assert ir.wrap_i32(-(2**31) - 1) == 2**31 - 1
        assert ir.wrap_i32(2**31 - 1) == 2**31 - 1
        assert ir.wrap_i32(0) == 0
        assert ir.wrap_i32(2**32) == 0

    @given(st.integers(min_value=-(2**80), max_value=2**80))
    def test_wrap_properties(self, n):
        w = ir.wrap_i32(n)
        assert ir.I32_MIN <= w <= ir.I32_MAX
        assert ir.wrap_i32(w) == w
        assert (w - n) % 2**32 == 0

    def test_round_f32_matches_struct(self):
        for x in (0.1, 13.37, 1.0, -2.5, 3.14159265358979, 1e30, -1e-30):
            assert ir.round_f32(x) == f32_oracle(x)

    @given(st.floats(allow_nan=False, allow_infinity=False, width=64))
    def test_round_f32_idempotent(self, x):
        r = ir.round_f32(x)
        assert ir.round_f32(r) == r

    def test_round_f32_overflow_saturates(self):
        assert ir.round_f32(1e39) == float("inf")
        assert ir.round_f32(-1e39) == float("-inf")

    def test_float_literal_out_of_range_is_a_lex_error(self):
        from fuel import parser

        src = "func main(): () -> () {\n  a = salloc F32 at m0\n"
        src += "  store 1" + "0" * 39 + ".0f, a\n}\n"
        with pytest.raises(parser.ParseFailure) as exc:
            parser.parse_module(src)
        assert exc.value.diagnostics[0].code.value == "LexError"


class TestTypes:
    def test_singletons_and_equality(self):
        assert ir.BOOL == ir.BoolType()
        assert ir.I32 == ir.I32Type()
        assert ir.F32 == ir.F32Type()
        assert ir.UNIT == ir.UnitType()
        assert ir.AddrType("m0") == ir.AddrType("m0")
        assert ir.AddrType("m0") != ir.AddrType("m1")

    def test_exists_alpha_equivalence(self):
        # The binder is printing sugar; all erased addresses are one type.
        assert ir.ExistsAddrType("a") == ir.ExistsAddrType("b")
        assert hash(ir.ExistsAddrType("a")) == hash(ir.ExistsAddrType("b"))
        assert ir.ExistsAddrType("a") != ir.AddrType("a")

    def test_junk_collapses(self):
        assert ir.JunkType(ir.JunkType(ir.I32)) == ir.JunkType(ir.I32)
        inner = ir.JunkType(ir.JunkType(ir.JunkType(ir.BOOL)))
        assert inner.inner == ir.BOOL

    def test_str_forms(self):
        assert str(ir.BOOL) == "Bool"
        assert str(ir.I32) == "I32"
        assert str(ir.F32) == "F32"
        assert str(ir.UNIT) == "()"
        assert str(ir.AddrType("m0")) == "!m0"
        assert str(ir.JunkType(ir.I32)) == "Junk<I32>"
        assert "exists" in str(ir.ExistsAddrType("a"))


class TestLayouts:
    def test_scalar_layouts(self):
        assert ir.layout_of(ir.BOOL) is ir.Layout.BOOL
        assert ir.layout_of(ir.I32) is ir.Layout.INT32
        assert ir.layout_of(ir.F32) is ir.Layout.FLOAT32

    def test_addresses_share_one_layout(self):
        assert ir.layout_of(ir.AddrType("m0")) is ir.Layout.ADDRESS
        assert ir.layout_of(ir.ExistsAddrType("a")) is ir.Layout.ADDRESS

    def test_junk_keeps_underlying_layout(self):
        assert ir.layout_of(ir.JunkType(ir.F32)) is ir.Layout.FLOAT32
        assert ir.layout_of(ir.JunkType(ir.AddrType("m0"))) is ir.Layout.ADDRESS

    def test_no_layout(self):
        with pytest.raises(ir.NoLayoutError):
            ir.layout_of(ir.UNIT)
        with pytest.raises(ir.NoLayoutError):
            ir.layout_of(ir.TupleType((ir.I32, ir.I32)))


class TestCellNames:
    def test_free_cell_names(self):
        assert ir.free_cell_names(ir.AddrType("m0")) == {"m0"}
        assert ir.free_cell_names(ir.I32) == set()
        # the existential binder is not a free occurrence
        assert ir.free_cell_names(ir.ExistsAddrType("a")) == set()
        tup = ir.TupleType((ir.AddrType("a"), ir.AddrType("b")))
        assert ir.free_cell_names(tup) == {"a", "b"}

    def test_substitute(self):
        ty = ir.AddrType("a")
        assert ir.substitute_cells(ty, {"a": "m0"}) == ir.AddrType("m0")
        assert ir.substitute_cells(ir.I32, {}) == ir.I32

    def test_substitute_unbound_variable(self):
        with pytest.raises(ir.UnboundCellVar):
            ir.substitute_cells(ir.AddrType("a"), {}, variables={"a"})

    def test_substitute_concrete_name_passes_through(self):
        got = ir.substitute_cells(ir.AddrType("m3"), {"a": "m0"}, variables={"a"})
        assert got == ir.AddrType("m3")

    @given(st.sampled_from(["a", "b", "c"]), st.sampled_from(["m0", "m1"]))
    def test_substitute_then_free_names(self, var, cell):
        ty = ir.TupleType((ir.AddrType(var), ir.ExistsAddrType("z")))
        out = ir.substitute_cells(ty, {var: cell})
        assert ir.free_cell_names(out) == {cell}


def _types(max_depth=2):
    base = st.sampled_from(
        [ir.BOOL, ir.I32, ir.F32, ir.UNIT, ir.AddrType("m0"), ir.ExistsAddrType("a")]
    )
    return st.recursive(
        base,
        lambda kids: st.one_of(
            kids.map(ir.JunkType),
            st.lists(kids, min_size=2, max_size=3).map(
                lambda es: ir.TupleType(tuple(es))
            ),
        ),
        max_leaves=4,
    )


@given(_types())
def test_normalize_idempotent(ty):
    once = ir.normalize_type(ty)
    assert ir.normalize_type(once) == once


class TestValidate:
    def test_clean_module(self):
        from conftest import parse_fixture

        assert ir.validate_module(parse_fixture("fig1b")) == []

    def test_duplicate_function(self):
        fn = ir.Function(
            "f", (), ir.Signature((), (), ir.UNIT, (), ()), ir.Block(())
        )
        issues = ir.validate_module(ir.Module((fn, fn)))
        assert any(i.kind == "duplicate" for i in issues)

    def test_duplicate_cell(self):
        body = ir.Block(
            (ir.SAlloc("a", ir.I32, "m0"), ir.SAlloc("b", ir.I32, "m0"))
        )
        fn = ir.Function("f", (), ir.Signature((), (), ir.UNIT, (), ()), body)
        issues = ir.validate_module(ir.Module((fn,)))
        assert any(i.kind == "duplicate" for i in issues)

    def test_walk_preorder(self):
        from conftest import parse_fixture

        fn = parse_fixture("fig1b").functions[0]
        kinds = [type(i).__name__ for i in ir.walk_instructions(fn)]
        assert kinds == ["SAlloc", "SAlloc", "Store", "Load", "If", "Store", "Store"]
