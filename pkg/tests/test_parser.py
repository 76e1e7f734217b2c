import pytest

from conftest import fixture_text, parse_fixture
from fuel import ir, parser
from fuel.diagnostics import ParseCode


def parse(src: str):
    return parser.parse_module(src, "test.fuel")


def parse_err(src: str):
    with pytest.raises(parser.ParseFailure) as exc:
        parse(src)
    return exc.value.diagnostics


class TestBasics:
    def test_empty_module(self):
        assert parse("") == ir.Module(())
        assert parse("// only a comment\n") == ir.Module(())

    def test_minimal_function(self):
        m = parse("func main(): () -> () {\n}\n")
        (fn,) = m.functions
        assert fn.name == "main"
        assert fn.param_regs == ()
        assert fn.body == ir.Block(())
        assert not fn.is_extern

    def test_extern_declaration_is_a_bodiless_header(self):
        m = parse("func f(x): forall a.(!a)+[@brw(a: I32)] -> I32\n")
        (fn,) = m.functions
        assert fn.is_extern
        assert fn.body is None
        assert fn.sig.cell_vars == ("a",)

    def test_comments_ignored(self):
        m = parse(
            "// leading\nfunc main(): () -> () { // trailing\n"
            "  a = salloc I32 at m0 // here too\n} // no newline at end"
        )
        assert len(m.functions[0].body.instrs) == 1

    def test_all_fixtures_parse(self):
        for name in ("fig1b", "fig2b", "fig4", "fig4_run", "fig5", "heap_roundtrip"):
            m = parse_fixture(name)
            assert m.functions


class TestTypeSyntax:
    def test_type_keywords_case_insensitive(self):
        for spelling in ("bool", "Bool", "BOOL", "bOOl"):
            m = parse(f"func main(): () -> () {{\n  a = salloc {spelling} at m0\n}}\n")
            assert m.functions[0].body.instrs[0].ty == ir.BOOL
        for spelling in ("i32", "I32"):
            m = parse(f"func f(): () -> {spelling} {{\n  return 0\n}}\n")
            assert m.functions[0].sig.return_type == ir.I32
        m = parse("func f(): () -> void {\n}\n")
        assert m.functions[0].sig.return_type == ir.UNIT

    def test_void_and_unit_are_the_same(self):
        a = parse("func f(): () -> Void {\n}\n")
        b = parse("func f(): () -> () {\n}\n")
        assert a == b

    def test_glyph_and_keyword_quantifiers(self):
        kw = parse("func f(x): forall a.(!a)+[a: I32] -> ()+[a: I32] {\n}\n")
        glyph = parse("func f(x): ∀ a.(!a)+[a: I32] -> ()+[a: I32] {\n}\n")
        assert kw == glyph

    def test_glyph_and_keyword_exists(self):
        kw = parse("func main(): () -> () {\n  a = salloc exists a.!a at m0\n}\n")
        glyph = parse("func main(): () -> () {\n  a = salloc ∃ a.!a at m0\n}\n")
        assert kw == glyph
        assert kw.functions[0].body.instrs[0].ty == ir.ExistsAddrType("a")

    def test_both_capability_spellings_agree(self):
        prefix = parse("func f(x): forall a.(!a)+[@brw(a: I32)] -> () {\n}\n")
        suffix = parse("func f(x): forall a.(!a)+[a: @brw(I32)] -> () {\n}\n")
        assert prefix == suffix
        cap = prefix.functions[0].sig.pre_caps[0]
        assert cap.qual is ir.Qualifier.BORROWED

        d1 = parse("func f(x): forall a.(!a)+[@dyn(a: I32)] -> () {\n}\n")
        d2 = parse("func f(x): forall a.(!a)+[a: @dyn(I32)] -> () {\n}\n")
        assert d1 == d2
        assert d1.functions[0].sig.pre_caps[0].qual is ir.Qualifier.DYNAMIC


class TestLiterals:
    def test_int_bounds(self):
        parse("func f(): () -> I32 {\n  return 2147483647\n}\n")
        parse("func f(): () -> I32 {\n  return -2147483648\n}\n")
        diags = parse_err("func f(): () -> I32 {\n  return 2147483648\n}\n")
        assert diags[0].code is ParseCode.LEX_ERROR
        assert "32-bit" in diags[0].message

    def test_float_needs_suffix(self):
        diags = parse_err(
            "func main(): () -> () {\n  a = salloc F32 at m0\n  store 13.37, a\n}\n"
        )
        assert diags[0].code is ParseCode.LEX_ERROR
        assert "suffix" in diags[0].message

    def test_float_forms(self):
        m = parse(
            "func main(): () -> () {\n  a = salloc F32 at m0\n"
            "  store 13.37f, a\n  store 2f, a\n  store -0.5f, a\n}\n"
        )
        stores = m.functions[0].body.instrs[1:]
        values = [s.value.value for s in stores]
        assert values[0] == ir.round_f32(13.37)
        assert values[1] == 2.0
        assert values[2] == -0.5

    def test_trailing_dot_rejected(self):
        diags = parse_err("func f(): () -> I32 {\n  return 1.\n}\n")
        assert diags[0].code is ParseCode.LEX_ERROR

    def test_bool_literals(self):
        m = parse(
            "func main(): () -> () {\n  a = salloc Bool at m0\n"
            "  store true, a\n  store false, a\n}\n"
        )
        s1, s2 = m.functions[0].body.instrs[1:]
        assert s1.value == ir.LitOperand(ir.BOOL, True)
        assert s2.value == ir.LitOperand(ir.BOOL, False)


class TestStatements:
    def test_discard_destination(self):
        m = parse("func main(): () -> () {\n  _ = call probe\n}\n")
        call = m.functions[0].body.instrs[0]
        assert call.dst is None
        assert call.callee == "probe"

    def test_underscore_not_a_parameter(self):
        diags = parse_err("func f(_): (I32) -> () {\n}\n")
        assert diags[0].code is ParseCode.SYNTAX_ERROR

    def test_bare_return_vs_value_return(self):
        m = parse("func f(): () -> () {\n  return\n}\n")
        assert m.functions[0].body.instrs[0] == ir.Return(None)
        m = parse("func f(x): (I32) -> I32 {\n  return x\n}\n")
        assert m.functions[0].body.instrs[0] == ir.Return(ir.RegOperand("x"))

    def test_return_then_assignment_disambiguation(self):
        # `return` followed by a statement starting with an identifier must
        # not swallow that identifier as its operand.
        m = parse(
            "func f(c): (Bool) -> () {\n  if c {\n    return\n  }\n"
            "  x = salloc I32 at m0\n}\n"
        )
        instrs = m.functions[0].body.instrs
        assert isinstance(instrs[0], ir.If)
        assert instrs[0].then_block.instrs == (ir.Return(None),)
        assert isinstance(instrs[1], ir.SAlloc)

    def test_return_inside_assuming_rejected(self):
        diags = parse_err(
            "func f(x): forall a.(!a)+[a: @dyn(I32)] -> () {\n"
            "  assuming x: I32 {\n    return\n  }\n}\n"
        )
        assert diags[0].code is ParseCode.SYNTAX_ERROR
        assert "assuming" in diags[0].message

    def test_if_with_and_without_else(self):
        m = parse(
            "func f(c): (Bool) -> () {\n  if c {\n    a = salloc I32 at m0\n"
            "  } else {\n    b = salloc I32 at m1\n  }\n}\n"
        )
        node = m.functions[0].body.instrs[0]
        assert len(node.then_block.instrs) == 1
        assert len(node.else_block.instrs) == 1
        m = parse("func f(c): (Bool) -> () {\n  if c {\n  }\n}\n")
        node = m.functions[0].body.instrs[0]
        assert node.else_block == ir.Block(())


class TestSpansAndErrors:
    def test_diagnostic_location(self):
        diags = parse_err("func main(): () -> () {\n  x = bogus\n}\n")
        assert diags[0].span.file == "test.fuel"
        assert diags[0].span.start_line == 2

    def test_recovery_reports_both_functions(self):
        diags = parse_err(
            "func f(): () -> () {\n  x = wat\n}\n\n"
            "func g(): () -> () {\n  store\n}\n"
        )
        lines = {d.span.start_line for d in diags}
        assert any(line <= 3 for line in lines)
        assert any(line >= 5 for line in lines)

    def test_duplicate_function_name(self):
        diags = parse_err(
            "func f(): () -> () {\n}\n\nfunc f(): () -> () {\n}\n"
        )
        assert any(d.code is ParseCode.DUPLICATE_NAME for d in diags)

    def test_duplicate_cell_name(self):
        diags = parse_err(
            "func f(): () -> () {\n  a = salloc I32 at m0\n"
            "  b = salloc I32 at m0\n}\n"
        )
        assert any(d.code is ParseCode.DUPLICATE_NAME for d in diags)

    def test_unreferenced_register_is_structural(self):
        diags = parse_err(
            "func f(): () -> () {\n  store 1, nowhere\n}\n"
        )
        assert any(d.code is ParseCode.UNBOUND_NAME for d in diags)

    def test_parse_failure_str(self):
        try:
            parse("func f(: () -> () {\n}\n")
        except parser.ParseFailure as exc:
            assert exc.diagnostics
            assert "error" in str(exc) or exc.diagnostics[0].message


class TestRoundTripSmall:
    def test_parse_print_parse(self):
        from fuel import printer

        for name in ("fig1b", "fig2b", "fig4", "fig5"):
            m = parse_fixture(name)
            again = parser.parse_module(printer.print_module(m))
            assert again == m

    def test_plain_fixture_texts_are_canonical(self):
        from fuel import printer

        # Fixtures without qualifier sugar print back to themselves modulo
        # comments; the ones using the suffix spelling only round-trip at the
        # AST level (the printer always emits the prefix form).
        for name in ("fig1b", "heap_roundtrip"):
            text = fixture_text(name)
            bare = "\n".join(
                line for line in text.splitlines() if not line.startswith("//")
            ).lstrip("\n") + "\n"
            m = parser.parse_module(text)
            assert printer.print_module(m) == bare

    def test_printing_reaches_a_fixpoint(self):
        from fuel import printer

        for name in ("fig1b", "fig2b", "fig4", "fig4_run", "fig5"):
            once = printer.print_module(parse_fixture(name))
            assert printer.print_module(parser.parse_module(once)) == once
