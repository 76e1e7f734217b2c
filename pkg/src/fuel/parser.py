"""Lexer and parser for the textual Fuel IL.

The surface syntax is line-oriented only by convention; whitespace is free
and `//` starts a line comment.  The parser recovers at statement and
function boundaries so several errors can be reported per run, then applies
structural validation (naming discipline, return placement) before a module
is released to callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from . import ir
from .diagnostics import ParseCode, ParseDiagnostic, SourceSpan

_KEYWORDS = {
    "func", "forall", "exists", "store", "free", "if", "else", "assuming",
    "return", "salloc", "halloc", "load", "call", "at", "true", "false", "Junk",
}

# Type names are reserved in any capitalisation.
_TYPE_KEYWORDS = {"bool": "BOOL_T", "i32": "I32_T", "f32": "F32_T", "void": "VOID_T"}

_SYMBOLS = ("->", "(", ")", "{", "}", "[", "]", "<", ">", ",", ":", ".", "!", "=", "+")

_STMT_START = {"store", "free", "if", "assuming", "return", "IDENT"}

_OPERAND_START = {"IDENT", "INT", "FLOAT", "true", "false"}


class ParseFailure(Exception):
    """Raised when a source text cannot be turned into a valid module."""

    def __init__(self, diagnostics: list[ParseDiagnostic]) -> None:
        head = diagnostics[0].message if diagnostics else "parse failed"
        super().__init__(f"{len(diagnostics)} parse diagnostic(s): {head}")
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int
    end_line: int
    end_col: int
    value: object = None

    def span(self, file: str) -> SourceSpan:
        return SourceSpan(file, self.line, self.col, self.end_line, self.end_col)


def _lex(text: str, file: str) -> tuple[list[Token], list[ParseDiagnostic]]:
    tokens: list[Token] = []
    diags: list[ParseDiagnostic] = []
    line, col = 1, 1
    i, n = 0, len(text)

    def err(msg: str, l: int, c: int, width: int = 1) -> None:
        diags.append(
            ParseDiagnostic(SourceSpan(file, l, c, l, c + width), ParseCode.LEX_ERROR, msg)
        )

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue

        start_line, start_col = line, col

        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word in _KEYWORDS:
                kind = word
            elif word.lower() in _TYPE_KEYWORDS:
                kind = _TYPE_KEYWORDS[word.lower()]
            else:
                kind = "IDENT"
            col += j - i
            tokens.append(Token(kind, word, start_line, start_col, line, col))
            i = j
            continue

        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1 if ch == "-" else i
            while j < n and text[j].isdigit():
                j += 1
            is_float = False
            if j < n and text[j] == ".":
                if j + 1 < n and text[j + 1].isdigit():
                    is_float = True
                    j += 1
                    while j < n and text[j].isdigit():
                        j += 1
                else:
                    word = text[i:j + 1]
                    col += len(word)
                    err("digits must follow the decimal point", start_line, start_col, len(word))
                    i = j + 1
                    continue
            if j < n and text[j] == "f":
                is_float = True
                j += 1
                word = text[i:j]
                col += len(word)
                fval = ir.round_f32(float(word[:-1]))
                if math.isinf(fval):
                    err("float literal out of the single-precision range",
                        start_line, start_col, len(word))
                    i = j
                    continue
                tokens.append(
                    Token("FLOAT", word, start_line, start_col, line, col,
                          value=fval)
                )
                i = j
                continue
            word = text[i:j]
            col += len(word)
            if is_float:
                err("float literals need the 'f' suffix", start_line, start_col, len(word))
                i = j
                continue
            value = int(word)
            if not ir.I32_MIN <= value <= ir.I32_MAX:
                err("integer literal out of the signed 32-bit range",
                    start_line, start_col, len(word))
                i = j
                continue
            tokens.append(Token("INT", word, start_line, start_col, line, col, value=value))
            i = j
            continue

        if ch == "@":
            j = i + 1
            while j < n and text[j].isalnum():
                j += 1
            word = text[i:j]
            col += len(word)
            if word in ("@brw", "@dyn"):
                tokens.append(Token(word, word, start_line, start_col, line, col))
            else:
                err(f"unknown qualifier {word!r}", start_line, start_col, len(word))
            i = j
            continue

        if ch == "∀":
            col += 1
            tokens.append(Token("forall", ch, start_line, start_col, line, col))
            i += 1
            continue
        if ch == "∃":
            col += 1
            tokens.append(Token("exists", ch, start_line, start_col, line, col))
            i += 1
            continue

        sym = next((s for s in _SYMBOLS if text.startswith(s, i)), None)
        if sym is not None:
            col += len(sym)
            tokens.append(Token(sym, sym, start_line, start_col, line, col))
            i += len(sym)
            continue

        col += 1
        err(f"unexpected character {ch!r}", start_line, start_col)
        i += 1

    tokens.append(Token("EOF", "", line, col, line, col))
    return tokens, diags


class _SyncError(Exception):
    def __init__(self, diag: ParseDiagnostic) -> None:
        super().__init__(diag.message)
        self.diag = diag


class _Parser:
    def __init__(self, tokens: list[Token], file: str) -> None:
        self.tokens = tokens
        self.file = file
        self.pos = 0
        self.diags: list[ParseDiagnostic] = []

    # -- cursor helpers --

    def _peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def _at(self, kind: str) -> bool:
        return self._peek().kind == kind

    def _at_eof(self) -> bool:
        return self._at("EOF")

    def _advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def _expect(self, kind: str, what: str) -> Token:
        tok = self._peek()
        if tok.kind != kind:
            shown = tok.text if tok.kind != "EOF" else "end of input"
            raise _SyncError(
                ParseDiagnostic(tok.span(self.file), ParseCode.SYNTAX_ERROR,
                                f"expected {what}, found {shown!r}")
            )
        return self._advance()

    def _span(self, start: Token) -> SourceSpan:
        end = self.tokens[max(self.pos - 1, 0)]
        return start.span(self.file).merge(end.span(self.file))

    def _error(self, msg: str, tok: Optional[Token] = None) -> _SyncError:
        tok = tok or self._peek()
        return _SyncError(
            ParseDiagnostic(tok.span(self.file), ParseCode.SYNTAX_ERROR, msg)
        )

    # -- recovery --

    def _sync_function(self) -> None:
        depth = 0
        while not self._at_eof():
            k = self._peek().kind
            if k == "{":
                depth += 1
            elif k == "}":
                depth = max(depth - 1, 0)
            elif k == "func" and depth == 0:
                return
            self._advance()

    def _sync_statement(self) -> None:
        while not self._at_eof():
            k = self._peek().kind
            if k in ("}", "func") or k in _STMT_START:
                return
            if k == "{":
                self._skip_braces()
                continue
            self._advance()

    def _skip_braces(self) -> None:
        depth = 0
        while not self._at_eof():
            k = self._advance().kind
            if k == "{":
                depth += 1
            elif k == "}":
                depth -= 1
                if depth <= 0:
                    return

    # -- grammar --

    def parse_module(self) -> ir.Module:
        fns: list[ir.Function] = []
        while not self._at_eof():
            if not self._at("func"):
                self.diags.append(self._error("expected 'func'").diag)
                self._advance()
                self._sync_function()
                continue
            try:
                fns.append(self._parse_function())
            except _SyncError as e:
                self.diags.append(e.diag)
                self._sync_function()
        return ir.Module(tuple(fns))

    def _parse_function(self) -> ir.Function:
        start = self._expect("func", "'func'")
        name = self._expect("IDENT", "a function name")
        self._expect("(", "'('")
        params: list[str] = []
        if not self._at(")"):
            while True:
                tok = self._expect("IDENT", "a parameter register")
                if tok.text == "_":
                    raise self._error("'_' cannot be a parameter name", tok)
                params.append(tok.text)
                if not self._at(","):
                    break
                self._advance()
        self._expect(")", "')'")
        self._expect(":", "':'")
        sig = self._parse_signature()
        header_span = self._span(start)
        body = None
        if self._at("{"):
            body = self._parse_block()
        return ir.Function(name.text, tuple(params), sig, body, span=header_span)

    def _parse_signature(self) -> ir.Signature:
        cell_vars: list[str] = []
        if self._at("forall"):
            self._advance()
            while True:
                cell_vars.append(self._expect("IDENT", "a cell variable").text)
                if not self._at(","):
                    break
                self._advance()
            self._expect(".", "'.' after the quantifier")
        self._expect("(", "'(' starting the parameter types")
        param_types: list[ir.Type] = []
        if not self._at(")"):
            while True:
                param_types.append(self._parse_type())
                if not self._at(","):
                    break
                self._advance()
        self._expect(")", "')'")
        pre_caps: tuple = ()
        if self._at("+"):
            self._advance()
            pre_caps = self._parse_capset()
        self._expect("->", "'->'")
        ret = self._parse_type()
        post_caps: tuple = ()
        if self._at("+"):
            self._advance()
            post_caps = self._parse_capset()
        return ir.Signature(tuple(cell_vars), tuple(param_types), ret, pre_caps, post_caps)

    def _parse_capset(self) -> tuple:
        self._expect("[", "'['")
        caps: list[ir.CellCap] = []
        if not self._at("]"):
            while True:
                caps.append(self._parse_cap())
                if not self._at(","):
                    break
                self._advance()
        self._expect("]", "']'")
        return tuple(caps)

    def _parse_cap(self) -> ir.CellCap:
        # Either `@brw(c: T)` or `c: @brw(T)` or plain `c: T`; the first two
        # mean the same thing.
        if self._at("@brw") or self._at("@dyn"):
            qual = self._qual(self._advance().kind)
            self._expect("(", "'('")
            name = self._expect("IDENT", "a cell name").text
            self._expect(":", "':'")
            ty = self._parse_type()
            self._expect(")", "')'")
            return ir.CellCap(name, ty, qual)
        name = self._expect("IDENT", "a cell name").text
        self._expect(":", "':'")
        if self._at("@brw") or self._at("@dyn"):
            qual = self._qual(self._advance().kind)
            self._expect("(", "'('")
            ty = self._parse_type()
            self._expect(")", "')'")
            return ir.CellCap(name, ty, qual)
        return ir.CellCap(name, self._parse_type(), ir.Qualifier.LINEAR)

    @staticmethod
    def _qual(kind: str) -> ir.Qualifier:
        return ir.Qualifier.BORROWED if kind == "@brw" else ir.Qualifier.DYNAMIC

    def _parse_type(self) -> ir.Type:
        tok = self._peek()
        if tok.kind == "BOOL_T":
            self._advance()
            return ir.BOOL
        if tok.kind == "I32_T":
            self._advance()
            return ir.I32
        if tok.kind == "F32_T":
            self._advance()
            return ir.F32
        if tok.kind == "VOID_T":
            self._advance()
            return ir.UNIT
        if tok.kind == "(":
            self._advance()
            if self._at(")"):
                self._advance()
                return ir.UNIT
            elems = [self._parse_type()]
            while self._at(","):
                self._advance()
                elems.append(self._parse_type())
            self._expect(")", "')'")
            if len(elems) == 1:
                return elems[0]  # plain grouping
            return ir.TupleType(tuple(elems))
        if tok.kind == "!":
            self._advance()
            cell = self._expect("IDENT", "a cell name after '!'")
            return ir.AddrType(cell.text)
        if tok.kind == "exists":
            self._advance()
            binder = self._expect("IDENT", "a binder after 'exists'")
            self._expect(".", "'.'")
            body = self._parse_type()
            if body != ir.AddrType(binder.text):
                raise self._error(
                    f"existential body must be '!{binder.text}'", binder
                )
            return ir.ExistsAddrType(binder.text)
        if tok.kind == "Junk":
            self._advance()
            self._expect("<", "'<'")
            inner = self._parse_type()
            self._expect(">", "'>'")
            return ir.JunkType(inner)
        raise self._error(f"expected a type, found {tok.text!r}", tok)

    def _parse_block(self) -> ir.Block:
        self._expect("{", "'{'")
        instrs: list[ir.Instruction] = []
        while not self._at("}"):
            if self._at_eof():
                raise self._error("unterminated block, expected '}'")
            before = self.pos
            try:
                instrs.append(self._parse_statement())
            except _SyncError as e:
                self.diags.append(e.diag)
                if self.pos == before:
                    self._advance()
                self._sync_statement()
                if self._at("func"):
                    raise self._error("unterminated block, expected '}'")
        self._advance()
        return ir.Block(tuple(instrs))

    def _parse_statement(self) -> ir.Instruction:
        tok = self._peek()
        if tok.kind == "store":
            self._advance()
            value = self._parse_operand()
            self._expect(",", "',' between the value and the target")
            target = self._parse_operand()
            return ir.Store(value, target, span=self._span(tok))
        if tok.kind == "free":
            self._advance()
            target = self._parse_operand()
            return ir.Free(target, span=self._span(tok))
        if tok.kind == "if":
            self._advance()
            cond = self._parse_operand()
            header = self._span(tok)
            then_block = self._parse_block()
            else_block = ir.Block()
            if self._at("else"):
                self._advance()
                else_block = self._parse_block()
            return ir.If(cond, then_block, else_block, span=header)
        if tok.kind == "assuming":
            self._advance()
            reg = self._expect("IDENT", "a register to test")
            self._expect(":", "':'")
            ty = self._parse_type()
            header = self._span(tok)
            body = self._parse_block()
            return ir.Assuming(reg.text, ty, body, span=header)
        if tok.kind == "return":
            self._advance()
            value = None
            nxt = self._peek()
            if nxt.kind in _OPERAND_START:
                # `x = ...` directly after a bare return belongs to the next
                # statement, not to the return.
                if not (nxt.kind == "IDENT" and self._peek(1).kind == "="):
                    value = self._parse_operand()
            return ir.Return(value, span=self._span(tok))
        if tok.kind == "IDENT":
            dst_tok = self._advance()
            self._expect("=", "'=' after the destination register")
            dst = None if dst_tok.text == "_" else dst_tok.text
            rhs = self._peek()
            if rhs.kind in ("salloc", "halloc"):
                self._advance()
                ty = self._parse_type()
                self._expect("at", "'at'")
                cell = self._expect("IDENT", "a cell name")
                cls = ir.SAlloc if rhs.kind == "salloc" else ir.HAlloc
                return cls(dst, ty, cell.text, span=self._span(tok))
            if rhs.kind == "load":
                self._advance()
                src = self._parse_operand()
                return ir.Load(dst, src, span=self._span(tok))
            if rhs.kind == "call":
                self._advance()
                callee = self._expect("IDENT", "a function name")
                args: list[ir.Operand] = []
                while self._at(","):
                    self._advance()
                    args.append(self._parse_operand())
                return ir.Call(dst, callee.text, tuple(args), span=self._span(tok))
            raise self._error(
                f"expected salloc, halloc, load, or call, found {rhs.text!r}", rhs
            )
        raise self._error(f"expected a statement, found {tok.text!r}", tok)

    def _parse_operand(self) -> ir.Operand:
        tok = self._peek()
        if tok.kind == "IDENT":
            self._advance()
            return ir.RegOperand(tok.text)
        if tok.kind == "true":
            self._advance()
            return ir.LitOperand(ir.BOOL, True)
        if tok.kind == "false":
            self._advance()
            return ir.LitOperand(ir.BOOL, False)
        if tok.kind == "INT":
            self._advance()
            return ir.LitOperand(ir.I32, tok.value)
        if tok.kind == "FLOAT":
            self._advance()
            return ir.LitOperand(ir.F32, tok.value)
        raise self._error(f"expected an operand, found {tok.text!r}", tok)


_ISSUE_CODES = {
    "duplicate": ParseCode.DUPLICATE_NAME,
    "unbound": ParseCode.UNBOUND_NAME,
    "syntax": ParseCode.SYNTAX_ERROR,
}


def parse_module(text: str, filename: str = "<input>") -> ir.Module:
    """Parse source text into a structurally valid module.

    Raises ParseFailure carrying every diagnostic found; lexical errors are
    reported alone, then grammar errors, then structural problems.
    """
    tokens, lex_diags = _lex(text, filename)
    if lex_diags:
        raise ParseFailure(lex_diags)
    parser = _Parser(tokens, filename)
    module = parser.parse_module()
    if parser.diags:
        raise ParseFailure(parser.diags)
    issues = ir.validate_module(module)
    if issues:
        diags = [
            ParseDiagnostic(
                issue.span or SourceSpan.point(filename, 1, 1),
                _ISSUE_CODES[issue.kind],
                issue.message,
            )
            for issue in issues
        ]
        raise ParseFailure(diags)
    return module
