"""Source locations and diagnostic records.

Every diagnostic points at a source span and carries a stable machine-readable
code.  Parse-time problems and type-check problems are kept as separate
record types because they are produced by different phases and map to
different process exit codes, but both render through the same helpers.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass
from enum import Enum
from typing import Optional, TextIO, Union


@dataclass(frozen=True)
class SourceSpan:
    """A half-open region of a source file, 1-based lines and columns."""

    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self) -> None:
        if (self.end_line, self.end_col) < (self.start_line, self.start_col):
            raise ValueError("span ends before it starts")

    @classmethod
    def point(cls, file: str, line: int, col: int) -> "SourceSpan":
        return cls(file, line, col, line, col)

    def merge(self, other: "SourceSpan") -> "SourceSpan":
        """Smallest span covering both inputs.  Files must match."""
        if self.file != other.file:
            raise ValueError("cannot merge spans from different files")
        start = min((self.start_line, self.start_col), (other.start_line, other.start_col))
        end = max((self.end_line, self.end_col), (other.end_line, other.end_col))
        return SourceSpan(self.file, start[0], start[1], end[0], end[1])

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


class ParseCode(Enum):
    LEX_ERROR = "LexError"
    SYNTAX_ERROR = "SyntaxError"
    DUPLICATE_NAME = "DuplicateName"
    UNBOUND_NAME = "UnboundName"


class ErrorCode(Enum):
    """Codes emitted by the static capability checker."""

    USE_OF_JUNK = "UseOfJunk"
    USE_AFTER_CONSUME = "UseAfterConsume"
    NO_CAPABILITY = "NoCapability"
    LAYOUT_MISMATCH = "LayoutMismatch"
    TYPE_MISMATCH = "TypeMismatch"
    NOT_LINEAR = "NotLinear"
    UNGUARDED_DYNAMIC_USE = "UnguardedDynamicUse"
    BRANCH_CAPABILITY_MISMATCH = "BranchCapabilityMismatch"
    MISSING_POST_CAPABILITY = "MissingPostCapability"
    MEMORY_LEAK = "MemoryLeak"
    FREE_OF_STACK_CELL = "FreeOfStackCell"
    SIGNATURE_ERROR = "SignatureError"
    RETURN_TYPE_MISMATCH = "ReturnTypeMismatch"
    UNKNOWN_CALLEE = "UnknownCallee"
    ARITY_MISMATCH = "ArityMismatch"
    UNBOUND_REGISTER = "UnboundRegister"


@dataclass(frozen=True)
class ParseDiagnostic:
    span: SourceSpan
    code: ParseCode
    message: str

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("diagnostic message must be non-empty")


@dataclass(frozen=True)
class TypeDiagnostic:
    span: SourceSpan
    code: ErrorCode
    message: str

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("diagnostic message must be non-empty")


Diagnostic = Union[ParseDiagnostic, TypeDiagnostic]


def to_record(diag: Diagnostic) -> dict:
    """Flatten a diagnostic into the JSON record shape used by `--format json`."""
    return {
        "severity": "error",
        "code": diag.code.value,
        "file": diag.span.file,
        "line": diag.span.start_line,
        "col": diag.span.start_col,
        "message": diag.message,
    }


def to_json_line(diag: Diagnostic) -> str:
    return json.dumps(to_record(diag))


# -- human rendering ----------------------------------------------------------

_RESET = "\x1b[0m"
_BOLD = "\x1b[1m"
_RED = "\x1b[31m"


def use_color(stream: Optional[TextIO] = None) -> bool:
    """Honour FUEL_COLOR=always|never|auto; auto means `stream` is a tty."""
    mode = os.environ.get("FUEL_COLOR", "auto")
    if mode == "always":
        return True
    if mode == "never":
        return False
    if stream is None:
        stream = sys.stderr
    return hasattr(stream, "isatty") and stream.isatty()


def render_human(diag: Diagnostic, source: Optional[str] = None, color: bool = False) -> str:
    """One-line header plus, when the source text is available, a caret excerpt."""
    span = diag.span
    loc = f"{span.file}:{span.start_line}:{span.start_col}"
    label = f"error[{diag.code.value}]"
    if color:
        header = f"{_BOLD}{loc}{_RESET}: {_RED}{label}{_RESET}: {diag.message}"
    else:
        header = f"{loc}: {label}: {diag.message}"
    lines = [header]
    if source is not None:
        excerpt = _excerpt(span, source, color)
        if excerpt:
            lines.extend(excerpt)
    return "\n".join(lines)


def _excerpt(span: SourceSpan, source: str, color: bool) -> list[str]:
    src_lines = source.splitlines()
    if not (1 <= span.start_line <= len(src_lines)):
        return []
    text = src_lines[span.start_line - 1]
    start = max(span.start_col - 1, 0)
    if span.end_line == span.start_line:
        width = max(span.end_col - span.start_col, 1)
    else:
        width = max(len(text) - start, 1)
    caret = " " * start + "^" * width
    if color:
        caret = _RED + caret + _RESET
    return ["  " + text, "  " + caret]
