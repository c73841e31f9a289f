"""Diagnostics shared by every compilation stage.

A diagnostic always carries a machine-readable code (e.g. ``SyntaxError``,
``UnknownAttribute``), a source span, and a human message.  The compiler
accumulates diagnostics instead of stopping at the first problem: the parser
recovers at the next sentence terminator, the rewriter skips the offending
proposition.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    """Line/column position (1-based) plus length in characters."""

    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


NO_SPAN = Span(0, 0, 0)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    span: Span
    message: str

    def __str__(self) -> str:
        return f"{self.span}: {self.code}: {self.message}"


class CnlError(Exception):
    """Base class for all compilation errors."""

    def __init__(self, code: str, span: Span, message: str):
        super().__init__(f"{span}: {code}: {message}")
        self.code = code
        self.span = span
        self.message = message

    def diagnostic(self) -> Diagnostic:
        return Diagnostic(self.code, self.span, self.message)


class LexError(CnlError):
    """Raised by the tokenizer (IllegalCharacter)."""


class ParseError(CnlError):
    """Raised by the parser (SyntaxError, UnterminatedProposition)."""


class SemanticError(CnlError):
    """Raised by the registry and the rewriter.

    Codes: ConflictingSignature, EmptyRange, MisalignedStep, UnknownAttribute,
    ArityConflict, LengthMismatch, UnboundWhereVariable, MissingAttribute,
    NonGroundFact, MixedModality, UnknownConcept, ConflictingDirections,
    NonNumericSum, WindowExceedsRange, LabelOutOfRange, UndefinedSignature,
    UnsafeRule.
    """
