"""Tokenizer for the controlled-language front end.

Splits a UTF-8 document into words, numbers, clock times ("07:30 AM"),
calendar dates ("01/01/2022"), quoted strings, and punctuation.  Times and
dates are single tokens; everything else follows the obvious boundaries.
Spans are kept so that diagnostics can point at the source and so that the
original text can be reconstructed token by token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import LexError, Span


class TokenKind(Enum):
    WORD = "word"
    NUMBER = "number"
    TIME = "time-literal"
    DATE = "date-literal"
    STRING = "string"
    PUNCT = "punctuation"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    span: Span

    def __repr__(self) -> str:
        return f"Token({self.kind.value}, {self.text!r}, {self.span})"

    @property
    def is_word(self) -> bool:
        return self.kind is TokenKind.WORD

    @property
    def is_number(self) -> bool:
        return self.kind is TokenKind.NUMBER


# Longest match first: dates and times would otherwise split at ':' or '/'.
_TIME_RE = re.compile(r"\d{1,2}:\d{2} (?:AM|PM)")
_DATE_RE = re.compile(r"\d{1,2}/\d{1,2}/\d{4}")
_NUMBER_RE = re.compile(r"\d+")
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_STRING_RE = re.compile(r'"[^"\n]*"')

PUNCTUATION = set(".,;:()+-*|\\/<>=!")


def tokenize(source: str) -> list[Token]:
    """Tokenize ``source``; raises LexError on bytes outside the alphabet."""
    tokens: list[Token] = []
    line = 1
    col = 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        for kind, pattern in (
            (TokenKind.TIME, _TIME_RE),
            (TokenKind.DATE, _DATE_RE),
            (TokenKind.NUMBER, _NUMBER_RE),
            (TokenKind.WORD, _WORD_RE),
            (TokenKind.STRING, _STRING_RE),
        ):
            m = pattern.match(source, i)
            if m:
                text = m.group()
                tokens.append(Token(kind, text, Span(line, col, len(text))))
                i = m.end()
                col += len(text)
                break
        else:
            if ch in PUNCTUATION:
                tokens.append(Token(TokenKind.PUNCT, ch, Span(line, col, 1)))
                i += 1
                col += 1
            else:
                raise LexError(
                    "IllegalCharacter", Span(line, col, 1), f"illegal character {ch!r}"
                )
    return tokens


def split_sentences(tokens: list[Token]) -> tuple[list[list[Token]], bool]:
    """Group the token stream into dot-terminated sentences.

    The terminating dot is kept out of the returned groups.  Returns the
    groups plus a flag telling whether the final sentence lacked its dot
    (UnterminatedProposition at the caller).
    """
    sentences: list[list[Token]] = []
    current: list[Token] = []
    for tok in tokens:
        if tok.kind is TokenKind.PUNCT and tok.text == ".":
            if current:
                sentences.append(current)
                current = []
            # A stray dot (empty sentence) is silently dropped.
        else:
            current.append(tok)
    unterminated = bool(current)
    if current:
        sentences.append(current)
    return sentences, unterminated
