"""Recursive-descent parser from token stream to proposition ASTs.

Variant selection is keyword driven: sentence openers ("It is prohibited
that", "Whenever", "Every", "There is a") and body patterns ("is identified
by", "goes from", "is one of", "is a constant", "is a temporal concept").
Clause openers are matched case-sensitively as printed; the sentence-initial
article accepts both "A" and "a".

On a syntax error the parser records a diagnostic and resumes at the next
sentence, so one bad proposition does not hide the rest of the document.
"""

from __future__ import annotations

from typing import Optional

from . import cnl_ast as ast
from .cnl_ast import (
    AggregateClause,
    AggregateConstraint,
    AggregateGoal,
    AggregateOperand,
    AttributeDecl,
    ClauseGoal,
    ClauseText,
    ComparisonBody,
    ComparisonGoal,
    ComparisonTail,
    EntityOperand,
    EParen,
    EAbs,
    EArith,
    EValue,
    Expr,
    ExprOperand,
    Filler,
    Mention,
    OperationGoal,
    OperationOperand,
    Operand,
    PathOperand,
    Quantity,
    QuantifiedConstraint,
    SimpleClauses,
    VariableGoal,
    WhenThen,
    WhereBetween,
    WhereComparison,
    WhereItem,
    WhereOneOf,
    looks_like_variable,
)
from .errors import NO_SPAN, Diagnostic, ParseError, Span
from .tokens import Token, TokenKind, split_sentences, tokenize

ARTICLES = ("a", "an", "the")
UNIT_WORDS = {"timeslots", "timeslot", "minutes", "days", "steps", "day", "minute"}

# Words that terminate a concept-name or attribute-name span.
NAME_STOP = {
    "with", "that", "then", "whenever", "where", "such", "and", "or", "to",
    "in", "for", "is", "are", "not", "can", "must", "when", "also", "by",
    "has", "have", "equal", "different", "greater", "less", "more", "at",
    "after", "before", "between", "goes", "respectively", "ranging",
}

COMPARISON_PHRASES = [
    (("greater", "than", "or", "equal", "to"), ">="),
    (("less", "than", "or", "equal", "to"), "<="),
    (("greater", "than"), ">"),
    (("less", "than"), "<"),
    (("more", "than"), ">"),
    (("different", "from"), "!="),
    (("equal", "to"), "="),
    (("at", "least"), ">="),
    (("at", "most"), "<="),
    (("after",), "after"),
    (("before",), "before"),
]


class _Cursor:
    """Token window over one sentence."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.tokens)

    def peek(self, offset: int = 0) -> Optional[Token]:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def text(self, offset: int = 0) -> Optional[str]:
        tok = self.peek(offset)
        return tok.text if tok else None

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def span(self) -> Span:
        tok = self.peek() or (self.tokens[-1] if self.tokens else None)
        return tok.span if tok else NO_SPAN

    def at_word(self, *texts: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.is_word and tok.text in texts

    def at_phrase(self, *words: str, offset: int = 0) -> bool:
        return all(self.at_word(w, offset=offset + i) for i, w in enumerate(words))

    def take_phrase(self, *words: str) -> bool:
        if self.at_phrase(*words):
            self.pos += len(words)
            return True
        return False

    def expect_word(self, word: str) -> Token:
        if not self.at_word(word):
            raise ParseError(
                "SyntaxError", self.span(), f"expected {word!r}, found {self.text()!r}"
            )
        return self.next()

    def at_comma(self, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.kind is TokenKind.PUNCT and tok.text == ","

    def take_comma(self) -> bool:
        if self.at_comma():
            self.next()
            return True
        return False

    def at_variable(self, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.is_word and looks_like_variable(tok.text)

    def at_value_start(self, offset: int = 0) -> bool:
        tok = self.peek(offset)
        if tok is None:
            return False
        if tok.kind in (TokenKind.NUMBER, TokenKind.TIME, TokenKind.DATE):
            return True
        if tok.kind is TokenKind.PUNCT and tok.text in "(|":
            return True
        return tok.is_word and looks_like_variable(tok.text)


def _comparison_op(cur: _Cursor) -> Optional[tuple[str, bool]]:
    """Match a comparison phrase at the cursor; returns (op, negated)."""
    negated = False
    start = cur.pos
    if cur.at_word("not"):
        negated = True
        cur.next()
    for words, op in COMPARISON_PHRASES:
        if cur.take_phrase(*words):
            return op, negated
    cur.pos = start
    return None


def _starts_comparison(cur: _Cursor, offset: int = 0) -> bool:
    probe = _Cursor(cur.tokens)
    probe.pos = cur.pos + offset
    return _comparison_op(probe) is not None


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

def parse_expr(cur: _Cursor) -> Expr:
    left = _parse_primary(cur)
    while True:
        tok = cur.peek()
        if tok is not None and tok.kind is TokenKind.PUNCT and tok.text in "+-*":
            op = cur.next().text
            right = _parse_primary(cur)
            left = EArith(op, left, right)
        else:
            return left


def _parse_primary(cur: _Cursor) -> Expr:
    tok = cur.peek()
    if tok is None:
        raise ParseError("SyntaxError", NO_SPAN, "expected a value, found end of sentence")
    if tok.kind is TokenKind.PUNCT and tok.text == "|":
        cur.next()
        inner = parse_expr(cur)
        closing = cur.peek()
        if closing is None or closing.text != "|":
            raise ParseError("SyntaxError", cur.span(), "unterminated |...| expression")
        cur.next()
        return EAbs(inner)
    if tok.kind is TokenKind.PUNCT and tok.text == "(":
        cur.next()
        inner = parse_expr(cur)
        closing = cur.peek()
        if closing is None or closing.text != ")":
            raise ParseError("SyntaxError", cur.span(), "unterminated (...) expression")
        cur.next()
        return EParen(inner)
    if tok.kind in (TokenKind.NUMBER, TokenKind.TIME, TokenKind.DATE) or tok.is_word:
        return EValue(cur.next())
    raise ParseError("SyntaxError", tok.span, f"expected a value, found {tok.text!r}")


def _parse_comparison_tail(cur: _Cursor) -> ComparisonTail:
    matched = _comparison_op(cur)
    if matched is None:
        raise ParseError("SyntaxError", cur.span(), "expected a comparison operator")
    op, negated = matched
    rhs = parse_expr(cur)
    unit = None
    if cur.at_word(*UNIT_WORDS) and not cur.at_variable():
        unit = cur.next().text
    return ComparisonTail(op, rhs, negated, unit)


# ---------------------------------------------------------------------------
# Mentions and fillers
# ---------------------------------------------------------------------------

def _take_article(cur: _Cursor, sentence_initial: bool = False) -> bool:
    tok = cur.peek()
    if tok is None or not tok.is_word:
        return False
    if tok.text in ("a", "an", "the"):
        cur.next()
        return True
    if sentence_initial and tok.text in ("A", "An", "The"):
        cur.next()
        return True
    return False


def _parse_name_words(cur: _Cursor, allow_of: bool = True) -> list[Token]:
    """Absorb a noun-phrase span: words up to the next structural keyword."""
    words: list[Token] = []
    while True:
        tok = cur.peek()
        if tok is None or not tok.is_word:
            break
        if looks_like_variable(tok.text):
            break
        lowered = tok.text.lower()
        if lowered in ("of", "the") and allow_of and words:
            # inner "of the" of multi-word attribute names
            nxt = cur.peek(1)
            if nxt is not None and nxt.is_word and not looks_like_variable(nxt.text):
                words.append(cur.next())
                continue
            break
        if tok.text in NAME_STOP:
            break
        words.append(cur.next())
    return words


def parse_filler(cur: _Cursor) -> Filler:
    """Parse one "with ..." filler; cursor sits on "with"."""
    cur.expect_word("with")
    # "with the next step respect to T"
    for word, shift in (("next", 1), ("previous", -1)):
        if cur.at_phrase("the", word) and cur.at_word(offset=2) is not None:
            if cur.text(3) == "respect" and cur.text(4) == "to":
                cur.pos += 5
                value = parse_expr(cur)
                return Filler(attr_tokens=(), value=value, shift=shift)
    _take_article(cur)
    attr = _parse_name_words(cur)
    if not attr:
        raise ParseError("SyntaxError", cur.span(), "expected an attribute name after 'with'")
    value = None
    if cur.at_value_start():
        value = parse_expr(cur)
    comp = None
    if _starts_comparison(cur):
        comp = _parse_comparison_tail(cur)
    return Filler(attr_tokens=tuple(attr), value=value, comp=comp)


def _at_filler_start(cur: _Cursor) -> int:
    """0 = no filler here; otherwise tokens to skip before "with"."""
    if cur.at_word("with"):
        return 0
    if cur.at_comma():
        if cur.at_word("with", offset=1):
            return 1
        if cur.at_word("and", offset=1) and cur.at_word("with", offset=2):
            return 2
    if cur.at_word("and") and cur.at_word("with", offset=1):
        return 1
    return -1


def parse_mention(cur: _Cursor, with_article: bool = True) -> Mention:
    """Parse an entity mention: concept words, handle, shift, fillers."""
    negated = False
    if cur.at_word("not"):
        negated = True
        cur.next()
    if with_article:
        _take_article(cur)
    words = _parse_name_words(cur, allow_of=False)
    if not words:
        raise ParseError("SyntaxError", cur.span(), "expected a concept name")
    handle = None
    if cur.at_variable():
        handle = cur.next()
    shift = 0
    for word, delta in (("next", 1), ("previous", -1)):
        if cur.at_phrase("the", word):
            step_word = cur.peek(2)
            if step_word is not None and step_word.is_word and not looks_like_variable(step_word.text):
                cur.pos += 3
                shift = delta
                break
    temporal = None
    if cur.at_phrase("that", "is") and _starts_comparison(cur, offset=2):
        cur.pos += 2
        temporal = _parse_comparison_tail(cur)
    fillers: list[Filler] = []
    while True:
        skip = _at_filler_start(cur)
        if skip < 0:
            break
        cur.pos += skip
        fillers.append(parse_filler(cur))
    return Mention(
        words=tuple(words),
        handle=handle,
        fillers=tuple(fillers),
        negated=negated,
        shift=shift,
        temporal=temporal,
    )


def _parse_mention_list(cur: _Cursor) -> list[Mention]:
    """Comma/and separated mentions ("a joint J1, a joint J2, an angle A")."""
    mentions = [parse_mention(cur)]
    while True:
        save = cur.pos
        took = cur.take_comma()
        cur.take_phrase("and")
        if cur.at_word(*ARTICLES) or (took and cur.at_word("there")):
            if cur.take_phrase("there", "is"):
                pass
            mentions.append(parse_mention(cur))
        else:
            cur.pos = save
            break
    return mentions


# ---------------------------------------------------------------------------
# Where clauses
# ---------------------------------------------------------------------------

def parse_where(cur: _Cursor) -> list[WhereItem]:
    items: list[WhereItem] = []
    while True:
        if not cur.at_variable():
            raise ParseError("SyntaxError", cur.span(), "expected a variable in where clause")
        var = cur.next()
        cur.expect_word("is")
        if cur.take_phrase("one", "of"):
            respectively = cur.take_phrase("respectively")
            values = _parse_value_list(cur)
            items.append(WhereOneOf(var, tuple(values), respectively))
        elif cur.take_phrase("between"):
            low = cur.next()
            cur.expect_word("and")
            high = cur.next()
            items.append(WhereBetween(var, low, high))
        else:
            tail = _parse_comparison_tail(cur)
            items.append(WhereComparison(var, tail.op, tail.rhs))
        # "and <VAR> is ..." starts the next item
        save = cur.pos
        cur.take_comma()
        if cur.take_phrase("and") and cur.at_variable() and cur.at_word("is", offset=1):
            continue
        cur.pos = save
        break
    return items


def _parse_value_list(cur: _Cursor) -> list[Token]:
    """Comma separated values with an optional final "and"."""
    values = [cur.next()]
    while True:
        save = cur.pos
        took_comma = cur.take_comma()
        took_and = cur.take_phrase("and")
        if not (took_comma or took_and):
            break
        tok = cur.peek()
        if tok is None or not (tok.is_word or tok.kind is TokenKind.NUMBER):
            cur.pos = save
            break
        # "and M is one of ..." / "and has ..." start new structure
        if took_and and (
            cur.at_word("has", offset=0)
            or (cur.at_variable() and cur.at_word("is", offset=1))
        ):
            cur.pos = save
            break
        values.append(cur.next())
    return values


# ---------------------------------------------------------------------------
# Definitions
# ---------------------------------------------------------------------------

def _parse_attr_items(cur: _Cursor, stop_at_has: bool) -> list[AttributeDecl]:
    items: list[AttributeDecl] = []
    while True:
        cur.take_comma()
        cur.take_phrase("and")
        if stop_at_has and cur.at_word("has"):
            break
        cur.take_phrase("by")
        _take_article(cur)
        words = _parse_name_words(cur)
        if not words:
            break
        items.append(AttributeDecl(tuple(words)))
        if cur.eof() or not (cur.at_comma() or cur.at_word("and")):
            break
    return items


def parse_domain_definition(cur: _Cursor, tokens: list[Token]) -> ast.DomainDefinition:
    span = cur.span()
    _take_article(cur, sentence_initial=True)
    name: list[Token] = []
    while not cur.at_phrase("is", "identified") and not cur.at_word("has"):
        if cur.eof():
            raise ParseError("SyntaxError", span, "expected 'is identified by'")
        name.append(cur.next())
    keys: list[AttributeDecl] = []
    if cur.take_phrase("is", "identified", "by"):
        keys = _parse_attr_items(cur, stop_at_has=True)
    params: list[AttributeDecl] = []
    if cur.take_phrase("has"):
        params = _parse_attr_items(cur, stop_at_has=False)
    return ast.DomainDefinition(tuple(name), tuple(keys), tuple(params), span, tuple(tokens))


def parse_temporal_definition(cur: _Cursor, tokens: list[Token]) -> ast.TemporalDefinition:
    span = cur.span()
    _take_article(cur, sentence_initial=True)
    name: list[Token] = []
    while not cur.at_phrase("is", "a", "temporal"):
        if cur.eof():
            raise ParseError("SyntaxError", span, "expected 'is a temporal concept'")
        name.append(cur.next())
    if not cur.take_phrase("is", "a", "temporal", "concept", "expressed", "in"):
        raise ParseError("SyntaxError", cur.span(), "expected 'is a temporal concept expressed in'")
    unit_tok = cur.next()
    if unit_tok.text not in ("minutes", "days", "steps"):
        raise ParseError(
            "SyntaxError", unit_tok.span, f"unknown temporal unit {unit_tok.text!r}"
        )
    if not cur.take_phrase("ranging", "from"):
        raise ParseError("SyntaxError", cur.span(), "expected 'ranging from'")
    start = cur.next()
    cur.expect_word("to")
    end = cur.next()
    step = None
    if cur.take_phrase("with", "a", "length", "of"):
        step_tok = cur.next()
        if step_tok.kind is not TokenKind.NUMBER:
            raise ParseError("SyntaxError", step_tok.span, "expected a step length")
        step = int(step_tok.text)
        if cur.at_word("minutes", "days"):
            cur.next()
    return ast.TemporalDefinition(tuple(name), unit_tok.text, start, end, step, span, tuple(tokens))


def parse_constant_definition(cur: _Cursor, tokens: list[Token]) -> ast.ConstantDefinition:
    span = cur.span()
    name = cur.next()
    if not cur.take_phrase("is", "a", "constant"):
        raise ParseError("SyntaxError", cur.span(), "expected 'is a constant'")
    value = None
    if cur.take_phrase("equal", "to"):
        value = cur.next()
    return ast.ConstantDefinition(name, value, span, tuple(tokens))


def parse_range_definition(cur: _Cursor, tokens: list[Token]) -> ast.RangeDefinition:
    span = cur.span()
    _take_article(cur, sentence_initial=True)
    name: list[Token] = []
    while not cur.at_phrase("goes", "from"):
        if cur.eof():
            raise ParseError("SyntaxError", span, "expected 'goes from'")
        name.append(cur.next())
    cur.take_phrase("goes", "from")
    low = parse_expr(cur)
    cur.expect_word("to")
    high = parse_expr(cur)
    made_of: list[Token] = []
    if cur.take_phrase("and", "is", "made", "of"):
        while not cur.eof():
            made_of.append(cur.next())
    return ast.RangeDefinition(tuple(name), low, high, tuple(made_of), span, tuple(tokens))


def parse_list_definition(cur: _Cursor, tokens: list[Token]) -> ast.ListDefinition:
    span = cur.span()
    _take_article(cur, sentence_initial=True)
    name: list[Token] = []
    while not cur.at_phrase("is", "one", "of"):
        if cur.eof():
            raise ParseError("SyntaxError", span, "expected 'is one of'")
        name.append(cur.next())
    cur.take_phrase("is", "one", "of")
    values = _parse_value_list(cur)
    extra: list[tuple[AttributeDecl, tuple[Token, ...]]] = []
    while cur.take_phrase("and", "has") or cur.take_phrase("has"):
        attr_words = _parse_name_words(cur)
        if not attr_words:
            raise ParseError("SyntaxError", cur.span(), "expected an attribute name")
        if not (cur.take_phrase("that", "are", "equal", "to", "respectively")
                or cur.take_phrase("that", "is", "equal", "to", "respectively")):
            raise ParseError(
                "SyntaxError", cur.span(), "expected 'that are equal to respectively'"
            )
        extra_values = _parse_value_list(cur)
        extra.append((AttributeDecl(tuple(attr_words)), tuple(extra_values)))
    return ast.ListDefinition(tuple(name), tuple(values), tuple(extra), span, tuple(tokens))


# ---------------------------------------------------------------------------
# Standard propositions
# ---------------------------------------------------------------------------

def parse_fact(cur: _Cursor, tokens: list[Token]) -> ast.FactProposition:
    span = cur.span()
    if not cur.take_phrase("There", "is"):
        raise ParseError("SyntaxError", span, "expected 'There is'")
    mention = parse_mention(cur)
    if not cur.eof():
        raise ParseError("SyntaxError", cur.span(), f"unexpected {cur.text()!r} in fact")
    return ast.FactProposition(mention, span, tuple(tokens))


def _parse_quantity(cur: _Cursor) -> Optional[Quantity]:
    if cur.take_phrase("exactly"):
        return Quantity("exactly", parse_expr(cur))
    if cur.take_phrase("at", "most"):
        return Quantity("at most", parse_expr(cur))
    if cur.take_phrase("at", "least"):
        return Quantity("at least", parse_expr(cur))
    if cur.at_word("between") and not cur.at_word("each", offset=1):
        cur.next()
        low = parse_expr(cur)
        cur.expect_word("and")
        high = parse_expr(cur)
        return Quantity("between", low, high)
    return None


def parse_whenever_then(cur: _Cursor, tokens: list[Token]) -> ast.WheneverThen:
    span = cur.span()
    whenevers: list[Mention] = []
    first = True
    while True:
        if first:
            if not cur.take_phrase("Whenever"):
                raise ParseError("SyntaxError", span, "expected 'Whenever'")
            first = False
        else:
            save = cur.pos
            cur.take_comma()
            if not cur.take_phrase("whenever"):
                cur.pos = save
                break
        if not cur.take_phrase("there", "is"):
            raise ParseError("SyntaxError", cur.span(), "expected 'there is'")
        whenevers.append(parse_mention(cur))
    cur.take_comma()
    if not cur.take_phrase("then"):
        raise ParseError("SyntaxError", cur.span(), "expected 'then'")
    subject: Optional[Token] = None
    if cur.at_word("we"):
        cur.next()
    elif cur.at_variable():
        subject = cur.next()
    modality = None
    if cur.at_word("must", "can"):
        modality = cur.next().text
    else:
        raise ParseError("SyntaxError", cur.span(), "expected 'must' or 'can'")
    if not cur.take_phrase("have"):
        raise ParseError("SyntaxError", cur.span(), "expected 'have'")
    quantity = _parse_quantity(cur)
    heads = [parse_mention(cur)]
    while True:
        save = cur.pos
        cur.take_comma()
        if cur.take_phrase("or"):
            if cur.at_word("must", "can") or cur.at_phrase("we"):
                raise ParseError(
                    "MixedModality", cur.span(), "only one of 'must'/'can' per proposition"
                )
            heads.append(parse_mention(cur))
        else:
            cur.pos = save
            break
    chosen: list[Mention] = []
    if cur.at_word("to", "in") and _peek_quantity(cur, 1):
        cur.next()
        quantity = _parse_quantity(cur)
        chosen = _parse_chosen_list(cur)
    duration = None
    if cur.take_phrase("for"):
        duration = parse_expr(cur)
        if cur.at_word(*UNIT_WORDS):
            cur.next()
    such_that: list[Mention] = []
    if cur.take_phrase("such", "that"):
        cur.take_phrase("there", "is")
        such_that = _parse_mention_list(cur)
    if duration is None and cur.take_phrase("for"):
        duration = parse_expr(cur)
        if cur.at_word(*UNIT_WORDS):
            cur.next()
    if not cur.eof():
        raise ParseError(
            "SyntaxError", cur.span(), f"unexpected {cur.text()!r} in whenever/then"
        )
    if modality == "must" and (quantity or chosen):
        raise ParseError("MixedModality", span, "'must' does not take a quantity")
    return ast.WheneverThen(
        tuple(whenevers), subject, modality, tuple(heads), quantity,
        tuple(chosen), duration, tuple(such_that), span, tuple(tokens),
    )


def _peek_quantity(cur: _Cursor, offset: int) -> bool:
    probe = _Cursor(cur.tokens)
    probe.pos = cur.pos + offset
    return _parse_quantity(probe) is not None


def _parse_chosen_list(cur: _Cursor) -> list[Mention]:
    chosen = [parse_mention(cur)]
    while True:
        save = cur.pos
        cur.take_comma()
        cur.take_phrase("and")
        if cur.pos != save and (cur.at_word(*ARTICLES) or _at_plain_word(cur)):
            chosen.append(parse_mention(cur))
        else:
            cur.pos = save
            break
    return chosen


def _at_plain_word(cur: _Cursor) -> bool:
    tok = cur.peek()
    return (
        tok is not None
        and tok.is_word
        and not looks_like_variable(tok.text)
        and tok.text not in NAME_STOP
    )


def parse_quantified_choice(cur: _Cursor, tokens: list[Token]) -> ast.QuantifiedChoice:
    span = cur.span()
    if not cur.take_phrase("Every"):
        raise ParseError("SyntaxError", span, "expected 'Every'")
    words = _parse_name_words(cur, allow_of=False)
    if not words:
        raise ParseError("SyntaxError", cur.span(), "expected a concept after 'Every'")
    handle = cur.next() if cur.at_variable() else None
    fillers: list[Filler] = []
    while True:
        skip = _at_filler_start(cur)
        if skip < 0:
            break
        cur.pos += skip
        fillers.append(parse_filler(cur))
    subject = Mention(words=tuple(words), handle=handle, fillers=tuple(fillers))
    if not cur.take_phrase("can"):
        raise ParseError("SyntaxError", cur.span(), "expected 'can'")
    if cur.at_word("must"):
        raise ParseError("MixedModality", cur.span(), "only one of 'must'/'can' per proposition")
    rest = []
    while not cur.eof():
        rest.append(cur.next())
    if not rest:
        raise ParseError("SyntaxError", span, "expected a verb after 'can'")
    return ast.QuantifiedChoice(subject, ClauseText(tuple(rest)), span, tuple(tokens))


# ---------------------------------------------------------------------------
# Strong constraints
# ---------------------------------------------------------------------------

_AGG_WORDS = ("number", "total", "lowest", "highest")
_OPT_WORDS = ("maximized", "minimized")


def _at_aggregate_boundary(cur: _Cursor) -> bool:
    """True at "is/are <comparison>" or "is maximized/minimized"."""
    if not cur.at_word("is", "are"):
        return False
    if cur.at_word(*_OPT_WORDS, offset=1):
        return True
    return _starts_comparison(cur, offset=1)


def parse_aggregate_clause(cur: _Cursor) -> AggregateClause:
    cur.take_phrase("the")
    fn_tok = cur.next()
    if fn_tok.text not in _AGG_WORDS:
        raise ParseError("SyntaxError", fn_tok.span, f"unknown aggregate {fn_tok.text!r}")
    cur.take_phrase("of")
    target: list[Token] = []
    ranging = None
    while not cur.eof():
        if _at_aggregate_boundary(cur):
            break
        if cur.at_phrase("ranging", "between"):
            cur.pos += 2
            low = parse_expr(cur)
            cur.expect_word("and")
            high = parse_expr(cur)
            ranging = (low, high)
            continue
        if cur.at_comma() and cur.at_word("whenever", "where", "such", offset=1):
            break
        if cur.at_comma() and cur.at_word("and", offset=1) and cur.at_word(
            "the", offset=2
        ):
            break  # next operand of an enclosing operation
        target.append(cur.next())
    return AggregateClause(fn_tok.text, tuple(target), ranging)


def _parse_path_or_entity(cur: _Cursor) -> Operand:
    """Parse "the <attr> [VAR] of the <concept> [HANDLE]" or "the <concept> [VAR]"."""
    cur.expect_word("the")
    words: list[Token] = []
    while True:
        tok = cur.peek()
        if tok is None or not tok.is_word or looks_like_variable(tok.text):
            break
        if tok.text in NAME_STOP and tok.text != "of":
            break
        if tok.text == "of":
            nxt = cur.peek(1)
            if nxt is not None and nxt.text == "the":
                words.append(cur.next())
                words.append(cur.next())
                continue
            break
        if tok.text == "the":
            break
        words.append(cur.next())
    var = cur.next() if cur.at_variable() else None
    if var is not None and cur.take_phrase("of", "the"):
        concept = _parse_name_words(cur, allow_of=False)
        handle = cur.next() if cur.at_variable() else None
        return PathOperand(tuple(words), var, tuple(concept), handle)
    # unnamed path: split the word run at its last "of the"
    split_at = None
    for i in range(len(words) - 2, -1, -1):
        if words[i].text == "of" and words[i + 1].text == "the":
            split_at = i
            break
    if split_at is not None and var is not None:
        return PathOperand(
            tuple(words[:split_at]), None, tuple(words[split_at + 2:]), var
        )
    return EntityOperand(tuple(words), var)


def parse_operand(cur: _Cursor) -> Operand:
    if cur.at_word("the"):
        nxt = cur.peek(1)
        if nxt is not None and nxt.text in _AGG_WORDS:
            return AggregateOperand(parse_aggregate_clause(cur))
        if nxt is not None and nxt.text in ("sum", "difference"):
            return parse_operation(cur)
        return _parse_path_or_entity(cur)
    return ExprOperand(parse_expr(cur))


def parse_operation(cur: _Cursor) -> OperationOperand:
    cur.expect_word("the")
    kind_tok = cur.next()
    kind = kind_tok.text
    if kind not in ("sum", "difference"):
        raise ParseError("SyntaxError", kind_tok.span, f"unknown operation {kind!r}")
    if kind == "difference" and cur.take_phrase("in", "absolute", "value"):
        kind = "absdiff"
    if not (cur.take_phrase("between") or cur.take_phrase("of")):
        raise ParseError("SyntaxError", cur.span(), "expected 'between'")
    operands = [parse_operand(cur)]
    while True:
        save = cur.pos
        cur.take_comma()
        if cur.take_phrase("and"):
            operands.append(parse_operand(cur))
        else:
            cur.pos = save
            if cur.at_comma() and not cur.at_word("whenever", "where", offset=1):
                cur.take_comma()
                operands.append(parse_operand(cur))
            else:
                break
    return OperationOperand(kind, tuple(operands))


def _split_clauses(tokens: list[Token]) -> tuple[ClauseText, ...]:
    """Split a clause region on "and also"."""
    clauses: list[list[Token]] = [[]]
    i = 0
    while i < len(tokens):
        if (
            tokens[i].is_word
            and tokens[i].text == "and"
            and i + 1 < len(tokens)
            and tokens[i + 1].text == "also"
        ):
            clauses.append([])
            i += 2
            continue
        clauses[-1].append(tokens[i])
        i += 1
    return tuple(ClauseText(tuple(c)) for c in clauses if c)


def _collect_until_constraint_tail(cur: _Cursor) -> list[Token]:
    """Absorb clause tokens until ", where"/", whenever" or sentence end."""
    region: list[Token] = []
    while not cur.eof():
        if cur.at_comma() and cur.at_word("where", "whenever", offset=1):
            break
        if cur.at_word("where") and cur.at_variable(offset=1) and cur.at_word("is", offset=2):
            # "where" directly after the clause (no comma)
            break
        region.append(cur.next())
    return region


def _parse_constraint_tail(
    cur: _Cursor,
) -> tuple[tuple[Mention, ...], tuple[WhereItem, ...]]:
    whenevers: list[Mention] = []
    where: list[WhereItem] = []
    while not cur.eof():
        cur.take_comma()
        if cur.take_phrase("whenever"):
            if not cur.take_phrase("there", "is"):
                raise ParseError("SyntaxError", cur.span(), "expected 'there is'")
            whenevers.append(parse_mention(cur))
        elif cur.take_phrase("where"):
            where.extend(parse_where(cur))
        else:
            raise ParseError(
                "SyntaxError", cur.span(), f"unexpected {cur.text()!r} after constraint"
            )
    return tuple(whenevers), tuple(where)


def parse_strong_constraint(cur: _Cursor, tokens: list[Token]) -> ast.StrongConstraint:
    span = cur.span()
    if cur.take_phrase("It", "is", "prohibited", "that"):
        positive = False
    elif cur.take_phrase("It", "is", "required", "that"):
        positive = True
    else:
        raise ParseError("SyntaxError", span, "expected 'It is prohibited/required that'")

    body: ast.ConstraintBody
    if cur.at_word("when"):
        cur.next()
        when_region: list[Token] = []
        while not cur.eof() and not cur.at_word("then"):
            when_region.append(cur.next())
        cur.expect_word("then")
        then_region = _collect_until_constraint_tail(cur)
        body = WhenThen(_split_clauses(when_region), _split_clauses(then_region))
    elif cur.at_word("every", "any"):
        cur.next()
        subject = _parse_name_words(cur, allow_of=False)
        clause_region = _collect_until_constraint_tail(cur)
        body = QuantifiedConstraint(tuple(subject), ClauseText(tuple(clause_region)))
    elif cur.at_word("the") and cur.at_word(*_AGG_WORDS, offset=1):
        agg = parse_aggregate_clause(cur)
        if not cur.at_word("is", "are"):
            raise ParseError("SyntaxError", cur.span(), "expected a comparison")
        cur.next()
        tail = _parse_comparison_tail(cur)
        such_that: tuple[Mention, ...] = ()
        save = cur.pos
        cur.take_comma()
        if cur.take_phrase("such", "that"):
            cur.take_phrase("there", "is")
            such_that = tuple(_parse_mention_list(cur))
        else:
            cur.pos = save
        body = AggregateConstraint(agg, tail, such_that)
    elif cur.at_word("the") and cur.peek(1) is not None and cur.text(1) in ("sum", "difference"):
        left = parse_operation(cur)
        cur.expect_word("is")
        body = _parse_comparison_rest(cur, left)
    elif _at_comparison_start(cur):
        left = parse_operand(cur)
        if not cur.at_word("is", "are"):
            raise ParseError("SyntaxError", cur.span(), "expected 'is'")
        cur.next()
        body = _parse_comparison_rest(cur, left)
    else:
        region = _collect_until_constraint_tail(cur)
        body = SimpleClauses(_split_clauses(region))
    whenevers, where = _parse_constraint_tail(cur)
    return ast.StrongConstraint(positive, body, whenevers, where, span, tuple(tokens))


def _parse_comparison_rest(cur: _Cursor, left: Operand) -> ComparisonBody:
    matched = _comparison_op(cur)
    if matched is None:
        raise ParseError("SyntaxError", cur.span(), "expected a comparison")
    op, negated = matched
    right = parse_operand(cur)
    if cur.at_word(*UNIT_WORDS) and not cur.at_variable():
        cur.next()
    return ComparisonBody(left, op, right, negated)


def _at_comparison_start(cur: _Cursor) -> bool:
    """A comparison body starts with a variable, a value, or "the <path>"."""
    if cur.at_variable() and cur.at_word("is", offset=1):
        return True
    if cur.at_word("the"):
        return True
    tok = cur.peek()
    if tok is not None and tok.kind in (TokenKind.NUMBER, TokenKind.TIME, TokenKind.DATE):
        return cur.at_word("is", offset=1)
    return False


# ---------------------------------------------------------------------------
# Weak constraints
# ---------------------------------------------------------------------------

_PRIORITY = {"low": 1, "medium": 2, "high": 3}


def parse_weak_constraint(cur: _Cursor, tokens: list[Token]) -> ast.WeakConstraint:
    span = cur.span()
    if not cur.take_phrase("It", "is", "preferred"):
        raise ParseError("SyntaxError", span, "expected 'It is preferred'")
    prefix = None
    cur.take_comma()
    if cur.take_phrase("as", "much", "as", "possible"):
        prefix = "maximize"
    elif cur.take_phrase("as", "little", "as", "possible"):
        prefix = "minimize"
    cur.take_comma()
    if not cur.take_phrase("with"):
        raise ParseError("SyntaxError", cur.span(), "expected a priority")
    level_tok = cur.next()
    if level_tok.text not in _PRIORITY:
        raise ParseError("SyntaxError", level_tok.span, f"unknown priority {level_tok.text!r}")
    priority = _PRIORITY[level_tok.text]
    cur.expect_word("priority")
    cur.take_comma()
    if not cur.take_phrase("that"):
        raise ParseError("SyntaxError", cur.span(), "expected 'that'")

    # Leading whenever clauses ("that whenever ..., whenever ..., V is maximized").
    whenevers: list[Mention] = []
    while cur.at_word("whenever"):
        cur.next()
        if not cur.take_phrase("there", "is"):
            raise ParseError("SyntaxError", cur.span(), "expected 'there is'")
        whenevers.append(parse_mention(cur))
        cur.take_comma()

    suffix = None
    goal: ast.WeakGoal
    if cur.at_word("the") and cur.at_word(*_AGG_WORDS, offset=1):
        agg = parse_aggregate_clause(cur)
        goal = AggregateGoal(agg)
        suffix = _parse_optimization_suffix(cur)
    elif cur.at_word("the") and cur.text(1) in ("sum", "difference"):
        op = parse_operation(cur)
        goal = OperationGoal(op)
        suffix = _parse_optimization_suffix(cur)
    elif cur.at_variable() and cur.at_word("is", offset=1) and cur.at_word(*_OPT_WORDS, offset=2):
        var = cur.next()
        goal = VariableGoal(var)
        suffix = _parse_optimization_suffix(cur)
    elif cur.at_variable() and cur.at_word("is", offset=1) and _starts_comparison(cur, offset=2):
        left = ExprOperand(EValue(cur.next()))
        cur.next()  # "is"
        goal = ComparisonGoal(_parse_comparison_rest(cur, left))
    else:
        region = _collect_until_constraint_tail(cur)
        region, clause_suffix = _strip_optimization_suffix(region)
        suffix = clause_suffix
        goal = ClauseGoal(ClauseText(tuple(region)))
    if suffix is None and not cur.eof():
        suffix = _parse_optimization_suffix(cur)
    tail_whenevers, where = _parse_constraint_tail(cur)
    whenevers.extend(tail_whenevers)

    if prefix and suffix and prefix != suffix:
        raise ParseError(
            "ConflictingDirections", span,
            "both maximization and minimization requested",
        )
    direction = prefix or suffix
    if direction is None:
        raise ParseError("SyntaxError", span, "missing optimization direction")
    return ast.WeakConstraint(
        direction, priority, goal, tuple(whenevers), tuple(where), span, tuple(tokens)
    )


def _parse_optimization_suffix(cur: _Cursor) -> Optional[str]:
    if cur.at_word("is", "are") and cur.at_word(*_OPT_WORDS, offset=1):
        cur.next()
        return "maximize" if cur.next().text == "maximized" else "minimize"
    return None


def _strip_optimization_suffix(region: list[Token]) -> tuple[list[Token], Optional[str]]:
    if (
        len(region) >= 2
        and region[-1].text in _OPT_WORDS
        and region[-2].text in ("is", "are")
    ):
        return region[:-2], "maximize" if region[-1].text == "maximized" else "minimize"
    return region, None


# ---------------------------------------------------------------------------
# Enumerative definitions
# ---------------------------------------------------------------------------

def parse_enumerative(cur: _Cursor, tokens: list[Token]) -> ast.EnumerativeDefinition:
    span = cur.span()
    main: list[Token] = []
    when_region: list[Token] = []
    where_items: tuple[WhereItem, ...] = ()
    target = main
    while not cur.eof():
        if cur.at_word("when") and target is main:
            cur.next()
            target = when_region
            continue
        if (cur.at_comma() and cur.at_word("where", offset=1)) or (
            cur.at_word("where") and cur.at_variable(offset=1)
        ):
            cur.take_comma()
            cur.expect_word("where")
            where_items = tuple(parse_where(cur))
            break
        target.append(cur.next())
    if not main:
        raise ParseError("SyntaxError", span, "empty proposition")
    when = _split_clauses(when_region) if when_region else ()
    return ast.EnumerativeDefinition(
        ClauseText(tuple(main)), when, where_items, span, tuple(tokens)
    )


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def _contains_phrase(texts: list[str], *phrase: str) -> bool:
    n = len(phrase)
    return any(tuple(texts[i:i + n]) == phrase for i in range(len(texts) - n + 1))


def parse_sentence(tokens: list[Token]) -> ast.Proposition:
    cur = _Cursor(tokens)
    texts = [t.text for t in tokens]
    if texts[:4] == ["It", "is", "prohibited", "that"] or texts[:4] == ["It", "is", "required", "that"]:
        return parse_strong_constraint(cur, tokens)
    if texts[:3] == ["It", "is", "preferred"]:
        return parse_weak_constraint(cur, tokens)
    if texts[0] == "Whenever":
        return parse_whenever_then(cur, tokens)
    if texts[0] == "Every":
        return parse_quantified_choice(cur, tokens)
    if texts[:2] == ["There", "is"]:
        return parse_fact(cur, tokens)
    if _contains_phrase(texts, "is", "a", "temporal", "concept"):
        return parse_temporal_definition(cur, tokens)
    if _contains_phrase(texts, "is", "a", "constant"):
        return parse_constant_definition(cur, tokens)
    if _contains_phrase(texts, "is", "identified", "by"):
        return parse_domain_definition(cur, tokens)
    if _contains_phrase(texts, "goes", "from"):
        return parse_range_definition(cur, tokens)
    if texts[0] in ("A", "An") and _contains_phrase(texts, "is", "one", "of"):
        return parse_list_definition(cur, tokens)
    return parse_enumerative(cur, tokens)


def parse_document(tokens: list[Token]) -> tuple[list[ast.Proposition], list[Diagnostic]]:
    """Parse the whole token stream; recovers at sentence boundaries."""
    sentences, unterminated = split_sentences(tokens)
    props: list[ast.Proposition] = []
    diagnostics: list[Diagnostic] = []
    for i, sentence in enumerate(sentences):
        if unterminated and i == len(sentences) - 1:
            diagnostics.append(
                Diagnostic(
                    "UnterminatedProposition",
                    sentence[0].span,
                    "final sentence is not terminated by a dot",
                )
            )
            continue
        try:
            props.append(parse_sentence(sentence))
        except ParseError as err:
            diagnostics.append(err.diagnostic())
    return props, diagnostics


def parse_text(source: str) -> tuple[list[ast.Proposition], list[Diagnostic]]:
    return parse_document(tokenize(source))
