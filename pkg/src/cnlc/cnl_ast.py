"""Parse structures for controlled-language propositions.

The parser resolves sentence *structure* (proposition variant, clause
boundaries, attribute fillers, comparisons, quantities, priorities); it keeps
noun and verb spans as raw words.  Splitting a span like "works in shift
night" into verb and participants needs the concept registry, so that part of
the interpretation lives in the rewriter.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .errors import Span
from .tokens import Token


# ---------------------------------------------------------------------------
# Terms and value expressions
# ---------------------------------------------------------------------------

class TermKind(Enum):
    VARIABLE = "variable"
    STRING = "string"
    NUMBER = "number"
    CONSTANT = "constant"


@dataclass(frozen=True)
class CnlTerm:
    kind: TermKind
    text: str


_VARIABLE_SHAPE = None  # computed lazily below


def looks_like_variable(text: str) -> bool:
    """Upper-case letters, digits and symbols only, with at least one
    upper-case letter and no lower-case letters."""
    has_upper = any(c.isupper() for c in text)
    has_lower = any(c.islower() for c in text)
    return has_upper and not has_lower


def classify_word(text: str, constants: Optional[set[str]] = None) -> CnlTerm:
    """Classify a word or number token into a term.

    Total on word/number texts: every input falls into exactly one of
    variable, number, constant reference, or string.
    """
    stripped = text[1:] if text[:1] in "+-" else text
    if stripped.isdigit():
        return CnlTerm(TermKind.NUMBER, text)
    if looks_like_variable(text):
        return CnlTerm(TermKind.VARIABLE, text)
    if constants and text in constants:
        return CnlTerm(TermKind.CONSTANT, text)
    return CnlTerm(TermKind.STRING, text)


# Value expressions as written in sentences: D+W, OR-1, |AC+(A-AP)+360| ...
@dataclass(frozen=True)
class EValue:
    token: Token


@dataclass(frozen=True)
class EArith:
    op: str  # + - *
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class EAbs:
    inner: "Expr"


@dataclass(frozen=True)
class EParen:
    inner: "Expr"


Expr = Union[EValue, EArith, EAbs, EParen]


def expr_tokens(expr: Expr) -> list[Token]:
    if isinstance(expr, EValue):
        return [expr.token]
    if isinstance(expr, EArith):
        return expr_tokens(expr.left) + expr_tokens(expr.right)
    return expr_tokens(expr.inner)


# ---------------------------------------------------------------------------
# Clause building blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonTail:
    """An "is <operator> <expr>" tail: operator plus right-hand side.

    ``op`` is one of = != < <= > >= after before; ``negated`` covers
    "not after".  ``unit`` keeps a trailing measure word ("timeslots").
    """

    op: str
    rhs: Expr
    negated: bool = False
    unit: Optional[str] = None


@dataclass(frozen=True)
class Filler:
    """A "with ..." attribute filler.

    ``attr_tokens`` may still contain trailing value words ("shift vacation");
    the rewriter splits them against the declared attribute names.
    """

    attr_tokens: tuple[Token, ...]
    value: Optional[Expr] = None
    comp: Optional[ComparisonTail] = None
    shift: int = 0  # "with the next step respect to T" -> value=T, shift=+1


@dataclass(frozen=True)
class Mention:
    """An entity mention: concept words, optional handle/value, fillers."""

    words: tuple[Token, ...]
    handle: Optional[Token] = None       # trailing variable ("registration R")
    value: Optional[Expr] = None         # trailing value ("pub 1", "shift night")
    fillers: tuple[Filler, ...] = ()
    negated: bool = False                # "there is not a rotation ..."
    shift: int = 0                       # "the next step" / "the previous step"
    temporal: Optional[ComparisonTail] = None  # "that is after 0"


@dataclass(frozen=True)
class ClauseText:
    """Raw interior of a simple clause; interpreted against the registry."""

    tokens: tuple[Token, ...]


@dataclass(frozen=True)
class Quantity:
    kind: str  # exactly | at most | at least | between
    low: Optional[Expr] = None
    high: Optional[Expr] = None


@dataclass(frozen=True)
class WhereComparison:
    left: Token
    op: str
    rhs: Expr


@dataclass(frozen=True)
class WhereOneOf:
    var: Token
    values: tuple[Token, ...]
    respectively: bool = False


@dataclass(frozen=True)
class WhereBetween:
    var: Token
    low: Token
    high: Token


WhereItem = Union[WhereComparison, WhereOneOf, WhereBetween]


@dataclass(frozen=True)
class AggregateClause:
    """Aggregate scaffold: function plus the raw target region.

    The target region ("nurses that work in shift S for each day") is
    interpreted by the rewriter; ``ranging`` keeps a result-range pair.
    """

    fn: str  # number | total | lowest | highest
    tokens: tuple[Token, ...]
    ranging: Optional[tuple[Expr, Expr]] = None


# Operands of comparison-style constraint bodies -----------------------------

@dataclass(frozen=True)
class PathOperand:
    """"the <attr> [VAR] of the <concept> <HANDLE>" attribute access."""

    attr_tokens: tuple[Token, ...]
    var: Optional[Token]
    concept_tokens: tuple[Token, ...]
    handle: Optional[Token]


@dataclass(frozen=True)
class ExprOperand:
    expr: Expr


@dataclass(frozen=True)
class OperationOperand:
    """"the sum between A and B" / "the difference between X and Y" /
    "the difference in absolute value between X, and Y"."""

    kind: str  # sum | difference | absdiff
    operands: tuple["Operand", ...]


@dataclass(frozen=True)
class AggregateOperand:
    agg: AggregateClause


@dataclass(frozen=True)
class EntityOperand:
    """"the assignment A" as subject of a temporal comparison."""

    words: tuple[Token, ...]
    handle: Optional[Token]


Operand = Union[PathOperand, ExprOperand, OperationOperand, AggregateOperand, EntityOperand]


@dataclass(frozen=True)
class ComparisonBody:
    left: Operand
    op: str
    right: Operand
    negated: bool = False


# Constraint body variants ----------------------------------------------------

@dataclass(frozen=True)
class SimpleClauses:
    clauses: tuple[ClauseText, ...]  # joined by "and also"


@dataclass(frozen=True)
class AggregateConstraint:
    agg: AggregateClause
    tail: ComparisonTail
    such_that: tuple[Mention, ...] = ()


@dataclass(frozen=True)
class WhenThen:
    when: tuple[ClauseText, ...]
    then: tuple[ClauseText, ...]


@dataclass(frozen=True)
class QuantifiedConstraint:
    subject: tuple[Token, ...]
    clause: ClauseText  # verb part, e.g. "is payed"


ConstraintBody = Union[
    SimpleClauses, AggregateConstraint, WhenThen, QuantifiedConstraint, ComparisonBody
]


# Weak-constraint goals --------------------------------------------------------

@dataclass(frozen=True)
class AggregateGoal:
    agg: AggregateClause


@dataclass(frozen=True)
class VariableGoal:
    var: Token


@dataclass(frozen=True)
class OperationGoal:
    op: OperationOperand


@dataclass(frozen=True)
class ComparisonGoal:
    body: ComparisonBody


@dataclass(frozen=True)
class ClauseGoal:
    clause: ClauseText


WeakGoal = Union[AggregateGoal, VariableGoal, OperationGoal, ComparisonGoal, ClauseGoal]


# ---------------------------------------------------------------------------
# Propositions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttributeDecl:
    words: tuple[Token, ...]


@dataclass(frozen=True)
class DomainDefinition:
    name: tuple[Token, ...]
    keys: tuple[AttributeDecl, ...]
    parameters: tuple[AttributeDecl, ...]
    span: Span
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True)
class TemporalDefinition:
    name: tuple[Token, ...]
    unit: str  # minutes | days | steps
    start: Token
    end: Token
    step: Optional[int]
    span: Span
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True)
class ConstantDefinition:
    name: Token
    value: Optional[Token]
    span: Span
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True)
class RangeDefinition:
    name: tuple[Token, ...]
    low: Expr
    high: Expr
    made_of: tuple[Token, ...]  # "is made of shifts that are made of hours"
    span: Span
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True)
class ListDefinition:
    name: tuple[Token, ...]
    values: tuple[Token, ...]
    extra: tuple[tuple[AttributeDecl, tuple[Token, ...]], ...]  # (attr, values)
    span: Span
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True)
class EnumerativeDefinition:
    clause: ClauseText
    when: tuple[ClauseText, ...]
    where: tuple[WhereItem, ...]
    span: Span
    tokens: tuple[Token, ...] = ()


CompoundDefinition = Union[RangeDefinition, ListDefinition]


@dataclass(frozen=True)
class FactProposition:
    mention: Mention
    span: Span
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True)
class WheneverThen:
    whenevers: tuple[Mention, ...]
    subject: Optional[Token]  # "we" -> None, otherwise the handle variable
    modality: str  # must | can
    heads: tuple[Mention, ...]  # disjunction alternatives
    quantity: Optional[Quantity]
    chosen: tuple[Mention, ...]  # "to exactly 1 day, and timeslot"
    duration: Optional[Expr]  # "for PH4 timeslots"
    such_that: tuple[Mention, ...]
    span: Span
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True)
class QuantifiedChoice:
    subject: Mention
    body: ClauseText  # everything after "can"
    span: Span
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True)
class StrongConstraint:
    positive: bool  # required (True) vs prohibited (False)
    body: ConstraintBody
    whenevers: tuple[Mention, ...]
    where: tuple[WhereItem, ...]
    span: Span
    tokens: tuple[Token, ...] = ()


@dataclass(frozen=True)
class WeakConstraint:
    direction: str  # minimize | maximize
    priority: int  # 1 | 2 | 3
    goal: WeakGoal
    whenevers: tuple[Mention, ...]
    where: tuple[WhereItem, ...]
    span: Span
    tokens: tuple[Token, ...] = ()


Proposition = Union[
    DomainDefinition,
    TemporalDefinition,
    ConstantDefinition,
    RangeDefinition,
    ListDefinition,
    EnumerativeDefinition,
    FactProposition,
    WheneverThen,
    QuantifiedChoice,
    StrongConstraint,
    WeakConstraint,
]


# ---------------------------------------------------------------------------
# Structural comparison and rendering
# ---------------------------------------------------------------------------

def strip_positions(node):
    """Rebuild an AST value as plain data with spans removed.

    Two parses of the same normalized sentence compare equal under this
    projection even though their token positions differ.
    """
    if isinstance(node, Token):
        return (node.kind.value, node.text)
    if isinstance(node, Span):
        return None
    if dataclasses.is_dataclass(node):
        return (
            type(node).__name__,
            tuple(
                (f.name, strip_positions(getattr(node, f.name)))
                for f in dataclasses.fields(node)
                if f.name not in ("span", "tokens")
            ),
        )
    if isinstance(node, (list, tuple)):
        return tuple(strip_positions(x) for x in node)
    if isinstance(node, Enum):
        return node.value
    return node


def render_sentence(prop: Proposition) -> str:
    """Render a proposition back to one normalized source sentence."""
    return " ".join(t.text for t in prop.tokens) + "."
