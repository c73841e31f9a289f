"""Translation of proposition ASTs into ASP rules.

The rewriter owns every registry-dependent reading: splitting verb spans
from their participants, resolving attribute fillers to argument positions,
generated variables, temporal arithmetic, windows over consecutive values,
positional comparisons on list concepts, and the angle wrap-around rule.

Body assembly uses fixed zones so that emitted rules line up with the
documented translations: list-position support atoms, then clause and
condition atoms in source order, then inline comparisons, then the main
(possibly negated) condition, then where-clause comparisons, then default
position bounds, and finally any bindings added for safety.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from . import cnl_ast as C
from .asp import (
    Abs,
    Aggregate,
    Anon,
    Arith,
    Atom,
    BodyElement,
    Choice,
    ChoiceElement,
    Comparison,
    Func,
    Group,
    Literal,
    Mod,
    Neg,
    Num,
    RangeT,
    Rule,
    Statement,
    Str,
    Sym,
    Term,
    Var,
    WeakRule,
    is_safe,
    term_variables,
)
from .cnl_ast import looks_like_variable
from .errors import NO_SPAN, SemanticError, Span
from .registry import (
    Attribute,
    ConceptKind,
    ConceptSignature,
    Registry,
    VerbSignature,
    attribute_name,
    normalize_verb,
    parse_clock,
    predicate_name,
    string_value,
)
from .tokens import Token, TokenKind

COMPLEMENT = {"=": "!=", "!=": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def complement(op: str) -> str:
    return COMPLEMENT[op]


# ---------------------------------------------------------------------------
# Mutable atoms under construction
# ---------------------------------------------------------------------------

@dataclass
class Cell:
    """One argument position: a term, a nested reference, or empty."""

    term: Optional[Term] = None
    nested: Optional["MAtom"] = None


@dataclass
class MAtom:
    """Atom under construction with declaration-ordered cells."""

    sig: ConceptSignature
    cells: list[Cell]
    keys_only: bool = False  # nested references carry only the key cells

    @classmethod
    def for_concept(cls, sig: ConceptSignature, keys_only: bool = False) -> "MAtom":
        attrs = sig.keys if keys_only else sig.attributes
        return cls(sig, [Cell() for _ in attrs], keys_only)

    @property
    def attrs(self) -> list[Attribute]:
        return self.sig.keys if self.keys_only else self.sig.attributes

    def cell_for(self, index: int) -> Cell:
        return self.cells[index]

    def freeze(self, registry: Registry, ground: bool, span: Span = NO_SPAN) -> Atom:
        return Atom(self.sig.name, tuple(self._freeze_args(registry, ground, span)))

    def _freeze_args(self, registry: Registry, ground: bool, span: Span):
        args = []
        for attr, cell in zip(self.attrs, self.cells):
            args.append(_freeze_cell(attr, cell, registry, ground, span))
        return args


def _freeze_cell(
    attr: Attribute, cell: Cell, registry: Registry, ground: bool, span: Span
) -> Term:
    if cell.nested is not None:
        inner = tuple(cell.nested._freeze_args(registry, ground, span))
        return Func(cell.nested.sig.name, inner)
    if cell.term is not None:
        if attr.ref is not None and not isinstance(cell.term, Func):
            ref_sig = registry.concepts[attr.ref]
            inner = [cell.term] + [Anon()] * (len(ref_sig.keys) - 1)
            return Func(attr.ref, tuple(inner))
        return cell.term
    if ground:
        raise SemanticError(
            "MissingAttribute", span, f"no value for attribute '{attr.name}'"
        )
    if attr.ref is not None:
        ref_sig = registry.concepts[attr.ref]
        return Func(attr.ref, tuple(Anon() for _ in ref_sig.keys))
    return Anon()


@dataclass
class PendingComparison:
    op: str
    left: Term
    right: Term
    angle: bool = False  # at least one operand sits at an angle-valued position


# ---------------------------------------------------------------------------
# Rule builder
# ---------------------------------------------------------------------------

class RuleBuilder:
    """Per-proposition state: variables, handles, anchors, body zones."""

    def __init__(self, rewriter: "Rewriter", subst: Optional[dict[str, Term]] = None):
        self.rw = rewriter
        self.reg = rewriter.registry
        self.subst = subst or {}
        self.handles: dict[str, MAtom] = {}
        self.handle_literals: dict[str, "PendingLiteral"] = {}
        self.angle_vars: set[str] = set()
        self.anchors: dict[str, Term] = {}  # concept -> last bound key variable
        self.window_extent: dict[str, int] = {}  # concept -> width of last window
        self.var_concepts: dict[str, ConceptSignature] = {}
        self.subject_carry: Optional[tuple[Term, ConceptSignature]] = None
        # body zones; atoms stay mutable until assembly so that later clauses
        # can still materialize variables into them
        self.support: list["ZoneItem"] = []
        self.main: list["ZoneItem"] = []
        self.inline: list[PendingComparison] = []
        self.where_comps: list[PendingComparison] = []
        self.default_bounds: list[Comparison] = []
        self.pending_defaults: list[tuple[Term, ConceptSignature]] = []
        self.bounded_positions: set[str] = set()

    # -- variables ----------------------------------------------------------

    def fresh(self) -> Var:
        return self.rw.fresh()

    def user_var(self, name: str) -> Term:
        if name in self.subst:
            return self.subst[name]
        return Var(name)

    def note_binding(self, term: Term, sig: ConceptSignature, attr: Attribute) -> None:
        if isinstance(term, Var):
            if attr.is_angle:
                self.angle_vars.add(term.name)
            if sig.kind in (ConceptKind.RANGE, ConceptKind.TEMPORAL) or attr.ref in self.reg.temporals:
                target = attr.ref if attr.ref else sig.name
                self.anchors[target] = term
            if term.name not in self.var_concepts:
                ref = self.reg.concepts.get(attr.ref) if attr.ref else None
                self.var_concepts[term.name] = ref if ref is not None else sig

    # -- expression terms ----------------------------------------------------

    def term_of_expr(self, expr: C.Expr, temporal: Optional[str] = None) -> Term:
        if isinstance(expr, C.EValue):
            return self.term_of_token(expr.token, temporal)
        if isinstance(expr, C.EArith):
            return Arith(expr.op, self.term_of_expr(expr.left, temporal),
                         self.term_of_expr(expr.right, temporal))
        if isinstance(expr, C.EAbs):
            return Abs(self.term_of_expr(expr.inner, temporal))
        if isinstance(expr, C.EParen):
            return Group(self.term_of_expr(expr.inner, temporal))
        raise TypeError(f"not an expression: {expr!r}")

    def term_of_token(self, tok: Token, temporal: Optional[str] = None) -> Term:
        if tok.kind is TokenKind.NUMBER:
            return Num(int(tok.text))
        if tok.kind in (TokenKind.TIME, TokenKind.DATE):
            return Num(self._temporal_index(tok, temporal))
        if tok.kind is TokenKind.STRING:
            return Str(tok.text.strip('"'))
        if looks_like_variable(tok.text):
            return self.user_var(tok.text)
        binding = self.reg.constant_value(tok.text)
        if binding is not None:
            if binding.value is None:
                return Sym(binding.name)
            if isinstance(binding.value, int):
                return Num(binding.value)
            return Str(str(binding.value))
        return Str(string_value(tok.text))

    def _temporal_index(self, tok: Token, temporal: Optional[str]) -> int:
        candidates = (
            [self.reg.temporals[temporal]] if temporal and temporal in self.reg.temporals
            else list(self.reg.temporals.values())
        )
        for tmap in candidates:
            if tok.kind is TokenKind.TIME and tmap.unit == "minutes":
                label = clock_label_of(tok.text)
                if label in tmap.label_map:
                    return tmap.label_map[label]
            if tok.kind is TokenKind.DATE and tmap.unit == "days":
                if tok.text in tmap.label_map:
                    return tmap.label_map[tok.text]
        raise SemanticError(
            "LabelOutOfRange", tok.span, f"{tok.text!r} is not a known temporal label"
        )

    # -- zones ----------------------------------------------------------------

    def emit(self, element: "ZoneItem") -> None:
        self.main.append(element)

    def emit_support(self, element: "ZoneItem") -> None:
        self.support.append(element)

    def add_inline(self, comp: PendingComparison) -> None:
        self.inline.append(comp)

    def _freeze_zone(self, zone: list["ZoneItem"]) -> list[BodyElement]:
        out: list[BodyElement] = []
        for item in zone:
            out.append(self.freeze_item(item))
        return out

    def freeze_item(self, item: "ZoneItem") -> BodyElement:
        if isinstance(item, PendingLiteral):
            return Literal(item.matom.freeze(self.reg, ground=False), item.positive)
        if isinstance(item, PendingComparison):
            return self.finish_comparison(item)
        if isinstance(item, PendingAggregate):
            conj = tuple(self.freeze_item(e) for e in item.conj)
            return Aggregate(item.fn, tuple(item.terms), conj, item.guard_op, item.guard)
        return item

    def assemble(
        self, main_condition: Optional[PendingComparison] = None
    ) -> list[BodyElement]:
        body: list[BodyElement] = []
        body.extend(self._freeze_zone(self.support))
        body.extend(self._freeze_zone(self.main))
        for comp in self.inline:
            body.append(self.finish_comparison(comp))
        if main_condition is not None:
            body.append(self.finish_comparison(main_condition))
        for comp in self.where_comps:
            body.append(self.finish_comparison(comp))
        self.flush_default_bounds()
        body.extend(self.default_bounds)
        return body

    def finish_comparison(self, comp: PendingComparison) -> Comparison:
        left, right = comp.left, comp.right
        if comp.angle or self._has_angle(left) or self._has_angle(right):
            if self._has_angle(left):
                left = Mod(left, 360)
            if self._has_angle(right):
                right = Mod(right, 360)
        return Comparison(comp.op, left, right)

    def _has_angle(self, term: Term) -> bool:
        return any(v in self.angle_vars for v in term_variables(term))

    def flush_default_bounds(self) -> None:
        for var, sig in self.pending_defaults:
            if isinstance(var, Var) and var.name in self.bounded_positions:
                continue
            low = Num(sig.low) if sig.low is not None else None
            high = Num(sig.high) if sig.high is not None else None
            if low is not None:
                self.default_bounds.append(Comparison(">=", var, low))
            if high is not None:
                self.default_bounds.append(Comparison("<=", var, high))
        self.pending_defaults = []


@dataclass
class PendingLiteral:
    matom: MAtom
    positive: bool = True


@dataclass
class PendingAggregate:
    fn: str  # count | sum | min | max
    terms: list[Term]
    conj: list["ZoneItem"]
    guard_op: str
    guard: Term


ZoneItem = Union[PendingLiteral, PendingComparison, PendingAggregate, BodyElement]


def clock_label_of(text: str) -> str:
    minutes = parse_clock(text)
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


# ---------------------------------------------------------------------------
# Temporal comparison operators
# ---------------------------------------------------------------------------

def temporal_operator(op: str, unit: str, negated: bool) -> str:
    """Map after/before to index comparisons.

    Minute concepts read "after L" inclusively (>= the slot of L); step and
    day concepts read it strictly (>).  "before" mirrors this.
    """
    if op == "after":
        base = ">=" if unit == "minutes" else ">"
    elif op == "before":
        base = "<=" if unit == "minutes" else "<"
    else:
        base = op
    return complement(base) if negated else base


# ---------------------------------------------------------------------------
# Attribute resolution inside concept atoms
# ---------------------------------------------------------------------------

def split_attr_tokens(
    registry: Registry, sig: ConceptSignature, tokens: tuple[Token, ...]
) -> tuple[list[int], list[Token], Optional[str]]:
    """Resolve filler words against a signature.

    Returns (attribute path as indices, leftover value tokens, error).  The
    longest declared attribute name wins; a path may descend through a
    reference attribute ("registration patient", "registration order").
    """
    words = [t.text.lower() for t in tokens]
    for length in range(len(words), 0, -1):
        name = " ".join(words[:length])
        idx = sig.attribute_index(name)
        if idx is not None:
            return ([idx], list(tokens[length:]), None)
    # reference descent: "<ref-attr words> <key words of the reference>"
    for split in range(len(words) - 1, 0, -1):
        outer = " ".join(words[:split])
        outer_idx = sig.attribute_index(outer)
        if outer_idx is None:
            continue
        attr = sig.attributes[outer_idx]
        if attr.ref is None:
            continue
        ref_sig = registry.concepts[attr.ref]
        rest = words[split:]
        for length in range(len(rest), 0, -1):
            inner_name = " ".join(rest[:length])
            for inner_idx, inner_attr in enumerate(ref_sig.keys):
                if inner_attr.name == inner_name:
                    return (
                        [outer_idx, inner_idx],
                        list(tokens[split + length:]),
                        None,
                    )
        return ([outer_idx], list(tokens[split:]), None)
    return ([], list(tokens), f"unknown attribute '{' '.join(words)}'")


def default_attr_index(sig: ConceptSignature) -> int:
    """Argument position a bare value binds to.

    List concepts bind their declared value (position 2, after the implicit
    index); everything else binds the first key.
    """
    return 1 if sig.kind is ConceptKind.LIST else 0


def binding_matom(builder: RuleBuilder, sig: ConceptSignature, term: Term) -> MAtom:
    """Concept atom binding ``term`` at the default position, rest anonymous."""
    matom = MAtom.for_concept(sig)
    idx = default_attr_index(sig)
    matom.cells[idx].term = term
    builder.note_binding(term, sig, sig.attributes[idx])
    return matom


def descend_first_primitive(registry: Registry, matom: MAtom) -> Optional[Cell]:
    """First key cell, descending through references; None when occupied."""
    if not matom.cells:
        return None
    cell = matom.cells[0]
    attr = matom.attrs[0]
    if attr.ref is None:
        return cell if cell.term is None and cell.nested is None else None
    if cell.term is not None:
        return None
    if cell.nested is None:
        cell.nested = MAtom.for_concept(registry.concepts[attr.ref], keys_only=True)
    return descend_first_primitive(registry, cell.nested)


def splice_reference(builder: RuleBuilder, source: MAtom, target_cell: Cell) -> None:
    """Reference a handle's atom from another atom.

    The target cell receives a nested atom sharing the source's key cells;
    empty primitive key cells are materialized as fresh variables so that the
    two atoms stay joined.
    """
    _materialize_keys(builder, source)
    nested = MAtom.for_concept(source.sig, keys_only=True)
    nested.cells = source.cells[: len(source.sig.keys)]
    target_cell.nested = nested


def _materialize_keys(builder: RuleBuilder, matom: MAtom) -> None:
    for attr, cell in zip(matom.sig.keys, matom.cells):
        if cell.nested is not None:
            _materialize_keys(builder, cell.nested)
        elif cell.term is None:
            if attr.ref is not None:
                cell.nested = MAtom.for_concept(
                    builder.reg.concepts[attr.ref], keys_only=True
                )
                _materialize_keys(builder, cell.nested)
            else:
                var = builder.fresh()
                cell.term = var
                builder.note_binding(var, matom.sig, attr)


# ---------------------------------------------------------------------------
# Mention interpretation
# ---------------------------------------------------------------------------

def resolve_concept(
    builder: RuleBuilder, words: tuple[Token, ...], span: Span = NO_SPAN
) -> ConceptSignature:
    sig = builder.reg.lookup_concept([t.text for t in words])
    if sig is None:
        raise SemanticError(
            "UnknownConcept", span,
            f"unknown concept '{' '.join(t.text for t in words)}'",
        )
    return sig


def mention_span(mention: C.Mention) -> Span:
    return mention.words[0].span if mention.words else NO_SPAN


def apply_filler(builder: RuleBuilder, matom: MAtom, filler: C.Filler) -> None:
    """Place one "with ..." filler into an atom under construction."""
    reg = builder.reg
    sig = matom.sig
    if filler.shift != 0:
        # "with the next step respect to T": advance the temporal key
        idx = _temporal_key_index(reg, sig)
        if idx is None:
            raise SemanticError(
                "UnknownAttribute", NO_SPAN, f"{sig.name} has no temporal attribute"
            )
        base = builder.term_of_expr(filler.value)
        matom.cells[idx].term = Arith("+" if filler.shift > 0 else "-", base, Num(abs(filler.shift)))
        return
    path, leftover, error = split_attr_tokens(reg, sig, filler.attr_tokens)
    if error:
        raise SemanticError(
            "UnknownAttribute", filler.attr_tokens[0].span if filler.attr_tokens else NO_SPAN,
            f"{error} on {sig.name}",
        )
    cell, attr, owner = _walk_path(builder, matom, path)
    temporal = attr.ref if attr.ref in reg.temporals else (
        sig.name if owner.sig.name in reg.temporals else None
    )
    value_term: Optional[Term] = None
    if filler.value is not None:
        value_term = builder.term_of_expr(filler.value, temporal)
    elif leftover:
        value_term = builder.term_of_token(leftover[0], temporal)
    comp = filler.comp
    if value_term is None and comp is not None and comp.op == "=" and not comp.negated:
        # "with id equal to 1" assigns rather than compares
        value_term = builder.term_of_expr(comp.rhs, temporal)
        comp = None
    if value_term is None and comp is not None:
        value_term = builder.fresh()
    if value_term is None:
        raise SemanticError(
            "UnknownAttribute", mention_span_of(filler), f"no value for '{attr.name}'"
        )
    if isinstance(value_term, Var):
        handle_atom = builder.handles.get(value_term.name)
        if (
            handle_atom is not None
            and attr.ref == handle_atom.sig.name
            and len(handle_atom.sig.keys) > 1
        ):
            splice_reference(builder, handle_atom, cell)
        else:
            cell.term = value_term
    else:
        cell.term = value_term
    builder.note_binding(value_term, owner.sig, attr)
    if comp is not None:
        _record_tail_comparison(builder, value_term, comp, attr, temporal)


def mention_span_of(filler: C.Filler) -> Span:
    return filler.attr_tokens[0].span if filler.attr_tokens else NO_SPAN


def _record_tail_comparison(
    builder: RuleBuilder, left: Term, tail: C.ComparisonTail,
    attr: Attribute, temporal: Optional[str],
) -> None:
    if tail.op in ("after", "before"):
        unit = builder.reg.temporals[temporal].unit if temporal else "steps"
        op = temporal_operator(tail.op, unit, tail.negated)
    else:
        op = complement(tail.op) if tail.negated else tail.op
    right = builder.term_of_expr(tail.rhs, temporal)
    builder.add_inline(PendingComparison(op, left, right, angle=attr.is_angle))


def _walk_path(
    builder: RuleBuilder, matom: MAtom, path: list[int]
) -> tuple[Cell, Attribute, MAtom]:
    owner = matom
    for depth, idx in enumerate(path):
        attr = owner.attrs[idx]
        cell = owner.cell_for(idx)
        if depth == len(path) - 1:
            # descend single-key references so the value lands inside
            if attr.ref is not None:
                ref_sig = builder.reg.concepts[attr.ref]
                if len(ref_sig.keys) == 1 and cell.nested is None and cell.term is None:
                    cell.nested = MAtom.for_concept(ref_sig, keys_only=True)
                    return (cell.nested.cells[0], ref_sig.keys[0], cell.nested)
                if cell.nested is not None and len(ref_sig.keys) == 1:
                    return (cell.nested.cells[0], ref_sig.keys[0], cell.nested)
            return (cell, attr, owner)
        if attr.ref is None:
            raise SemanticError(
                "UnknownAttribute", NO_SPAN, f"'{attr.name}' is not a reference"
            )
        if cell.nested is None:
            cell.nested = MAtom.for_concept(
                builder.reg.concepts[attr.ref], keys_only=True
            )
        owner = cell.nested
    raise AssertionError("empty attribute path")


def _temporal_key_index(registry: Registry, sig: ConceptSignature) -> Optional[int]:
    for i, attr in enumerate(sig.attributes):
        if attr.ref is not None and attr.ref in registry.temporals:
            return i
        if attr.ref is None and attr.name in registry.temporals:
            return i
    if sig.name in registry.temporals:
        return 0
    return None


def _shiftable_key_index(builder: RuleBuilder, sig: ConceptSignature, concept: str) -> Optional[int]:
    for i, attr in enumerate(sig.attributes):
        if attr.ref == concept or attr.name == concept:
            return i
    return None


def build_mention_atom(builder: RuleBuilder, mention: C.Mention) -> PendingLiteral:
    """Interpret a "there is ..." mention into an atom under construction."""
    sig = resolve_concept(builder, mention.words, mention_span(mention))
    matom = MAtom.for_concept(sig)
    if mention.handle is not None:
        builder.handles[mention.handle.text] = matom
    for filler in mention.fillers:
        apply_filler(builder, matom, filler)
    if mention.handle is not None and len(sig.keys) == 1 and sig.keys[0].ref is None:
        cell = matom.cells[0]
        if cell.term is None and cell.nested is None:
            var = builder.user_var(mention.handle.text)
            cell.term = var
            builder.note_binding(var, sig, sig.keys[0])
    if mention.shift != 0:
        idx = _temporal_key_index(builder.reg, sig)
        if idx is None:
            raise SemanticError(
                "UnknownAttribute", mention_span(mention),
                f"{sig.name} has no temporal attribute to shift",
            )
        target = sig.attributes[idx].ref or sig.attributes[idx].name
        anchor = builder.anchors.get(target)
        if anchor is None:
            raise SemanticError(
                "LabelOutOfRange", mention_span(mention),
                f"no prior {target} value to take the next/previous of",
            )
        step = builder.window_extent.get(target, 1)
        op = "+" if mention.shift > 0 else "-"
        cell, attr, owner = _walk_path(builder, matom, [idx])
        cell.term = Arith(op, anchor, Num(step * abs(mention.shift)))
    if mention.temporal is not None:
        # "a time T that is after 0"
        idx = _temporal_key_index(builder.reg, sig) or 0
        cell, attr, owner = _walk_path(builder, matom, [idx])
        if cell.term is None:
            var = builder.fresh()
            cell.term = var
            builder.note_binding(var, owner.sig, attr)
        temporal = attr.ref if attr.ref in builder.reg.temporals else (
            sig.name if sig.name in builder.reg.temporals else None
        )
        _record_tail_comparison(builder, cell.term, mention.temporal, attr, temporal)
    lit = PendingLiteral(matom, positive=not mention.negated)
    if mention.handle is not None:
        builder.handle_literals[mention.handle.text] = lit
    return lit


def add_whenever_atoms(builder: RuleBuilder, whenevers: tuple[C.Mention, ...]) -> None:
    for mention in whenevers:
        builder.emit(build_mention_atom(builder, mention))


# ---------------------------------------------------------------------------
# Simple-clause interpretation
# ---------------------------------------------------------------------------

_CLAUSE_KEYWORDS = {
    "with", "that", "then", "whenever", "where", "such", "and", "or", "to",
    "for", "is", "are", "not", "can", "must", "when", "also", "by", "the",
    "a", "an", "in", "of", "at", "does", "do", "has", "have", "be",
    "exactly", "each",
}


@dataclass
class WindowSpec:
    width: int
    concept: ConceptSignature
    anchor: Term
    fresh_anchor: bool
    direction: int  # +1 = [anchor, anchor+w-1], -1 = [anchor-w, anchor-1]


@dataclass
class ClauseResult:
    """Contributions of one simple clause.

    ``main`` is the element a required-constraint negation flips: the verb
    literal, or the window aggregate when the clause counts consecutive
    values.
    """

    items: list[ZoneItem]
    main: Optional[ZoneItem]
    negated: bool = False
    class_assignment: Optional[tuple[Token, tuple[Token, ...]]] = None
    subject_term: Optional[Term] = None
    subject_sig: Optional[ConceptSignature] = None
    verb: Optional[VerbSignature] = None


class _TCur:
    """Cursor over a plain token tuple."""

    def __init__(self, tokens: tuple[Token, ...]):
        self.toks = list(tokens)
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.toks)

    def peek(self, k: int = 0) -> Optional[Token]:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def text(self, k: int = 0) -> Optional[str]:
        t = self.peek(k)
        return t.text if t else None

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at(self, *texts: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.is_word and t.text in texts

    def at_var(self, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.is_word and looks_like_variable(t.text)

    def at_number(self, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.kind is TokenKind.NUMBER


def _is_concept_token(builder: RuleBuilder, tok: Optional[Token]) -> bool:
    if tok is None or not tok.is_word or looks_like_variable(tok.text):
        return False
    return builder.reg.lookup_concept([tok.text]) is not None


def _is_value_token(builder: RuleBuilder, tok: Optional[Token]) -> bool:
    """A token usable as a subject/participant value."""
    if tok is None:
        return False
    if tok.kind is TokenKind.NUMBER:
        return True
    if not tok.is_word or tok.text.lower() in _CLAUSE_KEYWORDS:
        return False
    if looks_like_variable(tok.text):
        return True
    if _is_concept_token(builder, tok):
        return False
    return tok.text[0].isupper() or builder.reg.constant_value(tok.text) is not None


@dataclass
class Participant:
    sig: Optional[ConceptSignature]
    term: Optional[Term]
    positional: Optional[tuple[str, Token]] = None  # ("before"|"after", ref)
    participle: Optional[tuple[list[str], "Participant"]] = None


def interpret_clause(
    builder: RuleBuilder, tokens: tuple[Token, ...], fact_mode: bool = False
) -> ClauseResult:
    cur = _TCur(tokens)
    span = tokens[0].span if tokens else NO_SPAN

    # Leading temporal phrase: "the next day ..." / "the previous N consecutive days ..."
    lead_shift: Optional[ConceptSignature] = None
    window: Optional[WindowSpec] = None
    if cur.at("the") and cur.at("next", k=1) and _is_concept_token(builder, cur.peek(2)):
        sig = builder.reg.lookup_concept([cur.text(2)])
        cur.pos += 3
        lead_shift = sig
    elif cur.at("the") and cur.at("previous", k=1) and cur.at_number(2) and cur.at("consecutive", k=3):
        width = int(cur.text(2))
        sig = builder.reg.lookup_concept([cur.text(4)])
        if sig is None:
            raise SemanticError("UnknownConcept", span, f"unknown concept {cur.text(4)!r}")
        cur.pos += 5
        anchor = builder.anchors.get(sig.name)
        if anchor is None:
            raise SemanticError(
                "LabelOutOfRange", span, f"no prior {sig.name} to anchor the window"
            )
        window = WindowSpec(width, sig, anchor, fresh_anchor=False, direction=-1)

    # Subject
    subject_sig: Optional[ConceptSignature] = None
    subject_term: Optional[Term] = None
    class_value: Optional[Token] = None
    if lead_shift is None and window is None:
        if _is_value_token(builder, cur.peek()) and not cur.at_var():
            class_value = cur.next()
        else:
            had_article = False
            if cur.at("a", "an"):
                had_article = True
                cur.next()
            if _is_concept_token(builder, cur.peek()) or (
                cur.peek() is not None and cur.peek().is_word
                and not looks_like_variable(cur.text())
                and cur.text().lower() not in _CLAUSE_KEYWORDS
                and (had_article or _looks_like_subject(builder, cur))
            ):
                name_tok = cur.next()
                subject_sig = builder.reg.lookup_concept([name_tok.text])
                if subject_sig is None:
                    subject_sig = builder.reg.register_implicit_concept([name_tok.text])
                if cur.at_var():
                    subject_term = builder.user_var(cur.next().text)
                elif _is_value_token(builder, cur.peek()):
                    subject_term = builder.term_of_token(cur.next())
                elif had_article:
                    subject_term = builder.fresh()
                # subject fillers ("a patient P with preference T")
                subject_fillers = _read_clause_fillers(cur)
                if subject_term is not None and isinstance(subject_term, Var):
                    builder.var_concepts.setdefault(subject_term.name, subject_sig)
                if subject_fillers is not None:
                    builder.subject_fillers = subject_fillers  # type: ignore[attr-defined]

    if subject_term is None and subject_sig is None and class_value is None:
        if builder.subject_carry is not None:
            subject_term, subject_sig = builder.subject_carry

    # Negation and copula
    negated = False
    copula = False
    aux_have = False
    if cur.at("does", "do") and cur.at("not", k=1):
        cur.pos += 2
        negated = True
    if cur.at("is", "are", "be"):
        copula = True
        cur.next()
    if cur.at("not"):
        negated = True
        cur.next()

    # "is a waiter": class assignment
    if copula and cur.at("a", "an") and class_value is not None:
        cur.next()
        words = []
        while not cur.eof() and cur.peek().is_word:
            words.append(cur.next())
        return ClauseResult([], None, class_assignment=(class_value, tuple(words)))

    if cur.at("has", "have"):
        aux_have = True
        cur.next()
        if cur.at("a", "an"):
            cur.next()

    # Verb span (stops at articles, variables, numbers, registered concepts)
    verb_words: list[Token] = []
    while not cur.eof():
        tok = cur.peek()
        if not tok.is_word or looks_like_variable(tok.text):
            break
        if tok.text in ("a", "an"):
            break
        if tok.kind is TokenKind.NUMBER:
            break
        if _is_concept_token(builder, tok) and verb_words:
            break
        if tok.text == "for" and cur.at_number(1) and cur.at("consecutive", k=2):
            break
        if tok.text in ("when", "where", "whenever", "then"):
            break
        verb_words.append(cur.next())

    # "have a position ..." may actually name a concept (position_in)
    concept_atom_sig: Optional[ConceptSignature] = None
    if aux_have and verb_words:
        probe = builder.reg.lookup_concept([t.text for t in verb_words])
        if probe is not None:
            concept_atom_sig = probe

    # Participants
    participants: list[Participant] = []
    while not cur.eof():
        if cur.at("for") and cur.at_number(1) and cur.at("consecutive", k=2):
            width = int(cur.text(1))
            sig = builder.reg.lookup_concept([cur.text(3)])
            if sig is None:
                raise SemanticError(
                    "UnknownConcept", span, f"unknown concept {cur.text(3)!r}"
                )
            cur.pos += 4
            anchor = builder.fresh()
            window = WindowSpec(width, sig, anchor, fresh_anchor=True, direction=1)
            continue
        if cur.at("and", "in", "to", "of", "at"):
            cur.next()
            continue
        if cur.at("a", "an", "the"):
            cur.next()
            continue
        part = _read_participant(builder, cur, fact_mode)
        if part is None:
            break
        participants.append(part)

    if concept_atom_sig is not None:
        matom = MAtom.for_concept(concept_atom_sig)
        _fill_concept_pairs(builder, matom, participants, subject_term, subject_sig)
        lit = PendingLiteral(matom, positive=not negated)
        return ClauseResult(
            [lit], lit, negated=negated,
            subject_term=subject_term, subject_sig=subject_sig,
        )

    if not verb_words:
        raise SemanticError("SyntaxError", span, "could not find a verb in clause")
    verb_name = normalize_verb([t.text for t in verb_words])
    return _build_verb_clause(
        builder, verb_name, subject_sig, subject_term, participants,
        negated, window, lead_shift, fact_mode, span,
    )


def _looks_like_subject(builder: RuleBuilder, cur: _TCur) -> bool:
    """Word heuristics for article-less subjects like "waiter W1"."""
    return cur.at_var(1) or _is_value_token(builder, cur.peek(1))


def _read_clause_fillers(cur: _TCur) -> Optional[list[C.Filler]]:
    if not cur.at("with"):
        return None
    from .parser import _Cursor, parse_filler

    inner = _Cursor(cur.toks)
    inner.pos = cur.pos
    fillers = []
    while inner.pos < len(cur.toks) and inner.at_word("with"):
        fillers.append(parse_filler(inner))
        if inner.at_word("and") and inner.at_word("with", offset=1):
            inner.pos += 1
    cur.pos = inner.pos
    return fillers
