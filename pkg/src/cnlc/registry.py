"""Concept data structures: signatures, temporal maps, constants, verbs.

Atom arguments always follow declaration order, keys before parameters,
whatever order a sentence mentions them in.  A key whose name matches a
registered concept becomes a reference and renders as a functional term.
The registry is filled during the definition pass and read-only afterwards.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .errors import NO_SPAN, SemanticError, Span
from .tokens import Token, TokenKind


class ConceptKind(Enum):
    DOMAIN = "domain"
    RANGE = "range"
    LIST = "list"
    TEMPORAL = "temporal"
    IMPLICIT = "implicit"


def predicate_name(words: Iterable[str]) -> str:
    """Concept and predicate names are fully lowercased, words joined by _."""
    return "_".join(w.lower() for w in words)


def attribute_name(words: Iterable[str]) -> str:
    return " ".join(w.lower() for w in words)


def string_value(text: str) -> str:
    """String values only lowercase the first character ("John" -> "john",
    "jurassicPark" stays "jurassicPark")."""
    return text[:1].lower() + text[1:] if text else text


@dataclass(frozen=True)
class Attribute:
    name: str                 # canonical attribute name, words space-joined
    ref: Optional[str] = None  # referenced concept, when the name is one

    @property
    def is_angle(self) -> bool:
        return self.ref == "angle" or self.name == "angle" or self.name.endswith(" angle")


@dataclass
class ConceptSignature:
    name: str
    kind: ConceptKind
    keys: list[Attribute]
    parameters: list[Attribute]
    # range concepts: numeric endpoints when known (for window guards)
    low: Optional[int] = None
    high: Optional[int] = None
    # list concepts: declared values in order (position encodes precedence)
    list_values: list[str] = field(default_factory=list)

    @property
    def attributes(self) -> list[Attribute]:
        return self.keys + self.parameters

    @property
    def arity(self) -> int:
        return len(self.keys) + len(self.parameters)

    def attribute_index(self, name: str) -> Optional[int]:
        for i, attr in enumerate(self.attributes):
            if attr.name == name:
                return i
        return None


@dataclass
class TemporalConcept:
    name: str
    unit: str  # minutes | days | steps
    index_map: dict[int, str]  # 1-based consecutive index -> label
    label_map: dict[str, int]

    @property
    def count(self) -> int:
        return len(self.index_map)

    def index_of(self, label: str, span: Span = NO_SPAN) -> int:
        key = label.strip()
        if key not in self.label_map:
            raise SemanticError(
                "LabelOutOfRange", span, f"{label!r} is not a {self.name} label"
            )
        return self.label_map[key]


@dataclass
class ConstantBinding:
    name: str
    value: Optional[object] = None  # int or str; None = left to the solver


@dataclass
class VerbSignature:
    name: str
    slots: list[Optional[str]]  # concept name per argument position

    @property
    def arity(self) -> int:
        return len(self.slots)


# ---------------------------------------------------------------------------
# Time and date helpers
# ---------------------------------------------------------------------------

def parse_clock(text: str, span: Span = NO_SPAN) -> int:
    """Minutes since midnight for a 12-hour "HH:MM AM/PM" literal."""
    try:
        clock, meridiem = text.split()
        hh, mm = clock.split(":")
        hours, minutes = int(hh), int(mm)
    except ValueError:
        raise SemanticError("SyntaxError", span, f"bad time literal {text!r}") from None
    if hours == 12:
        hours = 0
    if meridiem == "PM":
        hours += 12
    return hours * 60 + minutes


def clock_label(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def parse_date(text: str, span: Span = NO_SPAN) -> datetime.date:
    """Dates are day-first: DD/MM/YYYY."""
    try:
        dd, mm, yyyy = text.split("/")
        return datetime.date(int(yyyy), int(mm), int(dd))
    except ValueError:
        raise SemanticError("SyntaxError", span, f"bad date literal {text!r}") from None


def date_label(day: datetime.date) -> str:
    return f"{day.day:02d}/{day.month:02d}/{day.year:04d}"


def build_temporal_map(
    name: str, unit: str, start: Token, end: Token, step: Optional[int],
    span: Span = NO_SPAN,
) -> TemporalConcept:
    labels: list[str]
    if unit == "minutes":
        if start.kind is not TokenKind.TIME or end.kind is not TokenKind.TIME:
            raise SemanticError("SyntaxError", span, "minute ranges take time literals")
        lo = parse_clock(start.text, start.span)
        hi = parse_clock(end.text, end.span)
        if lo >= hi:
            raise SemanticError("EmptyRange", span, f"empty time range for {name}")
        length = step if step is not None else 1
        if length <= 0 or (hi - lo) % length != 0:
            raise SemanticError(
                "MisalignedStep", span,
                f"step of {length} minutes does not divide the {hi - lo} minute span",
            )
        # half-open [start, end): the slot starting at `end` is not included
        labels = [clock_label(t) for t in range(lo, hi, length)]
    elif unit == "days":
        if start.kind is not TokenKind.DATE or end.kind is not TokenKind.DATE:
            raise SemanticError("SyntaxError", span, "day ranges take date literals")
        first = parse_date(start.text, start.span)
        last = parse_date(end.text, end.span)
        if first > last:
            raise SemanticError("EmptyRange", span, f"empty date range for {name}")
        length = step if step is not None else 1
        # closed [start, end]: both endpoint days are included
        labels = []
        current = first
        while current <= last:
            labels.append(date_label(current))
            current += datetime.timedelta(days=length)
    elif unit == "steps":
        if start.kind is not TokenKind.NUMBER or end.kind is not TokenKind.NUMBER:
            raise SemanticError("SyntaxError", span, "step ranges take numbers")
        lo, hi = int(start.text), int(end.text)
        if lo > hi:
            raise SemanticError("EmptyRange", span, f"empty step range for {name}")
        labels = [str(v) for v in range(lo, hi + 1)]
    else:
        raise SemanticError("SyntaxError", span, f"unknown temporal unit {unit!r}")
    index_map = {i + 1: lab for i, lab in enumerate(labels)}
    return TemporalConcept(name, unit, index_map, {lab: i for i, lab in index_map.items()})


# ---------------------------------------------------------------------------
# Verb-phrase normalization
# ---------------------------------------------------------------------------

_COPULAS = {"is", "are", "be", "been", "was", "were"}
_AUXILIARIES = {"has", "have", "had", "does", "do"}


def normalize_verb(words: list[str]) -> str:
    """Map a verb span to its predicate name.

    Copulas are dropped and participles kept ("is connected to" ->
    connected_to, "is chosen" -> chosen); in the active voice a third-person
    trailing "s" is stripped from the head verb ("works in" -> work_in,
    "serves" -> serve).
    """
    parts = [w.lower() for w in words]
    copula = False
    while parts and (parts[0] in _COPULAS or parts[0] in _AUXILIARIES):
        copula = True
        parts.pop(0)
        if parts and parts[0] in ("a", "an", "the"):
            parts.pop(0)
    if not parts:
        return ""
    if not copula:
        head = parts[0]
        if len(head) > 1 and head.endswith("s") and not head.endswith("ss"):
            parts[0] = head[:-1]
    return "_".join(parts)


# ---------------------------------------------------------------------------
# The registry
# ---------------------------------------------------------------------------

class Registry:
    def __init__(self) -> None:
        self.concepts: dict[str, ConceptSignature] = {}
        self.temporals: dict[str, TemporalConcept] = {}
        self.constants: dict[str, ConstantBinding] = {}
        self.verbs: dict[str, VerbSignature] = {}

    # -- lookups -----------------------------------------------------------

    def lookup_concept(self, words: Iterable[str]) -> Optional[ConceptSignature]:
        """Resolve a mention to a signature.

        Tries the exact name, a singular form ("nurses" -> nurse), then a
        unique extension ("position" -> position_in, which arises when the
        declared name carries a trailing preposition).
        """
        name = predicate_name(words)
        if name in self.concepts:
            return self.concepts[name]
        if name.endswith("s") and name[:-1] in self.concepts:
            return self.concepts[name[:-1]]
        extensions = [c for c in self.concepts if c.startswith(name + "_")]
        if len(extensions) == 1:
            return self.concepts[extensions[0]]
        return None

    def is_concept_word(self, word: str) -> bool:
        return self.lookup_concept([word]) is not None

    def temporal_of(self, name: str) -> Optional[TemporalConcept]:
        return self.temporals.get(name)

    def constant_value(self, name: str) -> Optional[ConstantBinding]:
        return self.constants.get(name)

    def attribute_owner(self, attr_name: str) -> Optional[tuple[ConceptSignature, int]]:
        """Find the unique concept declaring an attribute of this name."""
        owners = []
        for sig in self.concepts.values():
            idx = sig.attribute_index(attr_name)
            if idx is not None:
                owners.append((sig, idx))
        return owners[0] if len(owners) == 1 else None

    # -- registration ------------------------------------------------------

    def _store(self, sig: ConceptSignature, span: Span) -> ConceptSignature:
        existing = self.concepts.get(sig.name)
        if existing is not None:
            same = (
                existing.kind == sig.kind
                and existing.keys == sig.keys
                and existing.parameters == sig.parameters
            )
            if not same:
                raise SemanticError(
                    "ConflictingSignature", span,
                    f"{sig.name} was already declared with a different shape",
                )
            return existing
        self.concepts[sig.name] = sig
        return sig

    def register_domain(
        self, name_words: list[str], key_names: list[str], param_names: list[str],
        span: Span = NO_SPAN,
    ) -> ConceptSignature:
        name = predicate_name(name_words)

        def make(attr: str) -> Attribute:
            target = self.lookup_concept(attr.split())
            # only an exact concept-name match creates a reference
            if target is not None and predicate_name(attr.split()) == target.name:
                return Attribute(attr, ref=target.name)
            return Attribute(attr)

        keys = [make(attribute_name(k.split())) for k in key_names]
        params = [make(attribute_name(p.split())) for p in param_names]
        if not keys:
            # without an "is identified by" clause the whole attribute list
            # identifies the concept
            keys, params = params, []
        sig = ConceptSignature(name, ConceptKind.DOMAIN, keys, params)
        return self._store(sig, span)

    def register_range(
        self, name_words: list[str], low: Optional[int], high: Optional[int],
        span: Span = NO_SPAN,
    ) -> ConceptSignature:
        name = predicate_name(name_words)
        sig = ConceptSignature(
            name, ConceptKind.RANGE, [Attribute(attribute_name(name_words))], [],
            low=low, high=high,
        )
        return self._store(sig, span)

    def register_list(
        self, name_words: list[str], values: list[str],
        extra: list[tuple[str, list[str]]], span: Span = NO_SPAN,
    ) -> ConceptSignature:
        name = predicate_name(name_words)
        keys = [Attribute("_index"), Attribute(attribute_name(name_words))]
        params = [Attribute(attribute_name(attr.split())) for attr, _ in extra]
        for _, extra_values in extra:
            if len(extra_values) != len(values):
                raise SemanticError(
                    "LengthMismatch", span,
                    f"respectively-list for {name} has {len(extra_values)} values, "
                    f"expected {len(values)}",
                )
        sig = ConceptSignature(
            name, ConceptKind.LIST, keys, params,
            low=1, high=len(values), list_values=list(values),
        )
        return self._store(sig, span)

    def register_temporal(
        self, name_words: list[str], unit: str, start: Token, end: Token,
        step: Optional[int], span: Span = NO_SPAN,
    ) -> tuple[ConceptSignature, TemporalConcept]:
        name = predicate_name(name_words)
        temporal = build_temporal_map(name, unit, start, end, step, span)
        attr = Attribute(attribute_name(name_words))
        if unit == "steps":
            sig = ConceptSignature(
                name, ConceptKind.TEMPORAL, [attr], [],
                low=1, high=temporal.count,
            )
        else:
            sig = ConceptSignature(
                name, ConceptKind.TEMPORAL, [attr], [Attribute("_label")],
                low=1, high=temporal.count,
            )
        stored = self._store(sig, span)
        self.temporals[name] = temporal
        return stored, temporal

    def register_constant(
        self, name: str, value: Optional[object], span: Span = NO_SPAN
    ) -> ConstantBinding:
        binding = ConstantBinding(name, value)
        existing = self.constants.get(name)
        if existing is not None and existing.value != value:
            raise SemanticError(
                "ConflictingSignature", span, f"constant {name} was already bound"
            )
        self.constants[name] = binding
        return binding

    def register_implicit_concept(
        self, name_words: list[str], arity: int = 1, span: Span = NO_SPAN
    ) -> ConceptSignature:
        name = predicate_name(name_words)
        if name in self.concepts:
            return self.concepts[name]
        keys = [Attribute(attribute_name(name_words))]
        keys += [Attribute(f"_arg{i}") for i in range(2, arity + 1)]
        sig = ConceptSignature(name, ConceptKind.IMPLICIT, keys, [])
        return self._store(sig, span)

    def register_verb(
        self, name: str, slots: list[Optional[str]], span: Span = NO_SPAN
    ) -> VerbSignature:
        existing = self.verbs.get(name)
        if existing is not None:
            if existing.arity != len(slots):
                raise SemanticError(
                    "ArityConflict", span,
                    f"{name} is used with {len(slots)} arguments but was "
                    f"introduced with {existing.arity}",
                )
            # fill in slot concepts learned later
            for i, concept in enumerate(slots):
                if existing.slots[i] is None and concept is not None:
                    existing.slots[i] = concept
            return existing
        self.verbs[name] = VerbSignature(name, list(slots))
        return self.verbs[name]
