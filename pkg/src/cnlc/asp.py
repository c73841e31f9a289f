"""ASP program representation, canonical rendering, and rule safety.

Rendering is deterministic: one rule per line, strings double-quoted, numbers
bare, choice bounds always explicit ("1 <= {...} <= 1"), modulo printed as
"(expr)\\m" and absolute value as "|expr|".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Anon:
    pass


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Str:
    text: str


@dataclass(frozen=True)
class Func:
    name: str
    args: tuple["Term", ...]


@dataclass(frozen=True)
class RangeT:
    low: "Term"
    high: "Term"


@dataclass(frozen=True)
class Arith:
    op: str  # + - *
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Neg:
    inner: "Term"


@dataclass(frozen=True)
class Abs:
    inner: "Term"


@dataclass(frozen=True)
class Group:
    inner: "Term"


@dataclass(frozen=True)
class Mod:
    inner: "Term"
    modulus: int


Term = Union[Var, Anon, Num, Sym, Str, Func, RangeT, Arith, Neg, Abs, Group, Mod]


def render_term(term: Term) -> str:
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Anon):
        return "_"
    if isinstance(term, Num):
        return str(term.value)
    if isinstance(term, Sym):
        return term.name
    if isinstance(term, Str):
        return f'"{term.text}"'
    if isinstance(term, Func):
        if not term.args:
            return term.name
        return f"{term.name}({','.join(render_term(a) for a in term.args)})"
    if isinstance(term, RangeT):
        return f"{render_term(term.low)}..{render_term(term.high)}"
    if isinstance(term, Arith):
        return f"{render_term(term.left)}{term.op}{render_term(term.right)}"
    if isinstance(term, Neg):
        return f"-{render_term(term.inner)}"
    if isinstance(term, Abs):
        return f"|{render_term(term.inner)}|"
    if isinstance(term, Group):
        return f"({render_term(term.inner)})"
    if isinstance(term, Mod):
        return f"({render_term(term.inner)})\\{term.modulus}"
    raise TypeError(f"not a term: {term!r}")


def term_variables(term: Term) -> list[str]:
    """Variables of a term in first-occurrence order."""
    out: list[str] = []

    def walk(t: Term) -> None:
        if isinstance(t, Var):
            if t.name not in out:
                out.append(t.name)
        elif isinstance(t, Func):
            for a in t.args:
                walk(a)
        elif isinstance(t, RangeT):
            walk(t.low)
            walk(t.high)
        elif isinstance(t, Arith):
            walk(t.left)
            walk(t.right)
        elif isinstance(t, (Neg, Abs, Group, Mod)):
            walk(t.inner)

    walk(term)
    return out


# ---------------------------------------------------------------------------
# Atoms, literals, aggregates, rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...] = ()

    def render(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(render_term(a) for a in self.args)})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def render(self) -> str:
        return self.atom.render() if self.positive else f"not {self.atom.render()}"


@dataclass(frozen=True)
class Comparison:
    op: str  # = != < <= > >=
    left: Term
    right: Term

    def render(self) -> str:
        return f"{render_term(self.left)} {self.op} {render_term(self.right)}"


AGGREGATE_FUNCTIONS = {"count": "#count", "sum": "#sum", "min": "#min", "max": "#max"}


@dataclass(frozen=True)
class Aggregate:
    fn: str  # count | sum | min | max
    terms: tuple[Term, ...]
    conj: tuple[Union[Literal, Comparison], ...]
    guard_op: str
    guard: Term

    def render(self) -> str:
        head = ",".join(render_term(t) for t in self.terms)
        body = ", ".join(e.render() for e in self.conj)
        return f"{AGGREGATE_FUNCTIONS[self.fn]}{{{head}: {body}}} {self.guard_op} {render_term(self.guard)}"


BodyElement = Union[Literal, Comparison, Aggregate]


@dataclass(frozen=True)
class ChoiceElement:
    atom: Atom
    conditions: tuple[Literal, ...] = ()

    def render(self) -> str:
        if not self.conditions:
            return self.atom.render()
        conds = ", ".join(c.render() for c in self.conditions)
        return f"{self.atom.render()}: {conds}"


@dataclass(frozen=True)
class Choice:
    elements: tuple[ChoiceElement, ...]
    lower: Optional[Term] = None
    upper: Optional[Term] = None

    def render(self) -> str:
        inner = "{" + "; ".join(e.render() for e in self.elements) + "}"
        if self.lower is not None and self.upper is not None:
            return f"{render_term(self.lower)} <= {inner} <= {render_term(self.upper)}"
        if self.lower is not None:
            return f"{render_term(self.lower)} <= {inner}"
        if self.upper is not None:
            return f"{inner} <= {render_term(self.upper)}"
        return inner


Head = Union[None, tuple[Atom, ...], Choice]


@dataclass(frozen=True)
class Rule:
    head: Head  # None = constraint; tuple of atoms = normal/disjunctive
    body: tuple[BodyElement, ...] = ()
    source: int = 0  # source-order tag used when emitting the program

    @property
    def is_fact(self) -> bool:
        return not self.body and isinstance(self.head, tuple) and len(self.head) == 1

    def render(self) -> str:
        if isinstance(self.head, Choice):
            head_text = self.head.render()
        elif self.head:
            head_text = " | ".join(a.render() for a in self.head)
        else:
            head_text = ""
        body_text = ", ".join(e.render() for e in self.body)
        if head_text and body_text:
            return f"{head_text} :- {body_text}."
        if head_text:
            return f"{head_text}."
        return f":- {body_text}."


@dataclass(frozen=True)
class WeakRule:
    body: tuple[BodyElement, ...]
    weight: Term
    level: int
    terms: tuple[Term, ...] = ()
    source: int = 0

    def render(self) -> str:
        body_text = ", ".join(e.render() for e in self.body)
        tail = f"[{render_term(self.weight)}@{self.level}"
        if self.terms:
            tail += ", " + ",".join(render_term(t) for t in self.terms)
        tail += "]"
        return f":~ {body_text}. {tail}"


Statement = Union[Rule, WeakRule]


def render_program(statements: Iterable[Statement]) -> str:
    """One statement per line, in the given order; empty program -> ""."""
    lines = [s.render() for s in statements]
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Safety
# ---------------------------------------------------------------------------

@dataclass
class SafetyReport:
    safe: bool
    unbound: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.safe


def _atom_vars(atom: Atom) -> list[str]:
    out: list[str] = []
    for arg in atom.args:
        for v in term_variables(arg):
            if v not in out:
                out.append(v)
    return out


def is_safe(rule: Statement) -> SafetyReport:
    """Check the two safety conditions.

    (i) every global variable occurs in a positive body atom, where
    assignment comparisons ("X = boundexpr") and assignment aggregate guards
    also bind; (ii) every aggregate-local variable occurs in a positive atom
    of its set conjunction.
    """
    body = rule.body
    unbound: list[str] = []

    # variables that appear only inside aggregate sets are local
    aggregate_local: set[str] = set()
    outside: set[str] = set()
    head_vars: list[str] = []
    if isinstance(rule, Rule):
        if isinstance(rule.head, Choice):
            for el in rule.head.elements:
                head_vars.extend(_atom_vars(el.atom))
                for cond in el.conditions:
                    head_vars.extend(_atom_vars(cond.atom))
            for bound in (rule.head.lower, rule.head.upper):
                if bound is not None:
                    head_vars.extend(term_variables(bound))
        elif rule.head:
            for a in rule.head:
                head_vars.extend(_atom_vars(a))
    else:
        head_vars.extend(term_variables(rule.weight))
        for t in rule.terms:
            head_vars.extend(term_variables(t))
    outside.update(head_vars)

    set_vars: set[str] = set()
    for el in body:
        if isinstance(el, Literal):
            outside.update(_atom_vars(el.atom))
        elif isinstance(el, Comparison):
            outside.update(term_variables(el.left))
            outside.update(term_variables(el.right))
        elif isinstance(el, Aggregate):
            outside.update(term_variables(el.guard))
            for inner in el.conj:
                if isinstance(inner, Literal):
                    set_vars.update(_atom_vars(inner.atom))
                else:
                    set_vars.update(term_variables(inner.left))
                    set_vars.update(term_variables(inner.right))
            for t in el.terms:
                set_vars.update(term_variables(t))
    aggregate_local = set_vars - outside

    # (ii) aggregate-local variables must appear in a positive atom of
    # their own conjunction
    for el in body:
        if not isinstance(el, Aggregate):
            continue
        conj_positive: set[str] = set()
        conj_all: set[str] = set()
        for inner in el.conj:
            if isinstance(inner, Literal):
                conj_all.update(_atom_vars(inner.atom))
                if inner.positive:
                    conj_positive.update(_atom_vars(inner.atom))
            else:
                conj_all.update(term_variables(inner.left))
                conj_all.update(term_variables(inner.right))
        for t in el.terms:
            conj_all.update(term_variables(t))
        for v in sorted(conj_all & aggregate_local):
            if v not in conj_positive and v not in unbound:
                unbound.append(v)

    # (i) fixpoint over binding constructs for global variables
    bound: set[str] = set()
    for el in body:
        if isinstance(el, Literal) and el.positive:
            bound.update(_atom_vars(el.atom))
    changed = True
    while changed:
        changed = False
        for el in body:
            if isinstance(el, Comparison) and el.op == "=":
                lv, rv = set(term_variables(el.left)), set(term_variables(el.right))
                if rv <= bound and not lv <= bound:
                    bound.update(lv)
                    changed = True
                elif lv <= bound and not rv <= bound:
                    bound.update(rv)
                    changed = True
            elif isinstance(el, Aggregate) and el.guard_op == "=":
                gv = set(term_variables(el.guard))
                if not gv <= bound:
                    bound.update(gv)
                    changed = True

    globals_needed: list[str] = []
    for v in [*head_vars, *sorted(outside)]:
        if v not in aggregate_local and v not in globals_needed:
            globals_needed.append(v)
    for v in globals_needed:
        if v not in bound and v not in unbound:
            unbound.append(v)
    return SafetyReport(not unbound, unbound)
