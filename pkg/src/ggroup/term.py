"""Logical-form terms: first-order structures extended with one-hole abstractions.

A term is built from constants, compound applications of a functor to
argument terms, identifiers (ground markers written ``#x1``), meta-variables
(uppercase, standing for unknown terms), and applications ``P[X]`` of an
abstraction variable to an argument.  Abstraction variables only ever appear
applied; actual lambda values (``Abstraction``) live inside bindings and are
produced by ``match_app``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Optional, Union

__all__ = [
    "Const", "Identifier", "MetaVar", "AbsVar", "Compound", "App", "Term",
    "Abstraction", "Binding", "EMPTY_BINDING", "IdentifierSource",
    "substitute", "unify", "match_app", "term_size", "is_ground", "app_free",
    "identifiers_in", "metavars_in", "subterms", "canonical_identifiers",
    "binding_is_acyclic", "parse_term", "render_term",
    "parse_abstraction", "render_abstraction",
]


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Identifier:
    """Ground marker, rendered ``#name``.  Distinct identifiers never unify."""

    name: str


@dataclass(frozen=True)
class MetaVar:
    name: str


@dataclass(frozen=True)
class AbsVar:
    """Variable ranging over one-argument abstractions; appears only in App."""

    name: str


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple["Term", ...]


@dataclass(frozen=True)
class App:
    """Application ``P[X]`` of an abstraction variable to an argument term."""

    abstraction: AbsVar
    arg: "Term"


Term = Union[Const, Identifier, MetaVar, Compound, App]

# Reserved hole marker for abstraction bodies.  The term parser rejects
# identifiers with a leading underscore, so it cannot collide with input.
HOLE = Identifier("_z")


@dataclass(frozen=True)
class Abstraction:
    """A one-hole term ``\\#_z.body``; the hole is always ``HOLE``."""

    body: Term

    def apply(self, arg: Term) -> Term:
        return _replace_identifier(self.body, HOLE, arg)


@dataclass(frozen=True)
class Binding:
    """Idempotent, acyclic substitution for meta/abstraction/expression vars.

    ``exprs`` maps expression-level conjugator names to engine expressions; it
    is owned here but only the engine writes to it (witness reconstruction).
    """

    terms: Mapping[str, Term] = field(default_factory=dict)
    abstractions: Mapping[str, Abstraction] = field(default_factory=dict)
    exprs: Mapping[str, object] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not self.terms and not self.abstractions and not self.exprs

    def domain(self) -> set:
        return set(self.terms) | set(self.abstractions) | set(self.exprs)


EMPTY_BINDING = Binding()


class IdentifierSource:
    """Per-derivation supply of fresh identifiers #x1, #x2, ..."""

    def __init__(self) -> None:
        self._count = 0

    def fresh(self) -> Identifier:
        self._count += 1
        return Identifier(f"x{self._count}")


def substitute(t: Term, b: Binding) -> Term:
    """Apply a binding to a term; bound App nodes beta-reduce."""
    if not b.terms and not b.abstractions:
        return t
    if isinstance(t, MetaVar):
        return b.terms.get(t.name, t)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(substitute(a, b) for a in t.args))
    if isinstance(t, App):
        arg = substitute(t.arg, b)
        abstraction = b.abstractions.get(t.abstraction.name)
        if abstraction is not None:
            return abstraction.apply(arg)
        return App(t.abstraction, arg)
    return t


def _replace_identifier(t: Term, old: Identifier, new: Term) -> Term:
    if t == old:
        return new
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_replace_identifier(a, old, new) for a in t.args))
    if isinstance(t, App):
        return App(t.abstraction, _replace_identifier(t.arg, old, new))
    return t


def subterms(t: Term) -> Iterator[Term]:
    """Preorder traversal including ``t`` itself."""
    yield t
    if isinstance(t, Compound):
        for a in t.args:
            yield from subterms(a)
    elif isinstance(t, App):
        yield from subterms(t.arg)


def term_size(t: Term) -> int:
    """Node count: identifiers, constants and meta-variables count 1."""
    return sum(1 for _ in subterms(t))


@lru_cache(maxsize=None)
def is_ground(t: Term) -> bool:
    return not any(isinstance(s, (MetaVar, App)) for s in subterms(t))


def app_free(t: Term) -> bool:
    return not any(isinstance(s, App) for s in subterms(t))


def identifiers_in(t: Term) -> list[Identifier]:
    """Distinct identifiers in first-occurrence (preorder) order."""
    seen: list[Identifier] = []
    for s in subterms(t):
        if isinstance(s, Identifier) and s not in seen:
            seen.append(s)
    return seen


def metavars_in(t: Term) -> list[MetaVar]:
    seen: list[MetaVar] = []
    for s in subterms(t):
        if isinstance(s, MetaVar) and s not in seen:
            seen.append(s)
    return seen


def _contains_metavar(t: Term, name: str) -> bool:
    return any(isinstance(s, MetaVar) and s.name == name for s in subterms(t))


def _compose(b: Binding, terms: dict, abstractions: dict) -> Binding:
    """Extend ``b`` with a delta, keeping the result idempotent."""
    delta = Binding(terms, abstractions)
    new_terms = {k: substitute(v, delta) for k, v in b.terms.items()}
    new_abs = {k: Abstraction(substitute(a.body, delta)) for k, a in b.abstractions.items()}
    new_terms.update(terms)
    new_abs.update(abstractions)
    return Binding(new_terms, new_abs, dict(b.exprs))


def binding_is_acyclic(b: Binding) -> bool:
    """No bound variable may occur in its own (or any) bound value."""
    names = set(b.terms)
    for v in b.terms.values():
        if any(isinstance(s, MetaVar) and s.name in names for s in subterms(v)):
            return False
    for a in b.abstractions.values():
        if any(isinstance(s, App) and s.abstraction.name in b.abstractions
               for s in subterms(a.body)):
            return False
    return True


def unify(t1: Term, t2: Term, b: Binding = EMPTY_BINDING,
          allow_vacuous: bool = False) -> list[Binding]:
    """All most-general extensions of ``b`` making the two terms equal.

    Deterministic order; the list is empty when unification fails.  Branching
    only arises through App patterns with an unresolved argument.
    """
    t1 = substitute(t1, b)
    t2 = substitute(t2, b)
    if t1 == t2:
        return [b]
    if isinstance(t1, MetaVar):
        if _contains_metavar(t2, t1.name):
            return []  # occurs check: no infinite-tree solutions
        return [_compose(b, {t1.name: t2}, {})]
    if isinstance(t2, MetaVar):
        if _contains_metavar(t1, t2.name):
            return []
        return [_compose(b, {t2.name: t1}, {})]
    if isinstance(t1, App) and isinstance(t2, App):
        if t1.abstraction == t2.abstraction:
            return unify(t1.arg, t2.arg, b, allow_vacuous)
        return []
    if isinstance(t1, App):
        return match_app(t1, t2, b, allow_vacuous)
    if isinstance(t2, App):
        return match_app(t2, t1, b, allow_vacuous)
    if isinstance(t1, Compound) and isinstance(t2, Compound):
        if t1.functor != t2.functor or len(t1.args) != len(t2.args):
            return []
        results = [b]
        for a1, a2 in zip(t1.args, t2.args):
            results = [b3 for b2 in results for b3 in unify(a1, a2, b2, allow_vacuous)]
            if not results:
                return []
        return results
    return []


def _abstract(t: Term, i: Identifier) -> Abstraction:
    """All-occurrences abstraction of ``i`` out of ``t``."""
    return Abstraction(_replace_identifier(t, i, HOLE))


def match_app(app: App, t: Term, b: Binding = EMPTY_BINDING,
              allow_vacuous: bool = False) -> list[Binding]:
    """Solve ``P[X] = t`` for the abstraction variable ``P``.

    The target must already be free of App nodes (unresolved applications are
    matched only once their own abstractions are known; attempting earlier is
    simply inapplicable, which realizes scoping-order choice points upstream).
    Only occurrences of the argument identifier literally present in ``t`` are
    abstracted.  Degenerate solutions are rejected: the identity abstraction
    always, the vacuous one unless explicitly allowed.
    """
    t = substitute(t, b)
    if not app_free(t):
        return []
    arg = substitute(app.arg, b)
    name = app.abstraction.name
    if isinstance(arg, Identifier):
        candidates = [arg]
    elif isinstance(arg, MetaVar):
        candidates = identifiers_in(t)
        if not candidates and allow_vacuous:
            # nothing to abstract anywhere: no principled argument choice
            return []
    else:
        return []
    out: list[Binding] = []
    for i in candidates:
        if t == i:
            continue  # identity abstraction: body would be the bare hole
        if i not in identifiers_in(t) and not allow_vacuous:
            continue
        terms = {} if isinstance(arg, Identifier) else {arg.name: i}
        out.append(_compose(b, terms, {name: _abstract(t, i)}))
    return out


def canonical_identifiers(t: Term) -> Term:
    """Rename identifiers to #x1, #x2, ... in first-occurrence order."""
    mapping: dict[str, str] = {}
    for i in identifiers_in(t):
        mapping.setdefault(i.name, f"x{len(mapping) + 1}")

    def rn(s: Term) -> Term:
        if isinstance(s, Identifier):
            return Identifier(mapping[s.name])
        if isinstance(s, Compound):
            return Compound(s.functor, tuple(rn(a) for a in s.args))
        if isinstance(s, App):
            return App(s.abstraction, rn(s.arg))
        return s

    return rn(t)


# ---------------------------------------------------------------------------
# Concrete syntax


def render_term(t: Term) -> str:
    if isinstance(t, Const):
        return t.name
    if isinstance(t, Identifier):
        return "#" + t.name
    if isinstance(t, MetaVar):
        return t.name
    if isinstance(t, Compound):
        return t.functor + "(" + ",".join(render_term(a) for a in t.args) + ")"
    if isinstance(t, App):
        return t.abstraction.name + "[" + render_term(t.arg) + "]"
    raise TypeError(f"not a term: {t!r}")


def render_abstraction(a: Abstraction) -> str:
    return "\\#_z." + render_term(a.body)


class _Scanner:
    def __init__(self, text: str, allow_hole: bool = False):
        self.text = text
        self.pos = 0
        self.allow_hole = allow_hole

    def error(self, msg: str) -> ValueError:
        return ValueError(f"{msg} at column {self.pos + 1} in {self.text!r}")

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self) -> None:
        while self.peek().isspace():
            self.pos += 1

    def take_name(self) -> str:
        start = self.pos
        if not (self.peek().isalpha()):
            raise self.error("expected a name")
        while self.peek().isalnum() or self.peek() == "_":
            self.pos += 1
        return self.text[start:self.pos]


def _parse_term(sc: _Scanner) -> Term:
    sc.skip_ws()
    if sc.peek() == "#":
        sc.pos += 1
        if sc.allow_hole and sc.text.startswith(HOLE.name, sc.pos):
            sc.pos += len(HOLE.name)
            return HOLE
        name = sc.take_name()
        if not name[0].islower():
            raise sc.error("identifier names are lowercase")
        return Identifier(name)
    name = sc.take_name()
    if sc.peek() == "(":
        if not name[0].islower():
            raise sc.error("functors are lowercase")
        sc.pos += 1
        args = [_parse_term(sc)]
        sc.skip_ws()
        while sc.peek() == ",":
            sc.pos += 1
            args.append(_parse_term(sc))
            sc.skip_ws()
        if sc.peek() != ")":
            raise sc.error("expected ')'")
        sc.pos += 1
        return Compound(name, tuple(args))
    if sc.peek() == "[":
        if not name[0].isupper():
            raise sc.error("abstraction variables are uppercase")
        sc.pos += 1
        arg = _parse_term(sc)
        sc.skip_ws()
        if sc.peek() != "]":
            raise sc.error("expected ']'")
        sc.pos += 1
        return App(AbsVar(name), arg)
    if name[0].isupper():
        return MetaVar(name)
    return Const(name)


def parse_term(text: str) -> Term:
    """Parse the canonical term syntax, e.g. ``ev(m,#x1,P[#x1])``."""
    sc = _Scanner(text)
    t = _parse_term(sc)
    sc.skip_ws()
    if sc.pos != len(sc.text):
        raise sc.error("trailing input")
    return t


def parse_abstraction(text: str) -> Abstraction:
    prefix = "\\#_z."
    if not text.startswith(prefix):
        raise ValueError(f"not an abstraction: {text!r}")
    sc = _Scanner(text[len(prefix):], allow_hole=True)
    body = _parse_term(sc)
    sc.skip_ws()
    if sc.pos != len(sc.text):
        raise sc.error("trailing input")
    return Abstraction(body)
