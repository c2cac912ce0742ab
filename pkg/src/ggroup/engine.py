"""Rewriting engine: generation, parsing and saturation over one search core.

Working expressions are sequences of signed atoms (surface tokens or
logical-form payloads, the latter possibly containing meta-variables) and
*blocks*.  A block operationalizes a conjugated segment ``y . items . y^-1``
with the conjugator left free: it may move as a unit, rotate cyclically, and
dissolve in place, which together realize exactly the arrangements the free
conjugator can produce.  Ground mutually-inverse neighbours cancel eagerly
after every step; cancellations that need unification are explicit steps.

Each search result carries a ``Derivation`` that an independent ``replay``
re-executes step by step, validating every precondition.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Union

from . import lexicon as lx
from .freegroup import Log, Phon, ReducedWord, SignedAtom
from .term import (
    AbsVar, App, Binding, Compound, Const, EMPTY_BINDING, Identifier,
    IdentifierSource, MetaVar, Term, binding_is_acyclic, canonical_identifiers,
    is_ground, parse_abstraction, parse_term, render_abstraction, render_term,
    substitute, subterms, unify,
)

__all__ = [
    "Atom", "Block", "Expr", "PublicResult", "SearchLimits", "EngineResult",
    "Derivation", "ExpandStep", "CancelStep", "MoveStep", "RotateStep",
    "DissolveStep", "SwapStep", "InputError", "StepError",
    "generate", "parse", "saturate", "replay", "is_public",
    "expr_of_word", "word_of_expr", "render_expr", "parse_expr",
    "render_derivation", "parse_derivation", "derivation_record",
    "derivation_of_record",
]


class InputError(ValueError):
    """A query (not the grammar) is malformed."""


class StepError(ValueError):
    """A derivation step failed validation during replay."""


@dataclass(frozen=True)
class Atom:
    """Signed atom; ``payload`` is a surface token (str) or a Term."""

    payload: Union[str, Term]
    sign: int = 1

    def is_phon(self) -> bool:
        return isinstance(self.payload, str)

    def ground(self) -> bool:
        return self.is_phon() or is_ground(self.payload)


@dataclass(frozen=True)
class Block:
    contents: tuple["Item", ...]


Item = Union[Atom, Block]
Expr = tuple[Item, ...]


def _inverse_pair(a: Item, b: Item) -> bool:
    return (isinstance(a, Atom) and isinstance(b, Atom)
            and a.sign == -b.sign and a.payload == b.payload
            and (a.is_phon() or is_ground(a.payload)))


def normalize(expr: Expr) -> Expr:
    """Eagerly cancel adjacent ground inverse atoms; drop empty blocks.

    Blocks whose contents are already normal are kept as the same object, so
    a caller can find an item again after a structural step.
    """
    stack: list[Item] = []
    for item in expr:
        if isinstance(item, Block):
            inner = normalize(item.contents)
            if not inner:
                continue
            stack.append(item if inner == item.contents else Block(inner))
        elif stack and _inverse_pair(stack[-1], item):
            stack.pop()
        else:
            stack.append(item)
    return tuple(stack)


def substitute_expr(expr: Expr, b: Binding) -> Expr:
    out: list[Item] = []
    for item in expr:
        if isinstance(item, Block):
            out.append(Block(substitute_expr(item.contents, b)))
        elif item.is_phon() or is_ground(item.payload):
            out.append(item)
        else:
            out.append(Atom(substitute(item.payload, b), item.sign))
    return tuple(out)


# ---------------------------------------------------------------------------
# Level addressing: () is the top level, (i,) the contents of the block at
# top-level index i, and so on.  Slots are gap positions within one level.


def level_items(expr: Expr, level: tuple[int, ...]) -> Expr:
    items: Expr = expr
    for i in level:
        block = items[i]
        if not isinstance(block, Block):
            raise StepError(f"no block at {level}")
        items = block.contents
    return items


def _replace_level(expr: Expr, level: tuple[int, ...], new_items: Expr) -> Expr:
    if not level:
        return new_items
    i = level[0]
    block = expr[i]
    assert isinstance(block, Block)
    inner = _replace_level(block.contents, level[1:], new_items)
    return expr[:i] + (Block(inner),) + expr[i + 1:]


def _splice(expr: Expr, level: tuple[int, ...], start: int, stop: int,
            replacement: Expr) -> Expr:
    items = level_items(expr, level)
    if not (0 <= start <= stop <= len(items)):
        raise StepError(f"bad position {start}:{stop} at level {level}")
    return _replace_level(expr, level, items[:start] + replacement + items[stop:])


# ---------------------------------------------------------------------------
# Derivation steps


@dataclass(frozen=True)
class ExpandStep:
    """Rewrite an atom by a rule, or multiply in a relator instance.

    ``rule_id`` is ``g<n>`` (generation rule), ``p<n>`` (parsing rule) or
    ``r<n>`` (bare relator, saturation mode).  ``binding`` instantiates the
    rule against the target atom (generation); ``meta_map``/``ident_map``
    record the fresh renaming chosen at application time (parsing and
    saturation), making replay deterministic.
    """

    level: tuple[int, ...]
    index: int
    rule_id: str
    binding: Binding = EMPTY_BINDING
    meta_map: tuple[tuple[str, str], ...] = ()
    ident_map: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class CancelStep:
    level: tuple[int, ...]
    index: int
    delta: Binding = EMPTY_BINDING


@dataclass(frozen=True)
class MoveStep:
    level: tuple[int, ...]
    index: int
    target_level: tuple[int, ...]
    slot: int  # in post-removal coordinates


@dataclass(frozen=True)
class RotateStep:
    level: tuple[int, ...]
    index: int
    k: int


@dataclass(frozen=True)
class DissolveStep:
    level: tuple[int, ...]
    index: int


@dataclass(frozen=True)
class SwapStep:
    """Exchange adjacent top-level items; only legal in commutative mode."""

    index: int


Step = Union[ExpandStep, CancelStep, MoveStep, RotateStep, DissolveStep, SwapStep]


@dataclass(frozen=True)
class Derivation:
    mode: str  # "gen" | "parse" | "saturate"
    start: Expr
    steps: tuple[Step, ...]
    end: Expr


@dataclass(frozen=True)
class SearchLimits:
    max_expansions: int = 64
    max_items: int = 256
    max_results: int = 32
    allow_vacuous_abstraction: bool = False


@dataclass(frozen=True)
class PublicResult:
    semantics: Term
    words: tuple[str, ...]


@dataclass(frozen=True)
class EngineResult:
    results: tuple  # pairs (payload, Derivation)
    truncated: bool


# ---------------------------------------------------------------------------
# Scheme instantiation


def _instantiate_items(items: tuple[lx.SchemeItem, ...], b: Binding,
                       commutative: bool) -> Expr:
    """Build expression items from scheme items; conjugator pairs become
    blocks (or vanish in commutative mode, where conjugation is trivial)."""
    out: list[Item] = []
    i = 0
    items = tuple(items)
    while i < len(items):
        it = items[i]
        if isinstance(it, lx.ExprMeta):
            j = next(k for k in range(i + 1, len(items))
                     if isinstance(items[k], lx.ExprMeta) and items[k].name == it.name)
            inner = _instantiate_items(items[i + 1:j], b, commutative)
            if not commutative:
                out.append(Block(inner))
            else:
                out.extend(inner)
            i = j + 1
        elif isinstance(it, lx.PhonItem):
            out.append(Atom(it.token, it.sign))
            i += 1
        else:
            out.append(Atom(substitute(it.term, b), it.sign))
            i += 1
    return tuple(out)


def _rename_scheme_term(t: Term, meta_map: Mapping[str, str],
                        ident_map: Mapping[str, str]):
    if isinstance(t, MetaVar):
        if t.name in ident_map:
            return Identifier(ident_map[t.name])
        return MetaVar(meta_map.get(t.name, t.name))
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_rename_scheme_term(a, meta_map, ident_map)
                                         for a in t.args))
    if isinstance(t, App):
        return App(AbsVar(meta_map.get(t.abstraction.name, t.abstraction.name)),
                   _rename_scheme_term(t.arg, meta_map, ident_map))
    return t


def _rename_items(items: tuple[lx.SchemeItem, ...], meta_map, ident_map):
    out = []
    for it in items:
        if isinstance(it, lx.LogItem):
            out.append(lx.LogItem(_rename_scheme_term(it.term, meta_map, ident_map),
                                  it.sign))
        else:
            out.append(it)
    return tuple(out)


def _scheme_variables(items: tuple[lx.SchemeItem, ...]) -> tuple[list[str], list[str]]:
    """(all meta/abstraction names, names used as abstraction arguments)."""
    names: list[str] = []
    app_args: list[str] = []
    for it in items:
        if isinstance(it, lx.LogItem):
            for s in subterms(it.term):
                if isinstance(s, MetaVar) and s.name not in names:
                    names.append(s.name)
                elif isinstance(s, App):
                    if s.abstraction.name not in names:
                        names.append(s.abstraction.name)
                    if isinstance(s.arg, MetaVar) and s.arg.name not in app_args:
                        app_args.append(s.arg.name)
    return names, app_args


# ---------------------------------------------------------------------------
# Step application (shared by search and replay; always validates)


def _rules_by_id(lex: lx.Lexicon) -> dict:
    table: dict[str, object] = {}
    for direction in ("gen", "parse"):
        try:
            rules = lx.gen_rules(lex) if direction == "gen" else lx.parse_rules(lex)
        except lx.GrammarError:
            rules = ()
        for r in rules:
            table[r.rule_id] = r
    for n, r in enumerate(lex.relators, start=1):
        table[f"r{n}"] = r
    return table


def apply_step(lex: lx.Lexicon, expr: Expr, step: Step, *,
               commutative: bool = False, allow_vacuous: bool = False,
               rules_by_id: Optional[dict] = None) -> Expr:
    """Apply one derivation step, validating its preconditions."""
    if rules_by_id is None:
        rules_by_id = _rules_by_id(lex)

    if isinstance(step, ExpandStep):
        rule = rules_by_id.get(step.rule_id)
        if rule is None:
            raise StepError(f"unknown rule {step.rule_id}")
        if step.rule_id.startswith("r"):
            if not commutative:
                raise StepError("relator multiplication requires commutative mode")
            items = level_items(expr, step.level)
            if step.index != len(items):
                raise StepError("relator instances are appended at the end")
            renamed = _rename_items(rule.items, dict(step.meta_map), dict(step.ident_map))
            new_items = _instantiate_items(renamed, EMPTY_BINDING, commutative)
            return normalize(_splice(expr, step.level, step.index, step.index, new_items))
        items = level_items(expr, step.level)
        if not (0 <= step.index < len(items)):
            raise StepError("expand target out of range")
        target = items[step.index]
        if not isinstance(target, Atom) or target.sign != 1:
            raise StepError("expand target must be a positive atom")
        if step.rule_id.startswith("g"):
            if target.is_phon() or not is_ground(target.payload):
                raise StepError("generation expands ground logical atoms")
            if substitute(rule.lhs, step.binding) != target.payload:
                raise StepError("recorded binding does not match the target")
            if not binding_is_acyclic(step.binding):
                raise StepError("cyclic binding")
            new_items = _instantiate_items(rule.rhs, step.binding, commutative)
        else:
            if not target.is_phon() or target.payload != rule.word:
                raise StepError(f"expand target is not the token {rule.word!r}")
            renamed = _rename_items(rule.rhs, dict(step.meta_map), dict(step.ident_map))
            new_items = _instantiate_items(renamed, EMPTY_BINDING, commutative)
        return normalize(_splice(expr, step.level, step.index, step.index + 1, new_items))

    if isinstance(step, CancelStep):
        items = level_items(expr, step.level)
        if not (0 <= step.index < len(items) - 1):
            raise StepError("cancel position out of range")
        a, b = items[step.index], items[step.index + 1]
        if not (isinstance(a, Atom) and isinstance(b, Atom)):
            raise StepError("cancel needs two adjacent atoms")
        if a.sign != -b.sign:
            raise StepError("cancel needs opposite signs")
        if a.is_phon() or b.is_phon():
            raise StepError("token pairs cancel eagerly, not by unification")
        if not binding_is_acyclic(step.delta):
            raise StepError("cyclic binding")
        if substitute(a.payload, step.delta) != substitute(b.payload, step.delta):
            raise StepError("recorded binding does not unify the pair")
        if step.delta not in unify(a.payload, b.payload, EMPTY_BINDING, allow_vacuous):
            raise StepError("recorded binding is not a unifier the pair admits")
        removed = _splice(expr, step.level, step.index, step.index + 2, ())
        return normalize(substitute_expr(removed, step.delta))

    if isinstance(step, MoveStep):
        items = level_items(expr, step.level)
        if not (0 <= step.index < len(items)) or not isinstance(items[step.index], Block):
            raise StepError("move source is not a block")
        if step.target_level != step.level and \
                step.level[:len(step.target_level)] != step.target_level:
            raise StepError("a block may move within its level or to an enclosing one")
        block = items[step.index]
        removed = _splice(expr, step.level, step.index, step.index + 1, ())
        target_items = level_items(removed, step.target_level)
        if not (0 <= step.slot <= len(target_items)):
            raise StepError("move slot out of range")
        return normalize(_splice(removed, step.target_level, step.slot, step.slot,
                                 (block,)))

    if isinstance(step, RotateStep):
        items = level_items(expr, step.level)
        if not (0 <= step.index < len(items)) or not isinstance(items[step.index], Block):
            raise StepError("rotate target is not a block")
        c = items[step.index].contents
        if not (0 <= step.k < max(len(c), 1)):
            raise StepError("rotation out of range")
        rotated = Block(c[step.k:] + c[:step.k])
        return normalize(_splice(expr, step.level, step.index, step.index + 1, (rotated,)))

    if isinstance(step, DissolveStep):
        items = level_items(expr, step.level)
        if not (0 <= step.index < len(items)) or not isinstance(items[step.index], Block):
            raise StepError("dissolve target is not a block")
        return normalize(_splice(expr, step.level, step.index, step.index + 1,
                                 items[step.index].contents))

    if isinstance(step, SwapStep):
        if not commutative:
            raise StepError("swap requires commutative mode")
        if not (0 <= step.index < len(expr) - 1):
            raise StepError("swap position out of range")
        a, b = expr[step.index], expr[step.index + 1]
        return normalize(expr[:step.index] + (b, a) + expr[step.index + 2:])

    raise StepError(f"unknown step {step!r}")


def replay(lex: lx.Lexicon, d: Derivation, *,
           allow_vacuous: bool = False) -> Expr:
    """Re-execute a derivation from scratch, validating every step.

    Returns the final expression, which must equal ``d.end``.
    """
    commutative = d.mode == "saturate" or lex.commutative()
    table = _rules_by_id(lex)
    expr = normalize(d.start)
    for n, step in enumerate(d.steps):
        try:
            expr = apply_step(lex, expr, step, commutative=commutative,
                              allow_vacuous=allow_vacuous, rules_by_id=table)
        except StepError as e:
            raise StepError(f"step {n + 1}: {e}") from None
    if expr != d.end:
        raise StepError("derivation does not end at its recorded expression")
    return expr


# ---------------------------------------------------------------------------
# Public-result recognition


def is_public(lex: lx.Lexicon, expr: Expr,
              start: Optional[Term] = None) -> Optional[PublicResult]:
    """Decode the acceptor shape ``S . Wn^-1 ... W1^-1``.

    With ``start`` given (generation), the expression itself is the word
    string and ``start`` the semantics.  Without it, the expression must be a
    single ground logical atom followed by inverted tokens (possibly none).
    """
    if start is not None:
        if all(isinstance(i, Atom) and i.is_phon() and i.sign == 1 for i in expr):
            return PublicResult(start, tuple(i.payload for i in expr))
        return None
    if not expr or not isinstance(expr[0], Atom):
        return None
    head = expr[0]
    if head.is_phon() or head.sign != 1 or not is_ground(head.payload):
        return None
    words: list[str] = []
    for i in expr[1:]:
        if not (isinstance(i, Atom) and i.is_phon() and i.sign == -1):
            return None
        words.append(i.payload)
    return PublicResult(head.payload, tuple(reversed(words)))


def expr_of_word(w: ReducedWord) -> Expr:
    return tuple(Atom(a.base.token if isinstance(a.base, Phon) else a.base.term,
                      a.sign) for a in w.atoms)


def word_of_expr(expr: Expr) -> ReducedWord:
    atoms = []
    for i in expr:
        if not isinstance(i, Atom) or not i.ground():
            raise ValueError("only ground block-free expressions denote words")
        base = Phon(i.payload) if i.is_phon() else Log(i.payload)
        atoms.append(SignedAtom(base, i.sign))
    return ReducedWord(tuple(atoms))


# ---------------------------------------------------------------------------
# Search


@lru_cache(maxsize=None)
def _ground_term_key(t: Term) -> str:
    return render_term(t)


def _canonical_key(expr: Expr, commutative: bool):
    """Hashable state key: variables renumbered by first occurrence, block
    contents at their least rotation, order forgotten when commutative."""
    mapping: dict[str, int] = {}

    def var_ordinal(key: str) -> int:
        v = mapping.get(key)
        if v is None:
            v = mapping[key] = len(mapping) + 1
        return v

    def term_key(t: Term):
        if isinstance(t, MetaVar):
            return ("M", var_ordinal("M" + t.name))
        if isinstance(t, Compound):
            return ("f", t.functor) + tuple(term_key(a) for a in t.args)
        if isinstance(t, App):
            return ("F", var_ordinal("F" + t.abstraction.name), term_key(t.arg))
        if isinstance(t, Identifier):
            return ("#", t.name)
        return ("c", t.name)

    def item_key(i: Item):
        if isinstance(i, Atom):
            if i.is_phon():
                return ("p", i.payload, i.sign)
            if is_ground(i.payload):
                return ("g", _ground_term_key(i.payload), i.sign)
            return ("a", term_key(i.payload), i.sign)
        parts = [item_key(c) for c in i.contents]
        if len(parts) > 1:
            best = min(range(len(parts)), key=lambda k: parts[k:] + parts[:k])
            parts = parts[best:] + parts[:best]
        return ("b", tuple(parts))

    keys = [item_key(i) for i in expr]
    if commutative:
        keys.sort()
    return tuple(keys)


def _expr_size(expr: Expr) -> int:
    n = 0
    for i in expr:
        n += 1 if isinstance(i, Atom) else 1 + _expr_size(i.contents)
    return n


def _levels(expr: Expr, prefix: tuple[int, ...] = ()) -> Iterable[tuple[tuple[int, ...], Expr]]:
    yield prefix, expr
    for k, i in enumerate(expr):
        if isinstance(i, Block):
            yield from _levels(i.contents, prefix + (k,))


class _Node:
    __slots__ = ("expr", "expansions", "parent", "steps", "tag")

    def __init__(self, expr, expansions, parent, steps, tag=None):
        self.expr = expr
        self.expansions = expansions
        self.parent = parent
        self.steps = steps
        self.tag = tag

    def derivation_steps(self) -> tuple[Step, ...]:
        chain: list[Step] = []
        node = self
        while node.parent is not None:
            chain[:0] = node.steps
            node = node.parent
        return tuple(chain)


def _gen_index(rules: tuple[lx.GenRule, ...]) -> dict:
    index: dict[str, list[lx.GenRule]] = {}
    for r in rules:
        if isinstance(r.lhs, Compound):
            key = f"{r.lhs.functor}/{len(r.lhs.args)}"
        elif isinstance(r.lhs, Const):
            key = f"{r.lhs.name}/0"
        else:
            key = "*"
        index.setdefault(key, []).append(r)
    return index


def _head_key(t: Term) -> str:
    if isinstance(t, Compound):
        return f"{t.functor}/{len(t.args)}"
    if isinstance(t, Const):
        return f"{t.name}/0"
    return "*"


def _expand_successors(lex, expr, commutative, gen_index, allow_vacuous, rules_by_id):
    out = []
    for level, items in _levels(expr):
        for idx, item in enumerate(items):
            if not isinstance(item, Atom) or item.sign != 1 or item.is_phon():
                continue
            if not is_ground(item.payload):
                continue
            for rule in gen_index.get(_head_key(item.payload), []) + gen_index.get("*", []):
                for b in unify(rule.lhs, item.payload, EMPTY_BINDING, allow_vacuous):
                    step = ExpandStep(level, idx, rule.rule_id, binding=b)
                    new = apply_step(lex, expr, step, commutative=commutative,
                                     allow_vacuous=allow_vacuous,
                                     rules_by_id=rules_by_id)
                    out.append(((step,), new, 1, None))
    return out


def _cancel_successors(lex, expr, commutative, allow_vacuous, rules_by_id):
    out = []
    for level, items in _levels(expr):
        n = len(items)
        pairs = [(i, i + 1, None) for i in range(n - 1)]
        if level and n >= 2:
            pairs.append((n - 1, 0, 1))  # cyclic wrap inside a block
        for i, j, rot in pairs:
            a, b = items[i], items[j]
            if not (isinstance(a, Atom) and isinstance(b, Atom)):
                continue
            if a.sign != -b.sign or a.is_phon() or b.is_phon():
                continue
            if a.ground() and b.ground():
                continue  # ground pairs are handled eagerly
            for delta in unify(a.payload, b.payload, EMPTY_BINDING, allow_vacuous):
                if rot is None:
                    steps: tuple[Step, ...] = (CancelStep(level, i, delta),)
                else:
                    # rotate by 1 to expose the wrap pair at the end
                    steps = (RotateStep(level[:-1], level[-1], rot),
                             CancelStep(level, n - 2, delta))
                new = expr
                for s in steps:
                    new = apply_step(lex, new, s, commutative=commutative,
                                     allow_vacuous=allow_vacuous,
                                     rules_by_id=rules_by_id)
                out.append((steps, new, 0, None))
    return out


def _locate(expr: Expr, obj: Item, prefix: tuple[int, ...] = ()):
    for k, i in enumerate(expr):
        if i is obj:
            return prefix, k
        if isinstance(i, Block):
            found = _locate(i.contents, obj, prefix + (k,))
            if found is not None:
                return found
    return None


def _block_successors(lex, expr, rules_by_id):
    """Place each block, optionally rotate it, and dissolve it in one go.

    A block's position only matters at the moment it dissolves, so exploring
    placements as separate states would multiply intermediates without adding
    any reachable arrangement.  Each successor bundles the move (to a slot at
    the same level or an enclosing one), a rotation, and the dissolve.
    """
    out = []
    for level, items in _levels(expr):
        for idx, item in enumerate(items):
            if not isinstance(item, Block):
                continue
            moves: list[Optional[MoveStep]] = [None]
            moves += [MoveStep(level, idx, level, s)
                      for s in range(len(items)) if s != idx]
            anc = level
            while anc:
                anc = anc[:-1]
                moves += [MoveStep(level, idx, anc, s)
                          for s in range(len(level_items(expr, anc)) + 1)]
            for mstep in moves:
                if mstep is None:
                    placed, dlevel, didx = expr, level, idx
                    prefix: tuple[Step, ...] = ()
                else:
                    placed = apply_step(lex, expr, mstep,
                                        rules_by_id=rules_by_id)
                    loc = _locate(placed, item)
                    if loc is None:
                        continue  # consumed by cascading normalization
                    dlevel, didx = loc
                    prefix = (mstep,)
                for k in range(len(item.contents)):
                    steps = list(prefix)
                    new = placed
                    try:
                        if k:
                            rstep = RotateStep(dlevel, didx, k)
                            new = apply_step(lex, new, rstep,
                                             rules_by_id=rules_by_id)
                            steps.append(rstep)
                        dstep = DissolveStep(dlevel, didx)
                        new = apply_step(lex, new, dstep,
                                         rules_by_id=rules_by_id)
                        steps.append(dstep)
                    except StepError:
                        pass  # normalization already consumed the block
                    if steps:
                        out.append((tuple(steps), new, 0, None))
    return out


def _swap_cancel_successors(lex, expr, allow_vacuous, rules_by_id):
    """All-pairs cancellation for commutative mode.

    A chain of swaps brings the two items together; a ground inverse pair
    then cancels eagerly, any other pair takes an explicit cancel.  Stored
    states keep only one ordering of the multiset, so adjacent-only
    enumeration would miss cancels that need a reordering first.
    """
    out = []
    n = len(expr)
    for i in range(n - 1):
        a = expr[i]
        if not isinstance(a, Atom) or a.is_phon():
            continue
        for j in range(i + 1, n):
            b = expr[j]
            if not isinstance(b, Atom) or b.is_phon() or a.sign != -b.sign:
                continue
            if a.ground() and b.ground():
                if a.payload != b.payload or j == i + 1:
                    continue  # not inverses, or already cancelled eagerly
                deltas = [None]
            else:
                deltas = unify(a.payload, b.payload, EMPTY_BINDING,
                               allow_vacuous)
            chain = [SwapStep(k) for k in range(j - 1, i, -1)]
            for delta in deltas:
                steps = list(chain)
                if delta is not None:
                    steps.append(CancelStep((), i, delta))
                new = expr
                try:
                    for s in steps:
                        new = apply_step(lex, new, s, commutative=True,
                                         allow_vacuous=allow_vacuous,
                                         rules_by_id=rules_by_id)
                except StepError:
                    continue  # an eager cancel en route re-shuffled the plan
                out.append((tuple(steps), new, 0, None))
    return out


def _saturate_successors(lex, node, allow_vacuous, rules_by_id):
    """Successors under a resolution strategy.

    The rightmost inverted atom is the selected subgoal; multiplying in a
    relator instance is only allowed when its head immediately cancels
    against that subgoal (the first instance, taken on the empty expression,
    picks the root).  For definite-clause relator systems this is complete
    - which fact states are reachable does not depend on the selection - and
    it keeps working expressions the size of a resolvent.
    """
    expr = node.expr
    if expr and not (isinstance(expr[-1], Atom) and expr[-1].sign == -1):
        return []  # goal state or dead end: no pending subgoal
    out = []
    suffix = str(node.expansions + 1)
    for n, r in enumerate(lex.relators, start=1):
        if lx.is_commutator_scheme(r):
            continue
        names, app_args = _scheme_variables(r.items)
        meta_map = tuple((nm, nm + "_" + suffix)
                         for nm in names if nm not in app_args)
        ident_map = tuple((nm, f"i{suffix}_{k}")
                          for k, nm in enumerate(app_args, 1))
        step = ExpandStep((), len(expr), f"r{n}", meta_map=meta_map,
                          ident_map=ident_map)
        new = apply_step(lex, expr, step, commutative=True,
                         allow_vacuous=allow_vacuous, rules_by_id=rules_by_id)
        if not expr:
            out.append(((step,), new, 1, None))
            continue
        inst = _instantiate_items(
            _rename_items(r.items, dict(meta_map), dict(ident_map)),
            EMPTY_BINDING, True)
        if len(new) < len(expr) + len(inst):
            # the head was the exact inverse of the subgoal and cancelled
            # eagerly during normalization
            out.append(((step,), new, 1, None))
            continue
        sel = len(expr) - 1
        subgoal, head = new[sel], new[sel + 1]
        for delta in unify(subgoal.payload, head.payload, EMPTY_BINDING,
                           allow_vacuous):
            cancel = CancelStep((), sel, delta)
            new2 = apply_step(lex, new, cancel, commutative=True,
                              allow_vacuous=allow_vacuous,
                              rules_by_id=rules_by_id)
            out.append(((step, cancel), new2, 1, None))
    return out


def _search(lex: lx.Lexicon, mode: str, start: Expr, pre_steps: tuple[Step, ...],
            lim: SearchLimits, goal, result_key, gen_index=None) -> EngineResult:
    commutative = lex.commutative()
    allow_vacuous = lim.allow_vacuous_abstraction
    rules_by_id = _rules_by_id(lex)

    root = _Node(normalize(start), 0, None, ())
    expr = root.expr
    for s in pre_steps:
        expr = apply_step(lex, expr, s, commutative=commutative,
                          allow_vacuous=allow_vacuous, rules_by_id=rules_by_id)
    base = _Node(expr, 0, root, pre_steps)

    truncated = False
    results: dict[str, tuple] = {}
    visited = {_canonical_key(base.expr, commutative)}
    queue = deque([base])
    while queue:
        node = queue.popleft()
        payload = goal(node.expr)
        if payload is not None:
            key = result_key(payload)
            if key not in results:
                d = Derivation(mode, root.expr, node.derivation_steps(), node.expr)
                results[key] = (payload, d)
                if len(results) >= lim.max_results:
                    truncated = True
                    break
        if mode == "saturate":
            succ = _saturate_successors(lex, node, allow_vacuous, rules_by_id)
        else:
            succ = []
            if mode == "gen":
                succ += _expand_successors(lex, node.expr, commutative, gen_index,
                                           allow_vacuous, rules_by_id)
            if commutative:
                succ += _swap_cancel_successors(lex, node.expr, allow_vacuous,
                                                rules_by_id)
            elif mode != "gen":
                succ += _cancel_successors(lex, node.expr, commutative,
                                           allow_vacuous, rules_by_id)
            succ += _block_successors(lex, node.expr, rules_by_id)
        for steps, new, dexp, tag in succ:
            expansions = node.expansions + dexp
            if expansions > lim.max_expansions:
                truncated = True
                continue
            if _expr_size(new) > lim.max_items:
                truncated = True
                continue
            key = _canonical_key(new, commutative)
            if key in visited:
                continue
            visited.add(key)
            queue.append(_Node(new, expansions, node, steps, tag))
    ordered = sorted(results.items())
    return EngineResult(tuple(v for _, v in ordered), truncated)


def generate(lex: lx.Lexicon, lf: Term, lim: SearchLimits = SearchLimits()) -> EngineResult:
    """All word strings the grammar derives from a ground logical form.

    Results are pairs ``(words, derivation)`` in lexicographic order; every
    derivation has been replay-verified.
    """
    if not is_ground(lf):
        raise InputError(f"generation input must be ground: {render_term(lf)}")
    rules = lx.gen_rules(lex)
    start: Expr = (Atom(lf, 1),)

    def goal(expr: Expr):
        pub = is_public(lex, expr, start=lf)
        return pub.words if pub is not None else None

    out = _search(lex, "gen", start, (), lim, goal, lambda w: " ".join(w),
                  gen_index=_gen_index(rules))
    for _, d in out.results:
        replay(lex, d, allow_vacuous=lim.allow_vacuous_abstraction)
    return out


def parse(lex: lx.Lexicon, words: Iterable[str],
          lim: SearchLimits = SearchLimits()) -> EngineResult:
    """All ground logical forms the grammar assigns to a string of tokens.

    Results are pairs ``(term, derivation)``; terms carry canonically renamed
    identifiers and come in rendering order.
    """
    words = tuple(words)
    vocab = set(lex.phon_vocab)
    for w in words:
        if w not in vocab:
            raise InputError(f"unknown token {w!r}")
    if len(words) > lim.max_expansions:
        raise InputError("more tokens than allowed expansions")
    prules: dict[str, list[lx.ParseRule]] = {}
    for r in lx.parse_rules(lex):
        prules.setdefault(r.word, []).append(r)
    for w in words:
        if w not in prules:
            raise InputError(f"no parsing rule for token {w!r}")

    def goal(e: Expr):
        if len(e) == 1 and isinstance(e[0], Atom) and not e[0].is_phon() \
                and e[0].sign == 1 and is_ground(e[0].payload):
            return canonical_identifiers(e[0].payload)
        return None

    start: Expr = tuple(Atom(w, 1) for w in words)
    results: dict[str, tuple] = {}
    truncated = False
    commutative = lex.commutative()
    # one search per assignment of rules to homonymous tokens
    for combo in itertools.product(*(prules[w] for w in words)):
        pre: list[Step] = []
        expr = start
        idents = IdentifierSource()
        ordinal = 0
        # expand every token up front, left to right
        while True:
            pos = next((k for k, i in enumerate(expr)
                        if isinstance(i, Atom) and i.is_phon() and i.sign == 1),
                       None)
            if pos is None:
                break
            rule = combo[ordinal]
            ordinal += 1
            names, app_args = _scheme_variables(rule.rhs)
            meta_map = tuple((nm, f"{nm}{ordinal}")
                             for nm in names if nm not in app_args)
            ident_map = tuple((nm, idents.fresh().name) for nm in app_args)
            step = ExpandStep((), pos, rule.rule_id, meta_map=meta_map,
                              ident_map=ident_map)
            expr = apply_step(lex, expr, step, commutative=commutative)
            pre.append(step)

        out = _search(lex, "parse", start, tuple(pre), lim, goal,
                      lambda t: render_term(t))
        truncated = truncated or out.truncated
        for payload, d in out.results:
            results.setdefault(render_term(payload), (payload, d))
        if len(results) >= lim.max_results:
            truncated = True
            break
    ordered = sorted(results.items())
    res = EngineResult(tuple(v for _, v in ordered), truncated)
    for _, d in res.results:
        replay(lex, d, allow_vacuous=lim.allow_vacuous_abstraction)
    return res


def saturate(lex: lx.Lexicon, lim: SearchLimits = SearchLimits()) -> EngineResult:
    """Enumerate single-atom public results of a commutative relator system.

    This is consequence closure for logic-program encodings: products of
    relator instances that reduce to one positive ground atom.
    """
    if not lex.commutative():
        raise InputError("saturation requires a commutative lexicon")
    for r in lex.relators:
        if lx.is_commutator_scheme(r):
            continue
        shape = (r.items and isinstance(r.items[0], lx.LogItem)
                 and r.items[0].sign == 1
                 and all(isinstance(i, lx.LogItem) and i.sign == -1
                         for i in r.items[1:]))
        if not shape:
            raise InputError("saturation expects definite-clause relators: "
                             "one positive atom, then inverted atoms")

    def goal(e: Expr):
        if len(e) == 1 and isinstance(e[0], Atom) and not e[0].is_phon() \
                and e[0].sign == 1 and is_ground(e[0].payload):
            return canonical_identifiers(e[0].payload)
        return None

    out = _search(lex, "saturate", (), (), lim, goal, lambda t: render_term(t))
    for _, d in out.results:
        replay(lex, d, allow_vacuous=lim.allow_vacuous_abstraction)
    return out


# ---------------------------------------------------------------------------
# Rendering and serialization


def render_expr(expr: Expr) -> str:
    parts: list[str] = []

    def walk(items: Expr) -> None:
        for i in items:
            if isinstance(i, Block):
                parts.append("{")
                walk(i.contents)
                parts.append("}")
            else:
                text = i.payload if i.is_phon() else render_term(i.payload)
                parts.append(text + ("^-1" if i.sign < 0 else ""))

    walk(expr)
    return " ".join(parts) if parts else "1"


def parse_expr(text: str, phon_vocab: Iterable[str]) -> Expr:
    vocab = set(phon_vocab)
    if text.strip() == "1":
        return ()
    stack: list[list[Item]] = [[]]
    for tok in text.split():
        if tok == "{":
            stack.append([])
        elif tok == "}":
            inner = stack.pop()
            if not stack:
                raise ValueError("unbalanced '}'")
            stack[-1].append(Block(tuple(inner)))
        else:
            sign = 1
            if tok.endswith("^-1"):
                sign = -1
                tok = tok[:-3]
            payload: Union[str, Term] = tok if tok in vocab else parse_term(tok)
            stack[-1].append(Atom(payload, sign))
    if len(stack) != 1:
        raise ValueError("unbalanced '{'")
    return tuple(stack[0])


def _render_level(level: tuple[int, ...]) -> str:
    return ".".join(str(i) for i in level) if level else "-"

def _parse_level(text: str) -> tuple[int, ...]:
    return () if text == "-" else tuple(int(p) for p in text.split("."))


def _render_binding(b: Binding) -> str:
    parts = [f"{k}={render_term(v)}" for k, v in sorted(b.terms.items())]
    parts += [f"{k}={render_abstraction(v)}" for k, v in sorted(b.abstractions.items())]
    return ";".join(parts)


def _parse_binding(text: str) -> Binding:
    terms: dict[str, Term] = {}
    abstractions = {}
    if text:
        for part in text.split(";"):
            k, v = part.split("=", 1)
            if v.startswith("\\"):
                abstractions[k] = parse_abstraction(v)
            else:
                terms[k] = parse_term(v)
    return Binding(terms, abstractions)


def _render_pairs(pairs: tuple[tuple[str, str], ...]) -> str:
    return ";".join(f"{a}={b}" for a, b in pairs)


def _parse_pairs(text: str) -> tuple[tuple[str, str], ...]:
    if not text:
        return ()
    return tuple(tuple(p.split("=", 1)) for p in text.split(";"))


def render_step(step: Step) -> str:
    if isinstance(step, ExpandStep):
        out = f"expand level={_render_level(step.level)} index={step.index} " \
              f"rule={step.rule_id}"
        if not step.binding.is_empty():
            out += f" bind={_render_binding(step.binding)}"
        if step.meta_map:
            out += f" rename={_render_pairs(step.meta_map)}"
        if step.ident_map:
            out += f" idents={_render_pairs(step.ident_map)}"
        return out
    if isinstance(step, CancelStep):
        out = f"cancel level={_render_level(step.level)} index={step.index}"
        if not step.delta.is_empty():
            out += f" bind={_render_binding(step.delta)}"
        return out
    if isinstance(step, MoveStep):
        return f"move level={_render_level(step.level)} index={step.index} " \
               f"to={_render_level(step.target_level)}:{step.slot}"
    if isinstance(step, RotateStep):
        return f"rotate level={_render_level(step.level)} index={step.index} k={step.k}"
    if isinstance(step, DissolveStep):
        return f"dissolve level={_render_level(step.level)} index={step.index}"
    assert isinstance(step, SwapStep)
    return f"swap index={step.index}"


def parse_step(text: str) -> Step:
    kind, _, rest = text.partition(" ")
    fields = dict(part.split("=", 1) for part in rest.split() if part)
    if kind == "expand":
        return ExpandStep(_parse_level(fields["level"]), int(fields["index"]),
                          fields["rule"], _parse_binding(fields.get("bind", "")),
                          _parse_pairs(fields.get("rename", "")),
                          _parse_pairs(fields.get("idents", "")))
    if kind == "cancel":
        return CancelStep(_parse_level(fields["level"]), int(fields["index"]),
                          _parse_binding(fields.get("bind", "")))
    if kind == "move":
        tlevel, _, slot = fields["to"].rpartition(":")
        return MoveStep(_parse_level(fields["level"]), int(fields["index"]),
                        _parse_level(tlevel), int(slot))
    if kind == "rotate":
        return RotateStep(_parse_level(fields["level"]), int(fields["index"]),
                          int(fields["k"]))
    if kind == "dissolve":
        return DissolveStep(_parse_level(fields["level"]), int(fields["index"]))
    if kind == "swap":
        return SwapStep(int(fields["index"]))
    raise ValueError(f"unknown step kind {kind!r}")


def render_derivation(d: Derivation) -> str:
    lines = [f"derivation mode={d.mode}",
             f"start: {render_expr(d.start)}"]
    lines += [f"step: {render_step(s)}" for s in d.steps]
    lines.append(f"end: {render_expr(d.end)}")
    return "\n".join(lines)


def parse_derivation(text: str, phon_vocab: Iterable[str]) -> Derivation:
    mode = ""
    start: Expr = ()
    end: Expr = ()
    steps: list[Step] = []
    for raw in text.strip().splitlines():
        line = raw.strip()
        if line.startswith("derivation"):
            mode = line.split("mode=", 1)[1].strip()
        elif line.startswith("start:"):
            start = parse_expr(line[len("start:"):].strip(), phon_vocab)
        elif line.startswith("end:"):
            end = parse_expr(line[len("end:"):].strip(), phon_vocab)
        elif line.startswith("step:"):
            steps.append(parse_step(line[len("step:"):].strip()))
        elif line:
            raise ValueError(f"unexpected trace line {line!r}")
    return Derivation(mode, start, tuple(steps), end)


def derivation_record(d: Derivation) -> dict:
    """A JSON-ready rendering of a derivation."""
    return {
        "mode": d.mode,
        "start": render_expr(d.start),
        "steps": [render_step(s) for s in d.steps],
        "end": render_expr(d.end),
    }


def derivation_of_record(record: dict, phon_vocab: Iterable[str]) -> Derivation:
    return Derivation(record["mode"],
                      parse_expr(record["start"], phon_vocab),
                      tuple(parse_step(s) for s in record["steps"]),
                      parse_expr(record["end"], phon_vocab))
