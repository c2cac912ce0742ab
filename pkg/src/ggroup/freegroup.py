"""Reduced words over the free group on a two-sorted vocabulary.

The vocabulary joins surface tokens (``Phon``) and ground logical forms
(``Log``).  A word is a sequence of signed atoms; it is *reduced* when no
atom sits next to its own inverse.  Reduction by adjacent cancellation is
confluent, so every raw sequence denotes exactly one reduced word and the
reduced words form a group under concatenate-then-reduce.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

from .term import Term, is_ground, parse_term, render_term

__all__ = [
    "Phon", "Log", "VocabElement", "SignedAtom", "ReducedWord", "NEUTRAL",
    "atom", "reduce_word", "product", "inverse", "conjugate",
    "cyclic_rotations", "render_word",
]


@dataclass(frozen=True)
class Phon:
    token: str


@dataclass(frozen=True)
class Log:
    term: Term

    def __post_init__(self) -> None:
        if not is_ground(self.term):
            raise ValueError(f"vocabulary element is not ground: {render_term(self.term)}")


VocabElement = Union[Phon, Log]


@dataclass(frozen=True)
class SignedAtom:
    base: VocabElement
    sign: int = 1

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    def inverse(self) -> "SignedAtom":
        return SignedAtom(self.base, -self.sign)


@dataclass(frozen=True)
class ReducedWord:
    atoms: tuple[SignedAtom, ...] = ()

    def __post_init__(self) -> None:
        for a, b in zip(self.atoms, self.atoms[1:]):
            if a.base == b.base and a.sign == -b.sign:
                raise ValueError("word is not reduced: adjacent inverse pair")

    def __len__(self) -> int:
        return len(self.atoms)


NEUTRAL = ReducedWord()


def atom(base: VocabElement, sign: int = 1) -> ReducedWord:
    return ReducedWord((SignedAtom(base, sign),))


def reduce_word(atoms: Iterable[SignedAtom]) -> ReducedWord:
    """Cancel adjacent inverse pairs until none remain (single stack pass)."""
    stack: list[SignedAtom] = []
    for a in atoms:
        if stack and stack[-1].base == a.base and stack[-1].sign == -a.sign:
            stack.pop()
        else:
            stack.append(a)
    return ReducedWord(tuple(stack))


def product(*words: ReducedWord) -> ReducedWord:
    out: list[SignedAtom] = []
    for w in words:
        out.extend(w.atoms)
    return reduce_word(out)


def inverse(w: ReducedWord) -> ReducedWord:
    return ReducedWord(tuple(a.inverse() for a in reversed(w.atoms)))


def conjugate(w: ReducedWord, by: ReducedWord) -> ReducedWord:
    """The quasi-element ``by . w . by^-1``."""
    return product(by, w, inverse(by))


def cyclic_rotations(w: ReducedWord) -> set[ReducedWord]:
    """All rotations of ``w``, each re-reduced; at most ``len(w)`` of them."""
    n = len(w.atoms)
    if n == 0:
        return {w}
    return {reduce_word(w.atoms[k:] + w.atoms[:k]) for k in range(n)}


# ---------------------------------------------------------------------------
# Concrete syntax: space-separated atoms, ``^-1`` marks an inverse, the
# neutral element prints as ``1``.


def render_atom(a: SignedAtom) -> str:
    text = a.base.token if isinstance(a.base, Phon) else render_term(a.base.term)
    return text + ("^-1" if a.sign < 0 else "")


def render_word(w: ReducedWord) -> str:
    if not w.atoms:
        return "1"
    return " ".join(render_atom(a) for a in w.atoms)


def parse_word(text: str, phon_vocab: Iterable[str]) -> ReducedWord:
    """Parse a word; bare names in ``phon_vocab`` are surface tokens.

    The input need not be reduced; the result always is.
    """
    vocab = set(phon_vocab)
    atoms: list[SignedAtom] = []
    stripped = text.strip()
    if stripped == "1":
        return NEUTRAL
    for chunk in stripped.split():
        sign = 1
        if chunk.endswith("^-1"):
            sign = -1
            chunk = chunk[:-3]
        if not chunk:
            raise ValueError("empty atom")
        if chunk in vocab:
            base: VocabElement = Phon(chunk)
        else:
            term = parse_term(chunk)
            if not is_ground(term):
                raise ValueError(f"free-group atoms must be ground: {chunk!r}")
            base = Log(term)
        atoms.append(SignedAtom(base, sign))
    return reduce_word(atoms)
