"""Reduced words and the group laws, plus the worked lexical-entry product.

The randomized suites draw raw atom sequences from a small two-sorted
alphabet and check the group laws on their reductions; a thousand cases per
law with a fixed seed.
"""

import random

import pytest

from ggroup.freegroup import (
    Log, NEUTRAL, Phon, ReducedWord, SignedAtom, atom, conjugate,
    cyclic_rotations, inverse, parse_word, product, reduce_word, render_word,
)
from ggroup.term import parse_term

VOCAB = ["john", "saw", "louise"]


def w(text):
    return parse_word(text, VOCAB)


# ---------------------------------------------------------------------------
# construction and reduction


def test_reduced_word_rejects_adjacent_inverses():
    a = SignedAtom(Phon("saw"), 1)
    with pytest.raises(ValueError):
        ReducedWord((a, a.inverse()))


def test_sign_must_be_unit():
    with pytest.raises(ValueError):
        SignedAtom(Phon("saw"), 0)


def test_log_atoms_must_be_ground():
    with pytest.raises(ValueError):
        Log(parse_term("s(A,l)"))


def test_reduce_word_cancels_through():
    a, b = SignedAtom(Phon("john")), SignedAtom(Phon("saw"))
    raw = [a, b, b.inverse(), a.inverse(), a]
    assert reduce_word(raw) == ReducedWord((a,))


def test_parse_and_render():
    assert render_word(w("john saw^-1 s(j,l)")) == "john saw^-1 s(j,l)"
    assert w("john john^-1") == NEUTRAL
    assert render_word(NEUTRAL) == "1"
    assert w("1") == NEUTRAL
    with pytest.raises(ValueError):
        parse_word("s(A,l)", VOCAB)  # non-ground logical atoms are not atoms


def test_product_and_inverse():
    ab = w("john saw")
    assert product(ab, inverse(ab)) == NEUTRAL
    assert inverse(w("john saw^-1")) == w("saw john^-1")


def test_conjugate_of_neutral():
    assert conjugate(NEUTRAL, w("john saw")) == NEUTRAL


def test_cyclic_rotations():
    rots = {render_word(r) for r in cyclic_rotations(w("john saw louise"))}
    assert rots == {"john saw louise", "saw louise john", "louise john saw"}
    assert cyclic_rotations(NEUTRAL) == {NEUTRAL}


# ---------------------------------------------------------------------------
# the worked product: three lexical entries, conjugated and multiplied,
# collapse to a logical form paired with the inverted word string


def test_lexical_entry_product_reduces_to_public_pair():
    r1 = w("j^-1 s(j,l) l^-1 saw^-1")
    r2 = w("l louise^-1")
    r3 = w("j john^-1")
    q1 = conjugate(r1, w("j"))
    q2 = conjugate(r2, w("j saw"))
    q3 = r3
    assert render_word(product(q1, q2, q3)) == "s(j,l) louise^-1 saw^-1 john^-1"


# ---------------------------------------------------------------------------
# randomized law suites


def _random_raw(rng, alphabet, max_len=12):
    n = rng.randrange(max_len + 1)
    return [SignedAtom(rng.choice(alphabet), rng.choice((1, -1)))
            for _ in range(n)]


ALPHABET = [Phon("a"), Phon("b"), Phon("c"), Log(parse_term("s(j,l)"))]


def test_reduction_is_confluent_under_splitting():
    # reducing the pieces of any split first never changes the outcome
    rng = random.Random(1001)
    for _ in range(1000):
        raw = _random_raw(rng, ALPHABET)
        cut = rng.randrange(len(raw) + 1)
        whole = reduce_word(raw)
        split = product(reduce_word(raw[:cut]), reduce_word(raw[cut:]))
        assert split == whole


def test_product_is_associative():
    rng = random.Random(1002)
    for _ in range(1000):
        x, y, z = (reduce_word(_random_raw(rng, ALPHABET)) for _ in range(3))
        assert product(product(x, y), z) == product(x, product(y, z))


def test_neutral_is_identity():
    rng = random.Random(1003)
    for _ in range(1000):
        x = reduce_word(_random_raw(rng, ALPHABET))
        assert product(x, NEUTRAL) == x
        assert product(NEUTRAL, x) == x


def test_inverse_cancels():
    rng = random.Random(1004)
    for _ in range(1000):
        x = reduce_word(_random_raw(rng, ALPHABET))
        assert product(x, inverse(x)) == NEUTRAL
        assert product(inverse(x), x) == NEUTRAL


def test_conjugacy_preserves_neutrality_exactly():
    # by . x . by^-1 is neutral precisely when x is
    rng = random.Random(1005)
    for _ in range(1000):
        x = reduce_word(_random_raw(rng, ALPHABET))
        by = reduce_word(_random_raw(rng, ALPHABET, max_len=6))
        c = conjugate(x, by)
        assert (c == NEUTRAL) == (x == NEUTRAL)
