"""The rewriting engine: expressions, steps, search, and derivation replay."""

import json

import pytest

from ggroup.engine import (
    Atom, Block, CancelStep, Derivation, DissolveStep, EngineResult,
    ExpandStep, InputError, MoveStep, PublicResult, RotateStep, SearchLimits,
    StepError, SwapStep, apply_step, derivation_of_record, derivation_record,
    expr_of_word, generate, is_public, normalize, parse, parse_derivation,
    parse_expr, render_derivation, render_expr, replay, saturate,
    word_of_expr, _block_successors,
)
from ggroup.freegroup import parse_word, render_word
from ggroup.lexicon import Lexicon, parse_grammar
from ggroup.term import (
    Binding, canonical_identifiers, parse_term, render_term, subterms,
)

LIM = SearchLimits()


def a(name, sign=1):
    return Atom(name, sign)


def lf(text):
    return parse_term(text)


EMPTY_LEX = Lexicon((), (), raw_mode=True)


# ---------------------------------------------------------------------------
# normalization


def test_normalize_cancels_adjacent_ground_inverses():
    assert normalize((a("x"), a("y"), a("y", -1), a("x", -1))) == ()
    assert normalize((a("x"), a("y", -1), a("y"), a("z"))) == (a("x"), a("z"))


def test_normalize_reaches_into_blocks_and_drops_empty_ones():
    e = (a("x"), Block((a("y"), a("y", -1))), a("x", -1))
    assert normalize(e) == ()
    kept = (Block((a("y"), a("z"))),)
    assert normalize(kept) == kept


def test_normalize_cancels_ground_logical_atoms_too():
    e = (Atom(lf("s(j,l)")), Atom(lf("s(j,l)"), -1))
    assert normalize(e) == ()


def test_normalize_keeps_nonground_pairs_for_explicit_cancellation():
    e = (Atom(lf("A"), -1), Atom(lf("s(j,l)")))
    assert normalize(e) == e


def test_normalize_preserves_untouched_block_objects():
    b = Block((a("y"), a("z")))
    (kept,) = normalize((b,))
    assert kept is b


# ---------------------------------------------------------------------------
# expression syntax and the word bridge


@pytest.mark.parametrize("text", [
    "1",
    "saw",
    "saw^-1 s(j,l)",
    "{ john s(j,l)^-1 } the^-1",
    "{ a^-1 { s(j,l) } } b",
])
def test_expr_round_trip(text):
    vocab = ("john", "saw", "the", "a", "b")
    assert render_expr(parse_expr(text, vocab)) == text


def test_parse_expr_rejects_unbalanced_braces():
    with pytest.raises(ValueError):
        parse_expr("{ a", ("a",))
    with pytest.raises(ValueError):
        parse_expr("a }", ("a",))


def test_word_expr_bridge():
    w = parse_word("john s(j,l)^-1 saw", ("john", "saw"))
    assert word_of_expr(expr_of_word(w)) == w
    with pytest.raises(ValueError):
        word_of_expr((Block((a("x"),)),))
    with pytest.raises(ValueError):
        word_of_expr((Atom(lf("A")),))


# ---------------------------------------------------------------------------
# step application and validation


def test_expand_step_rewrites_a_logical_atom(english):
    e = (Atom(lf("s(j,l)")),)
    b = Binding({"A": lf("j"), "B": lf("l")})
    out = apply_step(english, e, ExpandStep((), 0, "g7", binding=b))
    assert render_expr(out) == "j saw l"


def test_expand_step_checks_its_recorded_binding(english):
    e = (Atom(lf("s(j,l)")),)
    wrong = Binding({"A": lf("l"), "B": lf("l")})
    with pytest.raises(StepError, match="binding does not match"):
        apply_step(english, e, ExpandStep((), 0, "g7", binding=wrong))
    with pytest.raises(StepError, match="unknown rule"):
        apply_step(english, e, ExpandStep((), 0, "g99"))
    with pytest.raises(StepError, match="out of range"):
        apply_step(english, e, ExpandStep((), 3, "g7"))


def test_cancel_step_unifies_an_adjacent_pair(english):
    e = (Atom(lf("A"), -1), Atom(lf("s(j,l)")), a("saw", -1))
    delta = Binding({"A": lf("s(j,l)")})
    out = apply_step(english, e, CancelStep((), 0, delta))
    assert out == (a("saw", -1),)


def test_cancel_step_rejects_non_unifiers(english):
    e = (Atom(lf("A"), -1), Atom(lf("s(j,l)")))
    with pytest.raises(StepError, match="binding"):
        apply_step(english, e, CancelStep((), 0, Binding({"A": lf("j")})))
    tok = (a("saw"), a("saw", -1))
    with pytest.raises(StepError, match="eagerly"):
        apply_step(english, tok, CancelStep((), 0))


def test_move_step_slots_and_levels():
    e = (a("x"), Block((a("y"),)), a("z"))
    out = apply_step(EMPTY_LEX, e, MoveStep((), 1, (), 2))
    assert render_expr(out) == "x z { y }"
    nested = (Block((a("x"), Block((a("y"),)))),)
    out = apply_step(EMPTY_LEX, nested, MoveStep((0,), 1, (), 1))
    assert render_expr(out) == "{ x } { y }"
    with pytest.raises(StepError, match="enclosing"):
        # a block may not move into a sibling block
        apply_step(EMPTY_LEX, (Block(()), Block((a("y"),))),
                   MoveStep((), 1, (0,), 0))
    with pytest.raises(StepError, match="not a block"):
        apply_step(EMPTY_LEX, e, MoveStep((), 0, (), 2))


def test_rotate_and_dissolve_steps():
    e = (Block((a("x"), a("y"), a("z"))),)
    out = apply_step(EMPTY_LEX, e, RotateStep((), 0, 1))
    assert render_expr(out) == "{ y z x }"
    out = apply_step(EMPTY_LEX, out, DissolveStep((), 0))
    assert render_expr(out) == "y z x"
    with pytest.raises(StepError, match="out of range"):
        apply_step(EMPTY_LEX, e, RotateStep((), 0, 3))
    with pytest.raises(StepError, match="not a block"):
        apply_step(EMPTY_LEX, (a("x"),), DissolveStep((), 0))


def test_rotation_can_cancel_across_the_block_seam():
    e = (Block((a("x"), a("y"), a("x", -1))),)
    out = apply_step(EMPTY_LEX, e, RotateStep((), 0, 1))
    assert render_expr(out) == "{ y }"


def test_swap_step_requires_commutative_mode():
    e = (a("x"), a("y"))
    with pytest.raises(StepError, match="commutative"):
        apply_step(EMPTY_LEX, e, SwapStep(0))
    out = apply_step(EMPTY_LEX, e, SwapStep(0), commutative=True)
    assert out == (a("y"), a("x"))


# ---------------------------------------------------------------------------
# block placement is exhaustive: compare the engine's reachable block-free
# words against an independent enumeration of the documented semantics
# (each block dissolves at some slot of its host, in some rotation)


def _oracle_arrangements(items):
    blocks = [k for k, it in enumerate(items) if isinstance(it, Block)]
    if not blocks:
        return {render_word(word_of_expr(normalize(items)))}
    out = set()
    for k in blocks:
        contents, host = items[k].contents, items[:k] + items[k + 1:]
        for r in range(len(contents)):
            rot = contents[r:] + contents[:r]
            for pos in range(len(host) + 1):
                out |= _oracle_arrangements(host[:pos] + rot + host[pos:])
    return out


def _engine_arrangements(expr):
    seen = {expr}
    queue = [expr]
    out = set()
    while queue:
        e = queue.pop()
        if not any(isinstance(i, Block) for i in e):
            out.add(render_expr(e))
            continue
        for _, new, _, _ in _block_successors(EMPTY_LEX, e, {}):
            if new not in seen:
                seen.add(new)
                queue.append(new)
    return out


@pytest.mark.parametrize("expr", [
    (Block((a("x"), a("y"))), a("b"), a("c")),
    (a("b"), Block((a("x"), a("b", -1))), a("c")),
    (Block((a("x"),)), Block((a("y"),)), a("b")),
    (Block((a("x"), a("y"))), Block((a("y", -1), a("z"))), a("x", -1)),
    (a("b"), Block((a("x"), a("y"), a("x", -1))), a("c")),
])
def test_block_placement_matches_independent_enumeration(expr):
    expr = normalize(expr)
    assert _engine_arrangements(expr) == _oracle_arrangements(expr)


def test_nested_blocks_unfold_completely():
    e = (Block((a("b"), Block((a("c"),)))),)
    assert _engine_arrangements(e) == {"b c", "c b"}


# ---------------------------------------------------------------------------
# generation


GENERATION_GOLDENS = [
    ("s(j,l)", {"john saw louise"}),
    ("i(s(j,l),p)", {"john saw louise in paris"}),
    ("ev(m,#x,sm(w,#y,s(#x,#y)))", {"every man saw some woman"}),
    ("sm(w,#y,ev(m,#x,s(#x,#y)))", {"every man saw some woman"}),
    ("r(t(tt(m,#x,s(l,#x))))", {"the man that louise saw ran"}),
]


@pytest.mark.parametrize("src,expected", GENERATION_GOLDENS)
def test_generation_goldens_are_exact(english, src, expected):
    res = generate(english, lf(src), LIM)
    assert {" ".join(words) for words, _ in res.results} == expected
    assert not res.truncated


def test_generation_derivations_replay_and_are_public(english):
    res = generate(english, lf("ev(m,#x,sm(w,#y,s(#x,#y)))"), LIM)
    for words, d in res.results:
        assert d.mode == "gen"
        end = replay(english, d)
        pub = is_public(english, end, start=d.start[0].payload)
        assert pub == PublicResult(d.start[0].payload, words)


def test_generation_requires_ground_input(english):
    with pytest.raises(InputError, match="ground"):
        generate(english, lf("s(A,l)"), LIM)


def test_generation_truncates_under_tight_limits(english):
    res = generate(english, lf("i(s(j,l),p)"), SearchLimits(max_expansions=2))
    assert res.results == ()
    assert res.truncated


# ---------------------------------------------------------------------------
# parsing


def test_parse_simple_sentence(english):
    res = parse(english, "john saw louise".split(), LIM)
    assert {render_term(t) for t, _ in res.results} == {"s(j,l)"}
    assert not res.truncated


def test_parse_attachment_ambiguity_is_exactly_two_ways(english):
    res = parse(english, "john saw louise in paris".split(), LIM)
    assert {render_term(t) for t, _ in res.results} == {
        "i(s(j,l),p)", "s(j,i(l,p))"}
    assert not res.truncated


def test_parse_finds_both_quantifier_scopings_and_no_more(scoping_parse):
    got = {render_term(t) for t, _ in scoping_parse.results}
    assert got == {
        "ev(m,#x1,sm(w,#x2,s(#x1,#x2)))",
        "sm(w,#x1,ev(m,#x2,s(#x2,#x1)))",
    }
    assert not scoping_parse.truncated


RELATIVE_CLAUSE_READINGS = {
    "r(t(tt(m,#x1,s(l,#x1))))",
    "r(tt(t(m),#x1,s(l,#x1)))",
    "t(r(tt(m,#x1,s(l,#x1))))",
    "t(tt(m,#x1,r(s(l,#x1))))",
    "t(tt(m,#x1,s(l,r(#x1))))",
    "tt(t(m),#x1,r(s(l,#x1)))",
    "tt(t(m),#x1,s(l,r(#x1)))",
}


def test_parse_relative_clause_readings_all_generate_the_sentence(english):
    sentence = "the man that louise saw ran"
    res = parse(english, sentence.split(), LIM)
    got = {render_term(t) for t, _ in res.results}
    # the untyped system wraps any subterm with r/t, so alongside the two
    # structural readings it returns every sound such placement; each one
    # must still generate exactly this sentence
    assert got == RELATIVE_CLAUSE_READINGS
    assert not res.truncated
    for t, _ in res.results:
        back = generate(english, t, LIM)
        assert {" ".join(w) for w, _ in back.results} == {sentence}


def test_parse_derivations_replay_to_their_logical_form(english):
    res = parse(english, "john saw louise in paris".split(), LIM)
    for t, d in res.results:
        assert d.mode == "parse"
        end = replay(english, d)
        assert len(end) == 1
        pub = is_public(english, end)
        assert render_term(canonical_identifiers(pub.semantics)) == render_term(t)
        assert pub.words == ()


def test_parse_results_contain_no_self_referential_terms(scoping_parse):
    for t, _ in scoping_parse.results:
        for s in subterms(t):
            assert sum(1 for u in subterms(s) if u == s) == 1


def test_parse_round_trips_generation(english):
    for src, _ in GENERATION_GOLDENS[:4]:
        res = generate(english, lf(src), LIM)
        ((words, _),) = res.results
        back = parse(english, words, LIM)
        got = {render_term(t) for t, _ in back.results}
        assert render_term(canonical_identifiers(lf(src))) in got


def test_parse_rejects_bad_input(english):
    with pytest.raises(InputError, match="unknown token"):
        parse(english, ["john", "blinked"], LIM)
    with pytest.raises(InputError, match="more tokens"):
        parse(english, ["john"] * 100, SearchLimits(max_expansions=3))


def test_parse_truncates_at_max_results(english):
    res = parse(english, "john saw louise in paris".split(),
                SearchLimits(max_results=1))
    assert len(res.results) == 1
    assert res.truncated


def test_homonymous_tokens_search_every_rule_assignment():
    lex = parse_grammar(
        "phon bank .\nrelator river_bank bank^-1 .\nrelator money_bank bank^-1 .\n")
    res = parse(lex, ["bank"], LIM)
    assert {render_term(t) for t, _ in res.results} == \
        {"river_bank", "money_bank"}


# ---------------------------------------------------------------------------
# public-result recognition


def test_is_public_shapes(english):
    ok = (Atom(lf("s(j,l)")), a("louise", -1), a("saw", -1), a("john", -1))
    pub = is_public(english, ok)
    assert pub == PublicResult(lf("s(j,l)"), ("john", "saw", "louise"))
    assert is_public(english, (Atom(lf("s(A,l)")),)) is None
    assert is_public(english, (Atom(lf("s(j,l)")), a("saw"))) is None
    assert is_public(english, (a("saw", -1), Atom(lf("s(j,l)")))) is None
    assert is_public(english, ()) is None


def test_is_public_generation_shape(english):
    e = (a("john"), a("saw"))
    assert is_public(english, e, start=lf("s(j,l)")) == \
        PublicResult(lf("s(j,l)"), ("john", "saw"))
    assert is_public(english, (a("john", -1),), start=lf("j")) is None


# ---------------------------------------------------------------------------
# derivation serialization and tamper detection


def test_derivation_text_round_trip(english):
    res = generate(english, lf("r(t(tt(m,#x,s(l,#x))))"), LIM)
    for _, d in res.results:
        text = render_derivation(d)
        again = parse_derivation(text, english.phon_vocab)
        assert again == d
        assert render_derivation(again) == text


def test_derivation_record_round_trip(english):
    res = parse(english, "john saw louise".split(), LIM)
    for _, d in res.results:
        blob = json.dumps(derivation_record(d))
        again = derivation_of_record(json.loads(blob), english.phon_vocab)
        assert again == d
        assert replay(english, again) == d.end


def test_replay_rejects_tampered_steps(english):
    res = generate(english, lf("s(j,l)"), LIM)
    ((_, d),) = res.results
    first = d.steps[0]
    bent = ExpandStep(first.level, first.index + 1, first.rule_id,
                      first.binding, first.meta_map, first.ident_map)
    with pytest.raises(StepError, match="step 1"):
        replay(english, Derivation(d.mode, d.start, (bent,) + d.steps[1:], d.end))


def test_replay_rejects_tampered_end(english):
    res = generate(english, lf("s(j,l)"), LIM)
    ((_, d),) = res.results
    with pytest.raises(StepError, match="does not end"):
        replay(english, Derivation(d.mode, d.start, d.steps, (a("saw"),)))


# ---------------------------------------------------------------------------
# commutative mode


def test_commutative_parse_ignores_word_order(english):
    lex = _commutative(english)
    res = parse(lex, "saw john louise".split(), LIM)
    assert {render_term(t) for t, _ in res.results} == {"s(j,l)", "s(l,j)"}


def test_commutative_generation_yields_one_representative(english):
    lex = _commutative(english)
    res = generate(lex, lf("ev(m,#x,sm(w,#y,s(#x,#y)))"), LIM)
    ((words, d),) = res.results
    assert sorted(words) == sorted("every man saw some woman".split())
    replay(lex, d)


def test_commutative_derivations_use_swaps(english):
    lex = _commutative(english)
    res = parse(lex, "saw john louise".split(), LIM)
    kinds = {type(s) for _, d in res.results for s in d.steps}
    assert SwapStep in kinds


def _commutative(english):
    from ggroup.encodings import commutator_scheme

    return Lexicon(english.phon_vocab,
                   english.relators + (commutator_scheme(),))


def test_saturate_guards_its_input(english):
    with pytest.raises(InputError, match="commutative"):
        saturate(english, LIM)
    with pytest.raises(InputError, match="definite-clause"):
        saturate(_commutative(english), LIM)
