from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfsets import CapacityError, kuratowski_pair, make_set, numeral, transitive_closure, v_stage
from hfsets.evaluation import Environment, Universe, evaluate
from hfsets.logic import EnumerationBudgetError, ParseError, is_bounded, parameters
from hfsets.metatheory import (
    Complete,
    Counterexample,
    FinStructure,
    Inconsistent,
    SignatureError,
    StructureFormatError,
    Theory,
    check_complete_upto,
    decode_structure,
    encode_structure,
    enumerate_fo_sentences,
    enumerate_models,
    fo_depth,
    fo_evaluate,
    fo_to_text,
    format_structure,
    format_theory,
    parse_fo,
    parse_signature,
    parse_structure,
    parse_theory,
    sat_to_bounded,
    translation_universe,
)

from conftest import as_frozen

BINARY = (("R", 2),)
MIXED = (("R", 2), ("S", 1))
TERNARY = (("T", 3),)


def random_structure(rng: random.Random, signature, max_size: int = 3) -> FinStructure:
    size = rng.randint(1, max_size)
    rels = {
        name: [t for t in itertools.product(range(size), repeat=arity) if rng.random() < 0.4]
        for name, arity in signature
    }
    return FinStructure.build(size, signature, rels)


def via_sets(phi, m: FinStructure) -> bool:
    enc = encode_structure(m)
    return evaluate(sat_to_bounded(phi, m.signature), Environment(params={"M": enc}), translation_universe(enc))


def brute_iso_classes(signature, size: int) -> int:
    """Count isomorphism classes by canonicalizing every labelled structure."""
    space = [(j, t) for j, (_, ar) in enumerate(signature) for t in itertools.product(range(size), repeat=ar)]
    seen = set()
    for bits in itertools.product((0, 1), repeat=len(space)):
        present = {key for key, b in zip(space, bits) if b}
        canon = min(
            tuple(sorted((j, tuple(p[x] for x in t)) for j, t in present))
            for p in itertools.permutations(range(size))
        )
        seen.add(canon)
    return len(seen)


# -- encoding ---------------------------------------------------------------

def test_encode_one_point_empty_signature():
    enc = encode_structure(FinStructure(1))
    assert enc is kuratowski_pair(make_set([numeral(0)]), make_set([]))
    empty = frozenset()
    domain = frozenset({empty})
    assert as_frozen(enc) == frozenset({frozenset({domain}), frozenset({domain, empty})})


def test_encode_two_chain():
    m = FinStructure.build(2, BINARY, {"R": [(0, 1)]})
    zero, one = numeral(0), numeral(1)
    rel = make_set([kuratowski_pair(zero, one)])
    expected = kuratowski_pair(make_set([zero, one]), make_set([kuratowski_pair(zero, rel)]))
    assert encode_structure(m) is expected


def test_ternary_tuples_nest_to_the_right():
    m = FinStructure.build(3, TERNARY, {"T": [(2, 0, 1)]})
    t = kuratowski_pair(numeral(2), kuratowski_pair(numeral(0), numeral(1)))
    _, interp = decode_helper(encode_structure(m))
    assert interp is make_set([kuratowski_pair(numeral(0), make_set([t]))])


def decode_helper(enc):
    small, big = sorted(enc.children, key=len)
    d = small.children[0]
    (i,) = [x for x in big.children if x is not d]
    return d, i


def test_round_trip_every_small_structure():
    for signature in (BINARY, (("R", 2), ("Q", 2))):
        for size in (1, 2, 3):
            space = [(name, t) for name, _ in signature for t in itertools.product(range(size), repeat=2)]
            rng = random.Random(size)
            masks = range(1 << len(space)) if len(space) <= 9 else rng.sample(range(1 << len(space)), 600)
            for mask in masks:
                rels: dict[str, list] = {}
                for b, (name, t) in enumerate(space):
                    if mask >> b & 1:
                        rels.setdefault(name, []).append(t)
                m = FinStructure.build(size, signature, rels)
                assert decode_structure(encode_structure(m), signature) == m


def test_encoding_caps():
    with pytest.raises(CapacityError):
        encode_structure(FinStructure(5))
    with pytest.raises(SignatureError):
        decode_structure(encode_structure(FinStructure(2, BINARY, (frozenset(),))), ())
    with pytest.raises(ValueError):
        FinStructure(0)
    with pytest.raises(ValueError):
        FinStructure.build(2, BINARY, {"R": [(0, 2)]})


# -- translation ------------------------------------------------------------

def test_translation_examples():
    chain = FinStructure.build(2, BINARY, {"R": [(0, 1)]})
    phi = parse_fo("exists v . forall w . R(v,w) | v = w", BINARY)
    assert fo_evaluate(phi, chain) and via_sets(phi, chain)
    nonempty = parse_fo("exists v . v = v")
    for size in (1, 2, 3):
        assert via_sets(nonempty, FinStructure(size))


def test_translation_is_bounded_with_one_parameter():
    for phi in enumerate_fo_sentences(MIXED, 2):
        sigma = sat_to_bounded(phi, MIXED)
        assert is_bounded(sigma)
        assert parameters(sigma) <= {"M"}


def test_translation_soundness_on_random_structures():
    rng = random.Random(21)
    sentences = {sig: list(enumerate_fo_sentences(sig, 2)) for sig in (BINARY, MIXED, TERNARY)}
    for _ in range(120):
        sig = rng.choice(list(sentences))
        m = random_structure(rng, sig, 2 if sig is TERNARY else 3)
        for phi in rng.sample(sentences[sig], min(25, len(sentences[sig]))):
            assert via_sets(phi, m) == fo_evaluate(phi, m), (fo_to_text(phi), format_structure(m))


def test_translation_value_survives_larger_universes():
    rng = random.Random(22)
    sentences = list(enumerate_fo_sentences(BINARY, 2))
    for _ in range(30):
        m = random_structure(rng, BINARY)
        enc = encode_structure(m)
        small = translation_universe(enc)
        extras = rng.sample(v_stage(4).children, 3)
        big = Universe(transitive_closure(make_set([enc, *extras])))
        env = Environment(params={"M": enc})
        for phi in rng.sample(sentences, 10):
            sigma = sat_to_bounded(phi, BINARY)
            assert evaluate(sigma, env, small) == evaluate(sigma, env, big)


def test_translation_rejects_signature_mismatch():
    with pytest.raises(SignatureError):
        sat_to_bounded(parse_fo("exists x . S(x)"), BINARY)
    with pytest.raises(SignatureError):
        parse_fo("exists x . R(x)", BINARY)


# -- models and sentences ---------------------------------------------------

def test_model_counts_match_unlabelled_digraphs_with_loops():
    # Unlabelled loop-digraphs: 2, 10, 104 classes on 1, 2, 3 points.
    assert [len(enumerate_models(BINARY, n)) for n in (1, 2, 3)] == [2, 10, 104]
    assert len(enumerate_models(MIXED, 2)) == brute_iso_classes(MIXED, 2)
    assert len(enumerate_models((("S", 1),), 3)) == brute_iso_classes((("S", 1),), 3) == 4


def test_enumerated_models_are_pairwise_non_isomorphic():
    models = enumerate_models(BINARY, 3)
    assert len(set(models)) == len(models)
    rng = random.Random(23)
    for a, b in (rng.sample(models, 2) for _ in range(100)):
        assert not a.is_isomorphic(b)


def test_sentence_enumeration():
    sentences = list(enumerate_fo_sentences(BINARY, 2))
    assert len(sentences) == 12
    assert all(fo_depth(s) <= 2 for s in sentences)
    assert len(list(enumerate_fo_sentences(BINARY, 1))) == 2
    with pytest.raises(EnumerationBudgetError):
        next(enumerate_fo_sentences(BINARY, 5))


# -- completeness -----------------------------------------------------------

def test_exactly_one_element_is_complete():
    t = parse_theory("sig\nexists x . forall y . y = x\n")
    verdict = check_complete_upto(t, 4, 4)
    assert isinstance(verdict, Complete)
    assert [m.size for m in verdict.models] == [1]
    assert "complete up to domain size 4 and depth 4" in verdict.describe()


def test_empty_theory_has_a_counterexample():
    verdict = check_complete_upto(Theory(()), 3, 3)
    assert isinstance(verdict, Counterexample)
    assert fo_evaluate(verdict.sentence, verdict.model_true)
    assert not fo_evaluate(verdict.sentence, verdict.model_false)
    assert {verdict.model_true.size, verdict.model_false.size} == {1, 2}


def test_false_is_inconsistent():
    assert isinstance(check_complete_upto(parse_theory("false"), 3, 2), Inconsistent)


def test_counterexamples_survive_relabelling():
    rng = random.Random(24)
    pool = list(enumerate_fo_sentences(BINARY, 2))
    for _ in range(15):
        t = Theory(BINARY, tuple(rng.sample(pool, rng.randint(0, 2))))
        verdict = check_complete_upto(t, 3, 2)
        if not isinstance(verdict, Counterexample):
            continue
        for model, value in ((verdict.model_true, True), (verdict.model_false, False)):
            for perm in itertools.permutations(range(model.size)):
                moved = model.permute(perm)
                assert t.holds_in(moved)
                assert fo_evaluate(verdict.sentence, moved) is value


def test_complete_verdicts_hold_against_direct_search():
    rng = random.Random(25)
    pool = list(enumerate_fo_sentences(BINARY, 2))
    shallow = list(enumerate_fo_sentences(BINARY, 2, ("x", "y", "z")))
    seen_complete = 0
    for _ in range(25):
        t = Theory(BINARY, tuple(rng.sample(pool, rng.randint(1, 4))))
        verdict = check_complete_upto(t, 2, 2)
        if isinstance(verdict, Complete):
            seen_complete += 1
            for phi in shallow:
                assert len({fo_evaluate(phi, m) for m in verdict.models}) == 1
        elif isinstance(verdict, Inconsistent):
            assert not any(t.holds_in(m) for n in (1, 2) for m in enumerate_models(BINARY, n))
    assert seen_complete > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_incompleteness_is_monotone_in_the_caps(seed):
    rng = random.Random(seed)
    pool = list(enumerate_fo_sentences(BINARY, 2))
    t = Theory(BINARY, tuple(rng.sample(pool, rng.randint(0, 3))))
    if isinstance(check_complete_upto(t, 2, 2), Counterexample):
        assert isinstance(check_complete_upto(t, 3, 3), Counterexample)


def test_cap_errors():
    with pytest.raises(CapacityError):
        check_complete_upto(Theory(()), 5, 2)
    with pytest.raises(CapacityError):
        check_complete_upto(Theory(()), 2, 5)


# -- text formats -------------------------------------------------------------

def test_fo_parse_and_print_round_trip():
    for phi in enumerate_fo_sentences(MIXED, 2, ("x", "y", "z")):
        assert parse_fo(fo_to_text(phi), MIXED) == phi


@pytest.mark.parametrize(
    "text, column",
    [
        ("exists x in y . R(x,x)", 10),
        ("exists x . $a = x", 12),
        ("exists x . A(x)", 12),
        ("forall x . R(x,", 16),
        ("x = {}", 5),
    ],
)
def test_fo_parse_errors_are_positioned(text, column):
    with pytest.raises(ParseError) as exc:
        parse_fo(text)
    assert exc.value.line == 1 and exc.value.column == column


def test_signature_format():
    assert parse_signature("R/2 S/1") == MIXED
    for bad in ("R", "R/0", "R/2 R/1", "forall/1", "1R/2"):
        with pytest.raises(SignatureError):
            parse_signature(bad)


def test_structure_file_round_trip_and_errors():
    rng = random.Random(26)
    for _ in range(50):
        m = random_structure(rng, MIXED)
        assert parse_structure(format_structure(m)) == m
    assert parse_structure("# chain\nsig R/2\nsize 2\nR 0 1  # edge\n") == FinStructure.build(2, BINARY, {"R": [(0, 1)]})
    cases = [
        ("sig R/2\nsize 2\nR 0 2\n", 3),
        ("sig R/2\nsize 2\nS 0\n", 3),
        ("sig R/2\nsize 2\nR 0\n", 3),
        ("R 0 1\n", 1),
        ("sig R/2\nsig R/2\n", 2),
        ("sig R/x\n", 1),
        ("sig R/2\n", 1),
    ]
    for text, line in cases:
        with pytest.raises(StructureFormatError) as exc:
            parse_structure(text)
        assert exc.value.line == line, text


def test_theory_file_round_trip_and_errors():
    text = "# orders\nsig R/2\nforall x . !R(x,x)\nforall x . forall y . R(x,y) -> !R(y,x)\n"
    t = parse_theory(text)
    assert t.signature == BINARY and len(t.sentences) == 2
    assert parse_theory(format_theory(t)) == t
    with pytest.raises(ParseError) as exc:
        parse_theory("sig R/2\ntrue\nforall x . R(x\n")
    assert exc.value.line == 3
    with pytest.raises(StructureFormatError):
        parse_theory("sig R/2\nR(x,x)\n")
    with pytest.raises(StructureFormatError):
        parse_theory("sig R/2\nexists x . S(x)\n")


def test_fo_evaluate_matches_a_set_comprehension_oracle():
    rng = random.Random(27)
    for _ in range(40):
        m = random_structure(rng, BINARY)
        r = m.relation("R")
        dom = range(m.size)
        assert fo_evaluate(parse_fo("forall x . exists y . R(x,y)"), m) == all(any((x, y) in r for y in dom) for x in dom)
        assert fo_evaluate(parse_fo("exists x . forall y . R(y,x) -> x = y"), m) == any(
            all((y, x) not in r or x == y for y in dom) for x in dom
        )
