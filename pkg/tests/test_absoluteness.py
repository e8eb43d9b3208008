from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfsets import is_transitive, parse_set, v_stage
from hfsets.absoluteness import (
    AbsolutenessPreconditionError,
    check_absolute,
    find_nonabsolute,
    fuzz_absoluteness,
    random_transitive_subset,
)
from hfsets.evaluation import Environment, Universe, evaluate
from hfsets.logic import is_bounded, parse, to_text

from test_eval import oracle
from conftest import as_frozen


def codes(excinfo) -> list[str]:
    return [v.code for v in excinfo.value.violations]


def test_bounded_formula_agrees():
    verdict = check_absolute(
        parse("forall x in $a . x = x"),
        Environment(params={"a": parse_set("{{}}")}),
        Universe(v_stage(2)),
        Universe(v_stage(4)),
    )
    assert verdict.inner_value and verdict.outer_value and verdict.agree


def test_env_escaping_the_inner_carrier():
    with pytest.raises(AbsolutenessPreconditionError) as exc:
        check_absolute(
            parse("x = x"), Environment({"x": parse_set("{{{}}}")}), Universe(v_stage(2)), Universe(v_stage(4))
        )
    assert codes(exc) == ["E_PARAM_ESCAPE"]


@pytest.mark.parametrize(
    "formula, env, inner, outer_stage, outer_pred, expected",
    [
        ("exists x . true", {}, "{{}}", 3, None, "E_UNBOUNDED"),
        ("true", {}, "{{{}}}", 3, None, "E_NOT_TRANSITIVE"),
        ("true", {}, "{{},{{}}}", 1, None, "E_NOT_SUBUNIVERSE"),
        ("x = x", {}, "{{}}", 3, None, "E_UNBOUND"),
        ("{{{}}} = {}", {}, "{{}}", 3, None, "E_PARAM_ESCAPE"),
        ("true", {}, "{{}}", 3, "{{}}", "E_PRED_MISMATCH"),
    ],
)
def test_each_violation_is_reported(formula, env, inner, outer_stage, outer_pred, expected):
    outer = Universe(v_stage(outer_stage), parse_set(outer_pred) if outer_pred else None)
    with pytest.raises(AbsolutenessPreconditionError) as exc:
        check_absolute(parse(formula), Environment(env), Universe(parse_set(inner)), outer)
    assert codes(exc) == [expected]


def test_all_violations_are_listed_together():
    with pytest.raises(AbsolutenessPreconditionError) as exc:
        check_absolute(
            parse("exists y . x = $a"),
            Environment(),
            Universe(parse_set("{{{{}}}}")),
            Universe(v_stage(2)),
        )
    assert codes(exc) == ["E_UNBOUNDED", "E_NOT_TRANSITIVE", "E_NOT_SUBUNIVERSE", "E_UNBOUND", "E_UNBOUND"]


def test_fuzz_has_no_disagreements_and_is_deterministic():
    first = fuzz_absoluteness(0, 1000)
    assert first.trials == 1000 and first.agreements == 1000 and first.ok
    assert first.summary() == "1000/1000 agree"
    again = fuzz_absoluteness(0, 1000)
    assert again.to_dict() == first.to_dict()


def test_fuzz_worker_count_does_not_change_the_report():
    serial = fuzz_absoluteness(5, 300, verbose=True)
    parallel = fuzz_absoluteness(5, 300, workers=2, verbose=True)
    assert serial.to_text(verbose=True) == parallel.to_text(verbose=True)


def test_fuzz_rejects_bad_caps():
    with pytest.raises(ValueError):
        fuzz_absoluteness(0, 10, max_stage=5)
    with pytest.raises(ValueError):
        fuzz_absoluteness(0, 10, max_depth=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_random_transitive_subsets(seed, n):
    s = random_transitive_subset(random.Random(seed), v_stage(n))
    assert is_transitive(s) and len(s) >= 1
    assert set(s.children) <= set(v_stage(n).children)


def test_pinned_nonabsolute_witness_v1_v2():
    w = find_nonabsolute(Universe(v_stage(1)), Universe(v_stage(2)))
    assert to_text(w.formula) == "forall y . forall x in y . x in x"
    assert (w.inner_value, w.outer_value) == (True, False)
    assert not is_bounded(w.formula)
    for n, value in ((1, True), (2, False)):
        assert oracle(w.formula, as_frozen(v_stage(n)), frozenset(), {}, {}) is value


def test_textbook_unbounded_example_also_differs():
    f = parse("exists x . exists y in x . true")
    assert not evaluate(f, None, Universe(v_stage(1)))
    assert evaluate(f, None, Universe(v_stage(2)))


def test_nonabsolute_v2_v3_and_identical_universes():
    w = find_nonabsolute(Universe(v_stage(2)), Universe(v_stage(3)), depth_budget=4)
    assert w is not None and w.inner_value != w.outer_value and not is_bounded(w.formula)
    assert find_nonabsolute(Universe(v_stage(2)), Universe(v_stage(2)), depth_budget=3) is None


def test_nonabsolute_needs_transitive_nested_carriers():
    with pytest.raises(ValueError):
        find_nonabsolute(Universe(parse_set("{{{}}}")), Universe(v_stage(3)))
    with pytest.raises(ValueError):
        find_nonabsolute(Universe(v_stage(3)), Universe(v_stage(2)))
