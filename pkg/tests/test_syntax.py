"""Parser, desugaring, labeling, printing, and term utilities."""

import pytest
from hypothesis import given, settings, strategies as st

import helpers
from artifact import syntax
from artifact.syntax import (App, Lam, ParseError, Var, bound_vars, free_vars,
                             find_label, is_linear, labels, lams, parse,
                             pretty_print, subterms, validate)


def test_parse_identity():
    e = parse("(\\x. x)")
    assert isinstance(e, Lam) and e.param == "x"
    assert isinstance(e.body, Var) and e.body.name == "x"


def test_application_left_associative():
    e = parse("(\\a.(\\b.(\\c. a b c)))")
    body = e.body.body.body
    assert isinstance(body, App)
    assert isinstance(body.fn, App)
    assert body.fn.fn.name == "a" and body.fn.arg.name == "b"
    assert body.arg.name == "c"


def test_explicit_labels_honored():
    e = parse(helpers.GOLDEN_SOURCE)
    assert e.label == 10
    assert find_label(e, 1).name == "f"
    assert find_label(e, 3).label == 3
    assert {t.label for t in subterms(e)} == set(range(1, 11))


def test_duplicate_labels_rejected():
    with pytest.raises((ParseError, ValueError)):
        parse("((\\x. x^1) (\\y. y^1))")


def test_unannotated_labels_fresh_and_unique():
    e = parse("((\\x. x^5) (\\y. y))")
    seen = [t.label for t in subterms(e)]
    assert len(seen) == len(set(seen))
    assert 5 in seen and all(lbl == 5 or lbl > 5 for lbl in seen)


def test_comments_ignored():
    e = parse(";; leading remark\n(\\x. x) ;; trailing\n")
    assert isinstance(e, Lam)


def test_pair_desugars_to_selector_lambda():
    e = parse("((\\a.a) , (\\b.b))")
    assert isinstance(e, Lam)
    body = e.body
    assert isinstance(body, App) and isinstance(body.fn, App)
    assert isinstance(body.fn.fn, Var) and body.fn.fn.name == e.param
    assert isinstance(body.fn.arg, Lam) and body.fn.arg.param == "a"
    assert isinstance(body.arg, Lam) and body.arg.param == "b"


def test_letp_desugars_to_application():
    e = parse("(\\p. letp u v = p in (u v))")
    inner = e.body
    assert isinstance(inner, App)
    assert isinstance(inner.fn, Var) and inner.fn.name == "p"
    consumer = inner.arg
    assert isinstance(consumer, Lam) and consumer.param == "u"
    assert isinstance(consumer.body, Lam) and consumer.body.param == "v"


def test_comp_desugars_to_composition():
    e = parse("comp((\\a.a) , (\\b.b))")
    assert isinstance(e, Lam)
    body = e.body
    assert isinstance(body, App) and isinstance(body.fn, Lam)
    assert isinstance(body.arg, App) and body.arg.arg.name == e.param


def test_macro_splices_and_unknown_macro_fails():
    e = parse("#TT")
    assert isinstance(e, Lam)
    assert not free_vars(e)
    with pytest.raises((ParseError, KeyError, ValueError)):
        parse("#NO_SUCH_THING")


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as exc:
        parse("(\\x. x")
    assert exc.value.line >= 1 and exc.value.col >= 1


def test_pretty_print_round_trip_golden():
    e = parse(helpers.GOLDEN_SOURCE)
    text = pretty_print(e, with_labels=True)
    assert parse(text) == e
    assert pretty_print(parse(text), with_labels=True) == text


def test_pretty_print_without_labels_reparses_alpha_equal():
    e = parse(helpers.GOLDEN_SOURCE)
    again = parse(pretty_print(e))
    assert pretty_print(again) == pretty_print(e)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_round_trip_random_linear_terms(seed):
    import random
    term = helpers.gen_linear_program(random.Random(seed), max_size=30)
    text = pretty_print(term, with_labels=True)
    assert parse(text) == term


def test_free_and_bound_vars():
    e = parse("(\\x. x y)")
    assert free_vars(e) == {"y"}
    assert bound_vars(e) == {"x"}
    assert free_vars(parse("(\\x.(\\y. x y))")) == set()


def test_is_linear():
    assert is_linear(parse("(\\x. x)"))
    assert is_linear(parse("((\\x. x) (\\y. y))"))
    assert not is_linear(parse("(\\x. x x)"))
    assert not is_linear(parse("(\\x. (\\y. y))"))


def test_subterms_and_lams():
    e = parse(helpers.GOLDEN_SOURCE)
    assert len(list(subterms(e))) == 10
    assert sorted(t.label for t in lams(e)) == [5, 7, 9]
    assert labels(e) == set(range(1, 11))


def test_validate_accepts_golden_rejects_bad():
    validate(parse(helpers.GOLDEN_SOURCE))
    clash = App(Lam("x", Var("x", 1), 2), Lam("x", Var("x", 3), 4), 5)
    with pytest.raises(ValueError):
        validate(clash)
    dup = App(Lam("x", Var("x", 1), 2), Lam("y", Var("y", 1), 3), 4)
    with pytest.raises(ValueError):
        validate(dup)


def test_structural_equality_and_hash():
    a = parse("(\\x. x^1)^2")
    b = parse("(\\x. x^1)^2")
    assert a == b and hash(a) == hash(b)
    assert a != parse("(\\x. x^1)^3")


def test_deep_recursion_parse_and_print():
    n = 30000
    src = "(\\d. " + "(d " * n + "d" + ")" * n + ")"
    e = parse(src)
    assert isinstance(e, Lam)
    # compare printed forms: structural == recurses beyond the main stack
    text = pretty_print(e, with_labels=True)
    assert pretty_print(parse(text), with_labels=True) == text
