"""Instrumented interpreter: exact caches, contours, acceptability."""

import pytest

import helpers
from artifact import instrument, syntax
from artifact.instrument import (CValue, ExactCache, cenv_extend, cenv_lookup,
                                 cenv_of, cenv_restrict, check_exact_acceptable,
                                 exact_query, format_contour,
                                 max_contour_depth, run_instrumented)
from artifact.interp import Diverged, Value, eval_std
from artifact.syntax import App, Lam, parse

# Two nested calls of f = \y.FFF on distinct arguments; the worked example
# whose cache entries are pinned below.
EXACT_SOURCE = "((\\f. (f (f (\\t. t))^1)^2) (\\y. (\\e. e)))^3"


def _exact_parts():
    program = parse(EXACT_SOURCE)
    lam_f = program.fn
    app_outer = lam_f.body
    app_inner = app_outer.arg
    t_lam = app_inner.arg
    lam_y = program.arg
    f_lam = lam_y.body
    return program, lam_f, app_outer, app_inner, t_lam, lam_y, f_lam


def test_worked_example_entries():
    program, _, _, _, t_lam, lam_y, f_lam = _exact_parts()
    cache = run_instrumented(program)
    assert isinstance(cache, ExactCache)
    # the operator closure binds at the top-level contour
    assert cache.bind_cache[("f", (3,))].lam == lam_y
    # inner call (label 1) runs at contour 3, binding y to the argument
    assert cache.bind_cache[("y", (3, 1))].lam == t_lam
    # outer call (label 2) rebinds y to the inner call's result
    assert cache.bind_cache[("y", (3, 2))].lam == f_lam
    # both call results are the constant returned by the operator body
    assert cache.result_cache[(1, (3,))].lam == f_lam
    assert cache.result_cache[(3, ())].lam == f_lam


def test_worked_example_acceptable_and_depth():
    program = _exact_parts()[0]
    cache = run_instrumented(program)
    assert check_exact_acceptable(cache, program)
    assert max_contour_depth(cache) == 2


def test_contour_discipline():
    """Every bind key ends in the label of the application that wrote it."""
    program = _exact_parts()[0]
    cache = run_instrumented(program)
    app_labels = {t.label for t in syntax.subterms(program)
                  if isinstance(t, App)}
    for (_, delta) in cache.bind_cache:
        assert delta and delta[-1] in app_labels


def test_root_result_matches_evaluator():
    for program in helpers.linear_corpus(seed=11, count=25):
        cache = run_instrumented(program)
        out = eval_std(program)
        assert isinstance(out, Value)
        assert cache.result_cache[(program.label, ())].lam.label == \
            out.value.lam.label


def test_acceptability_on_corpus():
    for program in helpers.linear_corpus(seed=13, count=15):
        cache = run_instrumented(program)
        assert check_exact_acceptable(cache, program)


def test_acceptability_rejects_tampering():
    program = _exact_parts()[0]
    cache = run_instrumented(program)
    key = (3, ())
    del cache.result_cache[key]
    assert not check_exact_acceptable(cache, program)


def test_divergence_returns_no_cache():
    omega = parse("((\\w. w w) (\\w'. w' w'))")
    out = run_instrumented(omega, fuel=100)
    assert isinstance(out, Diverged)


def test_write_once_discipline():
    cache = ExactCache()
    lam = parse("(\\x. x)")
    val = CValue(lam, ())
    cache.write_result(1, (), val)
    with pytest.raises(RuntimeError):
        cache.write_result(1, (), val)
    cache.write_bind("x", (1,), val)
    with pytest.raises(RuntimeError):
        cache.write_bind("x", (1,), val)


def test_exact_query():
    program, *_ , f_lam = _exact_parts()
    cache = run_instrumented(program)
    assert exact_query(cache, 3, ()).lam == f_lam
    assert exact_query(cache, 3, (9, 9)) is None


def test_contour_formatting():
    assert format_contour(()) == "<>"
    assert format_contour((3,)) == "3"
    assert format_contour((3, 2, 1)) == "3.2.1"


def test_cenv_operations():
    cenv = cenv_of({"a": (1,)})
    cenv = cenv_extend(cenv, "b", (1, 2))
    assert cenv_lookup(cenv, "a") == (1,)
    assert cenv_lookup(cenv, "b") == (1, 2)
    assert cenv_restrict(cenv, {"b"}) == cenv_of({"b": (1, 2)})
    with pytest.raises(KeyError):
        cenv_lookup(cenv, "zz")


def test_cvalue_interning():
    lam = parse("(\\x. x)")
    assert CValue(lam, ()) is CValue(lam, ())


def test_open_term_rejected():
    with pytest.raises(ValueError):
        run_instrumented(parse("(\\x. x y)"))
