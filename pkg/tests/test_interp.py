"""Standard and tight evaluators, environments, sizes, divergence."""

import pytest
from hypothesis import given, settings, strategies as st

import helpers
from artifact import interp, syntax
from artifact.interp import (Closure, Diverged, Value, apply_value,
                             env_domain, env_extend, env_lookup, env_of,
                             env_restrict, eval_std, eval_tight, term_size)
from artifact.syntax import parse

OMEGA = "((\\w. w w) (\\w'. w' w'))"


def test_eval_identity_application():
    out = eval_std(parse("((\\x. x) (\\y. y))"))
    assert isinstance(out, Value)
    assert out.value.lam.param == "y"


def test_eval_lambda_is_its_own_value():
    out = eval_std(parse("(\\x. x)"))
    assert isinstance(out.value, Closure)
    assert out.value.env == ()


def test_closure_captures_environment():
    out = eval_std(parse("((\\x. (\\y. x)) (\\z. z))"))
    clo = out.value
    assert clo.lam.param == "y"
    assert env_domain(clo.env) == {"x"}
    assert env_lookup(clo.env, "x").lam.param == "z"


def test_open_term_rejected():
    with pytest.raises(ValueError):
        eval_std(parse("(\\x. x y)"))


def test_fuel_counts_applications():
    redex = parse("((\\x. x) (\\y. y))")
    two = parse("((\\a. a) ((\\x. x) (\\y. y)))")
    assert isinstance(eval_std(redex, (), fuel=1), Value)
    assert isinstance(eval_std(two, (), fuel=2), Value)
    assert isinstance(eval_std(two, (), fuel=1), Diverged)
    with pytest.raises(ValueError):
        eval_std(redex, (), fuel=0)


def test_omega_diverges_with_steps_used():
    out = eval_std(parse(OMEGA), (), fuel=500)
    assert isinstance(out, Diverged)
    assert out.steps_used == 500


def test_tight_evaluator_agrees_on_corpus():
    for program in helpers.linear_corpus(seed=7, count=30):
        std = eval_std(program)
        tight = eval_tight(program)
        assert isinstance(std, Value) and isinstance(tight, Value)
        assert std.value.lam.label == tight.value.lam.label


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_linear_programs_use_each_binding_once(seed):
    import random
    program = helpers.gen_linear_program(random.Random(seed), max_size=30)
    out = eval_std(program, (), fuel=10000)
    if isinstance(out, Value):
        # a closed linear program consumes no more steps than applications
        apps = sum(1 for t in syntax.subterms(program)
                   if isinstance(t, syntax.App))
        assert isinstance(eval_std(program, (), fuel=max(apps, 1)), Value)


def test_apply_value():
    fn = eval_std(parse("(\\x. x)")).value
    arg = eval_std(parse("(\\q. (\\r. q))")).value
    out = apply_value(fn, arg)
    assert isinstance(out, Value) and out.value.lam.param == "q"


def test_env_helpers():
    clo = eval_std(parse("(\\x. x)")).value
    env = env_of({"a": clo})
    env = env_extend(env, "b", clo)
    assert env_domain(env) == {"a", "b"}
    assert env_lookup(env, "a") is env_lookup(env, "b") or \
        env_lookup(env, "a") == env_lookup(env, "b")
    assert env_domain(env_restrict(env, {"b"})) == {"b"}
    with pytest.raises(KeyError):
        env_lookup(env, "missing")


def test_term_size():
    assert term_size(parse("(\\x. x)")) == 2
    assert term_size(parse(helpers.GOLDEN_SOURCE)) == 10


def test_deep_evaluation():
    n = 20000
    src = "(\\u. u)"
    for _ in range(n):
        src = f"((\\x. x) {src})"
    out = eval_std(parse(src))
    assert isinstance(out, Value) and out.value.lam.param == "u"
