"""Context-sensitive analysis: truncation, acceptability, collapse."""

import pytest

import helpers
from artifact import monovariant
from artifact.instrument import max_contour_depth, run_instrumented
from artifact.kcfa import (AbstractCache, analyze_kcfa, check_kcfa_acceptable,
                           collapse_mono, inject_exact, kcfa_flow_query,
                           kcfa_flow_query_any, truncate_contour)
from artifact.syntax import parse


def test_truncate_contour():
    assert truncate_contour((), 3, 2) == ((3,), False)
    assert truncate_contour((3,), 2, 2) == ((3, 2), False)
    assert truncate_contour((3, 2), 1, 2) == ((2, 1), True)
    assert truncate_contour((3,), 1, 0) == ((), True)


def test_k0_collapse_equals_0cfa():
    for program in [helpers.golden_program()] + \
            helpers.linear_corpus(seed=23, count=15):
        mono = helpers.mono_table(monovariant.analyze_0cfa(program), program)
        collapsed = helpers.mono_table(
            collapse_mono(analyze_kcfa(program, 0)), program)
        assert collapsed == mono


def test_golden_k1_distinguishes_call_sites():
    program = helpers.golden_program()
    cache = analyze_kcfa(program, 1)
    assert cache.truncated
    # the two call sites of the x-lambda bind x under distinct contours
    assert {cv.lam.label for cv in cache.bind("x", (3,))} == {9}
    assert {cv.lam.label for cv in cache.bind("x", (6,))} == {5}
    # so the root is precise, unlike the merged 0CFA answer
    assert {cv.lam.label for cv in cache.result(10, ())} == {5}


def test_acceptability_and_minimality():
    program = helpers.golden_program()
    for k in (0, 1, 2):
        cache = analyze_kcfa(program, k)
        assert check_kcfa_acceptable(cache, program, k)
        for table in (cache.result_cache, cache.bind_cache):
            for key, entry in table.items():
                for cv in list(entry):
                    entry.discard(cv)
                    assert not check_kcfa_acceptable(cache, program, k), \
                        f"deleting {cv} from {key} still acceptable at k={k}"
                    entry.add(cv)


def test_untruncated_run_matches_exact_cache():
    for program in helpers.linear_corpus(seed=29, count=15):
        exact = run_instrumented(program)
        m = max_contour_depth(exact)
        cache = analyze_kcfa(program, m)
        assert not cache.truncated
        as_sets = {key: {val} for key, val in exact.result_cache.items()}
        computed = {key: vals for key, vals in cache.result_cache.items()
                    if vals}
        assert computed == as_sets
        bind_sets = {key: {val} for key, val in exact.bind_cache.items()}
        computed_b = {key: vals for key, vals in cache.bind_cache.items()
                      if vals}
        assert computed_b == bind_sets


def test_inject_exact_is_acceptable():
    program = parse("((\\a. a) (\\b. b))")
    exact = run_instrumented(program)
    k = max_contour_depth(exact)
    view = inject_exact(exact, k)
    assert isinstance(view, AbstractCache)
    assert check_kcfa_acceptable(view, program, k)


def test_flow_queries():
    program = helpers.golden_program()
    cache = analyze_kcfa(program, 1)
    assert kcfa_flow_query_any(cache, 9, 1)
    assert not kcfa_flow_query_any(cache, 5, 1)
    assert kcfa_flow_query(cache, 5, 10, ())
    assert not kcfa_flow_query(cache, 9, 10, ())
    assert not kcfa_flow_query(cache, 5, 10, (99,))


def test_collapse_is_within_0cfa():
    """Contours only refine the context-insensitive answer."""
    for program in [helpers.golden_program()] + \
            helpers.linear_corpus(seed=31, count=10):
        mono = helpers.mono_table(monovariant.analyze_0cfa(program), program)
        for k in (1, 2):
            collapsed = helpers.mono_table(
                collapse_mono(analyze_kcfa(program, k)), program)
            for key, vals in collapsed.items():
                assert vals <= mono.get(key, frozenset())


def test_input_validation():
    with pytest.raises(ValueError):
        analyze_kcfa(parse("(\\x. x)"), -1)
    with pytest.raises(ValueError):
        analyze_kcfa(parse("(\\x. x y)"), 1)


def test_on_pass_hook_monotone():
    program = helpers.golden_program()
    sizes = []

    def on_pass(cache):
        sizes.append(sum(len(v) for v in cache.result_cache.values()))

    analyze_kcfa(program, 1, on_pass=on_pass)
    assert sizes and all(a <= b for a, b in zip(sizes, sizes[1:]))
