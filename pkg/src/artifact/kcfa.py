"""kCFA: the abstract interpreter with contours bounded to length k.

The analysis computes, for every label and contour, the set of abstract
closures that may appear there.  Contours grow on the right at each call
and are truncated to their k most recent labels; a global flag records
whether truncation ever happened, because without truncation the
analysis coincides with the instrumented interpreter.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .instrument import (CValue, EMPTY_CENV, EMPTY_CONTOUR, ExactCache,
                         cenv_extend, cenv_lookup, cenv_restrict)
from .monovariant import MonoCache
from .syntax import deep, App, Expr, Lam, Var, free_vars


def truncate_contour(delta, label, k):
    """Append label, keep the k rightmost entries; report truncation."""
    grown = delta + (label,)
    if len(grown) <= k:
        return grown, False
    return grown[len(grown) - k:], True


@dataclass
class AbstractCache:
    k: int
    result_cache: dict = field(default_factory=dict)  # (label, contour) -> set[CValue]
    bind_cache: dict = field(default_factory=dict)    # (name, contour) -> set[CValue]
    truncated: bool = False

    def result(self, label, delta):
        return self.result_cache.get((label, delta), set())

    def bind(self, name, delta):
        return self.bind_cache.get((name, delta), set())


def _cvalue_key(cv: CValue):
    return (cv.lam.label, cv.cenv)


@deep
def analyze_kcfa(e: Expr, k: int, on_pass=None) -> AbstractCache:
    """Least cache acceptable for e at level k.

    Worklist evaluation over an inclusion-constraint graph: cache keys
    are nodes, the clauses contribute edges, and each abstract value
    crosses each edge once.  Applications watch their operator node;
    every operator closure that shows up wires the operand into the
    closure's binding, wires the body result into the application's
    result, and discovers the body under the grown contour.  The cache
    only grows, so the loop reaches the least fixed point; the on_pass
    hook observes it periodically and at the end, monotonically.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if free_vars(e):
        raise ValueError("term must be closed")
    cache = AbstractCache(k=k)
    rc, bc = cache.result_cache, cache.bind_cache
    fv_memo: dict = {}

    def fv(t):
        got = fv_memo.get(t.label)
        if got is None:
            got = fv_memo[t.label] = frozenset(free_vars(t))
        return got

    # nodes are ("r", (label, delta)) or ("b", (name, delta))
    edges: dict = {}        # node -> set of downstream nodes
    watchers: dict = {}     # operator node -> list of application watchers
    dirty: dict = {}        # node -> values not yet propagated
    work = deque()
    discovered: set = set()
    wired: set = set()

    def table(node):
        return rc if node[0] == "r" else bc

    def push(node, vals):
        entry = table(node).setdefault(node[1], set())
        new = vals - entry
        if new:
            entry |= new
            got = dirty.get(node)
            if got is None:
                dirty[node] = set(new)
                work.append(node)
            else:
                got |= new

    def add_edge(src, dst):
        outs = edges.setdefault(src, set())
        if dst not in outs:
            outs.add(dst)
            cur = table(src).get(src[1])
            if cur:
                push(dst, cur)

    def handle_operator(watcher, cv):
        app_label, delta, inner, cut, arg_node, done = watcher
        if cv in done:
            return
        done.add(cv)
        if cut:
            cache.truncated = True
        add_edge(arg_node, ("b", (cv.lam.param, inner)))
        add_edge(("r", (cv.lam.body.label, inner)), ("r", (app_label, delta)))
        visit(cv.lam.body, cenv_extend(cv.cenv, cv.lam.param, inner), inner)

    def visit(t0, cenv0, delta0):
        stack = [(t0, cenv0, delta0)]
        while stack:
            t, cenv, delta = stack.pop()
            triple = (t.label, cenv, delta)
            if triple in discovered:
                continue
            discovered.add(triple)
            if isinstance(t, Var):
                add_edge(("b", (t.name, cenv_lookup(cenv, t.name))),
                         ("r", (t.label, delta)))
            elif isinstance(t, Lam):
                push(("r", (t.label, delta)),
                     {CValue(t, cenv_restrict(cenv, fv(t)))})
            elif isinstance(t, App):
                stack.append((t.fn, cenv, delta))
                stack.append((t.arg, cenv, delta))
                site = (t.label, delta)
                if site not in wired:
                    wired.add(site)
                    inner, cut = truncate_contour(delta, t.label, k)
                    fn_node = ("r", (t.fn.label, delta))
                    watcher = (t.label, delta, inner, cut,
                               ("r", (t.arg.label, delta)), set())
                    watchers.setdefault(fn_node, []).append(watcher)
                    for cv in list(rc.get(fn_node[1], ())):
                        handle_operator(watcher, cv)
            else:
                raise TypeError(f"not a term: {t!r}")

    visit(e, EMPTY_CENV, EMPTY_CONTOUR)
    processed = 0
    while work:
        node = work.popleft()
        new = dirty.pop(node, None)
        if not new:
            continue
        for dst in list(edges.get(node, ())):
            push(dst, new)
        if node[0] == "r":
            for watcher in list(watchers.get(node, ())):
                for cv in new:
                    handle_operator(watcher, cv)
        processed += 1
        if on_pass is not None and processed % 2000 == 0:
            on_pass(cache)
    if on_pass is not None:
        on_pass(cache)
    return cache


@deep
def check_kcfa_acceptable(cache: AbstractCache, e: Expr, k: int) -> bool:
    """Coinductive check of the subset-style acceptability clauses."""
    seen = set()

    def check(t, cenv, delta):
        key = (t.label, cenv, delta)
        if key in seen:
            return True
        seen.add(key)
        if isinstance(t, Var):
            try:
                bound = cache.bind(t.name, cenv_lookup(cenv, t.name))
            except KeyError:
                return False
            return bound <= cache.result(t.label, delta)
        if isinstance(t, Lam):
            return CValue(t, cenv_restrict(cenv, free_vars(t))) in \
                cache.result(t.label, delta)
        if isinstance(t, App):
            if not check(t.fn, cenv, delta) or not check(t.arg, cenv, delta):
                return False
            inner, _ = truncate_contour(delta, t.label, k)
            for cv in cache.result(t.fn.label, delta):
                if not cache.result(t.arg.label, delta) <= \
                        cache.bind(cv.lam.param, inner):
                    return False
                body_cenv = cenv_extend(cv.cenv, cv.lam.param, inner)
                if not check(cv.lam.body, body_cenv, inner):
                    return False
                if not cache.result(cv.lam.body.label, inner) <= \
                        cache.result(t.label, delta):
                    return False
            return True
        raise TypeError(f"not a term: {t!r}")

    return check(e, EMPTY_CENV, EMPTY_CONTOUR)


def kcfa_flow_query(cache: AbstractCache, lam_label: int, label: int,
                    delta) -> bool:
    """Does the abstraction labeled lam_label reach (label, delta)?"""
    return any(cv.lam.label == lam_label for cv in cache.result(label, delta))


def kcfa_flow_query_any(cache: AbstractCache, lam_label: int, label: int) -> bool:
    """Same query, collapsed over all contours at the label."""
    return any(cv.lam.label == lam_label
               for (lbl, _), vals in cache.result_cache.items() if lbl == label
               for cv in vals)


def collapse_mono(cache: AbstractCache) -> MonoCache:
    """Union over contours, drop environments, key by label and name."""
    mono = MonoCache()
    for (label, _), vals in cache.result_cache.items():
        if vals:
            mono.result_cache.setdefault(label, set()).update(
                cv.lam for cv in vals)
    for (name, _), vals in cache.bind_cache.items():
        if vals:
            mono.bind_cache.setdefault(name, set()).update(
                cv.lam for cv in vals)
    return mono


def inject_exact(exact: ExactCache, k: int) -> AbstractCache:
    """View an exact cache as an abstract cache of singletons."""
    cache = AbstractCache(k=k)
    for key, val in exact.result_cache.items():
        cache.result_cache[key] = {val}
    for key, val in exact.bind_cache.items():
        cache.bind_cache[key] = {val}
    return cache
