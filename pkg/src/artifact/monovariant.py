"""Monovariant flow analyses: 0CFA, simple closure analysis, sub-0CFA.

All three produce a MonoCache mapping labels and variable names to sets
of lambda subterms of the analyzed program.  Simple closure analysis is
run over a union-find structure because its constraints are equalities;
sub-0CFA is 0CFA with a per-key update budget that falls back to a
distinguished Unknown value meaning "all abstractions".
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .interp import Closure, env_domain, env_lookup
from .syntax import deep, App, Expr, Lam, Var, bound_vars, free_vars, lams, subterms


class _Unknown:
    """All abstractions of the program; frozen once assigned."""

    def __repr__(self):
        return "Unknown"


UNKNOWN = _Unknown()


@dataclass
class MonoCache:
    result_cache: dict = field(default_factory=dict)  # label -> set[Lam] | UNKNOWN
    bind_cache: dict = field(default_factory=dict)    # name -> set[Lam] | UNKNOWN

    def result(self, label):
        return self.result_cache.get(label, set())

    def bind(self, name):
        return self.bind_cache.get(name, set())


def expand(entry, e: Expr) -> set:
    """Resolve an entry to a concrete set, expanding Unknown to all lams."""
    if entry is UNKNOWN:
        return set(lams(e))
    return entry


# ---------- 0CFA ----------

@deep
def analyze_0cfa(e: Expr) -> MonoCache:
    """Least cache satisfying the directional (subset) acceptability clauses."""
    if free_vars(e):
        raise ValueError("term must be closed")
    cache = MonoCache()
    changed = [True]

    def add_result(label, vals):
        entry = cache.result_cache.setdefault(label, set())
        new = vals - entry
        if new:
            entry |= new
            changed[0] = True

    def add_bind(name, vals):
        entry = cache.bind_cache.setdefault(name, set())
        new = vals - entry
        if new:
            entry |= new
            changed[0] = True

    def run_pass():
        visited = set()

        def go(t):
            if t.label in visited:
                return
            visited.add(t.label)
            if isinstance(t, Var):
                add_result(t.label, cache.bind(t.name))
            elif isinstance(t, Lam):
                add_result(t.label, {t})
            elif isinstance(t, App):
                go(t.fn)
                go(t.arg)
                for lam in sorted(cache.result(t.fn.label), key=lambda l: l.label):
                    add_bind(lam.param, cache.result(t.arg.label))
                    go(lam.body)
                    add_result(t.label, cache.result(lam.body.label))

        go(e)

    while changed[0]:
        changed[0] = False
        run_pass()
    return cache


# ---------- Simple closure analysis ----------

class FlowClasses:
    """Union-find over labels and variable names with lam-set payloads."""

    def __init__(self):
        self.parent = {}
        self.rank = {}
        self.payload = {}

    def _key(self, key):
        if key not in self.parent:
            self.parent[key] = key
            self.rank[key] = 0
            self.payload[key] = set()
        return key

    def find(self, key):
        self._key(key)
        root = key
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[key] != root:
            self.parent[key], key = root, self.parent[key]
        return root

    def lams(self, key) -> set:
        return self.payload[self.find(key)]

    def add_lam(self, key, lam) -> bool:
        target = self.payload[self.find(key)]
        if lam in target:
            return False
        target.add(lam)
        return True

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.payload[ra] |= self.payload.pop(rb)
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


@deep
def analyze_sca(e: Expr) -> MonoCache:
    """Simple closure analysis: bidirectional 0CFA solved by unification."""
    if free_vars(e):
        raise ValueError("term must be closed")
    classes = FlowClasses()
    changed = [True]

    def note(did_change):
        if did_change:
            changed[0] = True

    def run_pass():
        visited = set()

        def go(t):
            if t.label in visited:
                return
            visited.add(t.label)
            if isinstance(t, Var):
                note(classes.union(("l", t.label), ("v", t.name)))
            elif isinstance(t, Lam):
                note(classes.add_lam(("l", t.label), t))
            elif isinstance(t, App):
                go(t.fn)
                go(t.arg)
                for lam in sorted(classes.lams(("l", t.fn.label)),
                                  key=lambda l: l.label):
                    note(classes.union(("v", lam.param), ("l", t.arg.label)))
                    go(lam.body)
                    note(classes.union(("l", t.label), ("l", lam.body.label)))

        go(e)

    while changed[0]:
        changed[0] = False
        run_pass()

    cache = MonoCache()
    for t in subterms(e):
        flows = classes.lams(("l", t.label))
        if flows:
            cache.result_cache[t.label] = set(flows)
        if isinstance(t, Lam):
            bound = classes.lams(("v", t.param))
            if bound:
                cache.bind_cache[t.param] = set(bound)
    return cache


# ---------- Sub-0CFA ----------

@deep
def analyze_sub0cfa(e: Expr, bound: int) -> MonoCache:
    """0CFA with a per-key budget of `bound` value changes.

    A key that would change for the (bound+1)-th time becomes Unknown and
    is frozen.  Unknown operator sets dispatch every abstraction of the
    program.
    """
    if bound < 1:
        raise ValueError("bound must be at least 1")
    if free_vars(e):
        raise ValueError("term must be closed")
    all_lams = sorted(lams(e), key=lambda l: l.label)
    cache = MonoCache()
    updates: dict = {}
    changed = [True]

    def write(table, key, vals):
        entry = table.get(key, set())
        if entry is UNKNOWN:
            return
        if vals is UNKNOWN:
            table[key] = UNKNOWN
            changed[0] = True
            return
        new = vals - entry
        if not new:
            return
        count = updates.get(key, 0) + 1
        updates[key] = count
        if count > bound:
            table[key] = UNKNOWN
        else:
            table[key] = entry | new
        changed[0] = True

    def dispatchable(entry):
        if entry is UNKNOWN:
            return all_lams
        return sorted(entry, key=lambda l: l.label)

    def run_pass():
        visited = set()

        def go(t):
            if t.label in visited:
                return
            visited.add(t.label)
            if isinstance(t, Var):
                write(cache.result_cache, t.label, cache.bind(t.name))
            elif isinstance(t, Lam):
                write(cache.result_cache, t.label, {t})
            elif isinstance(t, App):
                go(t.fn)
                go(t.arg)
                for lam in dispatchable(cache.result(t.fn.label)):
                    write(cache.bind_cache, lam.param, cache.result(t.arg.label))
                    go(lam.body)
                    write(cache.result_cache, t.label,
                          cache.result(lam.body.label))

        go(e)

    while changed[0]:
        changed[0] = False
        run_pass()
    return cache


# ---------- Acceptability and queries ----------

@deep
def check_mono_acceptable(cache: MonoCache, e: Expr, mode: str = "directional") -> bool:
    """Coinductive clause check; mode is "directional" or "bidirectional"."""
    if mode not in ("directional", "bidirectional"):
        raise ValueError(f"unknown mode {mode!r}")
    bidir = mode == "bidirectional"
    seen = set()

    def result(label):
        return expand(cache.result(label), e)

    def bind(name):
        return expand(cache.bind(name), e)

    def holds(smaller, larger):
        return smaller == larger if bidir else smaller <= larger

    def check(t):
        if t.label in seen:
            return True
        seen.add(t.label)
        if isinstance(t, Var):
            return holds(bind(t.name), result(t.label))
        if isinstance(t, Lam):
            return t in result(t.label)
        if isinstance(t, App):
            if not check(t.fn) or not check(t.arg):
                return False
            for lam in result(t.fn.label):
                if not holds(result(t.arg.label), bind(lam.param)):
                    return False
                if not check(lam.body):
                    return False
                if not holds(result(lam.body.label), result(t.label)):
                    return False
            return True
        raise TypeError(f"not a term: {t!r}")

    return check(e)


def linearly_closes(t: Expr, rho) -> bool:
    """Environment closes a linear term, one binding per free occurrence,
    with pairwise disjoint variable sets down the closure tree."""

    def occurrence_counts(term):
        counts = {}
        for sub in subterms(term):
            if isinstance(sub, Var):
                counts[sub.name] = counts.get(sub.name, 0) + 1
        return counts

    def names_of(term, env):
        used = {sub.name for sub in subterms(term) if isinstance(sub, Var)}
        used |= bound_vars(term)
        for name, clo in env:
            used |= {name} | names_of(clo.lam, clo.env)
        return used

    def go(term, env):
        from .syntax import is_linear
        if not is_linear(term):
            return False
        fv = free_vars(term)
        if env_domain(env) != fv:
            return False
        counts = occurrence_counts(term)
        if any(counts.get(name, 0) != 1 for name in fv):
            return False
        seen_names = set()
        for name, clo in env:
            sub_names = {name} | names_of(clo.lam, clo.env)
            if seen_names & sub_names:
                return False
            seen_names |= sub_names
            if not go(clo.lam, clo.env):
                return False
        return True

    return go(t, rho)


@deep
def check_respects(cache: MonoCache, t: Expr, rho) -> bool:
    """Does the cache have no information about the closure (t, rho),
    beyond recording each environment binding as the exact singleton?"""
    if not linearly_closes(t, rho):
        return False

    def go(term, env):
        for sub in subterms(term):
            if cache.result(sub.label):
                return False
        for name in bound_vars(term):
            if cache.bind(name):
                return False
        for name in env_domain(env):
            clo = env_lookup(env, name)
            if cache.bind(name) != {clo.lam}:
                return False
            if not go(clo.lam, clo.env):
                return False
        return True

    return go(t, rho)


def mono_flow_query(cache: MonoCache, lam_label: int, key) -> bool:
    """Does the abstraction labeled lam_label flow into the label or
    variable `key`?  Unknown entries answer yes to everything."""
    entry = cache.result(key) if isinstance(key, int) else cache.bind(key)
    if entry is UNKNOWN:
        return True
    return any(lam.label == lam_label for lam in entry)
