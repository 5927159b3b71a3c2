"""Shared test utilities: golden programs, random linear term generation,
Boolean shape inspection, and the small-netlist enumeration."""

from __future__ import annotations

import itertools
import random

from artifact import instrument, interp, monovariant, syntax
from artifact.encodings import CircuitSpec, Gate
from artifact.syntax import App, Lam, Var

# The running example used by the monovariant golden tables: labels are
# explicit so cache keys can be asserted directly.
GOLDEN_SOURCE = "((\\f.((f^1 f^2)^3 (\\y.y^4)^5)^6)^7 (\\x.x^8)^9)^10"

# lam labels of the three abstractions in GOLDEN_SOURCE
LAM_F, LAM_Y, LAM_X = 7, 5, 9


def golden_program():
    return syntax.parse(GOLDEN_SOURCE)


def mono_table(cache, program):
    """Normalize a MonoCache to {key: frozenset of lam labels}, keys being
    int labels and variable names, empty entries dropped."""
    table = {}
    for label, entry in cache.result_cache.items():
        vals = monovariant.expand(entry, program)
        if vals:
            table[label] = frozenset(lam.label for lam in vals)
    for name, entry in cache.bind_cache.items():
        vals = monovariant.expand(entry, program)
        if vals:
            table[name] = frozenset(lam.label for lam in vals)
    return table


# ---------- Random closed linear programs ----------

def gen_linear_program(rng: random.Random, max_size: int = 40):
    """A closed term where every bound variable occurs exactly once.

    Built top-down: each call produces a term whose free variables are
    exactly the given ones, each used once.  Sizes are approximate; the
    result is validated and measured by the caller.
    """
    counter = itertools.count(1)

    def fresh():
        return f"v{next(counter)}"

    def build(free, budget):
        # must consume every name in free exactly once
        if len(free) == 1 and (budget <= 1 or rng.random() < 0.1):
            return Var(free[0], 0)
        choices = []
        if budget >= 2:
            choices.append("lam")
        if budget >= 3 and (len(free) >= 2 or rng.random() < 0.7):
            choices.append("app")
        if not choices:
            if len(free) == 1:
                return Var(free[0], 0)
            choices = ["app"] if len(free) >= 2 else ["lam"]
        kind = rng.choice(choices)
        if kind == "lam":
            name = fresh()
            body = build(free + [name], budget - 1)
            return Lam(name, body, 0)
        split = rng.randint(0, len(free))
        shuffled = list(free)
        rng.shuffle(shuffled)
        left, right = shuffled[:split], shuffled[split:]
        if not left and rng.random() < 0.5:
            left, right = right, left
        lb = rng.randint(1, max(1, budget - 2))
        fn = build(left, lb if left or lb > 1 else 2)
        arg = build(right, budget - 1 - lb)
        return App(fn, arg, 0)

    term = build([], rng.randint(6, max_size))
    return relabel(term)


def relabel(term):
    """Assign fresh consecutive labels (the generator leaves zeros)."""
    counter = itertools.count(1)

    def go(t):
        if isinstance(t, Var):
            return Var(t.name, next(counter))
        if isinstance(t, Lam):
            body = go(t.body)
            return Lam(t.param, body, next(counter))
        fn = go(t.fn)
        arg = go(t.arg)
        return App(fn, arg, next(counter))

    return go(term)


def linear_corpus(seed: int, count: int, max_size: int = 40,
                  fuel: int = 10000):
    """Deterministic list of `count` normalizing closed linear programs."""
    rng = random.Random(seed)
    found = []
    while len(found) < count:
        program = gen_linear_program(rng, max_size)
        if interp.term_size(program) > max_size:
            continue
        if not syntax.is_linear(program) or syntax.free_vars(program):
            continue
        try:
            syntax.validate(program)
        except ValueError:
            continue
        if isinstance(interp.eval_std(program, (), fuel), interp.Diverged):
            continue
        found.append(program)
    return found


# ---------- Boolean shape inspection ----------

def transformer_kind(lam):
    """Classify a pair-transformer abstraction: "id" passes the pair's
    components through in order, "swap" exchanges them."""
    if not isinstance(lam, Lam):
        return None
    body = lam.body
    # (\p. (p (\x.(\y. <pair of x,y>))))
    if not (isinstance(body, App) and isinstance(body.fn, Var)
            and body.fn.name == lam.param and isinstance(body.arg, Lam)):
        return None
    outer = body.arg
    if not isinstance(outer.body, Lam):
        return None
    inner = outer.body
    pair = inner.body
    # (\sel. ((sel a) b))
    if not (isinstance(pair, Lam) and isinstance(pair.body, App)
            and isinstance(pair.body.fn, App)):
        return None
    first = pair.body.fn.arg
    if not isinstance(first, Var):
        return None
    if first.name == outer.param:
        return "id"
    if first.name == inner.param:
        return "swap"
    return None


def pair_components(lam):
    """For a pair abstraction (\\sel.((sel a) b)) return (a, b); the
    components may be variables or inline abstractions."""
    if not (isinstance(lam, Lam) and isinstance(lam.body, App)
            and isinstance(lam.body.fn, App)
            and isinstance(lam.body.fn.fn, Var)
            and lam.body.fn.fn.name == lam.param):
        return None
    return lam.body.fn.arg, lam.body.arg


def closure_boolean_shape(clo):
    """Decode a concrete Boolean closure structurally: True iff its first
    component is an identity transformer."""
    comps = pair_components(clo.lam)
    assert comps is not None, "value is not a pair closure"
    first = comps[0]
    if isinstance(first, Var):
        first = interp.env_lookup(clo.env, first.name).lam
    kind = transformer_kind(first)
    assert kind is not None, "first component is not a transformer"
    return kind == "id"


def abstract_boolean_shapes(cache, values):
    """The set of Boolean shapes (subset of {True, False}) reachable from
    abstract pair values, resolving variable components through the cache."""
    shapes = set()
    for cv in values:
        comps = pair_components(cv.lam)
        if comps is None:
            continue
        first = comps[0]
        if isinstance(first, Lam):
            candidates = [first]
        elif isinstance(first, Var):
            try:
                contour = instrument.cenv_lookup(cv.cenv, first.name)
            except KeyError:
                continue
            candidates = [comp.lam for comp in cache.bind(first.name, contour)]
        else:
            continue
        for lam in candidates:
            kind = transformer_kind(lam)
            if kind == "id":
                shapes.add(True)
            elif kind == "swap":
                shapes.add(False)
    return shapes


# ---------- Small netlist enumeration (gate trees) ----------

TREE_KINDS = ("NOT", "AND", "OR", "IMPLIES")


def _trees(n_gates, names):
    if n_gates == 0:
        return list(names)
    out = []
    for child in _trees(n_gates - 1, names):
        out.append(("NOT", child))
    for kind in ("AND", "OR", "IMPLIES"):
        for left_n in range(n_gates):
            right_n = n_gates - 1 - left_n
            for left in _trees(left_n, names):
                for right in _trees(right_n, names):
                    if kind != "IMPLIES" and repr(left) > repr(right):
                        continue
                    out.append((kind, left, right))
    return out


def _tree_leaves(tree):
    if isinstance(tree, str):
        return [tree]
    return [leaf for child in tree[1:] for leaf in _tree_leaves(child)]


def _tree_canon(tree, names):
    def rename(t, mapping):
        if isinstance(t, str):
            return mapping[t]
        return (t[0],) + tuple(rename(c, mapping) for c in t[1:])

    def norm(t):
        if isinstance(t, str):
            return t
        kids = tuple(norm(c) for c in t[1:])
        if t[0] in ("AND", "OR") and repr(kids[0]) > repr(kids[1]):
            kids = (kids[1], kids[0])
        return (t[0],) + kids

    return min(repr(norm(rename(tree, dict(zip(names, perm)))))
               for perm in itertools.permutations(names))


def tree_to_circuit(tree, names) -> CircuitSpec:
    gates = []
    counter = itertools.count(1)

    def emit(t):
        if isinstance(t, str):
            return t
        wires = tuple(emit(c) for c in t[1:])
        out = f"g{next(counter)}"
        gates.append(Gate((out,), t[0], wires))
        return out

    output = emit(tree)
    return CircuitSpec(tuple(names), tuple(gates), output)


def enumerate_tree_netlists(max_gates: int, max_inputs: int):
    """Canonical gate trees: commutative children sorted, all inputs used,
    deduplicated under input permutation.  Repeated leaves are allowed;
    the linearizer supplies the COPY gates they require."""
    result = []
    for n_in in range(1, max_inputs + 1):
        names = tuple(f"x{i}" for i in range(1, n_in + 1))
        seen = set()
        for n_g in range(1, max_gates + 1):
            for tree in _trees(n_g, names):
                if set(_tree_leaves(tree)) != set(names):
                    continue
                key = (_tree_canon(tree, names), n_g)
                if key in seen:
                    continue
                seen.add(key)
                result.append(tree_to_circuit(tree, names))
    return result
