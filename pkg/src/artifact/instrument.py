"""Instrumented interpreter: concrete evaluation that records every flow.

Each run threads two write-once tables.  The result cache maps a label
and the contour it was evaluated under to the value produced there; the
bind cache does the same for variable bindings.  Contours are strings of
application labels, grown on the right as calls nest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .interp import Diverged
from .syntax import deep, App, Expr, Lam, Var, free_vars

# A contour is a tuple of application labels, oldest first.
Contour = tuple
EMPTY_CONTOUR: Contour = ()

# A contour environment is a canonical tuple of (name, contour) pairs.
CEnv = tuple
EMPTY_CENV: CEnv = ()


_cenv_pool: dict = {}
_extend_memo: dict = {}


def _pooled(cenv: CEnv) -> CEnv:
    return _cenv_pool.setdefault(cenv, cenv)


def cenv_of(mapping) -> CEnv:
    return _pooled(tuple(sorted(mapping.items())))


def cenv_lookup(cenv: CEnv, name: str) -> Contour:
    for key, val in cenv:
        if key == name:
            return val
    raise KeyError(name)


def cenv_extend(cenv: CEnv, name: str, contour: Contour) -> CEnv:
    memo_key = (cenv, name, contour)
    got = _extend_memo.get(memo_key)
    if got is None:
        items = {key: v for key, v in cenv}
        items[name] = contour
        got = _extend_memo[memo_key] = cenv_of(items)
    return got


def cenv_restrict(cenv: CEnv, names) -> CEnv:
    return _pooled(tuple((key, v) for key, v in cenv if key in names))


def format_contour(delta: Contour) -> str:
    return ".".join(str(lbl) for lbl in delta) if delta else "<>"


class CValue:
    """A lambda paired with contours locating its free variables' bindings.

    Instances are pooled on (lambda label, environment) with the hash
    precomputed, so the heavy set algebra in the analyses runs on the
    identity fast path.
    """

    __slots__ = ("lam", "cenv", "_hash")
    _pool: dict = {}

    def __new__(cls, lam: Lam, cenv: CEnv = EMPTY_CENV):
        key = (lam.label, cenv)
        got = cls._pool.get(key)
        if got is not None and got.lam == lam:
            return got
        self = object.__new__(cls)
        self.lam = lam
        self.cenv = cenv
        self._hash = hash(key)
        cls._pool[key] = self
        return self

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, CValue):
            return NotImplemented
        return self.lam == other.lam and self.cenv == other.cenv

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"CValue({self.lam!r}, {self.cenv!r})"


@dataclass
class ExactCache:
    result_cache: dict = field(default_factory=dict)   # (label, contour) -> CValue
    bind_cache: dict = field(default_factory=dict)     # (name, contour) -> CValue

    def write_result(self, label: int, delta: Contour, val: CValue):
        key = (label, delta)
        if key in self.result_cache:
            raise RuntimeError(f"result cache written twice at {key}")
        self.result_cache[key] = val

    def write_bind(self, name: str, delta: Contour, val: CValue):
        key = (name, delta)
        if key in self.bind_cache:
            raise RuntimeError(f"bind cache written twice at {key}")
        self.bind_cache[key] = val


class _OutOfFuel(Exception):
    pass


@deep
def run_instrumented(e: Expr, fuel: int = 100000) -> Union[ExactCache, Diverged]:
    """Run e from the empty environment and contour, recording all flows.

    Returns the completed caches, or Diverged with no partial data when
    the step budget runs out.  One application costs one step.
    """
    if free_vars(e):
        raise ValueError("term must be closed")
    if fuel < 1:
        raise ValueError("fuel must be at least 1")
    cache = ExactCache()
    tank = [fuel]

    def go(t, cenv, delta):
        if isinstance(t, Var):
            val = cache.bind_cache[(t.name, cenv_lookup(cenv, t.name))]
            cache.write_result(t.label, delta, val)
            return val
        if isinstance(t, Lam):
            val = CValue(t, cenv_restrict(cenv, free_vars(t)))
            cache.write_result(t.label, delta, val)
            return val
        if isinstance(t, App):
            fn = go(t.fn, cenv, delta)
            arg = go(t.arg, cenv, delta)
            if tank[0] <= 0:
                raise _OutOfFuel
            tank[0] -= 1
            inner = delta + (t.label,)
            cache.write_bind(fn.lam.param, inner, arg)
            body_cenv = cenv_extend(fn.cenv, fn.lam.param, inner)
            result = go(fn.lam.body, body_cenv, inner)
            cache.write_result(t.label, delta, result)
            return result
        raise TypeError(f"not a term: {t!r}")

    try:
        go(e, EMPTY_CENV, EMPTY_CONTOUR)
    except _OutOfFuel:
        return Diverged(fuel)
    return cache


@deep
def check_exact_acceptable(cache: ExactCache, e: Expr) -> bool:
    """Decide whether the caches satisfy the exact acceptability clauses.

    The check is coinductive: an evaluation obligation already in
    progress (or already discharged) is taken as holding.
    """
    seen = set()

    def entry(table, key):
        return table.get(key)

    def check(t, cenv, delta):
        key = (t.label, cenv, delta)
        if key in seen:
            return True
        seen.add(key)
        if isinstance(t, Var):
            try:
                bound = entry(cache.bind_cache, (t.name, cenv_lookup(cenv, t.name)))
            except KeyError:
                return False
            got = entry(cache.result_cache, (t.label, delta))
            return bound is not None and got == bound
        if isinstance(t, Lam):
            want = CValue(t, cenv_restrict(cenv, free_vars(t)))
            return entry(cache.result_cache, (t.label, delta)) == want
        if isinstance(t, App):
            if not check(t.fn, cenv, delta) or not check(t.arg, cenv, delta):
                return False
            fn = entry(cache.result_cache, (t.fn.label, delta))
            arg = entry(cache.result_cache, (t.arg.label, delta))
            if fn is None or arg is None:
                return False
            inner = delta + (t.label,)
            if entry(cache.bind_cache, (fn.lam.param, inner)) != arg:
                return False
            body_cenv = cenv_extend(fn.cenv, fn.lam.param, inner)
            if not check(fn.lam.body, body_cenv, inner):
                return False
            body_val = entry(cache.result_cache, (fn.lam.body.label, inner))
            return entry(cache.result_cache, (t.label, delta)) == body_val
        raise TypeError(f"not a term: {t!r}")

    return check(e, EMPTY_CENV, EMPTY_CONTOUR)


def exact_query(cache: ExactCache, label: int, delta: Contour) -> Optional[CValue]:
    return cache.result_cache.get((label, delta))


def max_contour_depth(cache: ExactCache) -> int:
    depths = [len(delta) for _, delta in cache.result_cache]
    depths += [len(delta) for _, delta in cache.bind_cache]
    return max(depths, default=0)
