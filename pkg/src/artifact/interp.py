"""Concrete call-by-value evaluators over closures, with a step budget.

Two evaluators are provided.  eval_std carries the whole environment down
and restricts it only when forming closures.  eval_tight maintains the
invariant that the environment's domain is exactly the free variables of
the term in hand, splitting the environment at every application.  They
agree on closed terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .syntax import deep, App, Expr, Lam, Var, free_vars


@dataclass(frozen=True)
class Closure:
    lam: Lam
    env: "Env"

    def __repr__(self):
        return f"Closure({self.lam!r}, {dict(self.env)!r})"


# Environments are plain immutable mappings name -> Closure.
Env = tuple
ConcreteValue = Closure


def env_of(mapping) -> Env:
    return tuple(sorted(mapping.items()))


def env_lookup(env: Env, name: str) -> Closure:
    for key, val in env:
        if key == name:
            return val
    raise KeyError(name)


def env_extend(env: Env, name: str, val: Closure) -> Env:
    items = {key: v for key, v in env}
    items[name] = val
    return env_of(items)


def env_restrict(env: Env, names) -> Env:
    return tuple((key, v) for key, v in env if key in names)


def env_domain(env: Env) -> set[str]:
    return {key for key, _ in env}


@dataclass(frozen=True)
class Value:
    value: Closure


@dataclass(frozen=True)
class Diverged:
    steps_used: int


EvalOutcome = Union[Value, Diverged]


class _OutOfFuel(Exception):
    pass


def _check_closes(e: Expr, env: Env):
    missing = free_vars(e) - env_domain(env)
    if missing:
        raise ValueError(f"environment does not close term: missing {sorted(missing)}")


@deep
def eval_std(e: Expr, env: Env = (), fuel: int = 100000) -> EvalOutcome:
    """Evaluate under call by value; each application costs one fuel unit."""
    if fuel < 1:
        raise ValueError("fuel must be at least 1")
    _check_closes(e, env)
    tank = [fuel]

    def go(t, rho):
        if isinstance(t, Var):
            return env_lookup(rho, t.name)
        if isinstance(t, Lam):
            return Closure(t, env_restrict(rho, free_vars(t)))
        if isinstance(t, App):
            fn = go(t.fn, rho)
            arg = go(t.arg, rho)
            if tank[0] <= 0:
                raise _OutOfFuel
            tank[0] -= 1
            body_env = env_extend(fn.env, fn.lam.param, arg)
            return go(fn.lam.body, body_env)
        raise TypeError(f"not a term: {t!r}")

    try:
        return Value(go(e, env))
    except _OutOfFuel:
        return Diverged(fuel)


@deep
def eval_tight(e: Expr, env: Env = (), fuel: int = 100000) -> EvalOutcome:
    """Like eval_std but the environment is always exactly fv(term)."""
    if fuel < 1:
        raise ValueError("fuel must be at least 1")
    if env_domain(env) != free_vars(e):
        raise ValueError("environment domain must equal the free variables")
    tank = [fuel]

    def go(t, rho):
        if isinstance(t, Var):
            # rho is exactly [x -> v]
            return env_lookup(rho, t.name)
        if isinstance(t, Lam):
            return Closure(t, rho)
        if isinstance(t, App):
            fn = go(t.fn, env_restrict(rho, free_vars(t.fn)))
            arg = go(t.arg, env_restrict(rho, free_vars(t.arg)))
            if tank[0] <= 0:
                raise _OutOfFuel
            tank[0] -= 1
            body_env = env_restrict(env_extend(fn.env, fn.lam.param, arg),
                                    free_vars(fn.lam.body))
            return go(fn.lam.body, body_env)
        raise TypeError(f"not a term: {t!r}")

    try:
        return Value(go(e, env))
    except _OutOfFuel:
        return Diverged(fuel)


def term_size(e: Expr) -> int:
    if isinstance(e, Var):
        return 1
    if isinstance(e, Lam):
        return 1 + term_size(e.body)
    if isinstance(e, App):
        return 1 + term_size(e.fn) + term_size(e.arg)
    raise TypeError(f"not a term: {e!r}")


def env_size(env: Env) -> int:
    return len(env) + sum(closure_size(v) for _, v in env)


def closure_size(v) -> int:
    """Size of a closure or (term, env) pair: |t, rho| = |t| + |rho|."""
    if isinstance(v, Closure):
        return term_size(v.lam) + env_size(v.env)
    term, env = v
    return term_size(term) + env_size(env)


@deep
def apply_value(fn: Closure, arg: Closure, fuel: int = 100000) -> EvalOutcome:
    """Apply one closure to another under eval_std semantics."""
    if fuel < 1:
        raise ValueError("fuel must be at least 1")
    tank = [fuel]

    def go(t, rho):
        if isinstance(t, Var):
            return env_lookup(rho, t.name)
        if isinstance(t, Lam):
            return Closure(t, env_restrict(rho, free_vars(t)))
        if isinstance(t, App):
            f = go(t.fn, rho)
            a = go(t.arg, rho)
            return beta(f, a)
        raise TypeError(f"not a term: {t!r}")

    def beta(f, a):
        if tank[0] <= 0:
            raise _OutOfFuel
        tank[0] -= 1
        return go(f.lam.body, env_extend(f.env, f.lam.param, a))

    try:
        return Value(beta(fn, arg))
    except _OutOfFuel:
        return Diverged(fuel)
