"""Labeled lambda calculus: terms, parsing, sugar expansion, labeling.

The core language is the pure lambda calculus where every subexpression
carries a unique positive integer label.  A small surface syntax adds
pairs, pair destructuring, function composition and a handful of builtin
macro names, all of which expand into plain Var/Lam/App terms.
"""

from __future__ import annotations

import functools
import sys
import threading
from dataclasses import dataclass, field
from typing import Iterator, Optional


# ---------- Deep recursion support ----------
#
# Generated lower-bound programs nest thousands of levels deep, and the
# parser, evaluators and analyses all recurse structurally.  Entry points
# decorated with @deep run on a worker thread with a large stack.

_DEEP_STACK_BYTES = 512 * 1024 * 1024
_DEEP_RECURSION_LIMIT = 400000
_deep_state = threading.local()


def run_deep(fn, *args, **kwargs):
    """Call fn on a thread with a large stack and a high recursion limit."""
    if getattr(_deep_state, "active", False):
        return fn(*args, **kwargs)
    box = []

    def target():
        _deep_state.active = True
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, _DEEP_RECURSION_LIMIT))
        try:
            box.append((True, fn(*args, **kwargs)))
        except BaseException as exc:
            box.append((False, exc))
        finally:
            sys.setrecursionlimit(limit)

    previous = threading.stack_size(_DEEP_STACK_BYTES)
    try:
        worker = threading.Thread(target=target, name="deep-recursion")
        worker.start()
        worker.join()
    finally:
        threading.stack_size(previous)
    ok, value = box[0]
    if ok:
        return value
    raise value


def deep(fn):
    """Decorator form of run_deep."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return run_deep(fn, *args, **kwargs)

    return wrapper


# ---------- Core terms ----------

class Expr:
    """A labeled term: Var, Lam or App."""

    label: int

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self.label != other.label:
            return False
        return self._children_eq(other)

    def __hash__(self):
        return hash((type(self).__name__, self.label))

    def _children_eq(self, other):
        raise NotImplementedError


@dataclass(eq=False)
class Var(Expr):
    name: str
    label: int

    def _children_eq(self, other):
        return self.name == other.name

    def __repr__(self):
        return f"Var({self.name!r}, {self.label})"


@dataclass(eq=False)
class Lam(Expr):
    param: str
    body: Expr
    label: int

    def _children_eq(self, other):
        return self.param == other.param and self.body == other.body

    def __repr__(self):
        return f"Lam({self.param!r}, {self.body!r}, {self.label})"


@dataclass(eq=False)
class App(Expr):
    fn: Expr
    arg: Expr
    label: int

    def _children_eq(self, other):
        return self.fn == other.fn and self.arg == other.arg

    def __repr__(self):
        return f"App({self.fn!r}, {self.arg!r}, {self.label})"


# ---------- Surface syntax ----------

@dataclass
class SExpr:
    pass


@dataclass
class SVar(SExpr):
    name: str
    label: Optional[int] = None


@dataclass
class SLam(SExpr):
    param: str
    body: SExpr
    label: Optional[int] = None


@dataclass
class SApp(SExpr):
    fn: SExpr
    arg: SExpr
    label: Optional[int] = None


@dataclass
class SPair(SExpr):
    left: SExpr
    right: SExpr
    label: Optional[int] = None


@dataclass
class SLetPair(SExpr):
    x: str
    y: str
    pair: SExpr
    body: SExpr
    label: Optional[int] = None


@dataclass
class SComp(SExpr):
    f: SExpr
    g: SExpr
    label: Optional[int] = None


@dataclass
class SMacro(SExpr):
    name: str
    label: Optional[int] = None


class ParseError(Exception):
    def __init__(self, message, line=None, col=None):
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)
        self.line = line
        self.col = col


# ---------- Tokenizer ----------

KEYWORDS = {"letp", "in", "comp"}


def _is_ident_start(c):
    return c.isalpha() or c == "_"


def _is_ident_rest(c):
    return c.isalnum() or c in "_'"


@dataclass
class Token:
    kind: str       # IDENT NAT LAMBDA DOT LPAREN RPAREN COMMA CARET EQ MACRO KW EOF
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if source.startswith(";;", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c == "\\":
            tokens.append(Token("LAMBDA", c, start_line, start_col))
            i += 1
            col += 1
        elif c in ".(),^=":
            kind = {".": "DOT", "(": "LPAREN", ")": "RPAREN",
                    ",": "COMMA", "^": "CARET", "=": "EQ"}[c]
            tokens.append(Token(kind, c, start_line, start_col))
            i += 1
            col += 1
        elif c == "#":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            if j == i + 1:
                raise ParseError("expected macro name after '#'", line, col)
            tokens.append(Token("MACRO", source[i + 1:j], start_line, start_col))
            col += j - i
            i = j
        elif c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("NAT", source[i:j], start_line, start_col))
            col += j - i
            i = j
        elif _is_ident_start(c):
            j = i
            while j < n and _is_ident_rest(source[j]):
                j += 1
            text = source[i:j]
            kind = "KW" if text in KEYWORDS else "IDENT"
            tokens.append(Token(kind, text, start_line, start_col))
            col += j - i
            i = j
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


# ---------- Parser ----------

class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, text=None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise ParseError(f"expected {want}, found {tok.text or 'end of input'}",
                             tok.line, tok.col)
        return self.next()

    def parse_expr(self) -> SExpr:
        tok = self.peek()
        if tok.kind == "LAMBDA":
            return self.parse_lambda()
        if tok.kind == "KW" and tok.text == "letp":
            return self.parse_letp()
        expr = self.parse_factor()
        while self.peek().kind in ("IDENT", "LPAREN", "MACRO") or \
                (self.peek().kind == "KW" and self.peek().text == "comp"):
            arg = self.parse_factor()
            expr = SApp(expr, arg)
        return expr

    def parse_lambda(self) -> SExpr:
        self.expect("LAMBDA")
        param = self.expect("IDENT").text
        self.expect("DOT")
        body = self.parse_expr()
        return SLam(param, body)

    def parse_letp(self) -> SExpr:
        self.expect("KW", "letp")
        x = self.expect("IDENT").text
        y = self.expect("IDENT").text
        self.expect("EQ")
        pair = self.parse_expr()
        self.expect("KW", "in")
        body = self.parse_expr()
        return SLetPair(x, y, pair, body)

    def parse_factor(self) -> SExpr:
        expr = self.parse_atom()
        if self.peek().kind == "CARET":
            self.next()
            tok = self.expect("NAT")
            label = int(tok.text)
            if label < 1:
                raise ParseError("labels must be positive", tok.line, tok.col)
            expr.label = label
        return expr

    def parse_atom(self) -> SExpr:
        tok = self.peek()
        if tok.kind == "IDENT":
            self.next()
            return SVar(tok.text)
        if tok.kind == "MACRO":
            self.next()
            return SMacro(tok.text)
        if tok.kind == "KW" and tok.text == "comp":
            self.next()
            self.expect("LPAREN")
            f = self.parse_expr()
            self.expect("COMMA")
            g = self.parse_expr()
            self.expect("RPAREN")
            return SComp(f, g)
        if tok.kind == "LPAREN":
            self.next()
            inner = self.parse_expr()
            if self.peek().kind == "COMMA":
                self.next()
                right = self.parse_expr()
                self.expect("RPAREN")
                return SPair(inner, right)
            self.expect("RPAREN")
            return inner
        raise ParseError(f"unexpected {tok.text or 'end of input'}", tok.line, tok.col)


def _surface_children(s: SExpr) -> Iterator[SExpr]:
    if isinstance(s, SLam):
        yield s.body
    elif isinstance(s, SApp):
        yield s.fn
        yield s.arg
    elif isinstance(s, SPair):
        yield s.left
        yield s.right
    elif isinstance(s, SLetPair):
        yield s.pair
        yield s.body
    elif isinstance(s, SComp):
        yield s.f
        yield s.g


def _surface_walk(s: SExpr) -> Iterator[SExpr]:
    # explicit stack: recursive generators pay O(depth) per yield
    stack = [s]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(list(_surface_children(node))))


def parse_program(source: str) -> SExpr:
    """Parse a source string into a surface tree, keeping sugar and labels."""
    parser = _Parser(_tokenize(source))
    expr = parser.parse_expr()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise ParseError(f"unexpected {tok.text!r} after expression", tok.line, tok.col)
    seen = set()
    for node in _surface_walk(expr):
        if node.label is not None:
            if node.label in seen:
                raise ParseError(f"duplicate explicit label {node.label}")
            seen.add(node.label)
    return expr


# ---------- Desugaring ----------

def _surface_names(s: SExpr) -> set[str]:
    names = set()
    for node in _surface_walk(s):
        if isinstance(node, SVar):
            names.add(node.name)
        elif isinstance(node, SLam):
            names.add(node.param)
        elif isinstance(node, SLetPair):
            names.add(node.x)
            names.add(node.y)
    return names


class _FreshNames:
    def __init__(self, used):
        self.used = set(used)
        self.counter = 0

    def fresh(self, base):
        while True:
            self.counter += 1
            name = f"{base}{self.counter}"
            if name not in self.used:
                self.used.add(name)
                return name


def desugar(s: SExpr) -> SExpr:
    """Expand pairs, letp, comp and macros into plain Var/Lam/App surface nodes."""
    fresh = _FreshNames(_surface_names(s))
    return _desugar(s, fresh)


def _desugar(s: SExpr, fresh: _FreshNames) -> SExpr:
    if isinstance(s, SVar):
        return SVar(s.name, s.label)
    if isinstance(s, SLam):
        return SLam(s.param, _desugar(s.body, fresh), s.label)
    if isinstance(s, SApp):
        return SApp(_desugar(s.fn, fresh), _desugar(s.arg, fresh), s.label)
    if isinstance(s, SPair):
        sel = fresh.fresh("_p")
        body = SApp(SApp(SVar(sel), _desugar(s.left, fresh)),
                    _desugar(s.right, fresh))
        return SLam(sel, body, s.label)
    if isinstance(s, SLetPair):
        consumer = SLam(s.x, SLam(s.y, _desugar(s.body, fresh)))
        return SApp(_desugar(s.pair, fresh), consumer, s.label)
    if isinstance(s, SComp):
        z = fresh.fresh("_z")
        return SLam(z, SApp(_desugar(s.f, fresh),
                            SApp(_desugar(s.g, fresh), SVar(z))), s.label)
    if isinstance(s, SMacro):
        from . import encodings
        expansion = _desugar(encodings.mk_encoding(s.name), fresh)
        expansion.label = s.label
        return expansion
    raise TypeError(f"not a surface node: {s!r}")


# ---------- Labeling and alpha renaming ----------

@dataclass
class Labeled:
    expr: Expr
    renaming: list = field(default_factory=list)   # (old, new) binder renames


def label_program(s: SExpr) -> Labeled:
    """Assign fresh preorder labels and rename binders apart.

    Explicit labels are kept; fresh ones start after the largest explicit
    label.  Every binder gets a globally unique name; the (old, new) pairs
    of renamed binders are reported.
    """
    explicit = [n.label for n in _surface_walk(s) if n.label is not None]
    seen = set()
    for lbl in explicit:
        if lbl in seen:
            raise ParseError(f"duplicate explicit label {lbl}")
        seen.add(lbl)
    counter = [max(explicit, default=0)]
    used_names = set(_surface_names(s))
    taken = set()      # names already given to some binder or seen free
    renaming = []

    def next_label(node):
        if node.label is not None:
            return node.label
        counter[0] += 1
        while counter[0] in seen:
            counter[0] += 1
        return counter[0]

    suffix: dict = {}

    def uniquify(name):
        if name not in taken:
            taken.add(name)
            return name
        i = suffix.get(name, 0) + 1
        while f"{name}{i}" in taken or f"{name}{i}" in used_names:
            i += 1
        suffix[name] = i
        new = f"{name}{i}"
        taken.add(new)
        used_names.add(new)
        renaming.append((name, new))
        return new

    def walk(node, env):
        lbl = next_label(node)
        if isinstance(node, SVar):
            name = env.get(node.name, node.name)
            if node.name not in env:
                taken.add(node.name)    # free name: binders must avoid it
            return Var(name, lbl)
        if isinstance(node, SLam):
            new = uniquify(node.param)
            body = walk(node.body, {**env, node.param: new})
            return Lam(new, body, lbl)
        if isinstance(node, SApp):
            fn = walk(node.fn, env)
            arg = walk(node.arg, env)
            return App(fn, arg, lbl)
        raise ParseError(f"sugar must be expanded before labeling: {node!r}")

    return Labeled(walk(s, {}), renaming)


@deep
def parse(source: str) -> Expr:
    """Parse, desugar and label a program in one step."""
    return label_program(desugar(parse_program(source))).expr


# ---------- Structural helpers ----------

def subterms(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        t = stack.pop()
        yield t
        if isinstance(t, Lam):
            stack.append(t.body)
        elif isinstance(t, App):
            stack.append(t.arg)
            stack.append(t.fn)


def free_vars(e: Expr) -> set[str]:
    fv: dict[int, set] = {}
    stack = [(e, False)]
    while stack:
        t, ready = stack.pop()
        if ready:
            if isinstance(t, Lam):
                fv[id(t)] = fv[id(t.body)] - {t.param}
            else:
                fv[id(t)] = fv[id(t.fn)] | fv[id(t.arg)]
        elif isinstance(t, Var):
            fv[id(t)] = {t.name}
        elif isinstance(t, Lam):
            stack.append((t, True))
            stack.append((t.body, False))
        elif isinstance(t, App):
            stack.append((t, True))
            stack.append((t.fn, False))
            stack.append((t.arg, False))
        else:
            raise TypeError(f"not a term: {t!r}")
    return fv[id(e)]


def bound_vars(e: Expr) -> set[str]:
    return {t.param for t in subterms(e) if isinstance(t, Lam)}


def _occurrences(e: Expr) -> dict[str, int]:
    counts: dict[str, int] = {}
    for t in subterms(e):
        if isinstance(t, Var):
            counts[t.name] = counts.get(t.name, 0) + 1
    return counts


def is_linear(e: Expr) -> bool:
    """True when every bound and every free variable occurs exactly once."""
    counts = _occurrences(e)
    for name in bound_vars(e):
        if counts.get(name, 0) != 1:
            return False
    for name in free_vars(e):
        if counts.get(name, 0) != 1:
            return False
    return True


@deep
def pretty_print(e: Expr, with_labels: bool = False) -> str:
    tag = (lambda lbl: f"^{lbl}") if with_labels else (lambda lbl: "")
    def go(t):
        if isinstance(t, Var):
            return t.name + tag(t.label)
        if isinstance(t, Lam):
            return f"(\\{t.param}.{go(t.body)})" + tag(t.label)
        if isinstance(t, App):
            return f"({go(t.fn)} {go(t.arg)})" + tag(t.label)
        raise TypeError(f"not a term: {t!r}")
    return go(e)


def labels(e: Expr) -> set[int]:
    return {t.label for t in subterms(e)}


def lams(e: Expr) -> list[Lam]:
    return [t for t in subterms(e) if isinstance(t, Lam)]


def find_label(e: Expr, label: int) -> Optional[Expr]:
    for t in subterms(e):
        if t.label == label:
            return t
    return None


def validate(e: Expr) -> None:
    """Check label uniqueness and alpha uniqueness; raise ValueError if broken."""
    seen_labels = set()
    for t in subterms(e):
        if t.label in seen_labels:
            raise ValueError(f"duplicate label {t.label}")
        seen_labels.add(t.label)
    binders = [t.param for t in subterms(e) if isinstance(t, Lam)]
    if len(binders) != len(set(binders)):
        raise ValueError("binders are not distinct")
    clash = set(binders) & free_vars(e)
    if clash:
        raise ValueError(f"binders shadow free names: {sorted(clash)}")
