"""Linear Boolean encodings and the circuit-to-term compiler.

Booleans are pairs of pair-transformers: True is (identity, swap) and
False is (swap, identity).  Every connective here is linear: each bound
variable is used exactly once, with symmetric garbage composed away
rather than discarded.  Or is derived from And and Not by De Morgan
since it has no direct-style definition of its own.

Circuits (netlists of AND/OR/NOT/IMPLIES/COPY gates) compile to closed
linear terms: gates become CPS calls threading wires as bindings, and
the output feeds a widget whose internals turn "the result is true"
into the flow fact "a designated abstraction reaches a designated
label".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import syntax
from .interp import Closure, Diverged, Value, apply_value, eval_std
from .syntax import Expr, Lam, SExpr, Var, subterms

# ---------- Encoding sources ----------

_BASE_SOURCES = {
    "TT": "(\\enc_p. letp enc_x enc_y = enc_p in (enc_x , enc_y))",
    "FF": "(\\enc_p. letp enc_x enc_y = enc_p in (enc_y , enc_x))",
    "TRUE": "(#TT , #FF)",
    "FALSE": "(#FF , #TT)",
    "NOT": "(\\enc_b. letp enc_u enc_v = enc_b in (enc_v , enc_u))",
    "AND": ("(\\enc_b1.(\\enc_b2."
            " letp enc_u1 enc_v1 = enc_b1 in"
            " letp enc_u2 enc_v2 = enc_b2 in"
            " letp enc_p1 enc_p2 = (enc_u1 (enc_u2 , #FF)) in"
            " letp enc_q1 enc_q2 = (enc_v1 (#TT , enc_v2)) in"
            " (enc_p1 , comp(enc_q1 , comp(enc_p2 , comp(enc_q2 , #FF))))))"),
    "IMPLIES": ("(\\enc_b1.(\\enc_b2."
                " letp enc_u1 enc_v1 = enc_b1 in"
                " letp enc_u2 enc_v2 = enc_b2 in"
                " letp enc_p1 enc_p2 = (enc_u1 (enc_u2 , #TT)) in"
                " letp enc_q1 enc_q2 = (enc_v1 (#FF , enc_v2)) in"
                " (enc_p1 , comp(enc_q1 , comp(enc_p2 , comp(enc_q2 , #FF))))))"),
    "OR": "(\\enc_b1.(\\enc_b2. (#NOT ((#AND (#NOT enc_b1)) (#NOT enc_b2)))))",
    "COMPOSE": "(\\enc_f.(\\enc_g. comp(enc_f , enc_g)))",
}

WIDGET_SOURCE = (
    "(\\wdgt_b."
    " letp wdgt_u wdgt_v = wdgt_b in"
    " letp wdgt_x wdgt_y = (wdgt_u ((\\wdgt_q. wdgt_q) , (\\wdgt_g. wdgt_g))) in"
    " letp wdgt_p wdgt_r = (wdgt_v ((\\wdgt_h. wdgt_h) , (\\wdgt_i. wdgt_i))) in"
    " ((\\wdgt_o1.((\\wdgt_o2.((\\wdgt_o3.((\\wdgt_o4."
    "    ((wdgt_o1 , wdgt_o2) , (wdgt_o3 , wdgt_o4)))"
    "   (wdgt_r (\\wdgt_k. wdgt_k))))"
    "   (wdgt_p (\\wdgt_j. wdgt_j))))"
    "   (wdgt_y (\\wdgt_false_s.(\\wdgt_false_t.(wdgt_false_t wdgt_false_s))))))"
    "   (wdgt_x (\\wdgt_true_m.(\\wdgt_true_n.(wdgt_true_m wdgt_true_n))))))"
)


def encoding_source(name: str) -> str:
    if name in _BASE_SOURCES:
        return _BASE_SOURCES[name]
    if name == "WIDGET":
        return WIDGET_SOURCE
    if name == "COPY" or name == "COPY2":
        return ("(\\enc_b. letp enc_u enc_v = enc_b in"
                " ((enc_u (#TT , #FF)) , (enc_v (#FF , #TT))))")
    if name.startswith("COPY") and name[4:].isdigit():
        n = int(name[4:])
        if n < 2:
            raise ValueError(f"COPY arity must be at least 2, got {n}")
        return (f"(\\enc_b. letp enc_c enc_r = (#COPY2 enc_b) in"
                f" (enc_c , (#COPY{n - 1} enc_r)))")
    raise ValueError(f"unknown encoding {name!r}")


def mk_encoding(name: str) -> SExpr:
    """The surface term for a builtin connective or constant."""
    return syntax.parse_program(encoding_source(name))


def mk_widget() -> SExpr:
    return syntax.parse_program(WIDGET_SOURCE)


def cps_gate_source(kind: str, copy_arity: int = 2) -> str:
    """A gate passing its result(s) to a continuation argument."""
    if kind in ("AND", "OR", "IMPLIES"):
        return f"(\\gb1.(\\gb2.(\\gk.(gk ((#{kind} gb1) gb2)))))"
    if kind == "NOT":
        return "(\\gb.(\\gk.(gk (#NOT gb))))"
    if kind == "COPY":
        n = copy_arity
        if n < 2:
            raise ValueError("COPY arity must be at least 2")
        # unfold the right-nested pair that #COPYn produces
        if n == 2:
            lines = ["letp gc1 gc2 = (#COPY2 gb) in"]
        else:
            lines = [f"letp gc1 gr1 = (#COPY{n} gb) in"]
            for i in range(2, n - 1):
                lines.append(f"letp gc{i} gr{i} = gr{i - 1} in")
            lines.append(f"letp gc{n - 1} gc{n} = gr{n - 2} in")
        call = "gk " + " ".join(f"gc{i}" for i in range(1, n + 1))
        return "(\\gb.(\\gk. " + " ".join(lines) + f" ({call})))"
    raise ValueError(f"unknown gate kind {kind!r}")


def mk_cps_gate(kind: str, copy_arity: int = 2) -> SExpr:
    return syntax.parse_program(cps_gate_source(kind, copy_arity))


# ---------- Boolean value decoding ----------

class _Probes:
    def __init__(self):
        self.fst = syntax.parse("(\\sela.(\\selb.sela))")
        self.pair = syntax.parse(
            "(\\probsel.((probsel (\\proba.(\\probb.(proba probb))))"
            " (\\probc.(\\probd.(probd probc)))))")
        self.p_lam = self.pair.body.fn.arg
        self.q_lam = self.pair.body.arg


_probes: Optional[_Probes] = None


def _get_probes() -> _Probes:
    global _probes
    if _probes is None:
        _probes = _Probes()
    return _probes


def _apply(fn: Closure, arg: Closure, fuel: int) -> Closure:
    out = apply_value(fn, arg, fuel)
    if isinstance(out, Diverged):
        raise ValueError("value is not a Boolean: application diverged")
    return out.value


def decode_boolean(value: Closure, fuel: int = 100000) -> bool:
    """Read back a Boolean pair, checking both components behave."""
    probes = _get_probes()
    fst = eval_std(probes.fst).value
    pair = eval_std(probes.pair).value

    def transformer_is_identity(component):
        swapped = _apply(component, pair, fuel)
        first = _apply(swapped, fst, fuel)
        if first.lam is probes.p_lam:
            return True
        if first.lam is probes.q_lam:
            return False
        raise ValueError("value is not a Boolean: unexpected component")

    first_id = transformer_is_identity(_apply(value, fst, fuel))
    # a proper Boolean has one identity and one swap
    snd = eval_std(syntax.parse("(\\selc.(\\seld.seld))")).value
    second_id = transformer_is_identity(_apply(value, snd, fuel))
    if first_id == second_id:
        raise ValueError("value is not a Boolean: components agree")
    return first_id


# ---------- Circuits ----------

@dataclass(frozen=True)
class Gate:
    outputs: tuple
    kind: str          # AND OR NOT IMPLIES COPY
    inputs: tuple


@dataclass(frozen=True)
class CircuitSpec:
    inputs: tuple
    gates: tuple
    output: str


class CircuitError(Exception):
    pass


_GATE_ARITY = {"AND": 2, "OR": 2, "IMPLIES": 2, "NOT": 1, "COPY": 1}


def _check_circuit(c: CircuitSpec):
    defined = list(c.inputs)
    for g in c.gates:
        if g.kind not in _GATE_ARITY:
            raise CircuitError(f"unknown gate kind {g.kind!r}")
        if len(g.inputs) != _GATE_ARITY[g.kind]:
            raise CircuitError(f"{g.kind} takes {_GATE_ARITY[g.kind]} inputs")
        if g.kind == "COPY" and len(g.outputs) < 2:
            raise CircuitError("COPY needs at least two outputs")
        if g.kind != "COPY" and len(g.outputs) != 1:
            raise CircuitError(f"{g.kind} has exactly one output")
        for w in g.inputs:
            if w not in defined:
                raise CircuitError(f"wire {w!r} used before definition")
        for w in g.outputs:
            if w in defined:
                raise CircuitError(f"wire {w!r} defined twice")
            defined.append(w)
    if c.output not in defined:
        raise CircuitError(f"output wire {c.output!r} undefined")


def linearize_circuit(c: CircuitSpec) -> CircuitSpec:
    """Insert COPY gates so that every wire is consumed exactly once."""
    _check_circuit(c)
    uses: dict = {}
    for g in c.gates:
        for w in g.inputs:
            uses[w] = uses.get(w, 0) + 1
    uses[c.output] = uses.get(c.output, 0) + 1

    produced = list(c.inputs) + [w for g in c.gates for w in g.outputs]
    for w in produced:
        if uses.get(w, 0) == 0:
            raise CircuitError(f"wire {w!r} is never consumed")

    # replacement names handed out in consumption order
    queue: dict = {}
    copies_for: dict = {}
    for w, n in uses.items():
        if n > 1:
            fresh = tuple(f"{w}__{i}" for i in range(1, n + 1))
            copies_for[w] = Gate(fresh, "COPY", (w,))
            queue[w] = list(fresh)

    def consume(w):
        if w in queue:
            return queue[w].pop(0)
        return w

    new_gates = []
    for w in c.inputs:
        if w in copies_for:
            new_gates.append(copies_for[w])
    for g in c.gates:
        new_gates.append(Gate(g.outputs, g.kind, tuple(consume(w) for w in g.inputs)))
        for w in g.outputs:
            if w in copies_for:
                new_gates.append(copies_for[w])
    return CircuitSpec(c.inputs, tuple(new_gates), consume(c.output))


def eval_circuit_oracle(c: CircuitSpec, bits) -> bool:
    """Direct gate-by-gate simulation; the independent truth oracle."""
    if len(bits) != len(c.inputs):
        raise CircuitError(f"expected {len(c.inputs)} input bits, got {len(bits)}")
    wire = dict(zip(c.inputs, (bool(b) for b in bits)))
    for g in c.gates:
        vals = [wire[w] for w in g.inputs]
        if g.kind == "AND":
            out = vals[0] and vals[1]
        elif g.kind == "OR":
            out = vals[0] or vals[1]
        elif g.kind == "IMPLIES":
            out = (not vals[0]) or vals[1]
        elif g.kind == "NOT":
            out = not vals[0]
        elif g.kind == "COPY":
            for w in g.outputs:
                wire[w] = vals[0]
            continue
        else:
            raise CircuitError(f"unknown gate kind {g.kind!r}")
        wire[g.outputs[0]] = out
    return wire[c.output]


def _wire_ident(w: str) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "_'" else "_" for ch in w)
    return "c_" + safe


def gate_chain_source(gates, final: str, wire=_wire_ident) -> str:
    """CPS chain: each gate call binds its output wires in a continuation."""
    body = final
    for g in reversed(gates):
        ins = " ".join(wire(w) for w in g.inputs)
        if g.kind in ("AND", "OR", "IMPLIES", "NOT"):
            body = (f"({cps_gate_source(g.kind)} {ins}"
                    f" (\\{wire(g.outputs[0])}. {body}))")
        elif g.kind == "COPY":
            cont = body
            for w in reversed(g.outputs):
                cont = f"(\\{wire(w)}. {cont})"
            body = f"({cps_gate_source('COPY', len(g.outputs))} {ins} {cont})"
        else:
            raise CircuitError(f"unknown gate kind {g.kind!r}")
    return body


@dataclass(frozen=True)
class CompiledCircuit:
    program: Expr
    query_label: int
    true_witness: int
    false_witness: int
    pre_widget: Expr
    source: str
    pre_widget_source: str


def circuit_core_source(c: CircuitSpec, bits) -> str:
    """The applied, widget-less circuit term as surface text."""
    if len(bits) != len(c.inputs):
        raise CircuitError(f"expected {len(c.inputs)} input bits, got {len(bits)}")
    linear = linearize_circuit(c)
    chain = gate_chain_source(linear.gates, _wire_ident(linear.output))
    lam = chain
    for w in reversed(c.inputs):
        lam = f"(\\{_wire_ident(w)}. {lam})"
    args = " ".join("#TRUE" if b else "#FALSE" for b in bits)
    return f"({lam} {args})" if args else lam


def compile_circuit(c: CircuitSpec, bits) -> CompiledCircuit:
    core = circuit_core_source(c, bits)
    full = f"(#WIDGET {core})"
    program = syntax.parse(full)
    pre_widget = syntax.parse(core)
    query, twit, fwit = locate_widget(program)
    return CompiledCircuit(program, query, twit, fwit, pre_widget, full, core)


def locate_widget(program: Expr):
    """Find (query label, true-witness label, false-witness label) of the
    single widget instance in a labeled program."""

    def lam_with_prefix(prefix):
        found = [t for t in subterms(program) if isinstance(t, Lam)
                 and t.param.startswith(prefix)]
        if len(found) != 1:
            raise ValueError(f"expected one widget marker {prefix!r}, "
                             f"found {len(found)}")
        return found[0]

    query_lam = lam_with_prefix("wdgt_q")
    if not isinstance(query_lam.body, Var):
        raise ValueError("malformed widget query abstraction")
    true_lam = lam_with_prefix("wdgt_true_m")
    false_lam = lam_with_prefix("wdgt_false_s")
    return query_lam.body.label, true_lam.label, false_lam.label


# ---------- Circuit file format ----------

def parse_circuit_file(text: str) -> CircuitSpec:
    """Parse the netlist format: input/gate/output lines, '#' comments."""
    inputs = []
    gates = []
    output = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "input" and len(parts) == 2:
                inputs.append(parts[1])
            elif parts[0] == "output" and len(parts) == 2:
                output = parts[1]
            elif parts[0] == "gate" and parts[2] == "=":
                name, kind = parts[1], parts[3]
                rest = parts[4:]
                if kind == "COPY":
                    arrow = rest.index("->")
                    ins = tuple(rest[:arrow])
                    outs = tuple(rest[arrow + 1:])
                    if len(ins) != 1 or len(outs) < 2:
                        raise ValueError
                    gates.append(Gate(outs, "COPY", ins))
                else:
                    gates.append(Gate((name,), kind, tuple(rest)))
            else:
                raise ValueError
        except (IndexError, ValueError):
            raise CircuitError(f"bad circuit line {lineno}: {raw.strip()!r}")
    if output is None:
        raise CircuitError("missing output line")
    if not inputs:
        raise CircuitError("circuit needs at least one input")
    spec = CircuitSpec(tuple(inputs), tuple(gates), output)
    _check_circuit(spec)
    return spec


def format_circuit(c: CircuitSpec) -> str:
    lines = [f"input {w}" for w in c.inputs]
    for g in c.gates:
        if g.kind == "COPY":
            lines.append(f"gate {g.outputs[0]}_cp = COPY {g.inputs[0]} -> "
                         + " ".join(g.outputs))
        else:
            lines.append(f"gate {g.outputs[0]} = {g.kind} " + " ".join(g.inputs))
    lines.append(f"output {c.output}")
    return "\n".join(lines) + "\n"
