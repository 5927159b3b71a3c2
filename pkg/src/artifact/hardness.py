"""Lower-bound instance generators: SAT and Turing-machine constructions.

The SAT instance binds each formula variable to both Booleans through a
cascade of double applications, packs the variables into a tuple
closure, and runs the formula's linear circuit on the unpacking; the
widget turns "a satisfying tuple closure reached the circuit" into a
flow query.

The Turing-machine instance codes one tape cell at one time step as a
tuple closure <T,S,H,C,b> of Booleans, generates a tuple per cell
address with the same cascade, and iterates a transition term over the
initial configuration.  The transition term consumes its argument twice
(the cross product of IDs) through five-way copies and computes the
piecewise transition with one Boolean circuit per output block.
Identity applications act as padding that funnels every closure into a
single contour.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from . import syntax
from .encodings import (CircuitSpec, CircuitError, Gate, cps_gate_source,
                        eval_circuit_oracle, gate_chain_source, locate_widget,
                        _wire_ident)
from .syntax import deep, App, Expr, Lam, Var, labels, subterms


# ---------- Formulas ----------

@dataclass(frozen=True)
class FormulaSpec:
    n: int
    circuit: CircuitSpec

    def __post_init__(self):
        expected = tuple(f"x{i}" for i in range(1, self.n + 1))
        if self.circuit.inputs != expected:
            raise CircuitError(f"formula inputs must be {expected}")


def formula(n: int, gates, output: str) -> FormulaSpec:
    inputs = tuple(f"x{i}" for i in range(1, n + 1))
    return FormulaSpec(n, CircuitSpec(inputs, tuple(gates), output))


def sat_oracle(phi: FormulaSpec) -> bool:
    return any(eval_circuit_oracle(phi.circuit, bits)
               for bits in itertools.product([False, True], repeat=phi.n))


# ---------- Instance bundle and padding ----------

@dataclass(frozen=True)
class HardnessInstance:
    program: Expr
    query_label: int
    true_witness: int
    false_witness: int
    k: int
    source: str
    pad_sites: tuple
    meta: dict = field(default_factory=dict)


@deep
def pad_for_k(e: Expr, extra_levels: int, at_labels) -> Expr:
    """Eta-wrap the operator of each designated application site in
    extra_levels pass-through layers.  Each layer appends one fixed label
    to the contour under which the operator's argument is bound, so a
    (k+extra)CFA of the padded term behaves as the kCFA of the original.
    Original labels are preserved; new nodes get labels above the max."""
    if extra_levels == 0:
        return e
    at = set(at_labels)
    counter = [max(labels(e))]
    names = {t.param for t in subterms(e) if isinstance(t, Lam)}
    pad_index = [0]

    def fresh_label():
        counter[0] += 1
        return counter[0]

    def fresh_name():
        while True:
            pad_index[0] += 1
            name = f"pad_{pad_index[0]}"
            if name not in names:
                names.add(name)
                return name

    def wrap(fn):
        for _ in range(extra_levels):
            name = fresh_name()
            fn = Lam(name, App(fn, Var(name, fresh_label()), fresh_label()),
                     fresh_label())
        return fn

    def rebuild(t):
        if isinstance(t, Var):
            return t
        if isinstance(t, Lam):
            return Lam(t.param, rebuild(t.body), t.label)
        if isinstance(t, App):
            fn = rebuild(t.fn)
            arg = rebuild(t.arg)
            if t.label in at:
                fn = wrap(fn)
            return App(fn, arg, t.label)
        raise TypeError(f"not a term: {t!r}")

    out = rebuild(e)
    syntax.validate(out)
    return out


# ---------- SAT instance ----------

def _cascade(var_names, body: str) -> str:
    """Bind each name to both Booleans: (\\f.(f TRUE)(f FALSE))(\\x. ...)."""
    for i, name in reversed(list(enumerate(var_names, start=1))):
        body = (f"((\\cas_f{i}. ((cas_f{i} #TRUE) (cas_f{i} #FALSE)))"
                f" (\\{name}. {body}))")
    return body


def gen_sat_instance(phi: FormulaSpec, k: int = 1) -> HardnessInstance:
    """The satisfiability construction at analysis level k >= 1."""
    if k < 1:
        raise ValueError("k must be at least 1")
    from .encodings import linearize_circuit
    linear = linearize_circuit(phi.circuit)

    chain = gate_chain_source(linear.gates, _wire_ident(linear.output))
    unpacker = chain
    for w in reversed(phi.circuit.inputs):
        unpacker = f"(\\{_wire_ident(w)}. {unpacker})"
    phi_fun = f"(\\sat_t. (sat_t {unpacker}))"

    tuple_app = "sat_w"
    for w in phi.circuit.inputs:
        tuple_app = f"({tuple_app} {_wire_ident(w)})"
    tuple_term = f"(\\sat_w. {tuple_app})"

    # explicit label 1 marks the funnel application, the padding site
    funnel = f"(((\\sat_v. ({phi_fun} sat_v)) {tuple_term}))^1"
    body = f"(#WIDGET {funnel})"
    source = _cascade([_wire_ident(w) for w in phi.circuit.inputs], body)
    program = syntax.parse(source)
    program = pad_for_k(program, k - 1, {1})
    query, twit, fwit = locate_widget(program)
    return HardnessInstance(program, query, twit, fwit, k, source, (1,),
                            {"n": phi.n})


# ---------- Turing machines ----------

class TMError(Exception):
    pass


class StepLimitExceeded(TMError):
    pass


@dataclass(frozen=True)
class TMSpec:
    states: tuple
    initial: str
    accept: str
    reject: str
    delta: dict          # (state, bit) -> (state, bit, 'L' | 'R')

    def __post_init__(self):
        for q in (self.initial, self.accept, self.reject):
            if q not in self.states:
                raise TMError(f"state {q!r} not declared")
        for q in self.states:
            for b in (0, 1):
                if (q, b) not in self.delta:
                    raise TMError(f"delta not total: missing ({q}, {b})")
        for (q, b), (q2, b2, mv) in self.delta.items():
            if q2 not in self.states or b2 not in (0, 1) or mv not in "LR":
                raise TMError(f"bad transition for ({q}, {b})")


def parse_tm_file(text: str) -> TMSpec:
    """states / accept / reject / delta lines, '#' comments."""
    states = None
    accept = reject = None
    delta = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "states":
                states = tuple(parts[1:])
            elif parts[0] == "accept" and len(parts) == 2:
                accept = parts[1]
            elif parts[0] == "reject" and len(parts) == 2:
                reject = parts[1]
            elif parts[0] == "delta" and len(parts) == 7 and parts[3] == "->":
                delta[(parts[1], int(parts[2]))] = \
                    (parts[4], int(parts[5]), parts[6])
            else:
                raise ValueError
        except (IndexError, ValueError):
            raise TMError(f"bad machine line {lineno}: {raw.strip()!r}")
    if not states or accept is None or reject is None:
        raise TMError("machine needs states, accept and reject lines")
    return TMSpec(states, states[0], accept, reject, delta)


def tm_oracle(m: TMSpec, input_bits: str, max_steps: int = 10000) -> bool:
    """Direct deterministic simulation; accepts iff the accept state is
    reached within max_steps."""
    tape = {i: int(b) for i, b in enumerate(input_bits)}
    state, head = m.initial, 0
    for _ in range(max_steps):
        if state == m.accept:
            return True
        if state == m.reject:
            return False
        bit = tape.get(head, 0)
        state, write, move = m.delta[(state, bit)]
        tape[head] = write
        head += 1 if move == "R" else -1
        if head < 0:
            raise TMError("head moved off the left end of the tape")
    if state == m.accept:
        return True
    if state == m.reject:
        return False
    raise StepLimitExceeded(f"no decision within {max_steps} steps")


# ---------- Netlist builder ----------

class _Net:
    """Grow a gate list over named inputs; wires get fresh names."""

    def __init__(self, inputs):
        self.inputs = tuple(inputs)
        self.gates = []
        self.counter = 0

    def fresh(self):
        self.counter += 1
        return f"n{self.counter}"

    def op(self, kind, *ins):
        w = self.fresh()
        self.gates.append(Gate((w,), kind, tuple(ins)))
        return w

    def and_(self, a, b):
        return self.op("AND", a, b)

    def or_(self, a, b):
        return self.op("OR", a, b)

    def not_(self, a):
        return self.op("NOT", a)

    def imp(self, a, b):
        return self.op("IMPLIES", a, b)

    def xnor(self, a, b):
        return self.and_(self.imp(a, b), self.imp(b, a))

    def xor(self, a, b):
        return self.not_(self.xnor(a, b))

    def const1(self):
        return self.imp(self.inputs[0], self.inputs[0])

    def const0(self):
        return self.not_(self.const1())

    def const(self, bit):
        return self.const1() if bit else self.const0()

    def all_and(self, wires):
        acc = wires[0]
        for w in wires[1:]:
            acc = self.and_(acc, w)
        return acc

    def any_or(self, wires):
        acc = wires[0]
        for w in wires[1:]:
            acc = self.or_(acc, w)
        return acc

    def eq(self, xs, ys):
        return self.all_and([self.xnor(a, b) for a, b in zip(xs, ys)])

    def eq_const(self, xs, bits):
        terms = [x if b else self.not_(x) for x, b in zip(xs, bits)]
        return self.all_and(terms)

    def mux(self, sel, then_w, else_w):
        return self.or_(self.and_(sel, then_w),
                        self.and_(self.not_(sel), else_w))

    def mux_vec(self, sel, then_ws, else_ws):
        return [self.mux(sel, a, b) for a, b in zip(then_ws, else_ws)]

    def inc(self, xs):
        # little-endian ripple increment, wrapping
        out = [self.not_(xs[0])]
        carry = xs[0]
        for x in xs[1:]:
            out.append(self.xor(x, carry))
            carry = self.and_(x, carry)
        return out

    def dec(self, xs):
        # little-endian ripple decrement, wrapping
        out = [self.not_(xs[0])]
        borrow = self.not_(xs[0])
        for x in xs[1:]:
            out.append(self.xnor(x, borrow))
            borrow = self.and_(self.not_(x), borrow)
        return out

    def truth_table(self, in_wires, rows):
        """One output from a list of (input bits, output bit) rows; inputs
        not listed yield 0."""
        minterms = [self.eq_const(in_wires, bits)
                    for bits, out in rows if out]
        if not minterms:
            return self.const0()
        return self.any_or(minterms)


def _emit_multi(net: _Net, outputs, result_template) -> str:
    """Emit a multi-output netlist as a term body.

    Free variables are the net's input wires (after _wire_ident).  Gates
    feeding none of the requested outputs are dropped, wires consumed
    more than once are fanned out through explicit COPY gates, and wires
    consumed zero times are simply left dead in their binders: a bound
    but unread variable contributes no flows.  result_template maps the
    output identifiers to the final source text.
    """
    # drop gates that feed none of the requested outputs
    needed = set(outputs)
    gates = []
    for g in reversed(net.gates):
        if any(w in needed for w in g.outputs):
            gates.append(g)
            needed.update(g.inputs)
    gates.reverse()

    uses: dict = {}
    for g in gates:
        for w in g.inputs:
            uses[w] = uses.get(w, 0) + 1
    for w in outputs:
        uses[w] = uses.get(w, 0) + 1

    # fan-out: hand out copy wires in consumption order
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

    final_gates = []
    for w in net.inputs:
        if w in copies_for:
            final_gates.append(copies_for[w])
    for g in gates:
        final_gates.append(Gate(g.outputs, g.kind,
                                tuple(consume(w) for w in g.inputs)))
        for w in g.outputs:
            if w in copies_for:
                final_gates.append(copies_for[w])

    out_idents = [_wire_ident(consume(w)) for w in outputs]
    final = result_template(out_idents)

    return gate_chain_source(final_gates, final)


# ---------- Turing machine instance ----------

@dataclass(frozen=True)
class IDTupleLayout:
    time_bits: int = 1
    state_bits: Optional[int] = None     # None: sized from the machine
    head_bits: int = 1
    cell_bits: int = 1

    def widths(self, m: TMSpec):
        ws = self.state_bits
        others = [q for q in m.states if q != m.accept]
        if ws is None:
            ws = max(1, (len(others) - 1).bit_length()) + 1
        if 2 ** (ws - 1) < len(others):
            raise TMError(f"state block of {ws} bits is too small")
        return self.time_bits, ws, self.head_bits, self.cell_bits


def _state_codes(m: TMSpec, ws: int):
    """Binary codes, little-endian; the accept state is the only one with
    the top bit set, so no other state code can be mistaken for it."""
    codes = {}
    nxt = 0
    for q in m.states:
        if q == m.accept:
            codes[q] = [0] * (ws - 1) + [1]
        else:
            codes[q] = [(nxt >> i) & 1 for i in range(ws - 1)] + [0]
            nxt += 1
    return codes


def _bits_le(value, width):
    return [(value >> i) & 1 for i in range(width)]


def _tuple_copy5_source(tag: str, n_bits: int) -> str:
    """A term turning one n-bit tuple closure into a 5-nested pair of
    five fresh tuple closures, one Boolean copy at a time."""
    z = [f"{tag}z{i}" for i in range(1, n_bits + 1)]
    inner = ""
    for name in z:
        inner += (f"letp {name}c1 {name}r1 = (#COPY5 {name}) in"
                  f" letp {name}c2 {name}r2 = {name}r1 in"
                  f" letp {name}c3 {name}r3 = {name}r2 in"
                  f" letp {name}c4 {name}c5 = {name}r3 in ")

    def tup(j):
        app = f"{tag}w{j}"
        for name in z:
            app = f"({app} {name}c{j})"
        return f"(\\{tag}w{j}. {app})"

    pairs = tup(5)
    for j in (4, 3, 2, 1):
        pairs = f"({tup(j)} , {pairs})"
    body = inner + pairs
    for name in reversed(z):
        body = f"(\\{name}. {body})"
    return f"(\\{tag}t. ({tag}t {body}))"


def _block_slices(widths):
    wt, ws, wh, wc = widths
    sizes = [wt, ws, wh, wc, 1]
    slices = []
    at = 0
    for s in sizes:
        slices.append(slice(at, at + s))
        at += s
    return slices, at


def _delta_outputs(net: _Net, m: TMSpec, codes, widths, u, v):
    """All N next-tuple wires from the three transition rules."""
    wt, ws, wh, wc = widths
    slices, _ = _block_slices(widths)
    uT, uS, uH, uC = u[slices[0]], u[slices[1]], u[slices[2]], u[slices[3]]
    ub = u[slices[4]][0]
    vT, vS, vH, vC = v[slices[0]], v[slices[1]], v[slices[2]], v[slices[3]]
    vb = v[slices[4]][0]

    # rule conditions
    cond_trans = net.and_(net.eq(uT, vT), net.eq(uH, uC))
    cond_comm = net.and_(net.eq(uT, net.inc(vT)), net.not_(net.eq(vH, vC)))

    # delta tables over (state code bits, read bit)
    sin = list(uS) + [ub]
    rows_q, rows_w, rows_m = [], [], []
    for q in m.states:
        for b in (0, 1):
            q2, b2, mv = m.delta[(q, b)]
            key = codes[q] + [b]
            rows_q.append((key, codes[q2]))
            rows_w.append((key, [b2]))
            rows_m.append((key, [1 if mv == "R" else 0]))
    next_state = [net.truth_table(sin, [(k, bits[i]) for k, bits in rows_q])
                  for i in range(ws)]
    write_bit = net.truth_table(sin, [(k, bits[0]) for k, bits in rows_w])
    move_right = net.truth_table(sin, [(k, bits[0]) for k, bits in rows_m])

    trans = (net.inc(uT) + next_state
             + net.mux_vec(move_right, net.inc(uH), net.dec(uH))
             + list(uH) + [write_bit])
    comm = list(uT) + list(uS) + list(uH) + list(vC) + [vb]
    null = ([net.const(b) for b in _bits_le(0, wt)]
            + [net.const(b) for b in codes[m.initial]]
            + [net.const(b) for b in _bits_le(0, wh)]
            + [net.const(b) for b in _bits_le(0, wc)]
            + [net.const0()])

    return net.mux_vec(cond_trans, trans,
                       net.mux_vec(cond_comm, comm, null))


def _phi_source(m: TMSpec, codes, widths) -> str:
    """The transition term: two five-way copies of the argument ID, one
    circuit per output block, repacked into a fresh tuple closure."""
    slices, n_bits = _block_slices(widths)
    block_names = ["T", "S", "H", "C", "b"]

    def block_fn(index):
        a = [f"au{i}" for i in range(1, n_bits + 1)]
        c = [f"av{i}" for i in range(1, n_bits + 1)]
        net = _Net([w for w in a + c])
        outs = _delta_outputs(net, m, codes, widths, a, c)[slices[index]]

        def result(idents):
            app = f"bt{index}_w"
            for ident in idents:
                app = f"({app} {ident})"
            return f"(\\bt{index}_w. {app})"

        body = _emit_multi(net, outs, result)
        for name in reversed(c):
            body = f"(\\{_wire_ident(name)}. {body})"
        body = f"(phx{index}_c {body})"
        for name in reversed(a):
            body = f"(\\{_wire_ident(name)}. {body})"
        return f"(\\phx{index}_a.(\\phx{index}_c. (phx{index}_a {body})))"

    copy_u = _tuple_copy5_source("tcu", n_bits)
    copy_v = _tuple_copy5_source("tcv", n_bits)
    destructure = (f"letp phi_u1 phi_ur1 = ({copy_u} phi_p) in"
                   f" letp phi_u2 phi_ur2 = phi_ur1 in"
                   f" letp phi_u3 phi_ur3 = phi_ur2 in"
                   f" letp phi_u4 phi_u5 = phi_ur3 in"
                   f" letp phi_v1 phi_vr1 = ({copy_v} phi_p) in"
                   f" letp phi_v2 phi_vr2 = phi_vr1 in"
                   f" letp phi_v3 phi_vr3 = phi_vr2 in"
                   f" letp phi_v4 phi_v5 = phi_vr3 in ")

    apply_blocks = "phi_w"
    for i in range(5):
        apply_blocks = f"({apply_blocks} (({block_fn(i)} phi_u{i + 1}) phi_v{i + 1}))"

    # consumer: unpack each block tuple and rebuild the flat tuple
    widths_list = [widths[0], widths[1], widths[2], widths[3], 1]
    z = [f"rz{i}" for i in range(1, n_bits + 1)]
    final_app = "fin_w"
    for name in z:
        final_app = f"({final_app} {name})"
    consumer_body = f"(\\fin_w. {final_app})"
    at = n_bits
    for i in (4, 3, 2, 1, 0):
        w = widths_list[i]
        binders = z[at - w:at]
        at -= w
        inner = consumer_body
        for name in reversed(binders):
            inner = f"(\\{name}. {inner})"
        consumer_body = f"(rw_{block_names[i]} {inner})"
    consumer = consumer_body
    for i in (4, 3, 2, 1, 0):
        consumer = f"(\\rw_{block_names[i]}. {consumer})"

    return (f"(\\phi_p. {destructure}"
            f"((\\phi_w. {apply_blocks}) {consumer}))")


def _extract_source(m: TMSpec, codes, widths, hole: str) -> str:
    """Unpack a final ID tuple and test its state block for the accept
    code, discarding the rest."""
    slices, n_bits = _block_slices(widths)
    z = [f"ez{i}" for i in range(1, n_bits + 1)]
    net = _Net(z)
    s_wires = z[slices[1]]
    out = net.eq_const(s_wires, codes[m.accept])
    body = _emit_multi(net, [out], lambda idents: idents[0])
    for name in reversed(z):
        body = f"(\\{_wire_ident(name)}. {body})"
    return f"((\\ext_t. (ext_t {body})) {hole})"


def _initial_id_source(m: TMSpec, codes, widths, input_bits: str) -> str:
    """The initial ID tuple for the cell addressed by the cascade-bound
    z bits: time zero, initial state, head at cell zero, and the cell
    contents selected from the input string by address."""
    wt, ws, wh, wc = widths
    z = [f"iz{i}" for i in range(1, wc + 1)]
    net = _Net(z)
    ones = [addr for addr, ch in enumerate(input_bits) if ch == "1"]
    if any(addr >= 2 ** wc for addr in ones):
        raise TMError("input does not fit on the addressed tape")
    if ones:
        content = net.any_or([net.eq_const(z, _bits_le(addr, wc))
                              for addr in ones])
    else:
        content = net.const0()
    outs = ([net.const(b) for b in _bits_le(0, wt)]
            + [net.const(b) for b in codes[m.initial]]
            + [net.const(b) for b in _bits_le(0, wh)]
            + list(z)
            + [content])

    def result(idents):
        app = "init_w"
        for ident in idents:
            app = f"({app} {ident})"
        return f"(\\init_w. {app})"

    body = _emit_multi(net, outs, result)
    return body


def gen_exptime_instance(m: TMSpec, input_bits: str,
                         layout: IDTupleLayout = IDTupleLayout(),
                         k: int = 1,
                         doublings: Optional[int] = None) -> HardnessInstance:
    """The Turing-machine construction at analysis level k >= 1."""
    if k < 1:
        raise ValueError("k must be at least 1")
    widths = layout.widths(m)
    wt, ws, wh, wc = widths
    if len(input_bits) > 2 ** wc:
        raise TMError("input longer than the addressed tape")
    codes = _state_codes(m, ws)
    if doublings is None:
        doublings = wt

    phi = _phi_source(m, codes, widths)
    init = _initial_id_source(m, codes, widths, input_bits)
    # explicit label 1: padding application funneling the initial tuples
    init_padded = f"(((\\padi_x. padi_x) {init}))^1"

    iterator = phi
    for i in range(1, doublings + 1):
        iterator = (f"((\\dbl_f{i}.(\\dbl_x{i}."
                    f" (dbl_f{i} (dbl_f{i} dbl_x{i})))) {iterator})")
    final_id = f"({iterator} {init_padded})"

    extract = _extract_source(m, codes, widths, final_id)
    # explicit label 2: padding application around the widget
    body = f"(((\\padw_x. padw_x) (#WIDGET {extract})))^2"
    source = _cascade([_wire_ident(f"iz{i}") for i in range(1, wc + 1)], body)

    program = syntax.parse(source)
    program = pad_for_k(program, k - 1, {1, 2})
    query, twit, fwit = locate_widget(program)
    meta = {"widths": widths, "doublings": doublings,
            "state_codes": {q: codes[q] for q in m.states}}
    return HardnessInstance(program, query, twit, fwit, k, source, (1, 2),
                            meta)
