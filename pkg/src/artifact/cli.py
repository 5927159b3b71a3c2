"""Command-line front end: evaluation, analyses, queries, generators,
and verification, with byte-stable output formats.

One invocation is one command.  Cache dumps print one line per nonempty
entry, sorted, with contours rendered oldest-first and dot-separated;
the JSON format carries exactly the same information.  Exit codes: 0
success (or "flows" / "agrees"), 1 negative answer or mismatch, 2 input
or format errors, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import encodings, hardness, instrument, interp, kcfa, monovariant, syntax
from .encodings import CircuitError
from .hardness import TMError
from .instrument import format_contour
from .interp import Diverged
from .monovariant import UNKNOWN
from .syntax import ParseError


class CommandFailure(Exception):
    """Abort the command with an exit code and a one-line message."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


# ---------- Input plumbing ----------

def read_program_text(arg: str) -> str:
    """A program argument is a file path when one exists, else inline text."""
    if os.path.isfile(arg):
        with open(arg, "r", encoding="utf-8") as handle:
            return handle.read()
    return arg


def read_data_file(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise CommandFailure(2, f"no such {what} file: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def parse_term(source: str):
    try:
        return syntax.parse(source)
    except (ParseError, ValueError) as exc:
        raise CommandFailure(2, f"parse error: {exc}")


def parse_contour_text(text: str) -> tuple:
    if text in ("", "<>"):
        return ()
    try:
        return tuple(int(part) for part in text.split("."))
    except ValueError:
        raise CommandFailure(2, f"bad contour: {text!r}")


def parse_bits(text: str, what: str) -> str:
    if any(ch not in "01" for ch in text):
        raise CommandFailure(2, f"{what} must be a string of 0s and 1s")
    return text


# ---------- Value and dump formatting ----------

def format_cvalue(cv) -> str:
    if cv.cenv:
        env = ",".join(f"{name}={format_contour(delta)}"
                       for name, delta in cv.cenv)
        return f"lam@{cv.lam.label} [{env}]"
    return f"lam@{cv.lam.label}"


def format_closure(clo, full: bool) -> str:
    if not full:
        return syntax.pretty_print(clo.lam)

    def go(c):
        base = syntax.pretty_print(c.lam)
        if not c.env:
            return base
        inner = ", ".join(f"{name}={go(val)}" for name, val in c.env)
        return f"{base} [{inner}]"

    return go(clo)


def _sorted_cvalues(vals):
    return sorted(vals, key=lambda cv: (cv.lam.label, cv.cenv))


def dump_poly_text(result_cache: dict, bind_cache: dict) -> str:
    """Shared dump for kCFA caches and exact caches viewed as singletons."""
    lines = []
    for label, delta in sorted(result_cache):
        vals = result_cache[(label, delta)]
        if not vals:
            continue
        body = ", ".join(format_cvalue(cv) for cv in _sorted_cvalues(vals))
        lines.append(f"C({label},{format_contour(delta)}) = {{ {body} }}")
    for name, delta in sorted(bind_cache):
        vals = bind_cache[(name, delta)]
        if not vals:
            continue
        body = ", ".join(format_cvalue(cv) for cv in _sorted_cvalues(vals))
        lines.append(f"r({name},{format_contour(delta)}) = {{ {body} }}")
    return "".join(line + "\n" for line in lines)


def dump_poly_json(result_cache: dict, bind_cache: dict) -> str:
    def value(cv):
        return {"lam": cv.lam.label,
                "env": [[name, list(delta)] for name, delta in cv.cenv]}

    def entries(table, key_name):
        out = []
        for key in sorted(table):
            vals = table[key]
            if not vals:
                continue
            out.append({key_name: key[0], "contour": list(key[1]),
                        "values": [value(cv) for cv in _sorted_cvalues(vals)]})
        return out

    obj = {"result": entries(result_cache, "label"),
           "bind": entries(bind_cache, "name")}
    return json.dumps(obj, indent=2) + "\n"


def _as_value_sets(cache) -> tuple:
    """Normalize an exact or abstract cache to set-valued tables."""
    if isinstance(cache, instrument.ExactCache):
        return ({key: {val} for key, val in cache.result_cache.items()},
                {key: {val} for key, val in cache.bind_cache.items()})
    return cache.result_cache, cache.bind_cache


def _mono_set_text(entry) -> str:
    if entry is UNKNOWN:
        return "{*}"
    body = ", ".join(f"lam@{lam.label}"
                     for lam in sorted(entry, key=lambda l: l.label))
    return f"{{ {body} }}"


def dump_mono_text(cache) -> str:
    lines = []
    for label in sorted(cache.result_cache):
        entry = cache.result_cache[label]
        if entry is not UNKNOWN and not entry:
            continue
        lines.append(f"C({label}) = " + _mono_set_text(entry))
    for name in sorted(cache.bind_cache):
        entry = cache.bind_cache[name]
        if entry is not UNKNOWN and not entry:
            continue
        lines.append(f"r({name}) = " + _mono_set_text(entry))
    return "".join(line + "\n" for line in lines)


def dump_mono_json(cache) -> str:
    def entry_json(entry):
        if entry is UNKNOWN:
            return "*"
        return sorted(lam.label for lam in entry)

    obj = {"result": [{"label": label,
                       "values": entry_json(cache.result_cache[label])}
                      for label in sorted(cache.result_cache)
                      if cache.result_cache[label]],
           "bind": [{"name": name,
                     "values": entry_json(cache.bind_cache[name])}
                    for name in sorted(cache.bind_cache)
                    if cache.bind_cache[name]]}
    return json.dumps(obj, indent=2) + "\n"


def dump_cache(kind: str, cache, fmt: str) -> str:
    if kind in ("0cfa", "sca", "sub0cfa"):
        return dump_mono_text(cache) if fmt == "text" else dump_mono_json(cache)
    result, bind = _as_value_sets(cache)
    if fmt == "text":
        return dump_poly_text(result, bind)
    return dump_poly_json(result, bind)


# ---------- Analysis dispatch ----------

ANALYSIS_KINDS = ("0cfa", "sca", "sub0cfa", "kcfa", "exact")


def run_analysis(kind: str, program, args):
    try:
        if kind == "0cfa":
            return monovariant.analyze_0cfa(program)
        if kind == "sca":
            return monovariant.analyze_sca(program)
        if kind == "sub0cfa":
            return monovariant.analyze_sub0cfa(program, args.bound)
        if kind == "kcfa":
            return kcfa.analyze_kcfa(program, args.k)
        if kind == "exact":
            outcome = instrument.run_instrumented(program, args.fuel)
            if isinstance(outcome, Diverged):
                raise CommandFailure(3, "DIVERGED")
            return outcome
    except ValueError as exc:
        raise CommandFailure(2, str(exc))
    raise CommandFailure(2, f"unknown analysis kind: {kind}")


def check_cache(kind: str, cache, program, k: int) -> bool:
    if kind in ("0cfa", "sub0cfa"):
        return monovariant.check_mono_acceptable(cache, program, "directional")
    if kind == "sca":
        return monovariant.check_mono_acceptable(cache, program, "bidirectional")
    if kind == "kcfa":
        return kcfa.check_kcfa_acceptable(cache, program, k)
    return instrument.check_exact_acceptable(cache, program)


# ---------- Commands ----------

def cmd_eval(args) -> int:
    program = parse_term(read_program_text(args.source))
    outcome = interp.eval_std(program, (), args.fuel)
    if isinstance(outcome, Diverged):
        print("DIVERGED")
        return 3
    print(format_closure(outcome.value, args.full_closure))
    return 0


def cmd_trace(args) -> int:
    program = parse_term(read_program_text(args.source))
    outcome = instrument.run_instrumented(program, args.fuel)
    if isinstance(outcome, Diverged):
        print("DIVERGED")
        return 3
    result, bind = _as_value_sets(outcome)
    if args.format == "text":
        sys.stdout.write(dump_poly_text(result, bind))
    else:
        sys.stdout.write(dump_poly_json(result, bind))
    return 0


def cmd_analyze(args) -> int:
    program = parse_term(read_program_text(args.source))
    cache = run_analysis(args.analysis, program, args)
    sys.stdout.write(dump_cache(args.analysis, cache, args.format))
    return 0


def _query_key(args, program):
    """The queried site: an integer label or a variable name."""
    text = args.label
    if text.isdigit():
        label = int(text)
        if syntax.find_label(program, label) is None:
            raise CommandFailure(2, f"no subterm labeled {label}")
        return label
    if text not in syntax.bound_vars(program):
        raise CommandFailure(2, f"no bound variable named {text!r}")
    return text


def cmd_query(args) -> int:
    program = parse_term(read_program_text(args.source))
    value = args.value
    if not any(lam.label == value for lam in syntax.lams(program)):
        raise CommandFailure(2, f"no abstraction labeled {value}")
    key = _query_key(args, program)
    contour = None if args.contour is None else parse_contour_text(args.contour)
    kind = args.analysis

    if kind in ("0cfa", "sca", "sub0cfa"):
        if contour is not None:
            raise CommandFailure(2, f"{kind} caches have no contours")
        cache = run_analysis(kind, program, args)
        flows = monovariant.mono_flow_query(cache, value, key)
        where = f"C({key})" if isinstance(key, int) else f"r({key})"
    else:
        cache = run_analysis(kind, program, args)
        result, bind = _as_value_sets(cache)
        if contour is None and kind == "exact":
            contour = ()
        if isinstance(key, int):
            if contour is None:
                flows = kcfa.kcfa_flow_query_any(cache, value, key)
                where = f"C({key})"
            else:
                flows = any(cv.lam.label == value
                            for cv in result.get((key, contour), ()))
                where = f"C({key},{format_contour(contour)})"
        else:
            if contour is None:
                flows = any(cv.lam.label == value
                            for (name, _), vals in bind.items() if name == key
                            for cv in vals)
                where = f"r({key})"
            else:
                flows = any(cv.lam.label == value
                            for cv in bind.get((key, contour), ()))
                where = f"r({key},{format_contour(contour)})"

    verdict = "flows into" if flows else "does not flow into"
    print(f"lam@{value} {verdict} {where}")
    return 0 if flows else 1


def _print_generated(header_lines, program) -> None:
    for line in header_lines:
        print(f";; {line}")
    print(syntax.pretty_print(program, with_labels=True))


def _load_circuit(path: str):
    try:
        return encodings.parse_circuit_file(read_data_file(path, "circuit"))
    except CircuitError as exc:
        raise CommandFailure(2, f"circuit error: {exc}")


def _load_formula(path: str):
    spec = _load_circuit(path)
    try:
        return hardness.FormulaSpec(len(spec.inputs), spec)
    except CircuitError as exc:
        raise CommandFailure(2, f"formula error: {exc}")


def _load_machine(path: str):
    try:
        return hardness.parse_tm_file(read_data_file(path, "machine"))
    except TMError as exc:
        raise CommandFailure(2, f"machine error: {exc}")


def _tm_layout(args):
    return hardness.IDTupleLayout(time_bits=args.time_bits,
                                  state_bits=args.state_bits,
                                  head_bits=args.head_bits,
                                  cell_bits=args.cell_bits)


def cmd_gen_circuit(args) -> int:
    spec = _load_circuit(args.file)
    bits_text = parse_bits(args.inputs, "--inputs")
    if len(bits_text) != len(spec.inputs):
        raise CommandFailure(2, f"circuit has {len(spec.inputs)} inputs, "
                                f"got {len(bits_text)} bits")
    try:
        compiled = encodings.compile_circuit(spec, [ch == "1" for ch in bits_text])
    except CircuitError as exc:
        raise CommandFailure(2, f"circuit error: {exc}")
    header = ["generator: circuit",
              f"inputs: {bits_text}",
              f"query-label: {compiled.query_label}",
              f"true-witness: {compiled.true_witness}",
              f"false-witness: {compiled.false_witness}"]
    _print_generated(header, compiled.program)
    return 0


def cmd_gen_sat(args) -> int:
    phi = _load_formula(args.file)
    try:
        inst = hardness.gen_sat_instance(phi, args.k)
    except (CircuitError, ValueError) as exc:
        raise CommandFailure(2, str(exc))
    header = ["generator: sat",
              f"variables: {phi.n}",
              f"k: {inst.k}",
              f"query-label: {inst.query_label}",
              f"true-witness: {inst.true_witness}",
              f"false-witness: {inst.false_witness}",
              "pad-sites: " + " ".join(str(s) for s in inst.pad_sites)]
    _print_generated(header, inst.program)
    return 0


def cmd_gen_tm(args) -> int:
    machine = _load_machine(args.file)
    input_bits = parse_bits(args.input, "--input")
    try:
        inst = hardness.gen_exptime_instance(machine, input_bits,
                                             layout=_tm_layout(args),
                                             k=args.k,
                                             doublings=args.doublings)
    except (TMError, ValueError) as exc:
        raise CommandFailure(2, str(exc))
    wt, ws, wh, wc = inst.meta["widths"]
    header = ["generator: tm",
              f"input: {input_bits}",
              f"k: {inst.k}",
              f"query-label: {inst.query_label}",
              f"true-witness: {inst.true_witness}",
              f"false-witness: {inst.false_witness}",
              f"layout: time={wt} state={ws} head={wh} cell={wc}",
              f"doublings: {inst.meta['doublings']}",
              "state codes are little-endian bit strings; the accept state "
              "carries the only code with the top bit set"]
    for state in machine.states:
        code = "".join(str(b) for b in inst.meta["state_codes"][state])
        header.append(f"state-code {state}: {code}")
    header.append("pad-sites: " + " ".join(str(s) for s in inst.pad_sites))
    _print_generated(header, inst.program)
    return 0


def cmd_linear(args) -> int:
    program = parse_term(read_program_text(args.source))
    if syntax.is_linear(program):
        print("linear")
        return 0
    print("not linear")
    return 1


def cmd_verify_analysis(args) -> int:
    program = parse_term(read_program_text(args.source))
    cache = run_analysis(args.analysis, program, args)
    if not check_cache(args.analysis, cache, program, args.k):
        print("computed cache fails acceptability")
        return 1
    if args.cache is None:
        print("acceptable")
        return 0
    supplied = read_data_file(args.cache, "cache")
    expected = dump_cache(args.analysis, cache, "text")
    sup_lines = [ln.rstrip() for ln in supplied.splitlines() if ln.strip()]
    exp_lines = [ln.rstrip() for ln in expected.splitlines() if ln.strip()]
    if sup_lines == exp_lines:
        print("cache matches the computed analysis")
        return 0
    missing = [ln for ln in exp_lines if ln not in sup_lines]
    extra = [ln for ln in sup_lines if ln not in exp_lines]
    print("cache differs from the computed analysis:")
    for line in missing:
        print(f"- {line}")
    for line in extra:
        print(f"+ {line}")
    return 1


def _report_oracle(kind: str, analysis: bool, oracle: bool,
                   yes: str, no: str) -> int:
    print(f"{kind} analysis: {yes if analysis else no}")
    print(f"{kind} oracle:   {yes if oracle else no}")
    if analysis == oracle:
        print("agree")
        return 0
    print("MISMATCH")
    return 1


def cmd_verify_sat(args) -> int:
    phi = _load_formula(args.file)
    try:
        inst = hardness.gen_sat_instance(phi, args.k)
    except (CircuitError, ValueError) as exc:
        raise CommandFailure(2, str(exc))
    cache = kcfa.analyze_kcfa(inst.program, inst.k)
    analysis = kcfa.kcfa_flow_query_any(cache, inst.true_witness,
                                        inst.query_label)
    oracle = hardness.sat_oracle(phi)
    return _report_oracle("sat", analysis, oracle, "satisfiable",
                          "unsatisfiable")


def cmd_verify_tm(args) -> int:
    machine = _load_machine(args.file)
    input_bits = parse_bits(args.input, "--input")
    try:
        inst = hardness.gen_exptime_instance(machine, input_bits,
                                             layout=_tm_layout(args),
                                             k=args.k,
                                             doublings=args.doublings)
        oracle = hardness.tm_oracle(machine, input_bits, args.max_steps)
    except (TMError, ValueError) as exc:
        raise CommandFailure(2, str(exc))
    cache = kcfa.analyze_kcfa(inst.program, inst.k)
    analysis = kcfa.kcfa_flow_query_any(cache, inst.true_witness,
                                        inst.query_label)
    return _report_oracle("tm", analysis, oracle, "accept", "reject")


# ---------- Argument parsing ----------

def _positive(kind, floor, text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{kind} must be an integer")
    if value < floor:
        raise argparse.ArgumentTypeError(f"{kind} must be at least {floor}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact",
        description="Flow analyses for the labeled lambda calculus: "
                    "evaluation, caches, flow queries, hardness generators, "
                    "and verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def fuel_flag(p):
        p.add_argument("--fuel", type=lambda t: _positive("fuel", 1, t),
                       default=100000, help="application step budget")

    def format_flag(p):
        p.add_argument("--format", choices=("text", "json"), default="text")

    def analysis_flags(p):
        p.add_argument("--analysis", choices=ANALYSIS_KINDS, default="0cfa")
        p.add_argument("--k", type=lambda t: _positive("k", 0, t), default=0,
                       help="contour length bound for kcfa")
        p.add_argument("--bound", type=lambda t: _positive("bound", 1, t),
                       default=1, help="per-key update budget for sub0cfa")
        fuel_flag(p)

    def tm_flags(p):
        p.add_argument("--input", default="", help="binary input string")
        p.add_argument("--time-bits", type=lambda t: _positive("time-bits", 1, t),
                       default=1)
        p.add_argument("--state-bits", type=lambda t: _positive("state-bits", 1, t),
                       default=None)
        p.add_argument("--head-bits", type=lambda t: _positive("head-bits", 1, t),
                       default=1)
        p.add_argument("--cell-bits", type=lambda t: _positive("cell-bits", 1, t),
                       default=1)
        p.add_argument("--doublings", type=lambda t: _positive("doublings", 0, t),
                       default=None)

    p = sub.add_parser("eval", help="evaluate a closed program")
    p.add_argument("source", help="program file or inline source")
    p.add_argument("--full-closure", action="store_true",
                   help="print closure environments too")
    fuel_flag(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trace", help="run instrumented, dump the exact cache")
    p.add_argument("source")
    fuel_flag(p)
    format_flag(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("analyze", help="run an analysis, dump its cache")
    p.add_argument("source")
    analysis_flags(p)
    format_flag(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("query", help="ask whether an abstraction flows "
                                     "into a site")
    p.add_argument("source")
    p.add_argument("--value", type=int, required=True,
                   help="label of the abstraction")
    p.add_argument("--label", required=True,
                   help="site label, or a variable name for binding queries")
    p.add_argument("--contour", default=None,
                   help="dot-separated contour, oldest first; <> for empty")
    analysis_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("gen", help="generate instance programs")
    gen_sub = p.add_subparsers(dest="generator", required=True)

    g = gen_sub.add_parser("circuit", help="compile a circuit on fixed inputs")
    g.add_argument("file", help="circuit netlist file")
    g.add_argument("--inputs", required=True, help="binary input string")
    g.set_defaults(func=cmd_gen_circuit)

    g = gen_sub.add_parser("sat", help="satisfiability instance for kCFA")
    g.add_argument("file", help="formula circuit file with inputs x1..xn")
    g.add_argument("--k", type=lambda t: _positive("k", 1, t), default=1)
    g.set_defaults(func=cmd_gen_sat)

    g = gen_sub.add_parser("tm", help="Turing machine instance for kCFA")
    g.add_argument("file", help="machine description file")
    g.add_argument("--k", type=lambda t: _positive("k", 1, t), default=1)
    tm_flags(g)
    g.set_defaults(func=cmd_gen_tm)

    p = sub.add_parser("linear", help="check variable linearity")
    p.add_argument("source")
    p.set_defaults(func=cmd_linear)

    p = sub.add_parser("verify", help="acceptability and oracle checks")
    ver_sub = p.add_subparsers(dest="checker", required=True)

    v = ver_sub.add_parser("analysis", help="check a cache against a program")
    v.add_argument("source")
    v.add_argument("--cache", default=None,
                   help="text dump to compare against the computed cache")
    analysis_flags(v)
    v.set_defaults(func=cmd_verify_analysis)

    v = ver_sub.add_parser("sat", help="generated instance vs SAT oracle")
    v.add_argument("file")
    v.add_argument("--k", type=lambda t: _positive("k", 1, t), default=1)
    v.set_defaults(func=cmd_verify_sat)

    v = ver_sub.add_parser("tm", help="generated instance vs machine oracle")
    v.add_argument("file")
    v.add_argument("--k", type=lambda t: _positive("k", 1, t), default=1)
    v.add_argument("--max-steps", type=lambda t: _positive("max-steps", 1, t),
                   default=10000)
    tm_flags(v)
    v.set_defaults(func=cmd_verify_tm)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandFailure as failure:
        if failure.code == 3:
            print(failure.message)
        else:
            print(f"error: {failure.message}", file=sys.stderr)
        return failure.code


def run():
    raise SystemExit(main())


if __name__ == "__main__":
    run()
