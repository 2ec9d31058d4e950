"""Batch command-line front end.

Every invocation runs one command and prints exactly one JSON report::

    {"command": ..., "verdict": ..., "certificate": ..., "bounds_used": ..., "elapsed_ms": ...}

Exit codes: 0 affirmative or value, 1 negative or refuted, 2 unknown,
64 usage error, 65 malformed input, 70 size limit.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Any, Sequence

from . import eqlogic, finalg, ordalg, quantalg, variety
from .errors import (
    AlgebraError, MalformedInput, MalformedProof, SizeLimitExceeded,
)
from .sigterm import Signature, VarSet, format_term

EXIT_OK, EXIT_NO, EXIT_UNKNOWN = 0, 1, 2
EXIT_USAGE, EXIT_DATA, EXIT_LIMIT = 64, 65, 70

VERDICT_EXIT = {"true": EXIT_OK, "value": EXIT_OK, "proved": EXIT_OK,
                "false": EXIT_NO, "refuted": EXIT_NO, "unknown": EXIT_UNKNOWN}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- loading ----------------------------------------------------------------------

def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path} is not valid JSON: {exc}") from exc


def _signature_arg(text: str | None) -> Signature | None:
    """``"*/2,f/1"`` or a JSON file holding [["*",2],["f",1]]."""
    if text is None:
        return None
    if text.endswith(".json"):
        data = _read_json(text)
        if isinstance(data, dict):
            data = data.get("signature", [])
    else:
        data = []
        for item in filter(None, (s.strip() for s in text.split(","))):
            name, sep, arity = item.rpartition("/")
            if not sep or not name:
                raise MalformedInput(f"bad signature entry {item!r}; use name/arity")
            data.append((name, arity))
    try:
        return Signature(tuple((str(n), int(a)) for n, a in data))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MalformedInput):
            raise
        raise MalformedInput(f"bad signature: {exc}") from exc


def _load_list(path: str, loader, sig):
    data = _read_json(path)
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        raise MalformedInput(f"{path} must hold a JSON array")
    return [loader(item, sig) for item in data]


def _algebra(path, max_carrier):
    A = finalg.FiniteAlgebra.from_json(_read_json(path))
    _cap(A.size, max_carrier)
    return A


def _cap(size, max_carrier):
    if size > max_carrier:
        raise SizeLimitExceeded(f"carrier of size {size} exceeds --max-carrier {max_carrier}")


def _pairs(args):
    return [tuple(p) for p in (args.pair or [])]


# --- certificates -------------------------------------------------------------------

def _assignment(X: VarSet, h):
    return None if h is None else dict(zip(X.names, h))


def _sat_report(res, X):
    if res:
        return "true", None
    return "false", {"assignment": _assignment(X, res.witness)}


def _matrix(m):
    return [[quantalg.format_ext(x) for x in row] for row in m]


# --- commands -------------------------------------------------------------------------

def cmd_sat(args):
    A = _algebra(args.algebra, args.max_carrier)
    eq = variety.TermEquation.from_json(_read_json(args.equation), A.sig)
    return _sat_report(variety.satisfies_equation(A, eq), eq.vars)


def cmd_ineq_sat(args):
    A = ordalg.OrderedAlgebra.from_json(_read_json(args.algebra))
    _cap(A.size, args.max_carrier)
    ineq = ordalg.TermInequation.from_json(_read_json(args.inequation), A.sig)
    return _sat_report(ordalg.satisfies_inequation(A, ineq), ineq.vars)


def cmd_qsat(args):
    A = quantalg.QuantAlgebra.from_json(_read_json(args.algebra))
    _cap(A.size, args.max_carrier)
    eq = quantalg.ClusteredEquation.from_json(_read_json(args.equation), A.sig)
    return _sat_report(quantalg.satisfies_clustered_equation(A, eq), eq.vars)


def cmd_congr(args):
    A = _algebra(args.algebra, args.max_carrier)
    if args.all:
        lattice = finalg.all_congruences(A, max_size=min(args.max_carrier, finalg.DEFAULT_MAX_LATTICE))
        return "value", {"congruences": [[list(b) for b in th.blocks()] for th in lattice]}
    theta = finalg.congruence_generated(A, _pairs(args), max_size=args.max_carrier)
    return "value", {"blocks": [list(b) for b in theta.blocks()], "labels": list(theta.labels)}


def cmd_ord_congr(args):
    A = ordalg.OrderedAlgebra.from_json(_read_json(args.algebra))
    _cap(A.size, args.max_carrier)
    r = ordalg.stable_preorder_generated(A, _pairs(args))
    pairs = [[a, b] for a in range(A.size) for b in range(A.size) if a != b and r.rel[a][b]]
    return "value", {"preorder": pairs}


def _constraints(args):
    out = []
    for a, b, eps in args.constraint or []:
        try:
            out.append((int(a), int(b), quantalg.ext(eps)))
        except ValueError as exc:
            if isinstance(exc, AlgebraError):
                raise
            raise MalformedInput(f"bad constraint {(a, b, eps)}") from exc
    return out


def cmd_qcongr(args):
    A = quantalg.QuantAlgebra.from_json(_read_json(args.algebra))
    _cap(A.size, args.max_carrier)
    p = quantalg.quant_congruence_generated(A, _constraints(args))
    return "value", {"p": _matrix(p.p)}


def cmd_quotient(args):
    data = _read_json(args.algebra)
    if "d" in data:
        A = quantalg.QuantAlgebra.from_json(data)
        _cap(A.size, args.max_carrier)
        p = quantalg.quant_congruence_generated(A, _constraints(args))
        Q = quantalg.quotient_quant(A, p)
        return "value", {"algebra": Q.algebra.to_json(), "surjection": list(Q.surjection.map)}
    if "leq" in data:
        A = ordalg.OrderedAlgebra.from_json(data)
        _cap(A.size, args.max_carrier)
        Q = ordalg.quotient_ordered(A, ordalg.stable_preorder_generated(A, _pairs(args)))
        return "value", {"algebra": Q.algebra.to_json(), "surjection": list(Q.surjection.map)}
    A = _algebra(args.algebra, args.max_carrier)
    Q = finalg.quotient(A, finalg.congruence_generated(A, _pairs(args), max_size=args.max_carrier))
    return "value", {"algebra": Q.algebra.to_json(), "surjection": list(Q.surjection.map)}


def cmd_hsp(args):
    A = _algebra(args.cls, args.max_carrier)
    B = _algebra(args.candidate, args.max_carrier)
    res = variety.hsp_member(B, A, max_elements=args.max_universe)
    if res:
        return "true", {"free_size": res.free.algebra.size,
                        "witness_terms": [format_term(t, res.free.vars) for t in res.free.witness_terms],
                        "surjection": list(res.surjection.map)}
    eq = res.equation
    return "false", {"equation": eq.to_json()}


def cmd_free(args):
    A = _algebra(args.algebra, args.max_carrier)
    F = variety.free_algebra_in_variety(A, args.n, max_elements=args.max_universe)
    return "value", {"algebra": F.algebra.to_json(), "generators": list(F.generators),
                     "witness_terms": [format_term(t, F.vars) for t in F.witness_terms]}


def cmd_eventual(args):
    A = _algebra(args.algebra, args.max_carrier)
    seq = _load_list(args.sequence, variety.TermEquation.from_json, A.sig)
    i0 = variety.eventual_satisfaction(A, seq)
    if i0 is None:
        return "false", {"i0": None}
    return "value", {"i0": i0}


def _equational_problem(args):
    sig = _signature_arg(args.signature)
    gamma = _load_list(args.axioms, variety.TermEquation.from_json, sig) if args.axioms else []
    goal = variety.TermEquation.from_json(_read_json(args.goal), sig)
    return sig, gamma, goal


def _depth(args, goal):
    need = max(goal.lhs.depth, goal.rhs.depth)
    if args.depth is None:
        return need
    if args.depth < need:
        raise UsageError(f"--depth {args.depth} is below the goal's term depth {need}")
    return args.depth


def cmd_prove(args):
    sig, gamma, goal = _equational_problem(args)
    depth = _depth(args, goal)
    proof = eqlogic.derive(gamma, goal, depth, sig, max_universe=args.max_universe)
    if proof is None:
        return "unknown", None
    return "proved", {"proof": proof.to_json()}


def cmd_entails(args):
    sig, gamma, goal = _equational_problem(args)
    v = eqlogic.semantic_entails(gamma, goal, max_model_size=args.max_model, depth=_depth(args, goal),
                                 sig=sig, max_universe=args.max_universe)
    if v.proved:
        return "proved", {"proof": v.proof.to_json()}
    if v.refuted:
        return "refuted", {"countermodel": v.countermodel.to_json(),
                           "assignment": _assignment(goal.vars, v.assignment)}
    return "unknown", None


def _quant_problem(args):
    sig = _signature_arg(args.signature)
    gamma = _load_list(args.axioms, quantalg.QuantEquation.from_json, sig) if args.axioms else []
    goal = quantalg.QuantEquation.from_json(_read_json(args.goal), sig)
    return sig, gamma, goal


def cmd_qprove(args):
    sig, gamma, goal = _quant_problem(args)
    v = quantalg.quant_entails(gamma, goal, _depth(args, goal), sig, max_universe=args.max_universe)
    if v.proved:
        return "proved", {"proof": v.proof.to_json(), "best": quantalg.format_ext(v.best)}
    return "unknown", {"best": quantalg.format_ext(v.best)}


def cmd_qentails(args):
    sig, gamma, goal = _quant_problem(args)
    v = quantalg.quant_semantic_entails(gamma, goal, _depth(args, goal), sig,
                                        max_model_size=args.max_model, max_universe=args.max_universe)
    if v.status == "refuted":
        return "refuted", {"countermodel": v.countermodel.to_json(),
                           "assignment": _assignment(goal.vars, v.assignment)}
    if v.proved:
        return "proved", {"proof": v.proof.to_json(), "best": quantalg.format_ext(v.best)}
    return "unknown", {"best": quantalg.format_ext(v.best)}


def cmd_creflexive(args):
    data = _read_json(args.map)
    try:
        A = quantalg.QuantAlgebra.from_json(data["domain"])
        B = quantalg.QuantAlgebra.from_json(data["codomain"])
        f = tuple(int(x) for x in data["map"])
    except (KeyError, TypeError) as exc:
        raise MalformedInput(f"map file needs domain, codomain and map: {exc}") from exc
    _cap(max(A.size, B.size), args.max_carrier)
    e = quantalg.QuantHomomorphism(A, B, f)
    if len(f) != A.size or any(not 0 <= x < B.size for x in f) or not e.is_homomorphism():
        raise MalformedInput("map is not a homomorphism between the given algebras")
    res = quantalg.is_c_reflexive(e, quantalg.parse_c(args.c))
    if res:
        return "true", None
    return "false", {"subset": list(res.failing_subset)}


def cmd_check_proof(args):
    sig = _signature_arg(args.signature)
    gamma = _load_list(args.axioms, variety.TermEquation.from_json, sig) if args.axioms else []
    proof = eqlogic.Proof.from_json(_read_json(args.proof), sig)
    return ("true" if eqlogic.check_proof(proof, gamma, sig) else "false"), None


def cmd_qcheck_proof(args):
    sig = _signature_arg(args.signature)
    gamma = _load_list(args.axioms, quantalg.QuantEquation.from_json, sig) if args.axioms else []
    proof = quantalg.QuantProof.from_json(_read_json(args.proof), sig)
    return ("true" if quantalg.check_quant_proof(proof, gamma, sig) else "false"), None


# --- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--max-carrier", type=int, default=finalg.DEFAULT_MAX_CARRIER)
    common.add_argument("--max-universe", type=int, default=eqlogic.DEFAULT_MAX_UNIVERSE)
    common.add_argument("--max-model", type=int, default=eqlogic.DEFAULT_MAX_MODEL)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--signature", help="name/arity list like '*/2,f/1', or a JSON file")

    parser = _Parser(prog="hspalg", description="Finite universal algebra toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("sat", cmd_sat, "does an algebra satisfy an equation")
    p.add_argument("--algebra", required=True)
    p.add_argument("--equation", required=True)

    p = add("ineq-sat", cmd_ineq_sat, "does an ordered algebra satisfy an inequation")
    p.add_argument("--algebra", required=True)
    p.add_argument("--inequation", required=True)

    p = add("qsat", cmd_qsat, "does a quantitative algebra satisfy a clustered equation")
    p.add_argument("--algebra", required=True)
    p.add_argument("--equation", required=True)

    for name, func, help in (("congr", cmd_congr, "least congruence containing the pairs"),
                             ("ord-congr", cmd_ord_congr, "least stable preorder containing the pairs")):
        p = add(name, func, help)
        p.add_argument("--algebra", required=True)
        p.add_argument("--pair", nargs=2, type=int, action="append", metavar=("A", "B"))
        if name == "congr":
            p.add_argument("--all", action="store_true", help="list the whole congruence lattice")

    p = add("qcongr", cmd_qcongr, "largest pseudometric congruence meeting the constraints")
    p.add_argument("--algebra", required=True)
    p.add_argument("--constraint", nargs=3, action="append", metavar=("A", "B", "EPS"))

    p = add("quotient", cmd_quotient, "quotient by the generated (pre)congruence")
    p.add_argument("--algebra", required=True)
    p.add_argument("--pair", nargs=2, type=int, action="append", metavar=("A", "B"))
    p.add_argument("--constraint", nargs=3, action="append", metavar=("A", "B", "EPS"))

    p = add("hsp", cmd_hsp, "is the candidate in the variety generated by the class algebra")
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--candidate", required=True)

    p = add("free", cmd_free, "free algebra on n generators in the generated variety")
    p.add_argument("--algebra", required=True)
    p.add_argument("--n", type=int, required=True)

    p = add("eventual", cmd_eventual, "index from which an equation sequence holds")
    p.add_argument("--algebra", required=True)
    p.add_argument("--sequence", required=True)

    for name, func, help in (("prove", cmd_prove, "bounded equational proof search"),
                             ("entails", cmd_entails, "countermodel search, then proof search"),
                             ("qprove", cmd_qprove, "bounded quantitative proof search"),
                             ("qentails", cmd_qentails, "quantitative countermodel and proof search")):
        p = add(name, func, help)
        p.add_argument("--axioms")
        p.add_argument("--goal", required=True)
        p.add_argument("--depth", type=int)

    p = add("creflexive", cmd_creflexive, "is a quotient map c-reflexive")
    p.add_argument("--map", required=True)
    p.add_argument("--c", required=True, help="natural >= 2 or 'omega'")

    for name, func in (("check-proof", cmd_check_proof), ("qcheck-proof", cmd_qcheck_proof)):
        p = add(name, func, "validate a proof certificate")
        p.add_argument("--proof", required=True)
        p.add_argument("--axioms")
    return parser


def _text(report: dict) -> str:
    lines = [f"{report['command']}: {report['verdict']}"]
    if "error" in report:
        lines.append(f"error: {report['error']}")
    if report.get("certificate") is not None:
        lines.append(json.dumps(report["certificate"], indent=2))
    return "\n".join(lines)


def execute(argv: Sequence[str]) -> tuple[int, dict]:
    """Run one command; return the exit code and the report."""
    start = time.perf_counter()
    command = argv[0] if argv else ""
    report: dict[str, Any] = {"command": command, "verdict": "unknown", "certificate": None,
                              "bounds_used": None}
    try:
        args = build_parser().parse_args(list(argv))
        if args.command is None:
            raise UsageError("missing subcommand")
        report["bounds_used"] = {"max_carrier": args.max_carrier, "max_universe": args.max_universe,
                                 "max_model": args.max_model, "seed": args.seed}
        verdict, cert = args.func(args)
        report["verdict"], report["certificate"] = verdict, cert
        code = VERDICT_EXIT[verdict]
    except UsageError as exc:
        report["error"], code = f"usage: {exc}", EXIT_USAGE
    except SizeLimitExceeded as exc:
        report["error"], code = str(exc), EXIT_LIMIT
    except (AlgebraError, ValueError, KeyError, TypeError) as exc:
        report["error"], code = f"{type(exc).__name__}: {exc}", EXIT_DATA
        if isinstance(exc, MalformedProof):
            report["certificate"] = {"path": list(exc.path)}
    report["elapsed_ms"] = int((time.perf_counter() - start) * 1000)
    return code, report


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    code, report = execute(argv)
    fmt = "text" if "--format" in argv and "text" in argv[argv.index("--format") + 1:][:1] else "json"
    print(_text(report) if fmt == "text" else json.dumps(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
