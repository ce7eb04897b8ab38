"""Command-line front end: type, check, abstract, trace, explain.

Exit codes: 0 = holds / success, 1 = property fails, 2 = usage or parse error,
3 = inference error. `--json` emits a machine-readable verdict object matching
schemas/verdict.json.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .abstraction import abstract_contract
from .relations import (
    ClientActionError, Verdict, check_compliance_certificate,
    check_subcontract_certificate, compliant, process_compliant, subcontract,
)
from .semantics import (
    AbstractedProcess, OpenProcessError, concrete_trace_lines, symbolic_trace_lines,
)
from .simabs import AbsQuery, AbstractionQueryError, check_abstraction
from .syntax import (
    Contract, Declarations, ParseError, Process, parse_contract, parse_file,
    print_contract,
)
from .typesystem import derive, render_derivation, type_of


class UsageError(ValueError):
    pass


def _load_definitions(path: str, term_kind: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_file(fh.read(), term_kind)


def _split_ref(ref: str) -> tuple[str, str | None]:
    if ":" in ref and not os.path.exists(ref):
        path, _, name = ref.rpartition(":")
        if os.path.exists(path):
            return path, name
    return ref, None


def load_process(ref: str) -> tuple[Process, Declarations]:
    path, name = _split_ref(ref)
    if not os.path.exists(path):
        raise UsageError(f"no such process file: {path}")
    src = _load_definitions(path, "process")
    defs = src.definitions
    if name is None:
        if len(defs) != 1:
            raise UsageError(
                f"{path} defines {sorted(defs)}; select one with {path}:NAME")
        name = next(iter(defs))
    if name not in defs:
        raise UsageError(f"{path} has no definition {name!r}")
    return defs[name], src.decls


def load_contract(ref: str) -> Contract:
    """A contract given inline or as FILE[:NAME]."""
    path, name = _split_ref(ref)
    if os.path.exists(path):
        src = _load_definitions(path, "contract")
        defs = src.definitions
        if name is None:
            if len(defs) != 1:
                raise UsageError(
                    f"{path} defines {sorted(defs)}; select one with {path}:NAME")
            name = next(iter(defs))
        if name not in defs:
            raise UsageError(f"{path} has no definition {name!r}")
        return defs[name]
    return parse_contract(ref)


def _visible_set(arg: str | None) -> frozenset[str]:
    if not arg:
        return frozenset()
    return frozenset(x.strip() for x in arg.split(",") if x.strip())


def _check_const_budget(decls: Declarations, max_consts: int) -> None:
    if len(decls.consts) > max_consts:
        raise UsageError(
            f"{len(decls.consts)} constants exceed --max-consts {max_consts}; "
            "enumeration would blow up")


def _emit_verdict(v: Verdict, args) -> int:
    if args.json:
        if v.holds:
            out = {"verdict": "holds", "certificate_size": len(v.certificate)}
        else:
            out = {"verdict": "fails", "counterexample": v.counterexample.as_json()}
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        if v.holds:
            print(f"holds (certificate: {len(v.certificate)} pairs)")
        else:
            ce = v.counterexample
            path = " ".join(str(a) for a in ce.path) or "(at the root)"
            print(f"fails: {ce.reason}; path: {path}")
    return 0 if v.holds else 1


def cmd_type(args) -> int:
    process, decls = load_process(args.source)
    _check_const_budget(decls, args.max_consts)
    consts = decls.const_names()
    try:
        judgment = derive(process, consts)
    except OpenProcessError as exc:
        print(f"inference error: {exc}", file=sys.stderr)
        return 3
    if args.json:
        print(json.dumps({"contract": print_contract(judgment.contract)}, indent=2))
    else:
        print(print_contract(judgment.contract))
        if args.explain:
            print(render_derivation(judgment))
    return 0


def cmd_explain(args) -> int:
    args.explain = True
    args.json = False
    return cmd_type(args)


def cmd_abstract(args) -> int:
    contract = load_contract(args.contract)
    visible = _visible_set(args.visible)
    print(print_contract(abstract_contract(contract, visible)))
    return 0


def cmd_check(args) -> int:
    kind = args.kind
    if kind == "compliance":
        client = load_contract(args.left)
        service = load_contract(args.right)
        return _emit_verdict(_certified(compliant(client, service),
                                        lambda v: check_compliance_certificate(
                                            client, service, v.certificate)), args)
    if kind == "subcontract":
        sigma = load_contract(args.left)
        rho = load_contract(args.right)
        return _emit_verdict(_certified(subcontract(sigma, rho),
                                        lambda v: check_subcontract_certificate(
                                            sigma, rho, v.certificate)), args)
    if kind == "process-compliance":
        client, cdecls = load_process(args.left)
        service, sdecls = load_process(args.right)
        _check_const_budget(cdecls, args.max_consts)
        _check_const_budget(sdecls, args.max_consts)
        consts = cdecls.const_names() | sdecls.const_names()
        side = service
        if args.visible:
            side = AbstractedProcess(service, _visible_set(args.visible))
        verdict = process_compliant(client, side, consts)
        payload = {"verdict": "holds" if verdict.holds else "fails"}
        if not verdict.holds:
            payload["counterexample"] = {"path": [], "reason": f"stuck: {verdict.stuck}"}
        if args.json:
            print(json.dumps(payload, indent=2, sort_keys=True))
        else:
            print("holds" if verdict.holds else f"fails at stuck configuration: {verdict.stuck}")
        return 0 if verdict.holds else 1
    if kind == "abstraction":
        abstract, adecls = load_process(args.left)
        concrete, qdecls = load_process(args.right)
        _check_const_budget(adecls, args.max_consts)
        _check_const_budget(qdecls, args.max_consts)
        if not args.visible:
            raise UsageError("check abstraction requires --visible")
        consts = adecls.const_names() | qdecls.const_names()
        result = check_abstraction(
            AbsQuery(abstract, concrete, _visible_set(args.visible)), consts)
        if args.json:
            payload = {"verdict": "holds" if result.holds else "fails"}
            if not result.holds:
                payload["counterexample"] = {
                    "path": [str(t) for t in result.trace],
                    "reason": "unmatched move"}
            print(json.dumps(payload, indent=2, sort_keys=True))
        else:
            if result.holds:
                print("holds")
            else:
                print("fails:")
                for t in result.trace:
                    print(f"  {t}")
        return 0 if result.holds else 1
    raise UsageError(f"unknown check kind {kind!r}")


def _certified(v: Verdict, revalidate) -> Verdict:
    if v.holds and not revalidate(v):
        raise AssertionError("certificate failed revalidation")
    return v


def cmd_trace(args) -> int:
    process, decls = load_process(args.source)
    _check_const_budget(decls, args.max_consts)
    consts = decls.const_names()
    if args.mode == "symbolic":
        lines = symbolic_trace_lines(process, consts)
    elif args.mode == "concrete":
        lines = concrete_trace_lines(process, consts)
    elif args.mode == "abstract":
        side = AbstractedProcess(process, _visible_set(args.visible))
        lines = concrete_trace_lines(side, consts)
    else:
        raise UsageError(f"unknown trace mode {args.mode!r}")
    for line in lines:
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ckit",
                                 description="behavioral contract verification toolkit")
    ap.add_argument("--max-consts", type=int, default=6,
                    help="refuse enumeration beyond this many declared constants")
    sub = ap.add_subparsers(dest="command", required=True)

    p_type = sub.add_parser("type", help="infer the contract of a process")
    p_type.add_argument("source", help="FILE[:NAME] of the process definition")
    p_type.add_argument("--explain", action="store_true", help="print the derivation")
    p_type.add_argument("--json", action="store_true")
    p_type.set_defaults(fn=cmd_type)

    p_explain = sub.add_parser("explain", help="print a typing derivation")
    p_explain.add_argument("source", help="FILE[:NAME] of the process definition")
    p_explain.set_defaults(fn=cmd_explain)

    p_abs = sub.add_parser("abstract", help="abstract a contract onto visible names")
    p_abs.add_argument("contract", help="contract text or FILE[:NAME]")
    p_abs.add_argument("--visible", required=True, help="comma-separated name set")
    p_abs.set_defaults(fn=cmd_abstract)

    p_check = sub.add_parser("check", help="run a decision procedure")
    p_check.add_argument("kind", choices=["compliance", "subcontract",
                                          "process-compliance", "abstraction"])
    p_check.add_argument("left", help="client/smaller/abstract side")
    p_check.add_argument("right", help="service/wider/concrete side")
    p_check.add_argument("--visible", help="comma-separated name set")
    p_check.add_argument("--json", action="store_true")
    p_check.set_defaults(fn=cmd_check)

    p_trace = sub.add_parser("trace", help="dump a transition graph")
    p_trace.add_argument("source", help="FILE[:NAME] of the process definition")
    p_trace.add_argument("--mode", choices=["symbolic", "concrete", "abstract"],
                         default="symbolic")
    p_trace.add_argument("--visible", help="comma-separated name set (abstract mode)")
    p_trace.set_defaults(fn=cmd_trace)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.fn(args)
    except (ParseError, UsageError, ClientActionError, AbstractionQueryError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OpenProcessError as exc:
        print(f"inference error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
