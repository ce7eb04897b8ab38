"""Contract inference for processes: the grounding pre-pass realizing the
value-passing encoding (a channel plus a ground tuple is a single action), the
syntax-directed typing rules, and the abstraction typing rule."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Union

from .abstraction import abstract_contract
from .contracts import sort_contract
from .semantics import (
    ActIn, ActOut, ActTau, ConcAction, OpenProcessError, Side, AbstractedProcess,
    concrete_steps, normalize_process, side_steps,
)
from .syntax import (
    Action, Branch, CNIL, Contract, If, Kind, Name, Nil, OPAQUE, Output, Par,
    Prefix, Process, Sum, TauP, action_key, ext_of, int_of, is_closed, par_of,
    print_process, substitute,
)


def subject_label(subject: Name) -> str:
    return "*" if subject.is_opaque() else subject.ident


def contract_action_of(act: ConcAction) -> Optional[Action]:
    """The contract action corresponding to a concrete process action."""
    match act:
        case ActTau():
            return None
        case ActIn(subject, values):
            return Action(subject_label(subject), values, False)
        case ActOut(subject, values):
            return Action(subject_label(subject), values, True)
    raise TypeError(f"not an action: {act!r}")


def enabled_contract_actions(side: Side, consts: frozenset[Name]) -> frozenset[Action]:
    out = set()
    for act, _ in side_steps(side, consts):
        ca = contract_action_of(act)
        if ca is not None:
            out.add(ca)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Grounding: the encoded, value-free process form
# ---------------------------------------------------------------------------

class GroundProcess:
    __slots__ = ()

    def __str__(self) -> str:
        return print_ground(self)


@dataclass(frozen=True)
class GNil(GroundProcess):
    pass


@dataclass(frozen=True)
class GChoice(GroundProcess):
    """Guarded choice over atomic actions; a None guard is a silent branch."""

    branches: tuple[tuple[Optional[Action], GroundProcess], ...]


@dataclass(frozen=True)
class GPar(GroundProcess):
    parts: tuple[GroundProcess, ...]


GNIL = GNil()


def gpar_of(parts) -> GroundProcess:
    flat = []
    for g in parts:
        if isinstance(g, GPar):
            flat.extend(g.parts)
        elif not isinstance(g, GNil):
            flat.append(g)
    if not flat:
        return GNIL
    if len(flat) == 1:
        return flat[0]
    return GPar(tuple(flat))


def _branch_key(branch: tuple[Optional[Action], GroundProcess]):
    act, cont = branch
    return (act is not None, action_key(act) if act is not None else (), str(cont))


def _value_tuples(k: int, consts: frozenset[Name]):
    dom = sorted(consts, key=lambda n: n.ident) + [OPAQUE]
    return itertools.product(dom, repeat=k)


def ground(p: Process, consts: frozenset[Name]) -> GroundProcess:
    """Encode a closed process over the finite value domain 𝒞 ∪ {*}.

    Visible input guards expand to one branch per value tuple; opaque-subject
    guards become silent branches over the same instantiations; conditionals
    with no opaque side are resolved; opaque conditionals become a silent
    binary choice.
    """
    if not is_closed(p):
        raise OpenProcessError(f"process is not closed: {p}")
    return _ground(normalize_process(p), consts)


def _ground(p: Process, consts: frozenset[Name]) -> GroundProcess:
    match p:
        case Nil():
            return GNIL
        case TauP(cont):
            return GChoice(((None, _ground(cont, consts)),))
        case Output(subject, payload, cont):
            if any(v.kind is Kind.VAR for v in payload):
                raise OpenProcessError(f"free variable in output payload: {p}")
            act = Action(subject_label(subject), payload, True)
            return GChoice(((act, _ground(cont, consts)),))
        case Sum(branches):
            out = []
            for b in branches:
                for vals in _value_tuples(len(b.binders), consts):
                    cont = _ground(substitute(b.cont, dict(zip(b.binders, vals))), consts)
                    if b.subject.is_opaque():
                        out.append((None, cont))
                    else:
                        out.append((Action(b.subject.ident, tuple(vals), False), cont))
            deduped = sorted(set(out), key=_branch_key)
            return GChoice(tuple(deduped))
        case If(lhs, rhs, t, e):
            if lhs.is_opaque() or rhs.is_opaque():
                return GChoice(((None, _ground(t, consts)), (None, _ground(e, consts))))
            if lhs.kind is Kind.VAR or rhs.kind is Kind.VAR:
                raise OpenProcessError(f"free variable in condition: {p}")
            return _ground(t, consts) if lhs == rhs else _ground(e, consts)
        case Par(parts):
            return gpar_of(_ground(q, consts) for q in parts)
    raise TypeError(f"not a process: {p!r}")


def print_ground(g: GroundProcess) -> str:
    match g:
        case GNil():
            return "0"
        case GChoice(branches):
            items = []
            for act, cont in branches:
                head = "tau" if act is None else str(act)
                if isinstance(cont, GNil):
                    items.append(head)
                else:
                    tail = print_ground(cont)
                    if isinstance(cont, (GChoice,)) and len(cont.branches) > 1:
                        tail = f"({tail})"
                    items.append(f"{head}.{tail}")
            return " + ".join(items) if items else "0"
        case GPar(parts):
            return " | ".join(f"({print_ground(q)})" for q in parts)
    raise TypeError(f"not a ground process: {g!r}")


# ---------------------------------------------------------------------------
# Inference over the grounded form (cross-check oracle for the main deriver)
# ---------------------------------------------------------------------------

def _combine(prefixes: list[Contract], silents: list[Contract]) -> Contract:
    visible_part = ext_of(sorted(prefixes, key=str))
    if not silents:
        return visible_part
    if not prefixes:
        return int_of(sorted(silents, key=str))
    return int_of([visible_part] + sorted(silents, key=str))


def _gsteps(g: GroundProcess) -> list[tuple[Optional[Action], GroundProcess]]:
    match g:
        case GNil():
            return []
        case GChoice(branches):
            return list(branches)
        case GPar(parts):
            out = []
            for i, q in enumerate(parts):
                rest = parts[:i] + parts[i + 1:]
                for act, tgt in _gsteps(q):
                    out.append((act, gpar_of((tgt,) + rest)))
            return sorted(set(out), key=_branch_key)
    raise TypeError(f"not a ground process: {g!r}")


def infer_ground(g: GroundProcess, _memo: Optional[dict] = None) -> Contract:
    """Type of a grounded process; agrees with type_of on the source process."""
    memo = {} if _memo is None else _memo
    if g in memo:
        return memo[g]
    match g:
        case GNil():
            result: Contract = CNIL
        case GChoice(branches):
            prefixes = [Prefix(act, infer_ground(cont, memo))
                        for act, cont in branches if act is not None]
            silents = [infer_ground(cont, memo) for act, cont in branches if act is None]
            result = _combine(prefixes, silents)
        case GPar(_):
            prefixes, silents = [], []
            for act, residual in _gsteps(g):
                sub = infer_ground(residual, memo)
                if act is None:
                    silents.append(sub)
                else:
                    prefixes.append(Prefix(act, sub))
            result = _combine(prefixes, silents)
        case _:
            raise TypeError(f"not a ground process: {g!r}")
    result = sort_contract(result)
    memo[g] = result
    return result


# ---------------------------------------------------------------------------
# The typing judgment with its derivation tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Judgment:
    rule: str  # Nil | Tau | Pref | Sum | Par | cond1 | cond2 | cond3 | TypeAbstraction
    subject: str  # printed process
    contract: Contract
    children: tuple[tuple[str, Judgment], ...]  # (edge label, subderivation)


class Inferencer:
    """Syntax-directed inference on the source AST, grounding inputs inline."""

    def __init__(self, consts: frozenset[Name]):
        self.consts = consts
        self.memo: dict[Process, Judgment] = {}

    def derive(self, p: Process) -> Judgment:
        p = normalize_process(p)
        if p in self.memo:
            return self.memo[p]
        j = self._derive(p)
        self.memo[p] = j
        return j

    def _derive(self, p: Process) -> Judgment:
        match p:
            case Nil():
                return Judgment("Nil", print_process(p), CNIL, ())
            case TauP(cont):
                child = self.derive(cont)
                return Judgment("Tau", print_process(p), child.contract, (("tau", child),))
            case Output(subject, payload, cont):
                if any(v.kind is Kind.VAR for v in payload):
                    raise OpenProcessError(f"free variable in output payload: {p}")
                child = self.derive(cont)
                act = Action(subject_label(subject), payload, True)
                return Judgment("Pref", print_process(p),
                                sort_contract(Prefix(act, child.contract)),
                                ((str(act), child),))
            case Sum(branches):
                expanded: list[tuple[Optional[Action], Process]] = []
                for b in branches:
                    for vals in _value_tuples(len(b.binders), self.consts):
                        tgt = normalize_process(
                            substitute(b.cont, dict(zip(b.binders, vals))))
                        if b.subject.is_opaque():
                            expanded.append((None, tgt))
                        else:
                            expanded.append((Action(b.subject.ident, tuple(vals), False), tgt))
                return self._choice_judgment("Sum", p, expanded)
            case If(lhs, rhs, t, e):
                if lhs.is_opaque() or rhs.is_opaque():
                    jt, je = self.derive(t), self.derive(e)
                    contract = sort_contract(int_of([jt.contract, je.contract]))
                    return Judgment("cond1", print_process(p), contract,
                                    (("then", jt), ("else", je)))
                if lhs.kind is Kind.VAR or rhs.kind is Kind.VAR:
                    raise OpenProcessError(f"free variable in condition: {p}")
                if lhs == rhs:
                    jt = self.derive(t)
                    return Judgment("cond2", print_process(p), jt.contract, (("then", jt),))
                je = self.derive(e)
                return Judgment("cond3", print_process(p), je.contract, (("else", je),))
            case Par(parts):
                expanded = []
                for i, q in enumerate(parts):
                    rest = parts[:i] + parts[i + 1:]
                    for act, tgt in concrete_steps(q, self.consts):
                        residual = normalize_process(par_of((tgt,) + rest))
                        expanded.append((contract_action_of(act), residual))
                return self._choice_judgment("Par", p, expanded)
        raise TypeError(f"not a process: {p!r}")

    def _choice_judgment(self, rule: str, p: Process,
                         expanded: list[tuple[Optional[Action], Process]]) -> Judgment:
        seen = set()
        prefixes: list[Contract] = []
        silents: list[Contract] = []
        children: list[tuple[str, Judgment]] = []
        key = lambda item: ((item[0] is not None,
                             action_key(item[0]) if item[0] else ()),
                            print_process(item[1]))
        for act, tgt in sorted(set(expanded), key=key):
            if (act, tgt) in seen:
                continue
            seen.add((act, tgt))
            child = self.derive(tgt)
            label = "tau" if act is None else str(act)
            children.append((label, child))
            if act is None:
                silents.append(child.contract)
            else:
                prefixes.append(Prefix(act, child.contract))
        contract = sort_contract(_combine(prefixes, silents))
        return Judgment(rule, print_process(p), contract, tuple(children))


def derive(p: Process, consts: frozenset[Name]) -> Judgment:
    if not is_closed(p):
        raise OpenProcessError(f"process is not closed: {p}")
    return Inferencer(consts).derive(p)


def type_of(p: Process, consts: frozenset[Name]) -> Contract:
    """The unique contract assigned by the typing rules (canonically ordered)."""
    return derive(p, consts).contract


def type_of_abstraction(p: Process, visible: frozenset[str],
                        consts: frozenset[Name]) -> Contract:
    """Type of A_V[P]: the abstraction of the type of P."""
    return sort_contract(abstract_contract(type_of(p, consts), visible))


def derive_abstraction(p: Process, visible: frozenset[str],
                       consts: frozenset[Name]) -> Judgment:
    child = derive(p, consts)
    contract = sort_contract(abstract_contract(child.contract, visible))
    wrapped = AbstractedProcess(p, visible)
    return Judgment("TypeAbstraction", str(wrapped), contract, (("", child),))


def type_of_side(side: Side, consts: frozenset[Name]) -> Contract:
    if isinstance(side, AbstractedProcess):
        return type_of_abstraction(side.process, side.visible, consts)
    return type_of(side, consts)


def render_derivation(j: Judgment, indent: int = 0) -> str:
    pad = "  " * indent
    lines = [f"{pad}({j.rule}) |- {j.subject} : {j.contract}"]
    for label, child in j.children:
        if label:
            lines.append(f"{pad}  [{label}]")
        lines.append(render_derivation(child, indent + 1))
    return "\n".join(lines)
