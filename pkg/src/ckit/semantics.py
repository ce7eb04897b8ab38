"""Process semantics: the symbolic LTS, the concrete (non-symbolic) LTS derived
from it, an independent direct implementation of the concrete rules used as a
cross-check oracle, the action-hiding abstraction operator, and client/service
parallel composition."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Union

from .conditions import Substitution, eval_ground, groundings, is_consistent
from .syntax import (
    Branch, Condition, END_PORT, If, Kind, Name, Nil, OPAQUE, Output, Par,
    Process, Sum, TRUE, TauP, conj, Eq, Neq,
    cond_vars, free_data_vars, is_closed, par_of, print_process, substitute,
)


class OpenProcessError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymTau:
    def __str__(self) -> str:
        return "tau"


@dataclass(frozen=True)
class SymIn:
    subject: Name
    binders: tuple[Name, ...]

    def __str__(self) -> str:
        return f"{self.subject}({','.join(v.ident for v in self.binders)})"


@dataclass(frozen=True)
class SymOut:
    subject: Name
    payload: tuple[Name, ...]

    def __str__(self) -> str:
        return f"{self.subject}!<{','.join(str(v) for v in self.payload)}>"


SymAction = Union[SymTau, SymIn, SymOut]
SYM_TAU = SymTau()


@dataclass(frozen=True)
class ActTau:
    def __str__(self) -> str:
        return "tau"


@dataclass(frozen=True)
class ActIn:
    subject: Name
    values: tuple[Name, ...]

    def __str__(self) -> str:
        return f"{self.subject}({','.join(str(v) for v in self.values)})"


@dataclass(frozen=True)
class ActOut:
    subject: Name
    values: tuple[Name, ...]

    def __str__(self) -> str:
        return f"{self.subject}!<{','.join(str(v) for v in self.values)}>"


ConcAction = Union[ActTau, ActIn, ActOut]
ACT_TAU = ActTau()


@dataclass(frozen=True)
class SymStep:
    cond: Condition
    action: SymAction
    target: Process


def subject_of(a) -> Name | None:
    if isinstance(a, (SymIn, SymOut, ActIn, ActOut)):
        return a.subject
    return None


# ---------------------------------------------------------------------------
# Structural-congruence normal form
# ---------------------------------------------------------------------------

def normalize_process(p: Process) -> Process:
    """Deterministic representative of the ≡-class: | flattened with 0 units
    dropped and components sorted; applied before rule dispatch and to targets."""
    match p:
        case Nil():
            return p
        case TauP(cont):
            return TauP(normalize_process(cont))
        case Output(subject, payload, cont):
            return Output(subject, payload, normalize_process(cont))
        case Sum(branches):
            return Sum(tuple(Branch(b.subject, b.binders, normalize_process(b.cont))
                             for b in branches))
        case If(lhs, rhs, t, e):
            return If(lhs, rhs, normalize_process(t), normalize_process(e))
        case Par(parts):
            normed = [normalize_process(q) for q in parts]
            flat = par_of(normed)
            if isinstance(flat, Par):
                return Par(tuple(sorted(flat.parts, key=print_process)))
            return flat
    raise TypeError(f"not a process: {p!r}")


# ---------------------------------------------------------------------------
# Symbolic LTS
# ---------------------------------------------------------------------------

def symbolic_steps(p: Process, consts: frozenset[Name]) -> frozenset[SymStep]:
    """All symbolic transitions of p (open terms allowed).

    Conditional steps carry the (in)equality conjunct and are pruned when the
    accumulated condition is inconsistent; an opaque side makes the conditional
    an internal choice instead; an opaque input guard contributes a silent move
    whose binders are grounded later by the concrete semantics.
    """
    return frozenset(_sym_steps(normalize_process(p), consts))


def _sym_steps(p: Process, consts: frozenset[Name]) -> set[SymStep]:
    out: set[SymStep] = set()
    match p:
        case Nil():
            pass
        case TauP(cont):
            out.add(SymStep(TRUE, SYM_TAU, cont))
        case Output(subject, payload, cont):
            out.add(SymStep(TRUE, SymOut(subject, payload), cont))
        case Sum(branches):
            for b in branches:
                if b.subject.is_opaque():
                    out.add(SymStep(TRUE, SYM_TAU, b.cont))
                else:
                    out.add(SymStep(TRUE, SymIn(b.subject, b.binders), b.cont))
        case If(lhs, rhs, t, e):
            if lhs.is_opaque() or rhs.is_opaque():
                out |= _sym_steps(normalize_process(t), consts)
                out |= _sym_steps(normalize_process(e), consts)
            else:
                for st in _sym_steps(normalize_process(t), consts):
                    cond = conj(Eq(lhs, rhs), st.cond)
                    if is_consistent(cond, consts):
                        out.add(SymStep(cond, st.action, st.target))
                for st in _sym_steps(normalize_process(e), consts):
                    cond = conj(Neq(lhs, rhs), st.cond)
                    if is_consistent(cond, consts):
                        out.add(SymStep(cond, st.action, st.target))
        case Par(parts):
            for i, q in enumerate(parts):
                rest = parts[:i] + parts[i + 1:]
                for st in _sym_steps(q, consts):
                    target = normalize_process(par_of((st.target,) + rest))
                    out.add(SymStep(st.cond, st.action, target))
        case _:
            raise TypeError(f"not a process: {p!r}")
    return out


def instantiate_sym_action(a: SymAction, s: Substitution) -> ConcAction:
    match a:
        case SymTau():
            return ACT_TAU
        case SymOut(subject, payload):
            return ActOut(subject, tuple(s.get(v) if v.kind is Kind.VAR else v
                                         for v in payload))
        case SymIn(subject, binders):
            return ActIn(subject, tuple(s.get(v) for v in binders))
    raise TypeError(f"not a symbolic action: {a!r}")


# ---------------------------------------------------------------------------
# Concrete LTS via the symbolic one
# ---------------------------------------------------------------------------

def concrete_steps(p: Process, consts: frozenset[Name]) -> frozenset[tuple[ConcAction, Process]]:
    """Closed-process steps: ground every symbolic step over 𝒞 ∪ {*}."""
    if not is_closed(p):
        raise OpenProcessError(f"process is not closed: {p}")
    out: set[tuple[ConcAction, Process]] = set()
    for st in symbolic_steps(p, consts):
        if cond_vars(st.cond):
            raise AssertionError(f"non-ground first-step condition on closed process: {st.cond}")
        if not eval_ground(st.cond):
            continue
        binders = st.action.binders if isinstance(st.action, SymIn) else ()
        to_ground = frozenset(binders) | free_data_vars(st.target)
        for s in groundings(to_ground, consts):
            act = instantiate_sym_action(st.action, s)
            target = normalize_process(substitute(st.target, s.as_dict()))
            out.add((act, target))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Independent oracle: the original concrete rules, implemented directly
# ---------------------------------------------------------------------------

def appendix_steps(p: Process, consts: frozenset[Name]) -> frozenset[tuple[ConcAction, Process]]:
    """Direct structural implementation of the original concrete LTS rules.

    Used as the cross-check oracle for the semantics-equivalence theorem; it
    shares no code with symbolic_steps/concrete_steps. The opaque-guard silent
    rule grounds the freed binders over 𝒞 ∪ {*}, the reading under which the
    equivalence theorem holds on closed terms.
    """
    if not is_closed(p):
        raise OpenProcessError(f"process is not closed: {p}")
    return frozenset(_appendix(normalize_process(p), consts))


def _value_tuples(k: int, consts: frozenset[Name]) -> Iterable[tuple[Name, ...]]:
    dom = sorted(consts, key=lambda n: n.ident) + [OPAQUE]
    return itertools.product(dom, repeat=k)


def _appendix(p: Process, consts: frozenset[Name]) -> set[tuple[ConcAction, Process]]:
    out: set[tuple[ConcAction, Process]] = set()
    match p:
        case Nil():
            pass
        case TauP(cont):
            out.add((ACT_TAU, normalize_process(cont)))
        case Output(subject, payload, cont):
            out.add((ActOut(subject, payload), normalize_process(cont)))
        case Sum(branches):
            for b in branches:
                for vals in _value_tuples(len(b.binders), consts):
                    target = normalize_process(substitute(b.cont, dict(zip(b.binders, vals))))
                    if b.subject.is_opaque():
                        out.add((ACT_TAU, target))
                    else:
                        out.add((ActIn(b.subject, vals), target))
        case If(lhs, rhs, t, e):
            if lhs.is_opaque() or rhs.is_opaque():
                out |= _appendix(normalize_process(t), consts)
                out |= _appendix(normalize_process(e), consts)
            elif lhs == rhs:
                out |= _appendix(normalize_process(t), consts)
            else:
                out |= _appendix(normalize_process(e), consts)
        case Par(parts):
            for i, q in enumerate(parts):
                rest = parts[:i] + parts[i + 1:]
                for act, tgt in _appendix(q, consts):
                    out.add((act, normalize_process(par_of((tgt,) + rest))))
        case _:
            raise TypeError(f"not a process: {p!r}")
    return out


# ---------------------------------------------------------------------------
# Abstraction operator over processes
# ---------------------------------------------------------------------------

def hide_action(a: ConcAction, visible: frozenset[str]) -> ConcAction:
    """Identity on tau, e and visibly-subjected actions; tau otherwise."""
    subj = subject_of(a)
    if subj is None:
        return a
    if subj.is_opaque():
        return ACT_TAU
    if subj.ident == END_PORT or subj.ident in visible:
        return a
    return ACT_TAU


@dataclass(frozen=True)
class AbstractedProcess:
    """A_V[P]: behaves as P but actions outside V appear as silent moves."""

    process: Process
    visible: frozenset[str]

    def __str__(self) -> str:
        names = ",".join(sorted(self.visible))
        return f"A{{{names}}}[{self.process}]"


Side = Union[Process, AbstractedProcess]


def abstract_steps(p: Process, visible: frozenset[str],
                   consts: frozenset[Name]) -> frozenset[tuple[ConcAction, AbstractedProcess]]:
    return frozenset((hide_action(act, visible), AbstractedProcess(tgt, visible))
                     for act, tgt in concrete_steps(p, consts))


def side_steps(side: Side, consts: frozenset[Name]) -> frozenset[tuple[ConcAction, Side]]:
    if isinstance(side, AbstractedProcess):
        return abstract_steps(side.process, side.visible, consts)
    return concrete_steps(side, consts)


# ---------------------------------------------------------------------------
# Client/service parallel composition
# ---------------------------------------------------------------------------

def co_action(a: ConcAction) -> ConcAction | None:
    match a:
        case ActIn(subject, values):
            return ActOut(subject, values)
        case ActOut(subject, values):
            return ActIn(subject, values)
    return None


@dataclass(frozen=True)
class Configuration:
    client: Side
    service: Side

    def __str__(self) -> str:
        return f"{self.client}  ||  {self.service}"


def parallel_step(cfg: Configuration, consts: frozenset[Name]) -> frozenset[Configuration]:
    """Interleaved silent moves plus synchronizations on complementary actions
    with equal subject and payload. The success action e never synchronizes."""
    out: set[Configuration] = set()
    csteps = side_steps(cfg.client, consts)
    ssteps = side_steps(cfg.service, consts)
    for act, tgt in csteps:
        if isinstance(act, ActTau):
            out.add(Configuration(tgt, cfg.service))
    for act, tgt in ssteps:
        if isinstance(act, ActTau):
            out.add(Configuration(cfg.client, tgt))
    for cact, ctgt in csteps:
        co = co_action(cact)
        if co is None:
            continue
        subj = subject_of(cact)
        if subj is not None and not subj.is_opaque() and subj.ident == END_PORT:
            continue
        for sact, stgt in ssteps:
            if sact == co:
                out.add(Configuration(ctgt, stgt))
    return frozenset(out)


def client_can_end(client: Side, consts: frozenset[Name]) -> bool:
    for act, _ in side_steps(client, consts):
        subj = subject_of(act)
        if isinstance(act, ActIn) and subj is not None and not subj.is_opaque() \
                and subj.ident == END_PORT:
            return True
    return False


def client_has_tau(client: Side, consts: frozenset[Name]) -> bool:
    return any(isinstance(act, ActTau) for act, _ in side_steps(client, consts))


# ---------------------------------------------------------------------------
# Trace dumps (CLI `trace` command)
# ---------------------------------------------------------------------------

def _print_side(side: Side) -> str:
    return str(side)


def symbolic_trace_lines(p: Process, consts: frozenset[Name]) -> list[str]:
    """One `COND | ACTION | TARGET` line per reachable symbolic step.

    Symbolic exploration only unfolds further where targets stay closed enough
    to have steps; open targets (freed binders) are still printed.
    """
    lines: list[str] = []
    seen: set[Process] = set()
    frontier = [normalize_process(p)]
    while frontier:
        cur = frontier.pop(0)
        if cur in seen:
            continue
        seen.add(cur)
        for st in sorted(symbolic_steps(cur, consts),
                         key=lambda s: (str(s.cond), str(s.action), str(s.target))):
            lines.append(f"{st.cond} | {st.action} | {print_process(st.target)}")
            if st.target not in seen:
                frontier.append(st.target)
    return lines


def concrete_trace_lines(side: Side, consts: frozenset[Name]) -> list[str]:
    lines: list[str] = []
    seen: set[Side] = set()
    frontier: list[Side] = [side]
    while frontier:
        cur = frontier.pop(0)
        if cur in seen:
            continue
        seen.add(cur)
        for act, tgt in sorted(side_steps(cur, consts),
                               key=lambda s: (str(s[0]), _print_side(s[1]))):
            lines.append(f"{act} | {_print_side(tgt)}")
            if tgt not in seen:
                frontier.append(tgt)
    return lines
