"""Decision procedure for the simulation-based abstraction relation P ∝^V Q.

The decomposition search of the definition is replaced by substitution-class
coverage: over the finite domain 𝒞 ∪ {*}, a condition satisfied by a grounding
s is satisfied by every *-weakening of s (atoms over a *-valued variable are
true and the language has no negation), so the finest decomposition of M∧N is
the family of per-grounding characteristic conditions, and per-part entailment
coincides with per-grounding satisfaction. The checker therefore recurses over
ground substitutions, closing each recursive index under *-weakening and
extending it over freshly received binders.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .conditions import Substitution, eval_ground, apply_subst, is_consistent, \
    satisfying_substitutions, restrict
from .semantics import (
    SymIn, SymOut, SymStep, SymTau, concrete_steps, hide_action,
    normalize_process, symbolic_steps,
)
from .syntax import (
    Condition, END_PORT, Kind, Name, OPAQUE, Process, TRUE,
    cond_vars, free_data_vars, free_names, rename_binders_apart, substitute,
)


class AbstractionQueryError(ValueError):
    pass


@dataclass(frozen=True)
class AbsQuery:
    abstract: Process
    concrete: Process
    visible: frozenset[str]
    condition: Condition = TRUE


@dataclass(frozen=True)
class TraceStep:
    side: str  # "concrete" | "abstract"
    condition: str
    action: str
    grounding: str
    reason: str

    def __str__(self) -> str:
        return (f"[{self.side}] move {self.condition} | {self.action} "
                f"under {self.grounding}: {self.reason}")


@dataclass(frozen=True)
class AbsResult:
    holds: bool
    trace: tuple[TraceStep, ...] = ()


def _subject_visible(subject: Name, visible: frozenset[str]) -> bool:
    if subject.is_opaque():
        return False
    return subject.ident == END_PORT or subject.ident in visible


def visible_received_names(act, visible: frozenset[str]) -> frozenset[Name]:
    """vn(λ)_V: the binders of a visibly-subjected input, otherwise empty."""
    if isinstance(act, SymIn) and _subject_visible(act.subject, visible):
        return frozenset(act.binders)
    return frozenset()


def hide_sym_action(act, visible: frozenset[str]):
    """λ_|V: identity on tau and visibly-subjected actions, tau otherwise;
    payloads are untouched (only the subject decides visibility)."""
    if isinstance(act, SymTau):
        return act
    if _subject_visible(act.subject, visible):
        return act
    return SymTau()


def _values_equal_under(u: dict[Name, Name], m: Name, n: Name) -> bool:
    """The λ=λ′ payload condition m=n, evaluated under a grounding."""
    mv = u.get(m, m) if m.kind is Kind.VAR else m
    nv = u.get(n, n) if n.kind is Kind.VAR else n
    if mv.is_opaque() or nv.is_opaque():
        return True
    return mv == nv


class AbstractionChecker:
    def __init__(self, consts: frozenset[Name]):
        self.consts = consts
        self.values = sorted(consts, key=lambda n: n.ident) + [OPAQUE]
        self.memo: dict = {}

    # -- substitutions ------------------------------------------------------

    def _respects(self, u: dict[Name, Name], m: Condition) -> bool:
        sub = Substitution.of({k: v for k, v in u.items()})
        inst = apply_subst(m, sub)
        if cond_vars(inst):
            raise AssertionError(f"grounding does not cover {inst}")
        return eval_ground(inst)

    def _groundings(self, base: dict[Name, Name], wanted: frozenset[Name]):
        """Weakenings of `base` on shared variables, arbitrary on new ones."""
        vs = sorted(wanted, key=lambda n: n.ident)
        options = []
        for v in vs:
            if v in base:
                known = base[v]
                options.append([known] if known.is_opaque() else [known, OPAQUE])
            else:
                options.append(self.values)
        for combo in itertools.product(*options):
            yield dict(zip(vs, combo))

    # -- action matching ----------------------------------------------------

    def _match_actions(self, moved, candidate, u: dict[Name, Name],
                       visible: frozenset[str], moved_hidden: bool):
        """Match a proposed move against a candidate reply up to hiding.

        Returns None on mismatch, else (binder renaming for the candidate's
        continuation, shared binders). `moved_hidden` selects which side the
        hiding applies to; payload equality is evaluated under the grounding.
        """
        if moved_hidden:
            if isinstance(moved, SymTau) or not _subject_visible(moved.subject, visible):
                return ({}, ()) if isinstance(candidate, SymTau) else None
        else:
            if isinstance(moved, SymTau):
                if isinstance(candidate, SymTau) or \
                        not _subject_visible(candidate.subject, visible):
                    return ({}, ())
                return None
        # Visible on the relevant side: subjects and kinds must agree.
        if isinstance(moved, SymIn):
            if not isinstance(candidate, SymIn) or candidate.subject != moved.subject \
                    or len(candidate.binders) != len(moved.binders):
                return None
            if not (moved_hidden or _subject_visible(candidate.subject, visible)):
                return None
            renaming = dict(zip(candidate.binders, moved.binders))
            return (renaming, moved.binders)
        if isinstance(moved, SymOut):
            if not isinstance(candidate, SymOut) or candidate.subject != moved.subject \
                    or len(candidate.payload) != len(moved.payload):
                return None
            if not (moved_hidden or _subject_visible(candidate.subject, visible)):
                return None
            ok = all(_values_equal_under(u, m, n)
                     for m, n in zip(moved.payload, candidate.payload))
            return ({}, ()) if ok else None
        return None

    # -- the relation -------------------------------------------------------

    def member(self, p: Process, q: Process, visible: frozenset[str],
               base: dict[Name, Name]) -> Optional[TraceStep]:
        wanted = free_data_vars(p) | free_data_vars(q)
        for t in self._groundings(base, wanted):
            fail = self.point(p, q, visible, t)
            if fail is not None:
                return fail
        return None

    def point(self, p: Process, q: Process, visible: frozenset[str],
              u: dict[Name, Name]) -> Optional[TraceStep]:
        key = (p, q, visible, tuple(sorted(u.items(), key=lambda kv: kv[0].ident)))
        if key in self.memo:
            return self.memo[key]
        result = self._point(p, q, visible, u)  # terms shrink; recursion is acyclic
        self.memo[key] = result
        return result

    def _grounding_str(self, u: dict[Name, Name]) -> str:
        inner = ", ".join(f"{k} -> {v}"
                          for k, v in sorted(u.items(), key=lambda kv: kv[0].ident))
        return "{" + inner + "}"

    def _point(self, p: Process, q: Process, visible: frozenset[str],
               u: dict[Name, Name]) -> Optional[TraceStep]:
        p_steps = sorted(symbolic_steps(p, self.consts),
                         key=lambda s: (str(s.cond), str(s.action), str(s.target)))
        q_steps = sorted(symbolic_steps(q, self.consts),
                         key=lambda s: (str(s.cond), str(s.action), str(s.target)))

        # Clause 1: the abstraction simulates the concrete process up to hiding.
        for qs in q_steps:
            if not self._respects(u, qs.cond):
                continue
            if self._find_reply(moved=qs, replies=p_steps, mover_is_concrete=True,
                                other=p, visible=visible, u=u) is None:
                return TraceStep("concrete", str(qs.cond), str(qs.action),
                                 self._grounding_str(u),
                                 "no abstract move matches up to hiding")
        # Clause 2: the concrete process simulates the abstraction up to
        # constraints on hidden values.
        for ps in p_steps:
            if not self._respects(u, ps.cond):
                continue
            if self._find_reply(moved=ps, replies=q_steps, mover_is_concrete=False,
                                other=q, visible=visible, u=u) is None:
                return TraceStep("abstract", str(ps.cond), str(ps.action),
                                 self._grounding_str(u),
                                 "no concrete move matches up to hidden constraints")
        return None

    def _find_reply(self, moved: SymStep, replies: list[SymStep],
                    mover_is_concrete: bool, other: Process,
                    visible: frozenset[str], u: dict[Name, Name]):
        for rep in replies:
            cond = rep.cond if mover_is_concrete else restrict(rep.cond, visible)
            if not self._respects(u, cond):
                continue
            match = self._match_actions(moved.action, rep.action, u, visible,
                                        moved_hidden=mover_is_concrete)
            if match is None:
                continue
            renaming, shared = match
            rep_target = substitute(rep.target, renaming) if renaming else rep.target
            if mover_is_concrete:
                succ_p, succ_q = rep_target, moved.target
            else:
                succ_p, succ_q = moved.target, rep_target
            # Visible received names of the concrete action; after alignment the
            # shared binders are exactly those names on both sides.
            new_visible = visible | {v.ident for v in shared}
            if self.member(succ_p, succ_q, new_visible, u) is None:
                return rep
        return None


def check_abstraction(query: AbsQuery, consts: frozenset[Name]) -> AbsResult:
    """Decide P ∝^V Q at the query's index condition (true by default)."""
    p = normalize_process(query.abstract)
    q = normalize_process(query.concrete)
    if not is_consistent(query.condition, consts):
        raise AbstractionQueryError("inconsistent index condition")
    stray = {n.ident for n in free_names(p)} - set(query.visible) - {END_PORT}
    if stray:
        raise AbstractionQueryError(
            f"free names of the abstract process must be visible: {sorted(stray)}")
    # Keep the two sides' bound names disjoint (and apart from all free names)
    # so freed binders never collide across sides.
    used = {n.ident for n in free_names(p) | free_names(q)}
    used |= {n.ident for n in free_data_vars(p) | free_data_vars(q)}
    q = rename_binders_apart(q, used)
    p = rename_binders_apart(p, used)

    checker = AbstractionChecker(consts)
    w = free_data_vars(p) | free_data_vars(q) | cond_vars(query.condition)
    for s in satisfying_substitutions(query.condition, w, consts):
        u = {k: v for k, v in s.pairs}
        fail = checker.point(p, q, query.visible, _restrict_to(u, p, q))
        if fail is not None:
            return AbsResult(False, (fail,))
    return AbsResult(True, ())


def _restrict_to(u: dict[Name, Name], p: Process, q: Process) -> dict[Name, Name]:
    keep = free_data_vars(p) | free_data_vars(q)
    return {k: v for k, v in u.items() if k in keep}


# ---------------------------------------------------------------------------
# Soundness hook: co-exploration of the concrete transition graphs
# ---------------------------------------------------------------------------

def _acts_match(a, b) -> bool:
    """Concrete action matching with opaque-absorbing output payloads."""
    from .semantics import ActIn, ActOut, ActTau
    if isinstance(a, ActTau) or isinstance(b, ActTau):
        return isinstance(a, ActTau) and isinstance(b, ActTau)
    if isinstance(a, ActIn) and isinstance(b, ActIn):
        return a == b
    if isinstance(a, ActOut) and isinstance(b, ActOut):
        if a.subject != b.subject or len(a.values) != len(b.values):
            return False
        return all(x.is_opaque() or y.is_opaque() or x == y
                   for x, y in zip(a.values, b.values))
    return False


def prop8_co_exploration(abstract: Process, concrete: Process,
                         visible: frozenset[str], consts: frozenset[Name]) -> bool:
    """For closed related terms: every step of A_V[Q] is matched by a step of P
    with related residuals and conversely, computed as a greatest fixpoint on
    the product of the two concrete transition graphs."""
    p0 = normalize_process(abstract)
    q0 = normalize_process(concrete)

    def absteps(qq: Process):
        return frozenset((hide_action(a, visible), t)
                         for a, t in concrete_steps(qq, consts))

    pairs: set[tuple[Process, Process]] = set()
    frontier = [(p0, q0)]
    while frontier:
        pair = frontier.pop()
        if pair in pairs:
            continue
        pairs.add(pair)
        pp, qq = pair
        for act_q, tq in absteps(qq):
            for act_p, tp in concrete_steps(pp, consts):
                if _acts_match(act_p, act_q) and (tp, tq) not in pairs:
                    frontier.append((tp, tq))

    alive = set(pairs)
    changed = True
    while changed:
        changed = False
        for pp, qq in list(alive):
            if (pp, qq) not in alive:
                continue
            ok = True
            q_moves = absteps(qq)
            p_moves = concrete_steps(pp, consts)
            for act_q, tq in q_moves:
                if not any(_acts_match(act_p, act_q) and (tp, tq) in alive
                           for act_p, tp in p_moves):
                    ok = False
                    break
            if ok:
                for act_p, tp in p_moves:
                    if not any(_acts_match(act_p, act_q) and (tp, tq) in alive
                               for act_q, tq in q_moves):
                        ok = False
                        break
            if not ok:
                alive.discard((pp, qq))
                changed = True
    return (p0, q0) in alive
