"""Decision engine for the Boolean condition language.

Everything here is decided exactly by enumeration over the finite domain
𝒞 ∪ {*}: ground evaluation, entailment, consistency, decomposition checking
and visibility restriction. Comparisons against the opaque element * evaluate
to true for both = and !=, which is what turns opaqued conditionals into
internal choices downstream.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

from .syntax import (
    FALSE, OPAQUE, TRUE,
    And, Condition, Eq, FalseCond, Kind, Name, Neq, Or, TrueCond,
    cond_consts, cond_vars, disj_all,
)


class NotGroundError(ValueError):
    pass


@dataclass(frozen=True)
class Substitution:
    """Partial map from data variables to variables, constants or the opaque *."""

    pairs: tuple[tuple[Name, Name], ...]

    @staticmethod
    def of(mapping: dict[Name, Name]) -> Substitution:
        for k in mapping:
            if k.kind is not Kind.VAR:
                raise ValueError(f"substitution domain must be data variables, got {k}")
        return Substitution(tuple(sorted(mapping.items(), key=lambda kv: kv[0].ident)))

    def get(self, n: Name) -> Name:
        for k, v in self.pairs:
            if k == n:
                return v
        return n

    def as_dict(self) -> dict[Name, Name]:
        return dict(self.pairs)

    def domain(self) -> frozenset[Name]:
        return frozenset(k for k, _ in self.pairs)

    def __str__(self) -> str:
        inner = ", ".join(f"{k} -> {v}" for k, v in self.pairs)
        return "{" + inner + "}"


def apply_subst(m: Condition, s: Substitution) -> Condition:
    def val(n: Name) -> Name:
        return s.get(n) if n.kind is Kind.VAR else n

    match m:
        case TrueCond() | FalseCond():
            return m
        case Eq(lhs, rhs):
            return Eq(val(lhs), val(rhs))
        case Neq(lhs, rhs):
            return Neq(val(lhs), val(rhs))
        case And(l, r):
            return And(apply_subst(l, s), apply_subst(r, s))
        case Or(l, r):
            return Or(apply_subst(l, s), apply_subst(r, s))
    raise TypeError(f"not a condition: {m!r}")


def _eval_atom(lhs: Name, rhs: Name, equal: bool) -> bool:
    if lhs.kind is Kind.VAR or rhs.kind is Kind.VAR:
        raise NotGroundError(f"atom over data variable: {lhs} {'=' if equal else '!='} {rhs}")
    if lhs.is_opaque() or rhs.is_opaque():
        return True  # both a=* and a!=* evaluate to true
    return (lhs == rhs) if equal else (lhs != rhs)


def eval_ground(m: Condition) -> bool:
    """Evaluate a ground condition; raises NotGroundError on data variables."""
    match m:
        case TrueCond():
            return True
        case FalseCond():
            return False
        case Eq(lhs, rhs):
            return _eval_atom(lhs, rhs, equal=True)
        case Neq(lhs, rhs):
            return _eval_atom(lhs, rhs, equal=False)
        case And(l, r):
            return eval_ground(l) and eval_ground(r)
        case Or(l, r):
            return eval_ground(l) or eval_ground(r)
    raise TypeError(f"not a condition: {m!r}")


def respects(s: Substitution, m: Condition) -> bool:
    """True iff Ms is ground and evaluates to true (written s |= M)."""
    inst = apply_subst(m, s)
    try:
        return eval_ground(inst)
    except NotGroundError:
        return False


def _value_domain(consts: Iterable[Name]) -> list[Name]:
    return sorted(set(consts), key=lambda n: n.ident) + [OPAQUE]


def groundings(vars_: Iterable[Name], consts: Iterable[Name]) -> Iterable[Substitution]:
    """All total maps from vars_ into 𝒞 ∪ {*}, in deterministic order."""
    vs = sorted(set(vars_), key=lambda n: n.ident)
    dom = _value_domain(consts)
    for combo in itertools.product(dom, repeat=len(vs)):
        yield Substitution.of(dict(zip(vs, combo)))


def entails(m: Condition, n: Condition, consts: Iterable[Name]) -> bool:
    """M => N, decided by enumerating groundings of fn(M) ∪ fn(N).

    Substitutions into other variables never ground a condition, so only
    maps into 𝒞 ∪ {*} can affect |=; the decision is finite and exact.
    """
    all_consts = set(consts) | cond_consts(m) | cond_consts(n)
    for s in groundings(cond_vars(m) | cond_vars(n), all_consts):
        if respects(s, m) and not respects(s, n):
            return False
    return True


def is_consistent(m: Condition, consts: Iterable[Name]) -> bool:
    all_consts = set(consts) | cond_consts(m)
    return any(respects(s, m) for s in groundings(cond_vars(m), all_consts))


def is_decomposition(parts: Iterable[Condition], m: Condition,
                     consts: Iterable[Name]) -> bool:
    """True iff M => M1 \\/ ... \\/ Mk; the empty set decomposes only inconsistent M."""
    return entails(m, disj_all(parts), consts)


def satisfying_substitutions(m: Condition, vars_: Iterable[Name],
                             consts: Iterable[Name]) -> list[Substitution]:
    """All total maps vars_ -> 𝒞 ∪ {*} respecting M; vars_ must cover fn(M)."""
    vs = frozenset(vars_)
    missing = cond_vars(m) - vs
    if missing:
        raise ValueError(f"vars must cover fn(M); missing {sorted(str(v) for v in missing)}")
    all_consts = set(consts) | cond_consts(m)
    return [s for s in groundings(vs, all_consts) if respects(s, m)]


def restrict(m: Condition, visible: frozenset[str]) -> Condition:
    """M\\S: every atom mentioning a name outside the visible set becomes true.

    The opaque element is not a name and never hides an atom; constants count
    as names, so a constant not listed in the visible set is hidden.
    """

    def atom_visible(lhs: Name, rhs: Name) -> bool:
        return all(n.is_opaque() or n.ident in visible for n in (lhs, rhs))

    match m:
        case TrueCond() | FalseCond():
            return m
        case Eq(lhs, rhs):
            return m if atom_visible(lhs, rhs) else TRUE
        case Neq(lhs, rhs):
            return m if atom_visible(lhs, rhs) else TRUE
        case And(l, r):
            return And(restrict(l, visible), restrict(r, visible))
        case Or(l, r):
            return Or(restrict(l, visible), restrict(r, visible))
    raise TypeError(f"not a condition: {m!r}")
