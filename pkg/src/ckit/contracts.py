"""Contract LTS with continuation-merging choice semantics, ready sets and
reachability, plus the internal-choice-of-external-sums normal form."""

from __future__ import annotations

from typing import Optional

from .syntax import (
    Action, CNIL, CNil, Contract, External, Internal, Prefix,
    action_key, contract_key, ext_of, int_of,
)


def _parts(c: Contract) -> tuple[Contract, ...]:
    if isinstance(c, (External, Internal)):
        return c.parts
    return (c,)


def step(c: Contract, a: Action) -> Optional[Contract]:
    """The unique continuation of c after a, or None when c cannot move on a.

    Both sum operators merge double continuations into an internal choice, so
    a.b + a.c steps on a to b (+) c and the relation is deterministic.
    """
    match c:
        case CNil():
            return None
        case Prefix(action, cont):
            return cont if action == a else None
        case External(parts) | Internal(parts):
            moved = [s for s in (step(p, a) for p in parts) if s is not None]
            if not moved:
                return None
            return int_of(moved)
    raise TypeError(f"not a contract: {c!r}")


def init(c: Contract) -> frozenset[Action]:
    """The actions c can immediately take."""
    match c:
        case CNil():
            return frozenset()
        case Prefix(action, _):
            return frozenset({action})
        case External(parts) | Internal(parts):
            out: frozenset[Action] = frozenset()
            for p in parts:
                out |= init(p)
            return out
    raise TypeError(f"not a contract: {c!r}")


def ready_sets(c: Contract) -> frozenset[frozenset[Action]]:
    """The full set of ready sets: external sums union, internal choices branch."""
    match c:
        case CNil():
            return frozenset({frozenset()})
        case Prefix(action, _):
            return frozenset({frozenset({action})})
        case External(parts):
            acc: frozenset[frozenset[Action]] = frozenset({frozenset()})
            for p in parts:
                acc = frozenset(r | s for r in acc for s in ready_sets(p))
            return acc
        case Internal(parts):
            out: frozenset[frozenset[Action]] = frozenset()
            for p in parts:
                out |= ready_sets(p)
            return out
    raise TypeError(f"not a contract: {c!r}")


def reachable(c: Contract) -> frozenset[Contract]:
    """Least step-closed set containing c; finite because contracts are finite."""
    seen: set[Contract] = set()
    frontier = [c]
    while frontier:
        cur = frontier.pop()
        if cur in seen:
            continue
        seen.add(cur)
        for a in init(cur):
            nxt = step(cur, a)
            if nxt is not None and nxt not in seen:
                frontier.append(nxt)
    return frozenset(seen)


def normalize(c: Contract) -> Contract:
    """Canonical internal-choice-of-external-sums form, semantically equivalent.

    External sums distribute over internal choices, and duplicate guards in a
    sum merge their continuations into an internal choice (matching the step
    relation). Equivalence is semantic (mutual subcontract), not syntactic.
    """
    match c:
        case CNil():
            return CNIL
        case Prefix(action, cont):
            return Prefix(action, normalize(cont))
        case Internal(parts):
            return int_of(normalize(p) for p in parts)
        case External(parts):
            normed = [normalize(p) for p in parts]
            groups = [_parts(p) for p in normed]
            sums = []
            for combo in _product(groups):
                sums.append(_merge_sum(combo))
            return int_of(sums)
    raise TypeError(f"not a contract: {c!r}")


def _product(groups: list[tuple[Contract, ...]]) -> list[tuple[Contract, ...]]:
    out: list[tuple[Contract, ...]] = [()]
    for g in groups:
        out = [combo + (item,) for combo in out for item in g]
    return out


def _merge_sum(summands: tuple[Contract, ...]) -> Contract:
    """Combine normal-form external sums, merging equal guards via (+)."""
    order: list[Action] = []
    conts: dict[Action, list[Contract]] = {}
    for s in summands:
        for item in _parts(s):
            match item:
                case CNil():
                    continue
                case Prefix(action, cont):
                    if action not in conts:
                        order.append(action)
                        conts[action] = []
                    conts[action].append(cont)
                case _:
                    raise AssertionError(f"non-prefix inside normal form sum: {item}")
    prefixes = [Prefix(a, normalize(int_of(conts[a]))) for a in order]
    return ext_of(prefixes)


def sum_items(c: Contract) -> tuple[tuple[Action, Contract], ...]:
    """Decompose one external-sum layer of a normal form into (guard, cont) pairs."""
    match c:
        case CNil():
            return ()
        case Prefix(action, cont):
            return ((action, cont),)
        case External(parts):
            out = []
            for p in parts:
                match p:
                    case Prefix(action, cont):
                        out.append((action, cont))
                    case CNil():
                        continue
                    case _:
                        raise ValueError(f"not a normal-form sum: {c}")
            return tuple(out)
    raise ValueError(f"not a normal-form sum: {c}")


def sort_contract(c: Contract) -> Contract:
    """Order choice parts canonically; used to make inference output deterministic."""
    match c:
        case CNil():
            return c
        case Prefix(action, cont):
            return Prefix(action, sort_contract(cont))
        case External(parts):
            return ext_of(sorted((sort_contract(p) for p in parts), key=contract_key))
        case Internal(parts):
            return int_of(sorted((sort_contract(p) for p in parts), key=contract_key))
    raise TypeError(f"not a contract: {c!r}")
