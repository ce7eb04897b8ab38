"""Contract abstraction A_V(σ): hide every action whose name is outside V,
converting hidden-guarded external branches into internal choices; plus the
hidden-reachability continuation set Alc and the continuation checks."""

from __future__ import annotations

from .syntax import Action, CNIL, CNil, Contract, END_PORT, Internal, Prefix, ext_of, int_of
from .contracts import init, normalize, step, sum_items
from .relations import equivalent, subcontract


def action_visible(a: Action, visible: frozenset[str]) -> bool:
    """Membership in V is by name: polarity and payload are ignored, the
    success action e is always visible, and the opaque label never is."""
    if a.name == "*":
        return False
    return a.name == END_PORT or a.name in visible


def abstract_contract(sigma: Contract, visible: frozenset[str]) -> Contract:
    """A_V(σ), computed on the normal form.

    Visible prefixes are kept, hidden prefixes dropped; an external sum splits
    into the sum of its visible-guarded branches combined by internal choice
    with the abstractions of the hidden-guarded continuations.
    """
    return _abs_nf(normalize(sigma), visible)


def _abs_nf(c: Contract, visible: frozenset[str]) -> Contract:
    if isinstance(c, CNil):
        return CNIL
    if isinstance(c, Internal):
        return int_of(_abs_sum(p, visible) for p in c.parts)
    return _abs_sum(c, visible)


def _abs_sum(c: Contract, visible: frozenset[str]) -> Contract:
    items = sum_items(c)
    kept = [Prefix(a, _abs_nf(cont, visible)) for a, cont in items
            if action_visible(a, visible)]
    hidden = [_abs_nf(cont, visible) for a, cont in items
              if not action_visible(a, visible)]
    visible_part = ext_of(kept)
    if not hidden:
        return visible_part
    if not kept:
        return int_of(hidden)
    return int_of([visible_part] + hidden)


def hidden_closure(sigma: Contract, visible: frozenset[str]) -> frozenset[Contract]:
    """All contracts reachable from sigma through hidden actions only."""
    seen: set[Contract] = set()
    frontier = [sigma]
    while frontier:
        cur = frontier.pop()
        if cur in seen:
            continue
        seen.add(cur)
        for beta in init(cur):
            if not action_visible(beta, visible):
                nxt = step(cur, beta)
                if nxt is not None and nxt not in seen:
                    frontier.append(nxt)
    return frozenset(seen)


def alc(sigma: Contract, alpha: Action, visible: frozenset[str]) -> frozenset[Contract]:
    """Alc(σ,α,V): continuations after hidden prefixes then one α step."""
    out: set[Contract] = set()
    for c in hidden_closure(sigma, visible):
        nxt = step(c, alpha)
        if nxt is not None:
            out.add(nxt)
    return frozenset(out)


def abstraction_continuation_check(sigma: Contract, alpha: Action,
                                   visible: frozenset[str]) -> bool:
    """Continuation characterization of A_V(σ) after α, checked semantically.

    A_V(σ) steps on α iff α is visible and Alc(σ,α,V) is nonempty, and then the
    continuation is equivalent to the internal choice of the abstracted Alc
    members. When additionally σ itself steps on α, the continuation refines
    A_V(σ(α)), with equivalence exactly when the hidden closure contributes no
    other continuation.
    """
    abstracted = abstract_contract(sigma, visible)
    continuation = step(abstracted, alpha)
    candidates = alc(sigma, alpha, visible)
    if not action_visible(alpha, visible) or not candidates:
        return continuation is None
    if continuation is None:
        return False
    expected = int_of(sorted((abstract_contract(c, visible) for c in candidates),
                             key=lambda c: str(c)))
    if not equivalent(continuation, expected):
        return False
    direct = step(sigma, alpha)
    if direct is not None:
        if not subcontract(continuation, abstract_contract(direct, visible)).holds:
            return False
        if candidates == frozenset({direct}):
            if not equivalent(continuation, abstract_contract(direct, visible)):
                return False
    return True
