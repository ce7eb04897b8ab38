"""Seeded random generators for contracts, conditions and processes, plus the
derived constructions the acceptance suites need: subcontract pairs, guided
clients for a service, and abstractions of concrete processes."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .contracts import init, ready_sets, step
from .relations import subcontract
from .syntax import (
    Action, Branch, CNIL, Condition, Contract, Eq, If, Kind, Name, NIL, Nil,
    OPAQUE, Output, Par, Prefix, Process, Sum, TauP, TRUE, FALSE, And, Or, Neq,
    const, end_process, ext_of, int_of, par_of, port, var,
)


# ---------------------------------------------------------------------------
# Contracts and conditions
# ---------------------------------------------------------------------------

DEFAULT_ACTIONS = tuple(Action(n, (), out)
                        for n in ("a", "b", "c", "d") for out in (False, True))


def random_contract(rng: random.Random, depth: int = 4,
                    actions: tuple[Action, ...] = DEFAULT_ACTIONS) -> Contract:
    if depth <= 0 or rng.random() < 0.2:
        return CNIL
    roll = rng.random()
    if roll < 0.5:
        return Prefix(rng.choice(actions), random_contract(rng, depth - 1, actions))
    kids = [random_contract(rng, depth - 1, actions) for _ in range(rng.randint(2, 3))]
    if roll < 0.75:
        return ext_of(kids)
    return int_of(kids)


def random_condition(rng: random.Random, vars_: tuple[Name, ...],
                     consts: tuple[Name, ...], depth: int = 3) -> Condition:
    atoms: list[Name] = list(vars_) + list(consts) + [OPAQUE]
    if depth <= 0 or rng.random() < 0.4:
        roll = rng.random()
        if roll < 0.1:
            return TRUE
        if roll < 0.15:
            return FALSE
        lhs, rhs = rng.choice(atoms), rng.choice(atoms)
        return Eq(lhs, rhs) if rng.random() < 0.5 else Neq(lhs, rhs)
    l = random_condition(rng, vars_, consts, depth - 1)
    r = random_condition(rng, vars_, consts, depth - 1)
    return And(l, r) if rng.random() < 0.5 else Or(l, r)


def subcontract_pair(rng: random.Random, depth: int = 3,
                     actions: tuple[Action, ...] = DEFAULT_ACTIONS
                     ) -> Optional[tuple[Contract, Contract]]:
    """A pair (sigma, rho) with sigma ⊑ rho, verified by the fixpoint."""
    rho = random_contract(rng, depth, actions)
    if rng.random() < 0.7:
        sigma = int_of([rho, random_contract(rng, depth - 1, actions)])
    else:
        sigma = random_contract(rng, depth, actions)
    if subcontract(sigma, rho).holds:
        return sigma, rho
    return None


def visible_subset(rng: random.Random, c: Contract) -> frozenset[str]:
    from .syntax import contract_names
    names = sorted(contract_names(c))
    return frozenset(n for n in names if rng.random() < 0.6)


# ---------------------------------------------------------------------------
# Processes
# ---------------------------------------------------------------------------

@dataclass
class ProcessGen:
    """Closed-process generator over a fixed small signature."""

    rng: random.Random
    ports: tuple[tuple[str, int], ...] = (("x", 1), ("y", 1), ("z", 0), ("w", 2))
    consts: tuple[str, ...] = ("ka", "kb")
    opaque_rate: float = 0.15
    par_rate: float = 0.12
    counter: int = field(default=0)

    def const_names(self) -> frozenset[Name]:
        return frozenset(const(c) for c in self.consts)

    def fresh_var(self) -> Name:
        self.counter += 1
        return var(f"u{self.counter}")

    def value(self, scope: tuple[Name, ...]) -> Name:
        pool: list[Name] = [const(c) for c in self.consts]
        pool.extend(scope)
        if self.rng.random() < self.opaque_rate:
            return OPAQUE
        return self.rng.choice(pool)

    def process(self, depth: int, scope: tuple[Name, ...] = ()) -> Process:
        rng = self.rng
        if depth <= 0 or rng.random() < 0.18:
            return NIL
        roll = rng.random()
        if roll < self.par_rate and depth >= 2:
            return par_of([self.process(depth - 1, scope), self.process(depth - 1, scope)])
        if roll < self.par_rate + 0.12:
            return TauP(self.process(depth - 1, scope))
        if roll < self.par_rate + 0.40:
            name, arity = rng.choice(self.ports)
            subject = OPAQUE if rng.random() < self.opaque_rate else port(name)
            payload = tuple(self.value(scope) for _ in range(arity))
            return Output(subject, payload, self.process(depth - 1, scope))
        if roll < self.par_rate + 0.70:
            n_branches = rng.randint(1, 2)
            branches = []
            for _ in range(n_branches):
                name, arity = rng.choice(self.ports)
                subject = OPAQUE if rng.random() < self.opaque_rate else port(name)
                binders = tuple(self.fresh_var() for _ in range(arity))
                branches.append(Branch(subject, binders,
                                       self.process(depth - 1, scope + binders)))
            return Sum(tuple(branches))
        lhs, rhs = self.value(scope), self.value(scope)
        return If(lhs, rhs, self.process(depth - 1, scope), self.process(depth - 1, scope))

    def closed_process(self, depth: int = 4) -> Process:
        return self.process(depth)


def concrete_generator(rng: random.Random, **kw) -> ProcessGen:
    return ProcessGen(rng, opaque_rate=0.0, **kw)


# ---------------------------------------------------------------------------
# Abstractions of concrete processes (accepted pairs by construction)
# ---------------------------------------------------------------------------

def abstract_process_of(q: Process, hidden_ports: frozenset[str],
                        hidden_consts: frozenset[str],
                        rng: Optional[random.Random] = None) -> Process:
    """Build a candidate abstraction of q: actions on hidden ports become
    silent (outputs drop their payload, input guards become opaque guards with
    their received values opaqued), hidden constants become opaque, and some
    visible output payloads may be opaqued as well."""

    def hide_value(n: Name) -> Name:
        if n.kind is Kind.CONST and n.ident in hidden_consts:
            return OPAQUE
        return n

    def go(p: Process, opaqued: frozenset[Name]) -> Process:
        match p:
            case Nil():
                return p
            case TauP(cont):
                return TauP(go(cont, opaqued))
            case Output(subject, payload, cont):
                if subject.is_opaque() or subject.ident in hidden_ports:
                    return TauP(go(cont, opaqued))
                vals = []
                for v in payload:
                    v = OPAQUE if v in opaqued else hide_value(v)
                    if rng is not None and v.kind is Kind.CONST and rng.random() < 0.15:
                        v = OPAQUE
                    vals.append(v)
                return Output(subject, tuple(vals), go(cont, opaqued))
            case Sum(branches):
                out = []
                for b in branches:
                    if b.subject.is_opaque() or b.subject.ident in hidden_ports:
                        out.append(Branch(OPAQUE, (),
                                          go(b.cont, opaqued | frozenset(b.binders))))
                    else:
                        out.append(Branch(b.subject, b.binders, go(b.cont, opaqued)))
                return Sum(tuple(out))
            case If(lhs, rhs, t, e):
                l = OPAQUE if lhs in opaqued else hide_value(lhs)
                r = OPAQUE if rhs in opaqued else hide_value(rhs)
                return If(l, r, go(t, opaqued), go(e, opaqued))
            case Par(parts):
                return par_of(go(x, opaqued) for x in parts)
        raise TypeError(f"not a process: {p!r}")

    return go(q, frozenset())


def abstraction_instance(rng: random.Random, gen: ProcessGen, depth: int = 4
                         ) -> tuple[Process, Process, frozenset[str]]:
    """(abstract, concrete, visible) with the abstraction built by hiding."""
    q = gen.closed_process(depth)
    port_names = [n for n, _ in gen.ports]
    hidden_ports = frozenset(n for n in port_names if rng.random() < 0.4)
    hidden_consts = frozenset(c for c in gen.consts if rng.random() < 0.3)
    p = abstract_process_of(q, hidden_ports, hidden_consts, rng)
    visible = (frozenset(port_names) - hidden_ports) | \
        (frozenset(gen.consts) - hidden_consts)
    return p, q, visible


# ---------------------------------------------------------------------------
# Clients guided by a service contract
# ---------------------------------------------------------------------------

def client_for_contract(rng: random.Random, sigma: Contract, ports: dict[str, int],
                        depth: int = 8) -> Optional[Process]:
    """A client process intended to comply with service contract sigma.

    Walks the contract: service inputs are answered by outputs with the exact
    payload, service outputs by an input sum covering every output the service
    may have readied. Returns None when the contract shape is out of reach
    (e.g. an internal choice between inputs)."""
    if depth <= 0:
        return None
    rsets = ready_sets(sigma)
    if frozenset() in rsets and len(rsets) == 1:
        return end_process()
    if rng.random() < 0.1:
        return end_process()
    all_actions = sorted(init(sigma), key=str)
    must_cover = [a for a in all_actions if a.is_output]
    if len(rsets) == 1:
        r = next(iter(rsets))
        if not r:
            return end_process()
        a = rng.choice(sorted(r, key=str))
        if not a.is_output:
            # service awaits a: emit it with the exact payload
            nxt = step(sigma, a)
            cont = client_for_contract(rng, nxt, ports, depth - 1)
            if cont is None:
                return None
            if any(v.kind is Kind.VAR for v in a.payload):
                return None
            return Output(port(a.name), a.payload, cont)
    if not must_cover:
        return None
    # Receive whichever output the service chose.
    branches = []
    for a in must_cover:
        nxt = step(sigma, a)
        cont = client_for_contract(rng, nxt, ports, depth - 1)
        if cont is None:
            return None
        arity = ports.get(a.name, len(a.payload))
        binders = tuple(var(f"cv{depth}_{i}_{a.name}") for i in range(arity))
        branches.append(Branch(port(a.name), binders, cont))
    seen = {}
    for b in branches:
        seen[(b.subject, len(b.binders))] = b  # one guard per port
    merged = list(seen.values())
    if frozenset() in rsets:
        merged.append(Branch(port("e"), (), NIL))  # service may stall: allow success
    return Sum(tuple(merged))
