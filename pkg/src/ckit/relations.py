"""Greatest-fixpoint decision procedures for strong compliance and strong
subcontract, and the strong process-compliance check on configuration graphs.

The fixpoints are computed by refutation: start from all reachable pairs and
delete violators until stable. The surviving set restricted to what the root
can reach is returned as a certificate that revalidates in an independent pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import Action, Contract, END_PORT, Name, mentions_end
from .contracts import init, ready_sets, step
from .semantics import (
    Configuration, Side, client_can_end, client_has_tau, parallel_step,
)


class ClientActionError(ValueError):
    """The reserved action e occurred on the service side."""


@dataclass(frozen=True)
class PairRelation:
    kind: str  # "compliance" | "subcontract"
    pairs: frozenset[tuple[Contract, Contract]]

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class Counterexample:
    """A path of synchronized/matched actions from the root to a violating pair."""

    path: tuple[Action, ...]
    reason: str

    def as_json(self) -> dict:
        return {"path": [str(a) for a in self.path], "reason": self.reason}


@dataclass(frozen=True)
class Verdict:
    holds: bool
    certificate: Optional[PairRelation]
    counterexample: Optional[Counterexample]


def _co_set(actions: frozenset[Action]) -> frozenset[Action]:
    return frozenset(a.co() for a in actions)


def _joint_sync_steps(rho: Contract, sigma: Contract):
    """Pairs (alpha, rho', sigma') where the client moves on co(alpha) and the
    service on alpha."""
    client_init = init(rho)
    for alpha in sorted(init(sigma), key=str):
        if alpha.co() in client_init:
            yield alpha, step(rho, alpha.co()), step(sigma, alpha)


def _compliance_ready_ok(rho: Contract, sigma: Contract) -> bool:
    for r in ready_sets(rho):
        if any(a.name == END_PORT for a in r):
            continue
        co_r = _co_set(r)
        for s in ready_sets(sigma):
            if not (co_r & s):
                return False
    return True


def compliant(client: Contract, service: Contract) -> Verdict:
    """Strong compliance of a client contract with a service contract.

    Largest relation such that (1) every ready-set pair offers e or a possible
    synchronization, and (2) matched steps stay in the relation.
    """
    if mentions_end(service):
        raise ClientActionError("the reserved action e cannot occur in a service contract")

    root = (client, service)
    pairs = _reachable_pairs(root, kind="compliance")
    alive = set(pairs)
    reasons: dict[tuple[Contract, Contract], Counterexample] = {}

    changed = True
    while changed:
        changed = False
        for rho, sigma in sorted(alive, key=lambda p: (str(p[0]), str(p[1]))):
            bad: Optional[Counterexample] = None
            if not _compliance_ready_ok(rho, sigma):
                bad = Counterexample((), "ready-set pair without e or synchronization")
            else:
                for alpha, rho2, sigma2 in _joint_sync_steps(rho, sigma):
                    if (rho2, sigma2) not in alive:
                        tail = reasons.get((rho2, sigma2), Counterexample((), "removed"))
                        bad = Counterexample((alpha,) + tail.path, tail.reason)
                        break
            if bad is not None:
                alive.discard((rho, sigma))
                reasons[(rho, sigma)] = bad
                changed = True
    return _verdict(root, alive, reasons, kind="compliance")


def _subcontract_ready_ok(sigma: Contract, rho: Contract) -> bool:
    sigma_ready = ready_sets(sigma)
    for r in ready_sets(rho):
        if not any(s <= r for s in sigma_ready):
            return False
    return True


def subcontract(sigma: Contract, rho: Contract) -> Verdict:
    """Strong subcontract sigma ⊑ rho (the must-testing preorder).

    Largest relation such that (1) every ready set of rho is refined by one of
    sigma, and (2) every move of rho is matched by sigma with related
    continuations.
    """
    root = (sigma, rho)
    pairs = _reachable_pairs(root, kind="subcontract")
    alive = set(pairs)
    reasons: dict[tuple[Contract, Contract], Counterexample] = {}

    changed = True
    while changed:
        changed = False
        for sig, rh in sorted(alive, key=lambda p: (str(p[0]), str(p[1]))):
            bad: Optional[Counterexample] = None
            if not _subcontract_ready_ok(sig, rh):
                bad = Counterexample((), "ready set of the wider contract lacks a refinement")
            else:
                for alpha in sorted(init(rh), key=str):
                    sig2 = step(sig, alpha)
                    if sig2 is None:
                        bad = Counterexample((alpha,), f"move {alpha} not matched")
                        break
                    rh2 = step(rh, alpha)
                    if (sig2, rh2) not in alive:
                        tail = reasons.get((sig2, rh2), Counterexample((), "removed"))
                        bad = Counterexample((alpha,) + tail.path, tail.reason)
                        break
            if bad is not None:
                alive.discard((sig, rh))
                reasons[(sig, rh)] = bad
                changed = True
    return _verdict(root, alive, reasons, kind="subcontract")


def equivalent(sigma: Contract, rho: Contract) -> bool:
    """Mutual strong subcontract."""
    return subcontract(sigma, rho).holds and subcontract(rho, sigma).holds


def _reachable_pairs(root, kind: str) -> set[tuple[Contract, Contract]]:
    seen: set[tuple[Contract, Contract]] = set()
    frontier = [root]
    while frontier:
        pair = frontier.pop()
        if pair in seen:
            continue
        seen.add(pair)
        left, right = pair
        if kind == "compliance":
            succ = [(l2, r2) for _, l2, r2 in _joint_sync_steps(left, right)]
        else:
            succ = []
            for alpha in init(right):
                l2 = step(left, alpha)
                r2 = step(right, alpha)
                if l2 is not None:
                    succ.append((l2, r2))
        frontier.extend(p for p in succ if p not in seen)
    return seen


def _verdict(root, alive, reasons, kind: str) -> Verdict:
    if root in alive:
        cert = _restrict_to_reachable(root, alive, kind)
        return Verdict(True, PairRelation(kind, frozenset(cert)), None)
    return Verdict(False, None, reasons.get(root, Counterexample((), "root removed")))


def _restrict_to_reachable(root, alive, kind: str) -> set:
    keep: set = set()
    frontier = [root]
    while frontier:
        pair = frontier.pop()
        if pair in keep or pair not in alive:
            continue
        keep.add(pair)
        left, right = pair
        if kind == "compliance":
            frontier.extend((l2, r2) for _, l2, r2 in _joint_sync_steps(left, right))
        else:
            for alpha in init(right):
                l2 = step(left, alpha)
                if l2 is not None:
                    frontier.append((l2, step(right, alpha)))
    return keep


# ---------------------------------------------------------------------------
# Certificate revalidation (independent of the fixpoint loop)
# ---------------------------------------------------------------------------

def check_compliance_certificate(client: Contract, service: Contract,
                                 rel: PairRelation) -> bool:
    """Re-checks the defining clauses pointwise; never reuses fixpoint state."""
    if rel.kind != "compliance" or (client, service) not in rel.pairs:
        return False
    for rho, sigma in rel.pairs:
        if not _compliance_ready_ok(rho, sigma):
            return False
        for _, rho2, sigma2 in _joint_sync_steps(rho, sigma):
            if (rho2, sigma2) not in rel.pairs:
                return False
    return True


def check_subcontract_certificate(sigma: Contract, rho: Contract,
                                  rel: PairRelation) -> bool:
    if rel.kind != "subcontract" or (sigma, rho) not in rel.pairs:
        return False
    for sig, rh in rel.pairs:
        if not _subcontract_ready_ok(sig, rh):
            return False
        for alpha in init(rh):
            sig2 = step(sig, alpha)
            if sig2 is None or (sig2, step(rh, alpha)) not in rel.pairs:
                return False
    return True


# ---------------------------------------------------------------------------
# Strong process compliance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcessVerdict:
    holds: bool
    stuck: Optional[Configuration]  # a violating stuck configuration when not holds


def process_compliant(client: Side, service: Side,
                      consts: frozenset[Name]) -> ProcessVerdict:
    """Strong process compliance: explore the finite configuration graph.

    The calculus has no recursion, so every maximal computation is finite and
    the success condition reduces to: in every stuck configuration the client
    has no silent move and the success action e is enabled.
    """
    root = Configuration(client, service)
    seen: set[Configuration] = set()
    frontier = [root]
    while frontier:
        cfg = frontier.pop()
        if cfg in seen:
            continue
        seen.add(cfg)
        succ = parallel_step(cfg, consts)
        if not succ:
            if client_has_tau(cfg.client, consts) or not client_can_end(cfg.client, consts):
                return ProcessVerdict(False, cfg)
        frontier.extend(c for c in succ if c not in seen)
    return ProcessVerdict(True, None)
