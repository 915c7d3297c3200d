"""Small automation: the obvious next step, never a creative one.

Tactics close goals by chaining axiom attempts and shape-forced steps.
They refuse to pick invariants, contracts, lengthening factors, cut
predicates, or synchronization bodies; those choices carry the actual
proof insight and belong to the script or the person driving the UI.
"""

from dataclasses import dataclass, field
from typing import Optional

from . import formulas as f
from . import terms as t
from .certificates import ProofNode
from .prover import Prover
from .rules import RuleError, apply_rule, chain_parts
from .sequents import Sequent

AXIOM_ORDER = ("CLOSE", "TRUE", "FALSE", "RVAR", "CH-RVAR", "REL", "PRED")


@dataclass
class TacticOutcome:
    node: Optional[ProofNode]
    open_goals: tuple[Sequent, ...]
    steps: int

    @property
    def closed(self) -> bool:
        return self.node is not None


@dataclass
class _Budget:
    left: int
    used: int = 0
    open_goals: list = field(default_factory=list)

    def spend(self) -> bool:
        if self.left <= 0:
            return False
        self.left -= 1
        self.used += 1
        return True


def micro_close(seq: Sequent, prover: Prover) -> Optional[ProofNode]:
    """Try every axiom rule; a leaf node on success, None otherwise."""
    for name in AXIOM_ORDER:
        if name == "PRED":
            for i, d in enumerate(seq.delta):
                if isinstance(d, f.Pred):
                    try:
                        apply_rule(seq, name, {"target": i}, prover)
                        return ProofNode(name, {"target": i})
                    except RuleError:
                        pass
            continue
        if name == "REL":
            for i, d in enumerate(seq.delta):
                if isinstance(d, f.Rel):
                    try:
                        apply_rule(seq, name, {"target": i}, prover)
                        return ProofNode(name, {"target": i})
                    except RuleError:
                        pass
            continue
        try:
            apply_rule(seq, name, {}, prover)
            return ProofNode(name, {})
        except RuleError:
            pass
    return None


def _gamma_candidates(seq: Sequent, unfold: bool):
    """Rule attempts driven by the antecedent, most specific first."""
    out = []
    for phi in seq.gamma:
        if isinstance(phi, f.Or):
            out.append(("OR-L", {}))
            break
    for phi in seq.gamma:
        if isinstance(phi, f.And):
            out.append(("AND-L", {}))
            break
    non_pred = [phi for phi in seq.gamma if not isinstance(phi, f.Pred)]
    if len(non_pred) == 1:
        phi = non_pred[0]
        if isinstance(phi, f.Chop):
            lead = phi.left
            if isinstance(lead, f.Pred):
                out.append(("CH-PREDL", {}))
            elif isinstance(lead, f.Or):
                out.append(("CH-OR-L", {}))
            elif isinstance(lead, f.Rel) and isinstance(lead.rel, f.IdRel):
                out.append(("CH-ID", {}))
            elif isinstance(lead, f.Rel) and isinstance(lead.rel, f.SbRel):
                out.append(("CH-UPD", {}))
            elif isinstance(lead, f.Mu) and unfold:
                out.append(("CH-UNFL", {}))
        elif isinstance(phi, f.Rel):
            rule = "END-ID" if isinstance(phi.rel, f.IdRel) else "END-UPD"
            for i, d in enumerate(seq.delta):
                parts = chain_parts(d)
                if len(parts) >= 2 and isinstance(parts[-1], f.Pred):
                    out.append((rule, {"target": i}))
                    break
        elif isinstance(phi, f.Mu) and unfold:
            out.append(("UNFL", {}))
    return out


def _delta_candidates(seq: Sequent):
    out = []
    for phi in seq.delta:
        if isinstance(phi, f.Or):
            out.append(("OR-R", {}))
            break
    for phi in seq.delta:
        if isinstance(phi, f.And):
            out.append(("AND-R", {}))
            break
    return out


def _arb_candidates(seq: Sequent):
    """Absorption into a true-led target, the step of last resort."""
    non_pred = [phi for phi in seq.gamma if not isinstance(phi, f.Pred)]
    if len(non_pred) != 1 or not isinstance(non_pred[0], f.Chop):
        return []
    lead = non_pred[0].left
    if not (isinstance(lead, f.Rel) and isinstance(lead.rel, (f.IdRel, f.SbRel))):
        return []
    for i, d in enumerate(seq.delta):
        if isinstance(d, f.Chop) and d.left == f.Pred(t.TRUE):
            return [("ARB2", {"target": i})]
    return []


def _next_step(seq: Sequent, prover: Prover, unfold: bool):
    cands = _gamma_candidates(seq, unfold) + _delta_candidates(seq)
    cands += _arb_candidates(seq)
    for name, args in cands:
        try:
            return name, args, apply_rule(seq, name, args, prover)
        except RuleError:
            continue
    return None


def _drive(seq: Sequent, prover: Prover, budget: _Budget, unfold: bool):
    leaf = micro_close(seq, prover)
    if leaf is not None:
        return leaf
    step = None
    if budget.left > 0:
        step = _next_step(seq, prover, unfold)
    if step is None:
        budget.open_goals.append(seq)
        return None
    name, args, app = step
    budget.spend()
    children = []
    closed = True
    for prem in app.premises:
        child = _drive(prem, prover, budget, unfold)
        if child is None:
            closed = False
        children.append(child)
    if not closed:
        return None
    return ProofNode(name, args, tuple(children))


def _run(seq: Sequent, prover: Optional[Prover], fuel: int, unfold: bool) -> TacticOutcome:
    if prover is None:
        prover = Prover()
    budget = _Budget(left=fuel)
    node = _drive(seq, prover, budget, unfold)
    if node is not None:
        node = ProofNode(node.rule, node.args, node.premises, goal=seq)
        return TacticOutcome(node, (), budget.used)
    return TacticOutcome(None, tuple(budget.open_goals), budget.used)


def symbolic_exec(seq: Sequent, prover: Optional[Prover] = None, fuel: int = 64) -> TacticOutcome:
    """Chain forced chop steps; stop at any fixed point or recursion variable."""
    return _run(seq, prover, fuel, unfold=False)


def auto_unfold(seq: Sequent, prover: Optional[Prover] = None, fuel: int = 64) -> TacticOutcome:
    """Symbolic execution that also unfolds fixed points as it meets them.

    Terminates recursion only when the program state decides the guards;
    an unknown bound just burns the fuel and reports the frontier.
    """
    return _run(seq, prover, fuel, unfold=True)


TACTICS = {"symbolic_exec": symbolic_exec, "auto_unfold": auto_unfold}
