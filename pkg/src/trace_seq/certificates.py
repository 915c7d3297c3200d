"""Replayable proof objects.

A ProofNode records which rule was applied with which arguments; the
checker re-runs every application against the kernel and only then
issues a Certificate.  Nothing in here trusts the recorded premises:
they are recomputed, and recorded goals (when present) must match the
recomputation exactly.

The JSON forms are text-based so certificates survive being written to
disk and reloaded in a process that has never seen the original ASTs.
Formula and predicate arguments are serialized through the printer and
parsed back on load; named relations travel in a context block.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from . import formulas as f
from . import terms as t
from .parser import parse_formula, parse_pred
from .printer import pretty_bool, pretty_formula
from .prover import Prover
from .rules import RULE_PARAMS, RuleError, apply_rule
from .sequents import ContractEntry, Sequent, XiEntry


class CheckError(Exception):
    """A recorded proof failed to replay."""


@dataclass(frozen=True)
class ProofNode:
    rule: str
    args: dict
    premises: tuple["ProofNode", ...] = ()
    goal: Optional[Sequent] = None


@dataclass(frozen=True)
class SideCondition:
    path: tuple[int, ...]
    rule: str
    detail: str
    ok: bool


@dataclass(frozen=True)
class Certificate:
    root: Sequent
    rule_count: int
    rules: tuple[str, ...]
    side_conditions: tuple[SideCondition, ...]
    axioms_used: tuple[str, ...]
    sync_decisions: tuple[str, ...]
    proof: ProofNode
    axiom_defs: tuple[tuple[str, t.BoolExpr], ...] = ()

    @property
    def axiom_free(self) -> bool:
        return not self.axioms_used


def _describe(ob) -> str:
    hyp = ", ".join(pretty_bool(h) for h in ob.hyps)
    tag = f" [{ob.method}]" if ob.method else ""
    return f"{ob.kind}: {hyp} |- {pretty_bool(ob.goal)}{tag}"


def check_proof(node: ProofNode, prover: Optional[Prover] = None) -> Certificate:
    """Replay a proof tree through the kernel and certify it.

    The root node must carry its goal; premise goals are recomputed and
    compared against any the tree recorded.  Fails on the first mismatch
    with the path to the offending node.
    """
    if node.goal is None:
        raise CheckError("the root node must carry its goal")
    if prover is None:
        prover = Prover()
    side: list[SideCondition] = []
    rules: list[str] = []
    axioms: set[str] = set()
    syncs: list[str] = []

    def walk(n: ProofNode, goal: Sequent, path: tuple[int, ...]) -> None:
        where = "/".join(str(i) for i in path) or "root"
        mark = len(prover.log)
        try:
            app = apply_rule(goal, n.rule, n.args, prover)
        except RuleError as e:
            raise CheckError(f"rule {n.rule} failed at {where}: {e}") from e
        rules.append(n.rule)
        for ob in prover.log[mark:]:
            axioms.update(ob.axioms_used)
            side.append(SideCondition(path, n.rule, _describe(ob), ob.proved))
        for note in app.notes:
            side.append(SideCondition(path, n.rule, note, True))
            if n.rule == "SYNC":
                syncs.append(note)
        if len(app.premises) != len(n.premises):
            raise CheckError(
                f"premise mismatch at {where}: {n.rule} produced "
                f"{len(app.premises)} premises, the proof recorded {len(n.premises)}"
            )
        for i, (child, prem) in enumerate(zip(n.premises, app.premises)):
            if child.goal is not None and child.goal != prem:
                raise CheckError(
                    f"premise mismatch at {where}/{i}: recorded goal differs "
                    f"from the kernel's premise"
                )
            walk(child, prem, path + (i,))

    walk(node, node.goal, ())
    return Certificate(
        root=node.goal,
        rule_count=len(rules),
        rules=tuple(rules),
        side_conditions=tuple(side),
        axioms_used=tuple(sorted(axioms)),
        sync_decisions=tuple(syncs),
        proof=node,
        axiom_defs=tuple(prover.axioms),
    )


# ---------------------------------------------------------------------------
# serialization


def _collect_rels(phi, into: dict) -> None:
    for r in f._iter_rels(phi):
        if isinstance(r, f.NamedRel):
            into[r.name] = r.body


def _harvest_context(node: ProofNode, rels: dict) -> None:
    if node.goal is not None:
        for phi in node.goal.gamma + node.goal.delta:
            _collect_rels(phi, rels)
        for e in node.goal.xi:
            _collect_rels(e.target, rels)
            if e.src_tail is not None:
                _collect_rels(e.src_tail, rels)
        for c in node.goal.contracts:
            _collect_rels(c.mu, rels)
    for v in node.args.values():
        if isinstance(v, f.TraceFormula):
            _collect_rels(v, rels)
    for child in node.premises:
        _harvest_context(child, rels)


def _args_to_json(rule: str, args: dict) -> dict:
    kinds = {arg: kind for arg, kind, _ in RULE_PARAMS.get(rule, ())}
    out = {}
    for key, val in args.items():
        kind = kinds.get(key)
        if kind == "pred":
            out[key] = pretty_bool(val)
        elif kind == "formula":
            out[key] = pretty_formula(val)
        elif kind == "indices":
            out[key] = [int(i) for i in val]
        elif val is not None:
            out[key] = int(val)
    return out


def _args_from_json(rule: str, data: dict, relenv) -> dict:
    kinds = {arg: kind for arg, kind, _ in RULE_PARAMS.get(rule, ())}
    out = {}
    for key, val in data.items():
        kind = kinds.get(key)
        if kind == "pred":
            out[key] = parse_pred(val)
        elif kind == "formula":
            out[key] = parse_formula(val, relenv)
        elif kind == "indices":
            out[key] = [int(i) for i in val]
        else:
            out[key] = int(val)
    return out


def sequent_to_json(seq: Sequent) -> dict:
    return {
        "xi": [
            {
                "var": e.var,
                "guard": pretty_bool(e.guard),
                "target": pretty_formula(e.target),
                "srcTail": None if e.src_tail is None else pretty_formula(e.src_tail),
            }
            for e in seq.xi
        ],
        "gamma": [pretty_formula(g) for g in seq.gamma],
        "delta": [pretty_formula(d) for d in seq.delta],
        "contracts": [
            {
                "proc": c.proc,
                "pre": pretty_bool(c.pre),
                "post": pretty_bool(c.post),
                "mu": pretty_formula(c.mu),
            }
            for c in seq.contracts
        ],
    }


def sequent_from_json(data: dict, relenv=None) -> Sequent:
    xi = [
        XiEntry(
            e["var"],
            parse_pred(e["guard"]),
            f.normalize(parse_formula(e["target"], relenv)),
            None
            if e.get("srcTail") is None
            else f.normalize(parse_formula(e["srcTail"], relenv)),
        )
        for e in data.get("xi", [])
    ]
    contracts = [
        ContractEntry(
            c["proc"],
            parse_pred(c["pre"]),
            parse_pred(c["post"]),
            f.normalize(parse_formula(c["mu"], relenv)),
        )
        for c in data.get("contracts", [])
    ]
    return Sequent.make(
        [parse_formula(g, relenv) for g in data.get("gamma", [])],
        [parse_formula(d, relenv) for d in data.get("delta", [])],
        xi,
        contracts,
    )


def proof_to_json(node: ProofNode, include_goal: bool = True) -> dict:
    out = {
        "rule": node.rule,
        "args": _args_to_json(node.rule, node.args),
        "premises": [proof_to_json(p, include_goal=False) for p in node.premises],
    }
    if include_goal and node.goal is not None:
        out["goal"] = sequent_to_json(node.goal)
    return out


def proof_from_json(data: dict, relenv=None) -> ProofNode:
    goal = None
    if data.get("goal") is not None:
        goal = sequent_from_json(data["goal"], relenv)
    return ProofNode(
        rule=data["rule"],
        args=_args_from_json(data["rule"], data.get("args", {}), relenv),
        premises=tuple(proof_from_json(p, relenv) for p in data.get("premises", [])),
        goal=goal,
    )


def certificate_to_json(cert: Certificate) -> dict:
    rels: dict = {}
    _harvest_context(cert.proof, rels)
    return {
        "root": sequent_to_json(cert.root),
        "rootText": cert.root.pretty(),
        "ruleCount": cert.rule_count,
        "rules": list(cert.rules),
        "axioms": list(cert.axioms_used),
        "axiomFree": cert.axiom_free,
        "syncDecisions": list(cert.sync_decisions),
        "sideConditions": [
            {"path": list(s.path), "rule": s.rule, "detail": s.detail, "ok": s.ok}
            for s in cert.side_conditions
        ],
        "proof": proof_to_json(cert.proof, include_goal=False),
        "context": {
            "relations": {name: pretty_bool(body) for name, body in sorted(rels.items())},
            "axioms": {label: pretty_bool(ax) for label, ax in cert.axiom_defs},
        },
    }


def certificate_from_json(data: dict) -> Certificate:
    """Parse and fully re-check a serialized certificate."""
    ctx = data.get("context", {})
    relenv = f.RelEnv()
    for name, body in ctx.get("relations", {}).items():
        relenv.declare(name, parse_pred(body, allow_primes=True))
    axioms = tuple(
        (label, parse_pred(text)) for label, text in ctx.get("axioms", {}).items()
    )
    root = sequent_from_json(data["root"], relenv)
    tree = proof_from_json(data["proof"], relenv)
    tree = ProofNode(tree.rule, tree.args, tree.premises, goal=root)
    return check_proof(tree, Prover(axioms=axioms))


def certificate_hash(cert: Certificate) -> str:
    """Stable digest of what the certificate claims, not how it was found.

    Covers the root sequent, the rule tree with its arguments, axioms,
    and sync decisions; excludes the prover's obligation log, which is
    an artifact of replay order.
    """
    rels: dict = {}
    _harvest_context(cert.proof, rels)
    core = {
        "root": sequent_to_json(cert.root),
        "proof": proof_to_json(cert.proof, include_goal=False),
        "axioms": list(cert.axioms_used),
        "syncDecisions": list(cert.sync_decisions),
        "relations": {name: pretty_bool(body) for name, body in sorted(rels.items())},
    }
    blob = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
