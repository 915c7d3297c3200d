"""The proof rules: the only trusted path from premises to conclusions.

Every rule is a function from a sequent, an argument dict and a prover to
a RuleApp holding the premise sequents this application demands.  A proof
is closed when every leaf application has no premises.  Unknown rule
names are rejected, so nothing outside this module can extend the
calculus.

Conventions shared by the rules:

* Gamma/Delta members are addressed by index into the canonicalized
  tuples; where an index argument is optional the first matching member
  is taken, so replay is deterministic either way.
* Pure Pred members of Gamma ("P_Gamma") act as facts about the first
  state and are consulted through the prover.
* Rules whose premise drops information say so in their notes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from . import formulas as f
from . import terms as t
from . import grammar
from .printer import pretty_bool, pretty_formula
from .prover import Prover, spc
from .sequents import ContractEntry, Sequent, XiEntry


class RuleError(Exception):
    """The rule does not apply to this sequent with these arguments."""


@dataclass
class RuleApp:
    rule: str
    args: dict
    premises: tuple[Sequent, ...]
    notes: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# small helpers


def chain_parts(phi: f.TraceFormula) -> list[f.TraceFormula]:
    """A right-associated chop unfolded into its parts."""
    parts = []
    while isinstance(phi, f.Chop):
        parts.append(phi.left)
        phi = phi.right
    parts.append(phi)
    return parts


def _is_true(phi: f.TraceFormula) -> bool:
    return isinstance(phi, f.Pred) and isinstance(phi.pred, t.BTrue)


def _pick(members, args, key, pred, what) -> int:
    """Resolve an optional index argument against a member tuple."""
    if key in args and args[key] is not None:
        i = args[key]
        if not isinstance(i, int) or not (0 <= i < len(members)):
            raise RuleError(f"{key}={i!r} is out of range")
        if not pred(members[i]):
            raise RuleError(f"member {i} is not {what}")
        return i
    for i, phi in enumerate(members):
        if pred(phi):
            return i
    raise RuleError(f"no {what} present")


def sole_non_pred(seq: Sequent) -> f.TraceFormula:
    """The unique Gamma member that is not a Pred."""
    non = [phi for phi in seq.gamma if not isinstance(phi, f.Pred)]
    if len(non) != 1:
        raise RuleError(
            f"Gamma must have exactly one member besides predicates, has {len(non)}"
        )
    return non[0]


def _replace(members, i, *repl) -> list:
    out = list(members)
    out[i : i + 1] = repl
    return out


def _without(members, drop: Iterable[int]) -> list:
    dropset = set(drop)
    return [phi for i, phi in enumerate(members) if i not in dropset]


def _names_in(formulas: Iterable[f.TraceFormula], bools: Iterable[t.BoolExpr] = ()) -> set[str]:
    out: set[str] = set()
    for phi in formulas:
        for b in f._iter_bools(phi):
            out |= set(t.bool_vars(b))
    for b in bools:
        out |= set(t.bool_vars(b))
    return {n.rstrip("'") for n in out}


def _member_avoid(
    seq: Sequent, skip_phi: f.TraceFormula, skip_mu: Optional[f.Mu] = None
) -> set[str]:
    """Recursion-variable names used anywhere except one chosen member.

    A contract whose fixed point is the one being opened is exempted: the
    shared binder is deliberate, since the freed occurrences are exactly
    the calls that contract describes.
    """
    out: set[str] = set()
    for phi in seq.gamma + seq.delta:
        if phi is skip_phi:
            continue
        out |= f.free_rvars(phi) | f.bound_rvars(phi)
    for e in seq.xi:
        out.add(e.var)
        out |= f.free_rvars(e.target) | f.bound_rvars(e.target)
        if e.src_tail is not None:
            out |= f.free_rvars(e.src_tail) | f.bound_rvars(e.src_tail)
    for c in seq.contracts:
        if skip_mu is not None and c.mu == skip_mu:
            continue
        out |= f.free_rvars(c.mu) | f.bound_rvars(c.mu)
    return out


def _fresh_x(base: str, avoid: set[str]) -> str:
    cand = base if base.startswith("X") else "X" + base
    if cand not in avoid:
        return cand
    k = 2
    while f"{cand}_{k}" in avoid:
        k += 1
    return f"{cand}_{k}"


def _xify(mu: f.Mu, avoid: set[str]) -> f.Mu:
    """Rename the binder to a fresh X-prefixed name.

    Premises of the induction rules mention the body with its variable
    free; an X-prefixed name keeps that text parseable as a recursion
    variable.
    """
    name = _fresh_x(mu.var, avoid)
    if name == mu.var:
        return mu
    return f.Mu(name, f.substitute(mu.body, mu.var, f.RVar(name)), mu.proc)


def _xify_in(
    seq: Sequent,
    member: f.TraceFormula,
    mu: f.Mu,
    extra_avoid: Iterable[str] = (),
) -> f.Mu:
    """Rename ``mu``'s binder clear of everything but its own member."""
    avoid = _member_avoid(seq, member, skip_mu=mu)
    avoid |= f.bound_rvars(mu.body)
    avoid |= f.free_rvars(mu.body) - {mu.var}
    avoid |= set(extra_avoid)
    return _xify(mu, avoid)


def contract_scope(entry: ContractEntry) -> list[str]:
    """Variables a contract speaks about: the body's plus post's old names."""
    vs = set(f.formula_state_vars(entry.mu))
    for name in t.bool_vars(entry.post):
        if name.endswith("_old"):
            vs.add(name[: -len("_old")])
    return sorted(vs)


def _old_suffix(scope: list[str], used: set[str]) -> str:
    """A uniform suffix making every v_old-style name in scope unused."""
    k = 0
    while True:
        tail = "_old" if k == 0 else f"_old#{k}"
        if all(f"{v}{tail}" not in used for v in scope):
            return tail
        k += 1


def _freeze_entry(
    entry: ContractEntry, preds: list[t.BoolExpr], extra: Iterable[f.TraceFormula]
) -> tuple[list[t.BoolExpr], t.BoolExpr]:
    """P_Gamma with scope vars frozen, and post re-aimed at the frozen names.

    The frozen copy of v is v_old (or v_old#k when that name is taken by
    the surrounding formulas).  Variables outside the contract scope are
    untouched by the call, so they stay plain and still refer to the
    current state.
    """
    scope = contract_scope(entry)
    used = _names_in(extra, preds)
    tail = _old_suffix(scope, used)
    ren = {v: t.Var(f"{v}{tail}") for v in scope}
    frozen = [t.subst_bool(p, ren) for p in preds]
    post_ren = {f"{v}_old": t.Var(f"{v}{tail}") for v in scope}
    post = t.subst_bool(entry.post, post_ren)
    return frozen, post


def det(mu: f.Mu, prover: Prover) -> bool:
    """Conservative determinism check on a recursion body.

    Each alternative must be a guard conjoined with a chain of Id/update
    steps and recursive occurrences of the bound variable; a nested
    guarded choice may close the chain.  Guards along distinct paths
    must be pairwise contradictory, so a start state picks at most one
    alternative.  Steps have unique successors and recursive segments
    are unique per start state by induction over the recursion depth,
    hence a trace of the body decomposes in exactly one way and the
    junction where a contract's postcondition holds is well defined.
    """
    return _det_choice(f.normalize(mu.body), mu.var, prover)


def _det_choice(phi, var, prover) -> bool:
    """Check one guarded choice; guards must exclude each other pairwise.

    The guards of sibling alternatives all speak about the same state,
    so their exclusivity is decided locally.  A nested choice sits in a
    later state and is checked on its own.
    """
    guards = []
    for disjunct in _disjuncts(phi):
        preds, others = [], []
        stack = [disjunct]
        while stack:
            part = stack.pop()
            if isinstance(part, f.And):
                stack.append(part.left)
                stack.append(part.right)
            elif isinstance(part, f.Pred):
                preds.append(part.pred)
            else:
                others.append(part)
        if len(others) != 1:
            return False
        parts = chain_parts(others[0])
        for j, part in enumerate(parts):
            if isinstance(part, f.Rel) and isinstance(part.rel, (f.IdRel, f.SbRel)):
                continue
            if isinstance(part, f.RVar) and part.name == var:
                continue
            if (
                isinstance(part, f.Or)
                and j == len(parts) - 1
                and _det_choice(part, var, prover)
            ):
                continue
            return False
        guards.append(t.conjoin(preds) if preds else t.TRUE)
    for i in range(len(guards)):
        for j in range(i + 1, len(guards)):
            if not prover.unsat([guards[i], guards[j]]):
                return False
    return True


def _disjuncts(phi):
    if isinstance(phi, f.Or):
        yield from _disjuncts(phi.left)
        yield from _disjuncts(phi.right)
    else:
        yield phi


def _chop_lead_rel(phi: f.TraceFormula) -> Optional[tuple[f.RelExpr, f.TraceFormula]]:
    if isinstance(phi, f.Chop) and isinstance(phi.left, f.Rel):
        return phi.left.rel, phi.right
    return None


# ---------------------------------------------------------------------------
# axioms (no premises)


def _r_close(seq, args, prover):
    for phi in seq.gamma:
        if phi in seq.delta:
            return RuleApp("CLOSE", args, ())
    raise RuleError("no formula shared between the two sides")


def _r_true(seq, args, prover):
    if any(_is_true(d) for d in seq.delta):
        return RuleApp("TRUE", args, ())
    raise RuleError("true is not on the right")


def _r_false(seq, args, prover):
    if prover.unsat(seq.gamma_preds):
        return RuleApp("FALSE", args, ())
    raise RuleError("left predicates were not shown contradictory")


def _r_pred(seq, args, prover):
    i = _pick(seq.delta, args, "target", lambda d: isinstance(d, f.Pred), "a predicate")
    goal = seq.delta[i]
    if prover.entails(seq.gamma_preds, goal.pred):
        return RuleApp("PRED", args, ())
    raise RuleError(f"could not derive {pretty_formula(goal)} from the left predicates")


def _r_rel(seq, args, prover):
    phi = sole_non_pred(seq)
    if not isinstance(phi, f.Rel):
        raise RuleError("the left side is not a single transition")
    i = _pick(seq.delta, args, "target", lambda d: isinstance(d, f.Rel), "a transition")
    r2 = seq.delta[i].rel
    if prover.rel_included(phi.rel, seq.gamma_preds, r2):
        return RuleApp("REL", args, ())
    raise RuleError(f"inclusion of {phi.rel} in {r2} not shown")


def _r_rvar(seq, args, prover):
    for phi in seq.gamma:
        if not isinstance(phi, f.RVar):
            continue
        for e in seq.xi:
            if e.var != phi.name or e.src_tail is not None:
                continue
            if e.target in seq.delta and prover.entails(seq.gamma_preds, e.guard):
                return RuleApp("RVAR", args, ())
    raise RuleError("no recursion-variable assumption closes this sequent")


def _r_ch_rvar(seq, args, prover):
    for phi in seq.gamma:
        if not (isinstance(phi, f.Chop) and isinstance(phi.left, f.RVar)):
            continue
        for e in seq.xi:
            if e.var != phi.left.name or e.src_tail != phi.right:
                continue
            if e.target in seq.delta and prover.entails(seq.gamma_preds, e.guard):
                return RuleApp("CH-RVAR", args, ())
    raise RuleError("no fused recursion-variable assumption closes this sequent")


# ---------------------------------------------------------------------------
# structural rules


def _r_and_l(seq, args, prover):
    i = _pick(seq.gamma, args, "target", lambda g: isinstance(g, f.And), "a conjunction")
    a = seq.gamma[i]
    prem = Sequent.make(
        _replace(seq.gamma, i, a.left, a.right), seq.delta, seq.xi, seq.contracts
    )
    return RuleApp("AND-L", args, (prem,))


def _r_and_r(seq, args, prover):
    i = _pick(seq.delta, args, "target", lambda d: isinstance(d, f.And), "a conjunction")
    a = seq.delta[i]
    p1 = Sequent.make(seq.gamma, _replace(seq.delta, i, a.left), seq.xi, seq.contracts)
    p2 = Sequent.make(seq.gamma, _replace(seq.delta, i, a.right), seq.xi, seq.contracts)
    return RuleApp("AND-R", args, (p1, p2))


def _r_or_l(seq, args, prover):
    i = _pick(seq.gamma, args, "target", lambda g: isinstance(g, f.Or), "a disjunction")
    o = seq.gamma[i]
    p1 = Sequent.make(_replace(seq.gamma, i, o.left), seq.delta, seq.xi, seq.contracts)
    p2 = Sequent.make(_replace(seq.gamma, i, o.right), seq.delta, seq.xi, seq.contracts)
    return RuleApp("OR-L", args, (p1, p2))


def _r_or_r(seq, args, prover):
    i = _pick(seq.delta, args, "target", lambda d: isinstance(d, f.Or), "a disjunction")
    o = seq.delta[i]
    prem = Sequent.make(
        seq.gamma, _replace(seq.delta, i, o.left, o.right), seq.xi, seq.contracts
    )
    return RuleApp("OR-R", args, (prem,))


def _r_weaken(seq, args, prover):
    gd = args.get("gamma", [])
    dd = args.get("delta", [])
    for key, drops, members in (("gamma", gd, seq.gamma), ("delta", dd, seq.delta)):
        for i in drops:
            if not isinstance(i, int) or not (0 <= i < len(members)):
                raise RuleError(f"{key} drop index {i!r} is out of range")
    if not gd and not dd:
        raise RuleError("nothing to drop")
    prem = Sequent.make(
        _without(seq.gamma, gd), _without(seq.delta, dd), seq.xi, seq.contracts
    )
    return RuleApp("WEAKEN", args, (prem,))


def _r_cut(seq, args, prover):
    p = args.get("pred")
    if not isinstance(p, t.BoolExpr):
        raise RuleError("CUT needs a predicate argument")
    p1 = Sequent.make(
        list(seq.gamma) + [f.Pred(p)], seq.delta, seq.xi, seq.contracts
    )
    p2 = Sequent.make(
        list(seq.gamma) + [f.Pred(t.negated(t.normalize_negations(p)))],
        seq.delta,
        seq.xi,
        seq.contracts,
    )
    return RuleApp("CUT", args, (p1, p2))


# ---------------------------------------------------------------------------
# stepping rules: move both sides across one transition


def _step_rule(name: str, relcls):
    def rule(seq, args, prover):
        phi = sole_non_pred(seq)
        lead = _chop_lead_rel(phi)
        if lead is None or not isinstance(lead[0], relcls):
            raise RuleError(f"the left side does not start with {name[3:].lower()}")
        r, tail = lead
        preds = seq.gamma_preds
        if "targets" in args and args["targets"] is not None:
            chosen = list(args["targets"])
            for i in chosen:
                if not isinstance(i, int) or not (0 <= i < len(seq.delta)):
                    raise RuleError(f"target index {i!r} is out of range")
                lead2 = _chop_lead_rel(seq.delta[i])
                if lead2 is None:
                    raise RuleError(f"member {i} does not start with a transition")
                if not prover.rel_included(r, preds, lead2[0]):
                    raise RuleError(
                        f"inclusion of {r} in {lead2[0]} not shown for member {i}"
                    )
        else:
            chosen = []
            for i, d in enumerate(seq.delta):
                lead2 = _chop_lead_rel(d)
                if lead2 is not None and prover.rel_included(r, preds, lead2[0]):
                    chosen.append(i)
            if not chosen:
                raise RuleError("no right member steps along this transition")
        dropped = [i for i in range(len(seq.delta)) if i not in chosen]
        avoid = _names_in([tail] + [seq.delta[i] for i in chosen])
        after = spc(preds, r, avoid=avoid)
        prem = Sequent.make(
            [f.Pred(p) for p in after] + [tail],
            [_chop_lead_rel(seq.delta[i])[1] for i in chosen],
            seq.xi,
            seq.contracts,
        )
        notes = tuple(
            f"dropped: {pretty_formula(seq.delta[i])}" for i in dropped
        )
        return RuleApp(name, args, (prem,), notes)

    return rule


def _end_rule(name: str, relcls):
    def rule(seq, args, prover):
        phi = sole_non_pred(seq)
        if not (isinstance(phi, f.Rel) and isinstance(phi.rel, relcls)):
            raise RuleError(f"the left side is not a single {name[4:].lower()} step")

        def is_target(d):
            parts = chain_parts(d)
            return len(parts) >= 2 and isinstance(parts[-1], f.Pred)

        i = _pick(seq.delta, args, "target", is_target, "a chain ending in a predicate")
        parts = chain_parts(seq.delta[i])
        front = f.chop(*parts[:-1])
        last = parts[-1]
        p1 = Sequent.make(seq.gamma, [front], seq.xi, seq.contracts)
        preds = seq.gamma_preds
        after = spc(preds, phi.rel, avoid=_names_in([last]))
        p2 = Sequent.make([f.Pred(p) for p in after], [last], seq.xi, seq.contracts)
        notes = tuple(
            f"dropped: {pretty_formula(d)}" for j, d in enumerate(seq.delta) if j != i
        )
        return RuleApp(name, args, (p1, p2), notes)

    return rule


def _r_arb1(seq, args, prover):
    def is_target(d):
        return isinstance(d, f.Chop) and _is_true(d.left)

    i = _pick(seq.delta, args, "target", is_target, "a chain led by true")
    prem = Sequent.make(
        seq.gamma, _replace(seq.delta, i, seq.delta[i].right), seq.xi, seq.contracts
    )
    return RuleApp("ARB1", args, (prem,))


def _r_arb2(seq, args, prover):
    def is_target(d):
        return isinstance(d, f.Chop) and _is_true(d.left)

    i = _pick(seq.delta, args, "target", is_target, "a chain led by true")
    phi = sole_non_pred(seq)
    if not isinstance(phi, f.Chop):
        raise RuleError("the left side does not start with a chain")
    lead = _chop_lead_rel(phi)
    if lead is not None and isinstance(lead[0], (f.IdRel, f.SbRel)):
        # Known transition: skipping it and stepping the state at once
        # keeps the premise in the predicate fragment.
        r, tail = lead
        preds = seq.gamma_preds
        after = spc(preds, r, avoid=_names_in([tail, seq.delta[i]]))
        prem = Sequent.make(
            [f.Pred(p) for p in after] + [tail], [seq.delta[i]], seq.xi, seq.contracts
        )
        notes = tuple(
            f"dropped: {pretty_formula(d)}" for j, d in enumerate(seq.delta) if j != i
        )
        return RuleApp("ARB2", args, (prem,), notes)
    # Any other lead is copied in front of the arbitrary segment, so a
    # matching rule can process the two occurrences in lockstep.
    prem = Sequent.make(
        seq.gamma,
        _replace(seq.delta, i, f.Chop(phi.left, seq.delta[i])),
        seq.xi,
        seq.contracts,
    )
    return RuleApp("ARB2", args, (prem,))


def _r_ch_predl(seq, args, prover):
    def is_target(g):
        return (
            isinstance(g, f.Chop)
            and isinstance(g.left, f.Pred)
            and not _is_true(g.left)
        )

    i = _pick(seq.gamma, args, "target", is_target, "a chain led by a predicate")
    ch = seq.gamma[i]
    prem = Sequent.make(
        _replace(seq.gamma, i, ch.left, f.Chop(f.Pred(t.TRUE), ch.right)),
        seq.delta,
        seq.xi,
        seq.contracts,
    )
    return RuleApp("CH-PREDL", args, (prem,))


def _r_ch_predr(seq, args, prover):
    def is_target(d):
        return (
            isinstance(d, f.Chop)
            and isinstance(d.left, f.Pred)
            and not _is_true(d.left)
        )

    i = _pick(seq.delta, args, "target", is_target, "a chain led by a predicate")
    ch = seq.delta[i]
    p1 = Sequent.make(seq.gamma, [ch.left], seq.xi, seq.contracts)
    p2 = Sequent.make(
        seq.gamma,
        _replace(seq.delta, i, f.Chop(f.Pred(t.TRUE), ch.right)),
        seq.xi,
        seq.contracts,
    )
    return RuleApp("CH-PREDR", args, (p1, p2))


def _r_ch_or_l(seq, args, prover):
    def is_target(g):
        return isinstance(g, f.Chop) and isinstance(g.left, f.Or)

    i = _pick(seq.gamma, args, "target", is_target, "a chain led by a disjunction")
    ch = seq.gamma[i]
    p1 = Sequent.make(
        _replace(seq.gamma, i, f.Chop(ch.left.left, ch.right)),
        seq.delta,
        seq.xi,
        seq.contracts,
    )
    p2 = Sequent.make(
        _replace(seq.gamma, i, f.Chop(ch.left.right, ch.right)),
        seq.delta,
        seq.xi,
        seq.contracts,
    )
    return RuleApp("CH-OR-L", args, (p1, p2))


def _r_ch_or_r(seq, args, prover):
    def is_target(d):
        return isinstance(d, f.Chop) and isinstance(d.left, f.Or)

    i = _pick(seq.delta, args, "target", is_target, "a chain led by a disjunction")
    pick = args.get("pick")
    if pick not in (1, 2):
        raise RuleError("CH-OR-R needs pick=1 or pick=2")
    ch = seq.delta[i]
    half = ch.left.left if pick == 1 else ch.left.right
    prem = Sequent.make(
        seq.gamma, _replace(seq.delta, i, f.Chop(half, ch.right)), seq.xi, seq.contracts
    )
    return RuleApp("CH-OR-R", args, (prem,))


def _r_ch_and_l(seq, args, prover):
    def is_target(g):
        return isinstance(g, f.Chop) and isinstance(g.left, f.And)

    i = _pick(seq.gamma, args, "target", is_target, "a chain led by a conjunction")
    ch = seq.gamma[i]
    prem = Sequent.make(
        _replace(
            seq.gamma, i, f.Chop(ch.left.left, ch.right), f.Chop(ch.left.right, ch.right)
        ),
        seq.delta,
        seq.xi,
        seq.contracts,
    )
    note = "splitting a conjoined chain head may lose cross-constraints"
    return RuleApp("CH-AND-L", args, (prem,), (note,))


# ---------------------------------------------------------------------------
# unfolding and repetition


def _unfold_rule(name: str, side: str, chopped: bool):
    def rule(seq, args, prover):
        members = seq.gamma if side == "gamma" else seq.delta

        def is_target(phi):
            if chopped:
                return isinstance(phi, f.Chop) and isinstance(phi.left, f.Mu)
            return isinstance(phi, f.Mu)

        i = _pick(members, args, "target", is_target, "a fixed point")
        phi = members[i]
        if chopped:
            repl = f.Chop(f.unfold(phi.left), phi.right)
        else:
            repl = f.unfold(phi)
        new = _replace(members, i, repl)
        if side == "gamma":
            prem = Sequent.make(new, seq.delta, seq.xi, seq.contracts)
        else:
            prem = Sequent.make(seq.gamma, new, seq.xi, seq.contracts)
        return RuleApp(name, args, (prem,))

    return rule


def _iterate_body(mu: f.Mu, count: int) -> f.Mu:
    acc = mu.body
    for _ in range(count - 1):
        acc = f.substitute(mu.body, mu.var, acc)
    return f.Mu(mu.var, acc, mu.proc)


def _len_rule(name: str, side: str, chopped: bool):
    def rule(seq, args, prover):
        count = args.get("count")
        if not isinstance(count, int) or count < 1:
            raise RuleError(f"{name} needs count >= 1")
        members = seq.gamma if side == "gamma" else seq.delta

        def is_target(phi):
            if chopped:
                return isinstance(phi, f.Chop) and isinstance(phi.left, f.Mu)
            return isinstance(phi, f.Mu)

        i = _pick(members, args, "target", is_target, "a fixed point")
        phi = members[i]
        if chopped:
            repl = f.Chop(_iterate_body(phi.left, count), phi.right)
        else:
            repl = _iterate_body(phi, count)
        new = _replace(members, i, repl)
        if side == "gamma":
            prem = Sequent.make(new, seq.delta, seq.xi, seq.contracts)
        else:
            prem = Sequent.make(seq.gamma, new, seq.xi, seq.contracts)
        return RuleApp(name, args, (prem,))

    return rule


# ---------------------------------------------------------------------------
# induction


def _get_pred_arg(args, key) -> t.BoolExpr:
    v = args.get(key)
    if not isinstance(v, t.BoolExpr):
        raise RuleError(f"missing predicate argument {key}")
    return v


def _r_fpi(seq, args, prover):
    inv = _get_pred_arg(args, "invariant")
    si = _pick(seq.gamma, args, "source", lambda g: isinstance(g, f.Mu), "a fixed point")
    ti = _pick(seq.delta, args, "target", lambda d: isinstance(d, f.Mu), "a fixed point")
    src = _xify_in(seq, seq.gamma[si], seq.gamma[si])
    tgt = _xify_in(seq, seq.delta[ti], seq.delta[ti], {src.var})
    p1 = Sequent.make(
        [f.Pred(p) for p in seq.gamma_preds], [f.Pred(inv)], seq.xi, seq.contracts
    )
    entry = XiEntry(src.var, inv, f.RVar(tgt.var))
    p2 = Sequent.make(
        [f.Pred(inv), src.body],
        [tgt.body],
        tuple(seq.xi) + (entry,),
        seq.contracts,
    )
    return RuleApp("FPI", args, (p1, p2))


def _r_fpi_alt(seq, args, prover):
    inv = _get_pred_arg(args, "invariant")
    alt = args.get("alt")
    if not isinstance(alt, f.TraceFormula):
        raise RuleError("FPI-ALT needs an alt formula")
    alt = f.normalize(alt)
    if alt not in seq.delta:
        raise RuleError("the alt formula must already be on the right")
    si = _pick(seq.gamma, args, "source", lambda g: isinstance(g, f.Mu), "a fixed point")
    src = _xify_in(seq, seq.gamma[si], seq.gamma[si])
    p1 = Sequent.make(
        [f.Pred(p) for p in seq.gamma_preds], [f.Pred(inv)], seq.xi, seq.contracts
    )
    entry = XiEntry(src.var, inv, alt)
    p2 = Sequent.make(
        [f.Pred(inv), src.body], [alt], tuple(seq.xi) + (entry,), seq.contracts
    )
    return RuleApp("FPI-ALT", args, (p1, p2))


def _r_ch_fpi(seq, args, prover):
    inv = _get_pred_arg(args, "invariant")

    def is_source(g):
        return (
            isinstance(g, f.Chop) and isinstance(g.left, f.Mu) and g.left.proc is not None
        )

    def is_target(d):
        return isinstance(d, f.Chop) and isinstance(d.left, f.Mu)

    si = _pick(seq.gamma, args, "source", is_source, "a fused tagged fixed point")
    ti = _pick(seq.delta, args, "target", is_target, "a fused fixed point")
    mu, tail = seq.gamma[si].left, seq.gamma[si].right
    entry = seq.contract_for(mu.proc)
    if entry is None:
        raise RuleError(f"no contract recorded for {mu.proc}")
    if entry.mu != mu:
        raise RuleError(f"the contract for {mu.proc} covers a different fixed point")
    preds = seq.gamma_preds
    if not prover.entails(preds, entry.pre):
        raise RuleError(f"precondition of {mu.proc} not established")
    if not det(mu, prover):
        raise RuleError(f"body of {mu.proc} is not deterministic")
    src = _xify_in(
        seq,
        seq.gamma[si],
        mu,
        f.free_rvars(tail) | f.bound_rvars(tail),
    )
    tgt_mu, tgt_tail = seq.delta[ti].left, seq.delta[ti].right
    tgt = _xify_in(
        seq,
        seq.delta[ti],
        tgt_mu,
        f.free_rvars(tgt_tail) | f.bound_rvars(tgt_tail) | {src.var},
    )
    p1 = Sequent.make([f.Pred(p) for p in preds], [f.Pred(inv)], seq.xi, seq.contracts)
    xe = XiEntry(src.var, inv, f.RVar(tgt.var))
    p2 = Sequent.make(
        [f.Pred(inv), src.body], [tgt.body], tuple(seq.xi) + (xe,), seq.contracts
    )
    frozen, post = _freeze_entry(entry, preds, [tail, tgt_tail])
    p3 = Sequent.make(
        [f.Pred(p) for p in frozen] + [f.Pred(post), tail],
        [tgt_tail],
        seq.xi,
        seq.contracts,
    )
    return RuleApp("CH-FPI", args, (p1, p2, p3))


def _r_ch_fpi_alt(seq, args, prover):
    inv = _get_pred_arg(args, "invariant")
    alt = args.get("alt")
    if not isinstance(alt, f.TraceFormula):
        raise RuleError("CH-FPI-ALT needs an alt formula")
    alt = f.normalize(alt)
    if alt not in seq.delta:
        raise RuleError("the alt formula must already be on the right")

    def is_source(g):
        return isinstance(g, f.Chop) and isinstance(g.left, f.Mu)

    si = _pick(seq.gamma, args, "source", is_source, "a fused fixed point")
    mu, tail = seq.gamma[si].left, seq.gamma[si].right
    src = _xify_in(
        seq, seq.gamma[si], mu, f.free_rvars(tail) | f.bound_rvars(tail)
    )
    p1 = Sequent.make(
        [f.Pred(p) for p in seq.gamma_preds], [f.Pred(inv)], seq.xi, seq.contracts
    )
    entry = XiEntry(src.var, inv, alt, src_tail=tail)
    p2 = Sequent.make(
        [f.Pred(inv), f.Chop(src.body, tail)],
        [alt],
        tuple(seq.xi) + (entry,),
        seq.contracts,
    )
    return RuleApp("CH-FPI-ALT", args, (p1, p2))


# ---------------------------------------------------------------------------
# contracts


def _r_mc(seq, args, prover):
    from .programs import rvar_name

    pre = _get_pred_arg(args, "pre")
    post = _get_pred_arg(args, "post")

    def find_mu(g):
        if isinstance(g, f.Mu) and g.proc is not None:
            return g
        if isinstance(g, f.Chop) and isinstance(g.left, f.Mu) and g.left.proc is not None:
            return g.left
        return None

    i = _pick(seq.gamma, args, "source", lambda g: find_mu(g) is not None,
              "a tagged fixed point")
    mu = find_mu(seq.gamma[i])
    proc = mu.proc
    if mu.var != rvar_name(proc):
        raise RuleError(
            f"fixed point for {proc} must bind {rvar_name(proc)}, binds {mu.var}"
        )
    if seq.contract_for(proc) is not None:
        raise RuleError(f"a contract for {proc} is already in scope")
    entry = ContractEntry(proc, pre, post, mu)
    contracts = tuple(seq.contracts) + (entry,)
    scope = contract_scope(entry)
    olds = [
        f.Pred(t.Cmp("==", t.Var(f"{v}_old"), t.Var(v))) for v in scope
    ]
    p1 = Sequent.make(
        olds + [f.Pred(pre), f.Chop(mu.body, f.Pred(t.TRUE))],
        [f.Chop(mu.body, f.Pred(post))],
        seq.xi,
        contracts,
    )
    p2 = Sequent.make(seq.gamma, seq.delta, seq.xi, contracts)
    return RuleApp("MC", args, (p1, p2))


def _r_ch_rvar_eq(seq, args, prover):
    def is_source(g):
        return isinstance(g, f.Chop) and isinstance(g.left, f.RVar)

    si = _pick(seq.gamma, args, "source", is_source, "a fused recursion variable")
    var, tail = seq.gamma[si].left.name, seq.gamma[si].right
    entry = None
    for c in seq.contracts:
        from .programs import rvar_name

        if rvar_name(c.proc) == var:
            entry = c
            break
    if entry is None:
        raise RuleError(f"no contract matches {var}")

    def is_target(d):
        return (
            isinstance(d, f.Chop)
            and isinstance(d.left, f.RVar)
            and d.left.name == var
        )

    ti = _pick(seq.delta, args, "target", is_target, f"a chain led by {var}")
    d_tail = seq.delta[ti].right
    preds = seq.gamma_preds
    if not prover.entails(preds, entry.pre):
        raise RuleError(f"precondition of {entry.proc} not established")
    if not det(entry.mu, prover):
        raise RuleError(f"body of {entry.proc} is not deterministic")
    frozen, post = _freeze_entry(entry, preds, [tail, d_tail])
    prem = Sequent.make(
        [f.Pred(p) for p in frozen] + [f.Pred(post), tail],
        [d_tail],
        seq.xi,
        seq.contracts,
    )
    notes = tuple(
        f"dropped: {pretty_formula(d)}" for j, d in enumerate(seq.delta) if j != ti
    )
    return RuleApp("CH-RVAR-EQ", args, (prem,), notes)


# ---------------------------------------------------------------------------
# grammar synchronization


def _r_sync(seq, args, prover):
    body = args.get("body")
    if not isinstance(body, f.TraceFormula):
        raise RuleError("SYNC needs the replacement body")
    i = _pick(seq.delta, args, "target", lambda d: isinstance(d, f.Mu), "a fixed point")
    old = seq.delta[i]
    new = f.Mu(old.var, f.normalize(body), None)
    try:
        l_new, cfg_new = grammar.chain_grammar(new)
        l_old, cfg_old = grammar.chain_grammar(old)
    except grammar.GrammarError as e:
        raise RuleError(f"not in the single-letter fragment: {e}") from None
    new_set = grammar.length_set(cfg_new)
    if not (new_set.finite and not new_set.exceptions):
        if l_new != l_old:
            raise RuleError(
                f"bodies use different transitions: {l_new} vs {l_old}"
            )
    if not grammar.length_set(cfg_old).includes(new_set):
        raise RuleError("the replacement admits lengths the original does not")
    prem = Sequent.make(seq.gamma, _replace(seq.delta, i, new), seq.xi, seq.contracts)
    return RuleApp("SYNC", args, (prem,))


# ---------------------------------------------------------------------------
# registry


RULES: dict[str, Callable[[Sequent, dict, Prover], RuleApp]] = {
    "CLOSE": _r_close,
    "TRUE": _r_true,
    "FALSE": _r_false,
    "PRED": _r_pred,
    "REL": _r_rel,
    "RVAR": _r_rvar,
    "CH-RVAR": _r_ch_rvar,
    "AND-L": _r_and_l,
    "AND-R": _r_and_r,
    "OR-L": _r_or_l,
    "OR-R": _r_or_r,
    "WEAKEN": _r_weaken,
    "CUT": _r_cut,
    "CH-ID": _step_rule("CH-ID", f.IdRel),
    "CH-UPD": _step_rule("CH-UPD", f.SbRel),
    "END-ID": _end_rule("END-ID", f.IdRel),
    "END-UPD": _end_rule("END-UPD", f.SbRel),
    "ARB1": _r_arb1,
    "ARB2": _r_arb2,
    "CH-PREDL": _r_ch_predl,
    "CH-PREDR": _r_ch_predr,
    "CH-OR-L": _r_ch_or_l,
    "CH-OR-R": _r_ch_or_r,
    "CH-AND-L": _r_ch_and_l,
    "UNFL": _unfold_rule("UNFL", "gamma", False),
    "UNFR": _unfold_rule("UNFR", "delta", False),
    "CH-UNFL": _unfold_rule("CH-UNFL", "gamma", True),
    "CH-UNFR": _unfold_rule("CH-UNFR", "delta", True),
    "LENL": _len_rule("LENL", "gamma", False),
    "LENR": _len_rule("LENR", "delta", False),
    "CH-LENL": _len_rule("CH-LENL", "gamma", True),
    "CH-LENR": _len_rule("CH-LENR", "delta", True),
    "FPI": _r_fpi,
    "FPI-ALT": _r_fpi_alt,
    "CH-FPI": _r_ch_fpi,
    "CH-FPI-ALT": _r_ch_fpi_alt,
    "MC": _r_mc,
    "CH-RVAR-EQ": _r_ch_rvar_eq,
    "SYNC": _r_sync,
}

AXIOMS = frozenset(
    {"CLOSE", "TRUE", "FALSE", "PRED", "REL", "RVAR", "CH-RVAR"}
)

# argument schema: name -> (arg, kind, required); kinds are pred, formula,
# int, index, indices.  Drives script parsing and the form-based UI.
RULE_PARAMS: dict[str, tuple[tuple[str, str, bool], ...]] = {
    "CLOSE": (), "TRUE": (), "FALSE": (), "RVAR": (), "CH-RVAR": (),
    "PRED": (("target", "index", False),),
    "REL": (("target", "index", False),),
    "AND-L": (("target", "index", False),),
    "AND-R": (("target", "index", False),),
    "OR-L": (("target", "index", False),),
    "OR-R": (("target", "index", False),),
    "WEAKEN": (("gamma", "indices", False), ("delta", "indices", False)),
    "CUT": (("pred", "pred", True),),
    "CH-ID": (("targets", "indices", False),),
    "CH-UPD": (("targets", "indices", False),),
    "END-ID": (("target", "index", False),),
    "END-UPD": (("target", "index", False),),
    "ARB1": (("target", "index", False),),
    "ARB2": (("target", "index", False),),
    "CH-PREDL": (("target", "index", False),),
    "CH-PREDR": (("target", "index", False),),
    "CH-OR-L": (("target", "index", False),),
    "CH-OR-R": (("target", "index", False), ("pick", "int", True)),
    "CH-AND-L": (("target", "index", False),),
    "UNFL": (("target", "index", False),),
    "UNFR": (("target", "index", False),),
    "CH-UNFL": (("target", "index", False),),
    "CH-UNFR": (("target", "index", False),),
    "LENL": (("target", "index", False), ("count", "int", True)),
    "LENR": (("target", "index", False), ("count", "int", True)),
    "CH-LENL": (("target", "index", False), ("count", "int", True)),
    "CH-LENR": (("target", "index", False), ("count", "int", True)),
    "FPI": (("invariant", "pred", True), ("source", "index", False),
            ("target", "index", False)),
    "FPI-ALT": (("invariant", "pred", True), ("alt", "formula", True),
                ("source", "index", False)),
    "CH-FPI": (("invariant", "pred", True), ("source", "index", False),
               ("target", "index", False)),
    "CH-FPI-ALT": (("invariant", "pred", True), ("alt", "formula", True),
                   ("source", "index", False)),
    "MC": (("pre", "pred", True), ("post", "pred", True),
           ("source", "index", False)),
    "CH-RVAR-EQ": (("source", "index", False), ("target", "index", False)),
    "SYNC": (("body", "formula", True), ("target", "index", False)),
}


def rule_names() -> list[str]:
    return sorted(RULES)


class _ShapeProver(Prover):
    """Prover stand-in that grants every side condition.

    Probing rules with it separates shape applicability from semantic
    discharge: whatever still fails is a genuine shape mismatch.
    """

    def entails(self, hyps, goal, kind="entails"):
        return True

    def rel_included(self, r, hyps, r2, scope=()):
        return True


def _probe_arg_sets(name: str, seq: Sequent) -> list[dict]:
    """Argument dictionaries that satisfy required args without real choices."""
    if name == "WEAKEN":
        out = []
        if seq.gamma:
            out.append({"gamma": [0]})
        if seq.delta:
            out.append({"delta": [0]})
        return out
    if name in ("FPI-ALT", "CH-FPI-ALT"):
        return [{"invariant": t.TRUE, "alt": phi} for phi in seq.delta]
    args: dict = {}
    for arg, kind, required in RULE_PARAMS[name]:
        if not required:
            continue
        if kind == "pred":
            args[arg] = t.TRUE
        elif kind == "int":
            args[arg] = 1
        elif kind == "indices":
            args[arg] = [0]
        else:
            return []
    return [args]


def _probe(seq, name, args, shape) -> bool:
    try:
        RULES[name](seq, dict(args), shape)
        return True
    except RuleError:
        return False


def applicable_rules(seq: Sequent) -> list[tuple[str, tuple[int, ...], tuple]]:
    """Rules whose shape requirements some instantiation meets right now.

    Each entry is (rule name, candidate principal indices, parameter
    schema).  Side conditions are treated as satisfied: a listed rule can
    still fail when really applied, but an unlisted one never succeeds.
    """
    shape = _ShapeProver()
    out = []
    width = max(len(seq.gamma), len(seq.delta))
    for name in RULES:
        params = RULE_PARAMS[name]
        if name == "SYNC":
            cands = tuple(
                i
                for i, phi in enumerate(seq.delta)
                if isinstance(phi, f.Mu)
                and _probe(seq, name, {"body": phi.body, "target": i}, shape)
            )
            if cands:
                out.append((name, cands, params))
            continue
        probes = _probe_arg_sets(name, seq)
        if not any(_probe(seq, name, a, shape) for a in probes):
            continue
        key = next((arg for arg, kind, _ in params if kind == "index"), None)
        cands = ()
        if key is not None:
            cands = tuple(
                i
                for i in range(width)
                if any(_probe(seq, name, {**a, key: i}, shape) for a in probes)
            )
        elif name in ("CH-ID", "CH-UPD"):
            cands = tuple(
                i
                for i in range(len(seq.delta))
                if any(
                    _probe(seq, name, {**a, "targets": [i]}, shape) for a in probes
                )
            )
        out.append((name, cands, params))
    return out


def apply_rule(
    seq: Sequent,
    name: str,
    args: Optional[dict] = None,
    prover: Optional[Prover] = None,
) -> RuleApp:
    if name not in RULES:
        raise RuleError(f"unknown rule: {name}")
    if prover is None:
        prover = Prover()
    return RULES[name](seq, dict(args or {}), prover)
