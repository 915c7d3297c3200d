"""Brute-force semantics over finite domains.

This module is deliberately independent of the proof rules: membership is
computed straight from the denotational clauses, programs are run by a
small-step interpreter, and sequents are attacked by candidate
enumeration.  It answers "is this trace in the denotation" exactly and
"is this sequent valid" one-sidedly: a returned countermodel is real, a
None is only absence of evidence within the budget.

Arithmetic outside the evaluable range (factorial of a negative, int64
overflow, division of missing names is a config error, see below) counts
as "predicate not satisfied" rather than an exception, matching the view
that a trace whose values cannot be compared is not a member.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import formulas as f
from . import programs as p
from . import terms as t
from .domain import BudgetError, Domain, State, Trace, fuse, sample_traces

DEFAULT_FUEL = 64


# ---------------------------------------------------------------------------
# membership


def member(
    trace: Trace,
    phi: f.TraceFormula,
    domain: Domain,
    env: Optional[dict[str, frozenset[Trace]]] = None,
) -> bool:
    """Exact denotational membership of one trace.

    Least fixed points are computed over the lattice of subsets of the
    trace's own slices; chop only ever inspects slices, so restricting
    the fixed point to that finite universe is exact.
    """
    if not trace:
        raise ValueError("traces are nonempty")
    memo: dict = {}
    return _mem(trace, phi, domain, dict(env or {}), memo)


def _env_key(env: dict[str, frozenset[Trace]]):
    return tuple(sorted(env.items()))


def _mem(tr, phi, domain, env, memo) -> bool:
    key = (phi, tr, _env_key(env))
    hit = memo.get(key)
    if hit is not None:
        return hit
    out = _mem_raw(tr, phi, domain, env, memo)
    memo[key] = out
    return out


def _mem_raw(tr, phi, domain, env, memo) -> bool:
    if isinstance(phi, f.Pred):
        return _eval_pred(phi.pred, domain.to_dict(tr[0]))
    if isinstance(phi, f.Rel):
        if len(tr) != 2:
            return False
        return _rel_holds(phi.rel, tr[0], tr[1], domain)
    if isinstance(phi, f.And):
        return _mem(tr, phi.left, domain, env, memo) and _mem(
            tr, phi.right, domain, env, memo
        )
    if isinstance(phi, f.Or):
        return _mem(tr, phi.left, domain, env, memo) or _mem(
            tr, phi.right, domain, env, memo
        )
    if isinstance(phi, f.Chop):
        for i in range(len(tr)):
            if _mem(tr[: i + 1], phi.left, domain, env, memo) and _mem(
                tr[i:], phi.right, domain, env, memo
            ):
                return True
        return False
    if isinstance(phi, f.RVar):
        try:
            return tr in env[phi.name]
        except KeyError:
            raise ValueError(f"free recursion variable {phi.name}") from None
    if isinstance(phi, f.Mu):
        universe = _slices(tr)
        cur: frozenset[Trace] = frozenset()
        while True:
            env2 = dict(env)
            env2[phi.var] = cur
            nxt = frozenset(
                u for u in universe if _mem(u, phi.body, domain, env2, memo)
            )
            if nxt == cur:
                return tr in cur
            cur = nxt
    raise TypeError(f"not a trace formula: {phi!r}")


def _slices(tr: Trace) -> list[Trace]:
    n = len(tr)
    return [tr[i:j] for i in range(n) for j in range(i + 1, n + 1)]


def _eval_pred(b: t.BoolExpr, st: dict[str, int]) -> bool:
    try:
        return t.eval_bool(b, st)
    except t.EvalError:
        return False


def _rel_holds(r: f.RelExpr, s0: State, s1: State, domain: Domain) -> bool:
    if isinstance(r, f.IdRel):
        return s0 == s1
    if isinstance(r, f.SbRel):
        d = domain.to_dict(s0)
        try:
            val = t.eval_arith(r.expr, d)
        except t.EvalError:
            return False
        d[r.var] = val
        return s1 == domain.from_dict(d)
    if isinstance(r, f.NamedRel):
        d = domain.to_dict(s0)
        for name, v in domain.to_dict(s1).items():
            d[name + "'"] = v
        return _eval_pred(r.body, d)
    raise TypeError(repr(r))


def check_vars(phis: Iterable[f.TraceFormula], domain: Domain) -> None:
    """Fail fast when a formula mentions variables the domain lacks."""
    extra = set()
    for phi in phis:
        extra |= f.formula_state_vars(phi) - set(domain.names)
    if extra:
        raise ValueError(f"variables outside the domain: {sorted(extra)}")


# ---------------------------------------------------------------------------
# program execution


def run_program(
    prog: p.RecProgram,
    start: dict[str, int],
    fuel: int = DEFAULT_FUEL,
    domain: Optional[Domain] = None,
) -> Optional[list[dict[str, int]]]:
    """The unique finished run from one start state, or None.

    None covers three distinct dead ends the same way: recursion deeper
    than the fuel, arithmetic leaving the evaluable range, and (when a
    domain is given) a state stepping outside its interval.
    """
    return _run(prog, prog.main, dict(start), fuel, domain)


def _run(prog, stmt, st, fuel, domain):
    if isinstance(stmt, p.Skip):
        return [dict(st), dict(st)]
    if isinstance(stmt, p.Assign):
        try:
            val = t.eval_arith(stmt.expr, st)
        except t.EvalError:
            return None
        st2 = dict(st)
        st2[stmt.var] = val
        if domain is not None and not domain.contains(domain.from_dict(st2)):
            return None
        return [dict(st), st2]
    if isinstance(stmt, p.Seq):
        first = _run(prog, stmt.first, st, fuel, domain)
        if first is None:
            return None
        second = _run(prog, stmt.second, first[-1], fuel, domain)
        if second is None:
            return None
        return first[:-1] + second
    if isinstance(stmt, p.If):
        try:
            cond = t.eval_bool(stmt.cond, st)
        except t.EvalError:
            return None
        branch = stmt.then if cond else stmt.orelse
        rest = _run(prog, branch, st, fuel, domain)
        if rest is None:
            return None
        return [dict(st)] + rest  # the guard test is one stutter step
    if isinstance(stmt, p.Call):
        if fuel <= 0:
            return None
        body = prog.body_of(stmt.proc)
        rest = _run(prog, body, st, fuel - 1, domain)
        if rest is None:
            return None
        return [dict(st)] + rest
    raise TypeError(repr(stmt))


def program_traces(
    prog: p.RecProgram, domain: Domain, fuel: int = DEFAULT_FUEL
) -> dict[State, Trace]:
    """start state -> finished trace, for every start that finishes."""
    out = {}
    for s in domain.states():
        run = run_program(prog, domain.to_dict(s), fuel, domain)
        if run is not None:
            out[s] = tuple(domain.from_dict(d) for d in run)
    return out


# ---------------------------------------------------------------------------
# bounded enumeration of members


def gen_members(
    phi: f.TraceFormula,
    domain: Domain,
    maxlen: int = 8,
    cap: int = 4000,
    env: Optional[dict[str, frozenset[Trace]]] = None,
) -> set[Trace]:
    """Some members of a formula: complete up to maxlen and cap, no more.

    The result feeds candidate generation; membership claims always go
    back through member().
    """
    env = dict(env or {})
    return _gen(phi, domain, maxlen, cap, env)


def _trim(traces: set[Trace], cap: int) -> set[Trace]:
    if len(traces) <= cap:
        return traces
    return set(sorted(traces)[:cap])


def _gen(phi, domain, maxlen, cap, env) -> set[Trace]:
    if isinstance(phi, f.Pred):
        return _trim(
            {(s,) for s in domain.states() if _eval_pred(phi.pred, domain.to_dict(s))},
            cap,
        )
    if isinstance(phi, f.Rel):
        out = set()
        if isinstance(phi.rel, f.IdRel):
            for s in domain.states():
                out.add((s, s))
                if len(out) >= cap:
                    break
            return out
        if isinstance(phi.rel, f.SbRel):
            for s in domain.states():
                d = domain.to_dict(s)
                try:
                    d[phi.rel.var] = t.eval_arith(phi.rel.expr, domain.to_dict(s))
                except t.EvalError:
                    continue
                s2 = domain.from_dict(d)
                if domain.contains(s2):
                    out.add((s, s2))
                if len(out) >= cap:
                    break
            return out
        for s in domain.states():
            for s2 in domain.states():
                if _rel_holds(phi.rel, s, s2, domain):
                    out.add((s, s2))
            if len(out) >= cap:
                break
        return _trim(out, cap)
    if isinstance(phi, f.And):
        # Generate from both sides: a Pred side only contributes length-1
        # traces, so the other side has to supply the longer members.
        left = _gen(phi.left, domain, maxlen, cap, env)
        right = _gen(phi.right, domain, maxlen, cap, env)
        out = {tr for tr in left if member(tr, phi.right, domain, env)}
        out |= {tr for tr in right if member(tr, phi.left, domain, env)}
        return _trim(out, cap)
    if isinstance(phi, f.Or):
        both = _gen(phi.left, domain, maxlen, cap, env)
        both |= _gen(phi.right, domain, maxlen, cap, env)
        return _trim(both, cap)
    if isinstance(phi, f.Chop):
        heads = _gen(phi.left, domain, maxlen, cap, env)
        tails = _gen(phi.right, domain, maxlen, cap, env)
        by_start: dict[State, list[Trace]] = {}
        for tl in tails:
            by_start.setdefault(tl[0], []).append(tl)
        out = set()
        for hd in heads:
            for tl in by_start.get(hd[-1], ()):
                joined = fuse(hd, tl)
                if len(joined) <= maxlen:
                    out.add(joined)
        if isinstance(phi.left, f.Pred):
            # A predicate on the left constrains only the head, and the
            # right side may match at any later offset.  Cover the
            # one-junk-step members as well.
            for s in domain.states():
                if not _eval_pred(phi.left.pred, domain.to_dict(s)):
                    continue
                for tl in tails:
                    if len(tl) + 1 <= maxlen:
                        out.add((s,) + tl)
        return _trim(out, cap)
    if isinstance(phi, f.RVar):
        return set(env.get(phi.name, frozenset()))
    if isinstance(phi, f.Mu):
        cur: frozenset[Trace] = frozenset()
        for _ in range(maxlen + 2):
            env2 = dict(env)
            env2[phi.var] = cur
            nxt = frozenset(_gen(phi.body, domain, maxlen, cap, env2))
            if nxt <= cur:
                break
            cur = frozenset(_trim(set(cur | nxt), cap))
        return set(cur)
    raise TypeError(repr(phi))


# ---------------------------------------------------------------------------
# sequent refutation


@dataclass
class Countermodel:
    trace: Trace
    env: dict[str, frozenset[Trace]] = field(default_factory=dict)

    def pretty(self, domain: Domain) -> str:
        steps = " -> ".join(
            "{" + ", ".join(f"{n}={v}" for n, v in domain.to_dict(s).items()) + "}"
            for s in self.trace
        )
        return steps


def refute_sequent(
    gammas: Iterable[f.TraceFormula],
    deltas: Iterable[f.TraceFormula],
    domain: Domain,
    maxlen: int = 8,
    cap: int = 4000,
    samples: int = 300,
    seed: int = 0,
    env: Optional[dict[str, frozenset[Trace]]] = None,
) -> Optional[Countermodel]:
    """Search for a trace in every Gamma member but no Delta member.

    The returned countermodel is checked by member() and therefore real;
    None only means the budgeted search came up empty.
    """
    gammas = list(gammas)
    deltas = list(deltas)
    check_vars(gammas + deltas, domain)
    env = dict(env or {})
    rng = random.Random(seed)

    candidates: list[Trace] = []
    concrete = [g for g in gammas if not isinstance(g, f.Pred)]
    if concrete:
        pools = [(len(gen := _gen(g, domain, maxlen, cap, env)), gen) for g in concrete]
        pools.sort(key=lambda kv: kv[0])
        candidates.extend(sorted(pools[0][1]))
    else:
        heads = [
            s
            for s in domain.states()
            if all(_eval_pred(g.pred, domain.to_dict(s)) for g in gammas)
        ]
        for s in heads:
            candidates.append((s,))
        budget = min(samples, cap)
        for _ in range(budget):
            if not heads:
                break
            s = rng.choice(heads)
            length = rng.randint(2, maxlen)
            candidates.append(
                (s,) + tuple(domain.random_state(rng) for _ in range(length - 1))
            )
    candidates.extend(sample_traces(domain, rng, samples, maxlen))

    seen = set()
    for tr in candidates:
        if tr in seen:
            continue
        seen.add(tr)
        if not all(member(tr, g, domain, env) for g in gammas):
            continue
        if any(member(tr, d, domain, env) for d in deltas):
            continue
        return Countermodel(tr, env)
    return None


# ---------------------------------------------------------------------------
# contracts


@dataclass
class ContractViolation:
    start: dict[str, int]
    end: dict[str, int]


@dataclass
class ContractReport:
    violations: list[ContractViolation]
    unfinished: list[dict[str, int]]
    checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


def check_contract(
    prog: p.RecProgram,
    proc: str,
    pre: t.BoolExpr,
    post: t.BoolExpr,
    domain: Domain,
    fuel: int = DEFAULT_FUEL,
) -> ContractReport:
    """Empirical partial-correctness check over all in-domain starts.

    post may mention v for the final value and v_old for the initial
    one.  Runs that never finish satisfy any contract vacuously; they
    are listed under unfinished because a dropped run (fuel, domain
    exit) looks the same as real divergence from here.
    """
    body = prog.body_of(proc)
    violations = []
    unfinished = []
    checked = 0
    for s in domain.states():
        st = domain.to_dict(s)
        if not _eval_pred(pre, st):
            continue
        checked += 1
        run = _run(prog, body, st, fuel, domain)
        if run is None:
            unfinished.append(st)
            continue
        env = dict(run[-1])
        for name in domain.names:
            env[name + "_old"] = st[name]
        if not _eval_pred(post, env):
            violations.append(ContractViolation(st, run[-1]))
    return ContractReport(violations, unfinished, checked)
