"""Entailment checks for state predicates and relation inclusions.

This is the engine behind every rule side condition.  Predicates are
compiled to integer polynomial constraints over an extended variable set
(program variables, primed post-state copies, frozen symbolic-execution
copies like ``x#0``, old-state copies like ``y_old``).  An entailment
``H |= g`` is decided by refuting ``H /\\ !g``: the formula goes to DNF,
disequalities split into the two strict orders, and each resulting clause
runs through

  1. substitution of unit-coefficient equalities (also inside factorial
     arguments, which then re-fold when ground),
  2. parity reasoning for ``even``,
  3. a bounded factorial-recurrence unfolding ``n! = n*(n-1)!`` for
     arguments provably >= 1,
  4. monotonicity lemmas for products and factorials,
  5. Fourier--Motzkin elimination treating each monomial as a variable,
     with integer tightening (strict bounds shift by one, rows divide by
     their coefficient gcd, constants floor).

Everything is sound for the integers; hitting a size cap makes the check
answer "not proved", never "proved".  All queries are logged so the CLI can
export them as SMT-LIB for outside scrutiny.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import terms as t
from . import formulas as f

# monomial: sorted tuple of bases, with repetition for powers
# base: ("v", name) or ("f", poly key)
Mono = tuple
Base = tuple
Poly = dict  # Mono -> int coefficient; constant under the empty mono

_ONE: Mono = ()

MAX_FACT_FOLD = 20
MAX_CLAUSES = 128
MAX_NEQ_SPLIT = 4
MAX_ROWS = 900
MAX_FM_VARS = 40
MAX_MONOS = 300
MAX_MONO_DEG = 8


class CapacityError(Exception):
    """A term or system outgrew the prover's bounds."""


# ---------------------------------------------------------------------------
# polynomial arithmetic


def p_const(c: int) -> Poly:
    return {_ONE: c} if c else {}


def p_var(name: str) -> Poly:
    return {(("v", name),): 1}


def p_add(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for m, c in b.items():
        out[m] = out.get(m, 0) + c
        if out[m] == 0:
            del out[m]
    return out


def p_scale(a: Poly, k: int) -> Poly:
    if k == 0:
        return {}
    return {m: c * k for m, c in a.items()}


def p_sub(a: Poly, b: Poly) -> Poly:
    return p_add(a, p_scale(b, -1))


def p_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = tuple(sorted(m1 + m2))
            if len(m) > MAX_MONO_DEG:
                raise CapacityError("monomial degree")
            out[m] = out.get(m, 0) + c1 * c2
            if out[m] == 0:
                del out[m]
    if len(out) > MAX_MONOS:
        raise CapacityError("monomial count")
    return out


def p_pow(a: Poly, k: int) -> Poly:
    out = p_const(1)
    for _ in range(k):
        out = p_mul(out, a)
    return out


def p_key(a: Poly):
    return tuple(sorted((m, c) for m, c in a.items() if c))


def p_is_const(a: Poly) -> Optional[int]:
    if not a:
        return 0
    if len(a) == 1 and _ONE in a:
        return a[_ONE]
    return None


def p_from_arith(e: t.ArithExpr) -> Poly:
    if isinstance(e, t.IntLit):
        return p_const(e.value)
    if isinstance(e, t.Var):
        return p_var(e.name)
    if isinstance(e, t.Add):
        return p_add(p_from_arith(e.left), p_from_arith(e.right))
    if isinstance(e, t.Sub):
        return p_sub(p_from_arith(e.left), p_from_arith(e.right))
    if isinstance(e, t.Mul):
        return p_mul(p_from_arith(e.left), p_from_arith(e.right))
    if isinstance(e, t.Neg):
        return p_scale(p_from_arith(e.operand), -1)
    if isinstance(e, t.Factorial):
        return _fact_poly(p_from_arith(e.operand))
    raise TypeError(f"not arithmetic: {e!r}")


def _fact_poly(arg: Poly) -> Poly:
    c = p_is_const(arg)
    if c is not None and 0 <= c <= MAX_FACT_FOLD:
        return p_const(math.factorial(c))
    return {(("f", p_key(arg)),): 1}


def p_fold(a: Poly) -> Poly:
    """Re-fold ground factorial atoms, recursively through nesting."""
    out: Poly = {}
    for m, c in a.items():
        factor = p_const(c)
        for base in m:
            if base[0] == "v":
                factor = p_mul(factor, {(base,): 1})
            else:
                arg = p_fold(dict(base[1]))
                factor = p_mul(factor, _fact_poly(arg))
        out = p_add(out, factor)
    return out


def p_subst(a: Poly, var: str, repl: Poly) -> Poly:
    vbase = ("v", var)
    out: Poly = {}
    for m, c in a.items():
        k = sum(1 for b in m if b == vbase)
        rest = []
        for b in m:
            if b == vbase:
                continue
            if b[0] == "f":
                arg = p_subst(dict(b[1]), var, repl)
                rest_base = ("f", p_key(arg))
                rest.append(rest_base)
            else:
                rest.append(b)
        term: Poly = {tuple(sorted(rest)): c}
        if k:
            term = p_mul(term, p_pow(repl, k))
        out = p_add(out, term)
    return p_fold(out)


def p_vars(a: Poly) -> set[str]:
    out: set[str] = set()
    for m in a:
        for b in m:
            if b[0] == "v":
                out.add(b[1])
            else:
                out |= p_vars(dict(b[1]))
    return out


# ---------------------------------------------------------------------------
# literals, DNF


@dataclass(frozen=True)
class Lit:
    """op in {">=", "==", "!="} over a polynomial compared with 0, or a
    parity claim ("ev"/"od")."""

    op: str
    poly_key: tuple

    def poly(self) -> Poly:
        return dict(self.poly_key)


def _lit(op: str, p: Poly) -> Lit:
    return Lit(op, p_key(p))


def _cmp_lits(c: t.Cmp) -> Lit:
    l = p_from_arith(c.left)
    r = p_from_arith(c.right)
    d = p_sub(l, r)
    if c.op == "==":
        return _lit("==", d)
    if c.op == "!=":
        return _lit("!=", d)
    if c.op == ">=":
        return _lit(">=", d)
    if c.op == "<=":
        return _lit(">=", p_scale(d, -1))
    if c.op == ">":
        return _lit(">=", p_add(d, p_const(-1)))
    if c.op == "<":
        return _lit(">=", p_add(p_scale(d, -1), p_const(-1)))
    raise ValueError(c.op)


def _dnf(b: t.BoolExpr) -> list[list[Lit]]:
    b = t.normalize_negations(b)
    clauses = _dnf_norm(b)
    if len(clauses) > MAX_CLAUSES:
        raise CapacityError("clause count")
    return clauses


def _dnf_norm(b: t.BoolExpr) -> list[list[Lit]]:
    if isinstance(b, t.BTrue):
        return [[]]
    if isinstance(b, t.BFalse):
        return []
    if isinstance(b, t.Cmp):
        return [[_cmp_lits(b)]]
    if isinstance(b, t.Even):
        return [[_lit("ev", p_from_arith(b.operand))]]
    if isinstance(b, t.BNot):
        op = b.operand
        if isinstance(op, t.Even):
            return [[_lit("od", p_from_arith(op.operand))]]
        raise TypeError(f"negation not pushed to atoms: {b!r}")
    if isinstance(b, t.BOr):
        return _dnf_norm(b.left) + _dnf_norm(b.right)
    if isinstance(b, t.BAnd):
        left = _dnf_norm(b.left)
        right = _dnf_norm(b.right)
        out = []
        for cl in left:
            for cr in right:
                out.append(cl + cr)
                if len(out) > MAX_CLAUSES:
                    raise CapacityError("clause count")
        return out
    raise TypeError(f"not boolean: {b!r}")


# ---------------------------------------------------------------------------
# clause refutation


def _clause_unsat(lits: list[Lit]) -> bool:
    """True only if the conjunction of ``lits`` has no integer solution."""
    neqs = [l for l in lits if l.op == "!="]
    rest = [l for l in lits if l.op != "!="]
    pending: list[Poly] = []
    if neqs:
        # Push the clause's equalities through each disequality before
        # case-splitting: most of them ground out, and a residue of zero
        # settles the whole clause.  Only symbolic leftovers need the
        # two-sided split, which is exponential.
        eqs = [l.poly() for l in rest if l.op == "=="]
        subbed, _, _ = _substitute_eqs([l.poly() for l in neqs], eqs, [])
        for p in subbed:
            c = p_is_const(p)
            if c is None:
                pending.append(p)
            elif c == 0:
                return True
    if len(pending) > MAX_NEQ_SPLIT:
        return False
    stack = [rest]
    for p in pending:
        nxt = []
        for cl in stack:
            nxt.append(cl + [_lit(">=", p_add(p, p_const(-1)))])
            nxt.append(cl + [_lit(">=", p_add(p_scale(p, -1), p_const(-1)))])
        stack = nxt
    return all(_ordered_unsat(cl) for cl in stack)


def _ordered_unsat(lits: list[Lit]) -> bool:
    try:
        ges = [l.poly() for l in lits if l.op == ">="]
        eqs = [l.poly() for l in lits if l.op == "=="]
        pars = [(l.op, l.poly()) for l in lits if l.op in ("ev", "od")]

        ges, eqs, pars = _substitute_eqs(ges, eqs, pars)
        if _parity_conflict(pars):
            return True
        ges, eqs = _recurrence_rewrite(ges, eqs)
        ges, eqs, pars = _substitute_eqs(ges, eqs, pars)
        # Surviving parity facts become equalities over fresh variables:
        # even(p) is p = 2t, odd(p) is p = 2t + 1.  Combined with the gcd
        # tightening inside Fourier-Motzkin this yields integer reasoning,
        # e.g. even(x) with 1 <= x <= 1 is contradictory.
        for n, (op, p) in enumerate(pars):
            stride = {(("v", f"par!{n}"),): 2}
            off = 0 if op == "ev" else 1
            eqs.append(p_sub(p, p_add(stride, p_const(off))))
        ges = ges + _lemma_rows(ges, eqs)

        rows = list(ges)
        for e in eqs:
            rows.append(e)
            rows.append(p_scale(e, -1))
        return _fm_unsat(rows)
    except CapacityError:
        return False


def _substitute_eqs(ges, eqs, pars, rounds: int = 64):
    """Eliminate variables bound by unit-coefficient equalities."""
    eqs = [p_fold(e) for e in eqs]
    ges = [p_fold(g) for g in ges]
    for _ in range(rounds):
        pick = None
        for i, e in enumerate(eqs):
            for m, c in e.items():
                if len(m) == 1 and m[0][0] == "v" and c in (1, -1):
                    var = m[0][1]
                    rest = {mm: cc for mm, cc in e.items() if mm != m}
                    if var in p_vars(rest):
                        # v = ...v... defines nothing; replacing v by the
                        # rest would drop the equation without removing
                        # the variable
                        continue
                    repl = p_scale(rest, -c)
                    pick = (i, var, repl)
                    break
            if pick:
                break
        if not pick:
            break
        i, var, repl = pick
        eqs = [p_subst(e, var, repl) for j, e in enumerate(eqs) if j != i]
        ges = [p_subst(g, var, repl) for g in ges]
        pars = [(op, p_subst(p, var, repl)) for op, p in pars]
    return ges, eqs, pars


def _parity_conflict(pars) -> bool:
    seen: dict[tuple, int] = {}
    for op, p in pars:
        want = 0 if op == "ev" else 1
        odd_monos = frozenset(m for m, c in p.items() if m != _ONE and c % 2 == 1)
        const = p.get(_ONE, 0) % 2
        residual = (want - const) % 2
        key = tuple(sorted(odd_monos))
        if not odd_monos and residual != 0:
            return True
        if key in seen and seen[key] != residual:
            return True
        seen[key] = residual
    return False


def _fact_monos(polys: Iterable[Poly]):
    out = {}
    for p in polys:
        for m in p:
            for b in m:
                if b[0] == "f":
                    out[b] = dict(b[1])
    return out


def p_subst_base(p: Poly, base, repl: Poly) -> Poly:
    """Replace every occurrence of one base (at any power) by a polynomial."""
    out: Poly = {}
    for m, c in p.items():
        k = m.count(base)
        if k == 0:
            out = p_add(out, {m: c})
            continue
        term: Poly = {tuple(b for b in m if b != base): c}
        for _ in range(k):
            term = p_mul(term, repl)
        out = p_add(out, term)
    return p_fold(out)


def _recurrence_rewrite(ges, eqs, rounds: int = 3):
    """Unfold fact(P) into P * fact(P-1) across all rows while P >= 1 holds.

    Rewriting in place, instead of adding the recurrence as an equation,
    lets the unfolding reach factorial atoms buried inside products; a
    linear solver could never multiply the equation by the cofactor.
    """
    for _ in range(rounds):
        base_rows = list(ges)
        for e in eqs:
            base_rows.append(e)
            base_rows.append(p_scale(e, -1))
        progress = False
        for base, arg in _fact_monos(ges + eqs).items():
            if p_is_const(arg):
                continue
            if not _fm_implies(base_rows, p_add(arg, p_const(-1))):
                continue
            prev = p_add(arg, p_const(-1))
            repl = p_mul(arg, {(("f", p_key(prev)),): 1})
            ges = [p_subst_base(r, base, repl) for r in ges]
            eqs = [p_subst_base(r, base, repl) for r in eqs]
            progress = True
        if not progress:
            break
    return ges, eqs


def _lemma_rows(ges, eqs) -> list[Poly]:
    """Sign and monotonicity facts for products and factorial atoms.

    Two rounds, so a product lemma can lean on a factorial lemma found in
    the first pass (e.g. y*fact(x) >= y needs fact(x) >= 1 first).
    """
    base_rows = list(ges)
    for e in eqs:
        base_rows.append(e)
        base_rows.append(p_scale(e, -1))
    out: list[Poly] = []
    for _ in range(2):
        rows = base_rows + out

        def ge1(p: Poly) -> bool:
            return _fm_implies(rows, p_add(p, p_const(-1)))

        def ge0(p: Poly) -> bool:
            return _fm_implies(rows, p)

        new: list[Poly] = []
        for base, arg in _fact_monos(ges + eqs).items():
            fp = {(base,): 1}
            if ge1(arg):
                new.append(p_sub(fp, arg))  # fact(P) >= P
                new.append(p_add(fp, p_const(-1)))  # fact(P) >= 1
            elif ge0(arg):
                new.append(p_add(fp, p_const(-1)))

        monos = set()
        for p in ges + eqs + out:
            monos.update(m for m in p if len(m) >= 2)
        for m in monos:
            factors = [{(b,): 1} for b in m]
            mp = {m: 1}
            if all(ge1(fp) for fp in factors):
                new.append(p_add(mp, p_const(-1)))
                for fp in factors:
                    new.append(p_sub(mp, fp))  # product >= each factor
            elif all(ge0(fp) for fp in factors):
                new.append(mp)
            # Dropping one base: m >= k * (m/b) when b >= k and the
            # remaining factors are all nonnegative.
            for b in dict.fromkeys(m):
                rest = list(m)
                rest.remove(b)
                if not all(ge0({(f,): 1}) for f in set(rest)):
                    continue
                k = _const_lb(rows, {(b,): 1})
                if k is None:
                    continue
                new.append(p_sub(mp, p_scale({tuple(rest): 1}, k)))
        fresh = [r for r in new if r not in out]
        if not fresh:
            break
        out.extend(fresh)
    return out


def _fm_implies(rows: list[Poly], goal_ge0: Poly) -> bool:
    """rows |- goal >= 0, by refuting goal <= -1."""
    neg = p_add(p_scale(goal_ge0, -1), p_const(-1))
    try:
        return _fm_unsat(rows + [neg])
    except CapacityError:
        return False


def _const_lb(rows: list[Poly], p: Poly, cap: int = 256):
    """Best provable constant lower bound of p in [0, cap], or None."""

    def ge(k: int) -> bool:
        return _fm_implies(rows, p_add(p, p_const(-k)))

    if not ge(0):
        return None
    lo = 0
    step = 1
    while step <= cap and ge(lo + step):
        lo += step
        step *= 2
    step //= 2
    while step >= 1:
        if ge(lo + step):
            lo += step
        step //= 2
    return lo


def _tighten(row: Poly) -> Poly:
    coeffs = [c for m, c in row.items() if m != _ONE]
    if not coeffs:
        return row
    g = 0
    for c in coeffs:
        g = math.gcd(g, abs(c))
    if g <= 1:
        return row
    out = {m: c // g for m, c in row.items() if m != _ONE}
    const = row.get(_ONE, 0)
    out[_ONE] = math.floor(const / g)
    if out[_ONE] == 0:
        del out[_ONE]
    return out


def _fm_unsat(rows: list[Poly]) -> bool:
    rows = [_tighten(r) for r in rows]
    for _ in range(MAX_FM_VARS):
        if any(_is_const_row(r) and r.get(_ONE, 0) < 0 for r in rows):
            return True
        variables = {}
        for r in rows:
            for m in r:
                if m != _ONE:
                    variables[m] = variables.get(m, 0) + 1
        if not variables:
            return any(r.get(_ONE, 0) < 0 for r in rows)
        if len(variables) > MAX_FM_VARS:
            raise CapacityError("fm variables")
        # Prefer variables whose coefficients are all +-1: eliminating those
        # is exact, and the gcd tightening then still sees the non-unit
        # coefficients (parity encodings) in the combined rows.  Among a
        # tier, fewest pos*neg combinations first.
        def unit(m):
            return all(abs(r[m]) == 1 for r in rows if m in r)

        def cost(m):
            pos = sum(1 for r in rows if r.get(m, 0) > 0)
            neg = sum(1 for r in rows if r.get(m, 0) < 0)
            return pos * neg - pos - neg

        units = [m for m in variables if unit(m)]
        var = min(units or variables, key=cost)
        pos = [r for r in rows if r.get(var, 0) > 0]
        neg = [r for r in rows if r.get(var, 0) < 0]
        rest = [r for r in rows if var not in r]
        new_rows = list(rest)
        for rp in pos:
            for rn in neg:
                a = rp[var]
                b = -rn[var]
                lcm = a * b // math.gcd(a, b)
                combined = p_add(p_scale(rp, lcm // a), p_scale(rn, lcm // b))
                assert var not in combined
                new_rows.append(_tighten(combined))
        if len(new_rows) > MAX_ROWS:
            raise CapacityError("fm rows")
        rows = new_rows
    raise CapacityError("fm iterations")


def _is_const_row(r: Poly) -> bool:
    return all(m == _ONE for m in r)


# ---------------------------------------------------------------------------
# public interface


@dataclass
class Obligation:
    kind: str
    hyps: tuple[t.BoolExpr, ...]
    goal: t.BoolExpr
    proved: bool
    method: str = ""
    axioms_used: tuple[str, ...] = ()


def _comm_eq(a, b) -> bool:
    """Structural equality modulo commutativity of /\\, \\/, +, *, = and !=."""
    if a == b:
        return True
    if type(a) is not type(b):
        return False
    if isinstance(a, (t.BAnd, t.BOr, t.Add, t.Mul)):
        return (_comm_eq(a.left, b.left) and _comm_eq(a.right, b.right)) or (
            _comm_eq(a.left, b.right) and _comm_eq(a.right, b.left)
        )
    if isinstance(a, t.Cmp):
        if a.op != b.op:
            return False
        straight = _comm_eq(a.left, b.left) and _comm_eq(a.right, b.right)
        if a.op in ("==", "!="):
            return straight or (_comm_eq(a.left, b.right) and _comm_eq(a.right, b.left))
        return straight
    if isinstance(a, t.Sub):
        return _comm_eq(a.left, b.left) and _comm_eq(a.right, b.right)
    if isinstance(a, (t.BNot, t.Neg, t.Factorial, t.Even)):
        return _comm_eq(a.operand, b.operand)
    return False


def _conjuncts(b: t.BoolExpr) -> list[t.BoolExpr]:
    if isinstance(b, t.BAnd):
        return _conjuncts(b.left) + _conjuncts(b.right)
    return [b]


@dataclass
class Prover:
    """Entailment oracle; labeled axioms are a last resort and leave a trace."""

    axioms: tuple[tuple[str, t.BoolExpr], ...] = ()
    log: list[Obligation] = field(default_factory=list)

    def entails(self, hyps: Iterable[t.BoolExpr], goal: t.BoolExpr, kind: str = "entails") -> bool:
        hyps = tuple(hyps)
        ok, method, used = self._attempt(hyps, goal)
        self.log.append(Obligation(kind, hyps, goal, ok, method, used))
        return ok

    def _attempt(self, hyps, goal):
        if self._core(hyps, goal):
            return True, self._classify(hyps, goal), ()
        for label, ax in self.axioms:
            if all(
                any(_comm_eq(c, h) for h in _conjuncts(ax))
                for c in _conjuncts(goal)
            ):
                return True, f"axiom:{label}", (label,)
        for label, ax in self.axioms:
            if self._core(hyps + (ax,), goal):
                return True, f"axiom:{label}", (label,)
        if len(self.axioms) > 1:
            if self._core(hyps + tuple(ax for _, ax in self.axioms), goal):
                labels = tuple(label for label, _ in self.axioms)
                return True, "axiom:" + "+".join(labels), labels
        return False, "", ()

    @staticmethod
    def _core(hyps, goal) -> bool:
        try:
            body = t.conjoin([*hyps, t.negated(t.normalize_negations(goal))])
            clauses = _dnf(body)
            return all(_clause_unsat(cl) for cl in clauses)
        except CapacityError:
            return False

    @staticmethod
    def _classify(hyps, goal) -> str:
        polys = []
        try:
            for b in (*hyps, goal):
                for c in _dnf(b):
                    polys.extend(lit.poly() for lit in c)
        except CapacityError:
            return "lemma"
        nonlinear = any(any(len(m) > 1 for m in p) for p in polys)
        if _fact_monos(polys) or nonlinear:
            return "lemma"
        if all(not p_vars(p) for p in polys):
            return "ground"
        return "linear"

    def unsat(self, hyps: Iterable[t.BoolExpr]) -> bool:
        return self.entails(hyps, t.FALSE, kind="unsat")

    def rel_included(
        self,
        r: f.RelExpr,
        hyps: Iterable[t.BoolExpr],
        r2: f.RelExpr,
        scope: Iterable[str] = (),
    ) -> bool:
        """Is r, restricted to pre-states satisfying hyps, included in r2?"""
        hyps = tuple(hyps)
        vs = set(scope)
        vs |= _rel_vars(r) | _rel_vars(r2)
        for h in hyps:
            vs |= set(t.bool_vars(h))
        vs = {v for v in vs if not v.endswith("'")}
        if isinstance(r2, (f.IdRel, f.SbRel)):
            # Id and updates constrain every state variable, not just the
            # mentioned ones; a ghost variable stands in for the rest.  Id
            # and Sb on the left pin it, a named relation leaves it free,
            # which correctly rejects NamedRel <= Id style inclusions.
            k = 0
            while f"other#{k}" in vs:
                k += 1
            vs.add(f"other#{k}")
        goal = _rel_encode(r2, sorted(vs))
        hyp = _rel_encode(r, sorted(vs))
        return self.entails(hyps + (hyp,), goal, kind="rel_included")


def _rel_vars(r: f.RelExpr) -> set[str]:
    if isinstance(r, f.SbRel):
        return {r.var} | set(t.arith_vars(r.expr))
    if isinstance(r, f.NamedRel):
        return {v.rstrip("'") for v in t.bool_vars(r.body)}
    return set()


def _rel_encode(r: f.RelExpr, scope: list[str]) -> t.BoolExpr:
    """Two-state constraint with primed names for the post-state."""
    if isinstance(r, f.IdRel):
        return t.conjoin([t.Cmp("==", t.Var(v + "'"), t.Var(v)) for v in scope])
    if isinstance(r, f.SbRel):
        parts = [t.Cmp("==", t.Var(r.var + "'"), r.expr)]
        for v in scope:
            if v != r.var:
                parts.append(t.Cmp("==", t.Var(v + "'"), t.Var(v)))
        return t.conjoin(parts)
    if isinstance(r, f.NamedRel):
        return r.body
    raise TypeError(f"not a relation: {r!r}")


# ---------------------------------------------------------------------------
# symbolic execution of predicate sets


def spc(
    preds: Iterable[t.BoolExpr],
    rel: f.RelExpr,
    avoid: Iterable[str] = (),
) -> list[t.BoolExpr]:
    """Strongest postcondition of a predicate set across one transition.

    ``Id`` leaves the set alone.  ``Sb[x := a]`` freezes the old value of
    ``x`` under a fresh name ``x#k`` and records the update equation.
    Names in ``avoid`` are never picked for the frozen copy.
    """
    preds = list(preds)
    if isinstance(rel, f.IdRel):
        return preds
    if isinstance(rel, f.SbRel):
        x = rel.var
        used = set(avoid)
        for pdd in preds:
            used |= set(t.bool_vars(pdd))
        used |= set(t.arith_vars(rel.expr))
        k = 0
        while f"{x}#{k}" in used:
            k += 1
        frozen = f"{x}#{k}"
        ren = {x: t.Var(frozen)}
        out = [t.subst_bool(pd, ren) for pd in preds]
        out.append(t.Cmp("==", t.Var(x), t.subst_arith(rel.expr, ren)))
        return out
    raise ValueError(f"symbolic step only defined for Id and updates, got {rel}")


def rename_current(preds: Iterable[t.BoolExpr], suffix: str, domain_vars: Iterable[str]) -> list[t.BoolExpr]:
    """Rename each plain domain variable v to v+suffix (old-state freezing)."""
    ren = {v: t.Var(v + suffix) for v in domain_vars}
    return [t.subst_bool(p, ren) for p in preds]


def to_smt(hyps: Iterable[t.BoolExpr], goal: t.BoolExpr) -> str:
    """SMT-LIB 2 script asking for a countermodel to hyps |- goal."""
    hyps = list(hyps)
    vs: set[str] = set()
    for b in [*hyps, goal]:
        vs |= set(t.bool_vars(b))
    lines = ["(set-logic ALL)", "(declare-fun fact (Int) Int)"]
    for v in sorted(vs):
        lines.append(f"(declare-const |{v}| Int)")
    for h in hyps:
        lines.append(f"(assert {_smt_bool(h)})")
    lines.append(f"(assert (not {_smt_bool(goal)}))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def _smt_arith(e: t.ArithExpr) -> str:
    if isinstance(e, t.IntLit):
        return str(e.value) if e.value >= 0 else f"(- {-e.value})"
    if isinstance(e, t.Var):
        return f"|{e.name}|"
    if isinstance(e, t.Add):
        return f"(+ {_smt_arith(e.left)} {_smt_arith(e.right)})"
    if isinstance(e, t.Sub):
        return f"(- {_smt_arith(e.left)} {_smt_arith(e.right)})"
    if isinstance(e, t.Mul):
        return f"(* {_smt_arith(e.left)} {_smt_arith(e.right)})"
    if isinstance(e, t.Neg):
        return f"(- {_smt_arith(e.operand)})"
    if isinstance(e, t.Factorial):
        return f"(fact {_smt_arith(e.operand)})"
    raise TypeError(repr(e))


def _smt_bool(b: t.BoolExpr) -> str:
    if isinstance(b, t.BTrue):
        return "true"
    if isinstance(b, t.BFalse):
        return "false"
    if isinstance(b, t.Cmp):
        op = {"==": "=", "!=": "distinct", "<": "<", "<=": "<=", ">": ">", ">=": ">="}[b.op]
        return f"({op} {_smt_arith(b.left)} {_smt_arith(b.right)})"
    if isinstance(b, t.BAnd):
        return f"(and {_smt_bool(b.left)} {_smt_bool(b.right)})"
    if isinstance(b, t.BOr):
        return f"(or {_smt_bool(b.left)} {_smt_bool(b.right)})"
    if isinstance(b, t.BNot):
        return f"(not {_smt_bool(b.operand)})"
    if isinstance(b, t.Even):
        return f"(= (mod {_smt_arith(b.operand)} 2) 0)"
    raise TypeError(repr(b))
