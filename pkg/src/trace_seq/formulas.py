"""Trace formulas and binary state relations.

A trace formula denotes a set of nonempty finite traces over program states:

* ``Pred(p)``  -- traces whose first state satisfies ``p``
* ``Rel(R)``   -- two-state traces related by ``R``
* ``And``/``Or`` -- intersection / union
* ``Chop``     -- fusion: glue two traces that share the middle state
* ``RVar``     -- recursion variable, bound by ``Mu`` or free
* ``Mu``       -- least fixed point; may carry the procedure name it encodes

Relations come in three shapes: the identity ``Id``, an update ``Sb[x := a]``
and a named relation defined by a two-state predicate whose primed variables
refer to the post-state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional

from .terms import (
    ArithExpr,
    BoolExpr,
    arith_vars,
    bool_vars,
)


# ---------------------------------------------------------------------------
# relations


@dataclass(frozen=True)
class RelExpr:
    def __str__(self) -> str:
        from .printer import pretty_rel

        return pretty_rel(self)


@dataclass(frozen=True)
class IdRel(RelExpr):
    """The identity relation: both states equal."""


@dataclass(frozen=True)
class SbRel(RelExpr):
    """Update relation: post-state is pre-state with ``var`` set to ``expr``."""

    var: str
    expr: ArithExpr


@dataclass(frozen=True)
class NamedRel(RelExpr):
    """Relation declared by name with a two-state predicate body.

    In ``body`` a primed variable ``x'`` denotes the post-state value of
    ``x``; unprimed variables denote the pre-state.  Variables of the domain
    not mentioned are unconstrained.
    """

    name: str
    body: BoolExpr


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True)
class TraceFormula:
    def __str__(self) -> str:
        from .printer import pretty_formula

        return pretty_formula(self)


@dataclass(frozen=True)
class Pred(TraceFormula):
    pred: BoolExpr


@dataclass(frozen=True)
class Rel(TraceFormula):
    rel: RelExpr


@dataclass(frozen=True)
class And(TraceFormula):
    left: TraceFormula
    right: TraceFormula


@dataclass(frozen=True)
class Or(TraceFormula):
    left: TraceFormula
    right: TraceFormula


@dataclass(frozen=True)
class Chop(TraceFormula):
    left: TraceFormula
    right: TraceFormula


@dataclass(frozen=True)
class RVar(TraceFormula):
    name: str


@dataclass(frozen=True)
class Mu(TraceFormula):
    """Least fixed point ``mu var. body``.

    ``proc`` records which procedure this fixed point encodes, when any; only
    tagged fixed points participate in contract rules.  The tag takes part in
    structural equality so a tagged and an untagged copy never alias.
    """

    var: str
    body: TraceFormula
    proc: Optional[str] = None


def chop(*parts: TraceFormula) -> TraceFormula:
    """Right-associated chop of ``parts`` (at least one)."""
    if not parts:
        raise ValueError("empty chop")
    acc = parts[-1]
    for p in reversed(parts[:-1]):
        acc = Chop(p, acc)
    return acc


# ---------------------------------------------------------------------------
# traversals


def free_rvars(phi: TraceFormula) -> set[str]:
    if isinstance(phi, RVar):
        return {phi.name}
    if isinstance(phi, (And, Or, Chop)):
        return free_rvars(phi.left) | free_rvars(phi.right)
    if isinstance(phi, Mu):
        return free_rvars(phi.body) - {phi.var}
    return set()


def bound_rvars(phi: TraceFormula) -> set[str]:
    if isinstance(phi, (And, Or, Chop)):
        return bound_rvars(phi.left) | bound_rvars(phi.right)
    if isinstance(phi, Mu):
        return bound_rvars(phi.body) | {phi.var}
    return set()


def substitute(phi: TraceFormula, var: str, repl: TraceFormula) -> TraceFormula:
    """Capture-avoiding substitution of ``repl`` for free ``RVar(var)``.

    Binders whose variable occurs free in ``repl`` are renamed first; the
    formulas fed to the proof rules are parsed with globally distinct binder
    names, so renaming rarely fires in practice.
    """
    if isinstance(phi, RVar):
        return repl if phi.name == var else phi
    if isinstance(phi, And):
        return And(substitute(phi.left, var, repl), substitute(phi.right, var, repl))
    if isinstance(phi, Or):
        return Or(substitute(phi.left, var, repl), substitute(phi.right, var, repl))
    if isinstance(phi, Chop):
        return Chop(substitute(phi.left, var, repl), substitute(phi.right, var, repl))
    if isinstance(phi, Mu):
        if phi.var == var:
            return phi
        if phi.var in free_rvars(repl):
            fresh = _fresh_rvar(phi.var, free_rvars(repl) | free_rvars(phi.body))
            body = substitute(phi.body, phi.var, RVar(fresh))
            return Mu(fresh, substitute(body, var, repl), phi.proc)
        return Mu(phi.var, substitute(phi.body, var, repl), phi.proc)
    return phi


def _fresh_rvar(base: str, avoid: set[str]) -> str:
    k = 2
    while f"{base}_{k}" in avoid:
        k += 1
    return f"{base}_{k}"


def unfold(mu: Mu) -> TraceFormula:
    """One unfolding: body with the fixed point substituted for its variable."""
    return substitute(mu.body, mu.var, mu)


def repeat(phi: TraceFormula, base: TraceFormula, step_var: str, i: int) -> TraceFormula:
    """``i``-fold unfolding used by the repetition equivalences in tests."""
    acc = base
    for _ in range(i):
        acc = substitute(phi, step_var, acc)
    return acc


def formula_state_vars(phi: TraceFormula) -> set[str]:
    """Program variables mentioned anywhere in ``phi`` (primes stripped)."""
    out: set[str] = set()
    for b in _iter_bools(phi):
        out.update(v.rstrip("'") for v in bool_vars(b))
    for r in _iter_rels(phi):
        if isinstance(r, SbRel):
            out.add(r.var)
            out.update(arith_vars(r.expr))
        elif isinstance(r, NamedRel):
            out.update(v.rstrip("'") for v in bool_vars(r.body))
    return out


def _iter_bools(phi: TraceFormula) -> Iterator[BoolExpr]:
    if isinstance(phi, Pred):
        yield phi.pred
    elif isinstance(phi, (And, Or, Chop)):
        yield from _iter_bools(phi.left)
        yield from _iter_bools(phi.right)
    elif isinstance(phi, Mu):
        yield from _iter_bools(phi.body)


def _iter_rels(phi: TraceFormula) -> Iterator[RelExpr]:
    if isinstance(phi, Rel):
        yield phi.rel
    elif isinstance(phi, (And, Or, Chop)):
        yield from _iter_rels(phi.left)
        yield from _iter_rels(phi.right)
    elif isinstance(phi, Mu):
        yield from _iter_rels(phi.body)


def iter_subformulas(phi: TraceFormula) -> Iterator[TraceFormula]:
    yield phi
    if isinstance(phi, (And, Or, Chop)):
        yield from iter_subformulas(phi.left)
        yield from iter_subformulas(phi.right)
    elif isinstance(phi, Mu):
        yield from iter_subformulas(phi.body)


# ---------------------------------------------------------------------------
# ordering key (used for canonical sequent sides)


def sort_key(phi: TraceFormula) -> tuple:
    """Total structural order on formulas, stable across processes."""
    if isinstance(phi, Pred):
        return (0, _bool_key(phi.pred))
    if isinstance(phi, Rel):
        return (1, _rel_key(phi.rel))
    if isinstance(phi, RVar):
        return (2, phi.name)
    if isinstance(phi, And):
        return (3, sort_key(phi.left), sort_key(phi.right))
    if isinstance(phi, Or):
        return (4, sort_key(phi.left), sort_key(phi.right))
    if isinstance(phi, Chop):
        return (5, sort_key(phi.left), sort_key(phi.right))
    if isinstance(phi, Mu):
        return (6, phi.var, phi.proc or "", sort_key(phi.body))
    raise TypeError(f"not a trace formula: {phi!r}")


def _rel_key(r: RelExpr) -> tuple:
    if isinstance(r, IdRel):
        return (0,)
    if isinstance(r, SbRel):
        return (1, r.var, _arith_key(r.expr))
    if isinstance(r, NamedRel):
        return (2, r.name)
    raise TypeError(f"not a relation: {r!r}")


def _arith_key(e: ArithExpr) -> tuple:
    from . import terms as t

    if isinstance(e, t.IntLit):
        return (0, e.value)
    if isinstance(e, t.Var):
        return (1, e.name)
    if isinstance(e, t.Add):
        return (2, _arith_key(e.left), _arith_key(e.right))
    if isinstance(e, t.Sub):
        return (3, _arith_key(e.left), _arith_key(e.right))
    if isinstance(e, t.Mul):
        return (4, _arith_key(e.left), _arith_key(e.right))
    if isinstance(e, t.Neg):
        return (5, _arith_key(e.operand))
    if isinstance(e, t.Factorial):
        return (6, _arith_key(e.operand))
    raise TypeError(f"not arithmetic: {e!r}")


def _bool_key(b: BoolExpr) -> tuple:
    from . import terms as t

    if isinstance(b, t.BTrue):
        return (0,)
    if isinstance(b, t.BFalse):
        return (1,)
    if isinstance(b, t.Cmp):
        return (2, b.op, _arith_key(b.left), _arith_key(b.right))
    if isinstance(b, t.BAnd):
        return (3, _bool_key(b.left), _bool_key(b.right))
    if isinstance(b, t.BOr):
        return (4, _bool_key(b.left), _bool_key(b.right))
    if isinstance(b, t.BNot):
        return (5, _bool_key(b.operand))
    if isinstance(b, t.Even):
        return (6, _arith_key(b.operand))
    raise TypeError(f"not boolean: {b!r}")


# ---------------------------------------------------------------------------
# normalization


def normalize(phi: TraceFormula) -> TraceFormula:
    """Semantics-preserving normal form used on every sequent formula.

    Three rewrites, applied bottom-up to a fixed point:

    * chop re-associates to the right;
    * a conjunction or disjunction of two ``Pred`` atoms folds into one
      ``Pred`` (both connectives act statewise on first states);
    * a predicate conjoined inside the left end of a chop hoists out:
      ``(p /\\ F) >> G`` becomes ``p /\\ (F >> G)``, exact because ``p``
      constrains only the first state, which chopping preserves.
    """
    from .terms import BAnd, BOr

    if isinstance(phi, And):
        l, r = normalize(phi.left), normalize(phi.right)
        if isinstance(l, Pred) and isinstance(r, Pred):
            return Pred(BAnd(l.pred, r.pred))
        return And(l, r)
    if isinstance(phi, Or):
        l, r = normalize(phi.left), normalize(phi.right)
        if isinstance(l, Pred) and isinstance(r, Pred):
            return Pred(BOr(l.pred, r.pred))
        return Or(l, r)
    if isinstance(phi, Chop):
        l, r = normalize(phi.left), normalize(phi.right)
        if isinstance(l, Chop):
            return normalize(Chop(l.left, Chop(l.right, r)))
        if isinstance(l, And) and isinstance(l.left, Pred):
            return normalize(And(l.left, Chop(l.right, r)))
        if isinstance(l, And) and isinstance(l.right, Pred):
            return normalize(And(l.right, Chop(l.left, r)))
        return Chop(l, r)
    if isinstance(phi, Mu):
        return Mu(phi.var, normalize(phi.body), phi.proc)
    return phi


# ---------------------------------------------------------------------------
# relation environment


@dataclass
class RelEnv:
    """Named relation declarations in scope for parsing and evaluation."""

    rels: dict[str, NamedRel] = field(default_factory=dict)

    def declare(self, name: str, body: BoolExpr) -> NamedRel:
        if name in self.rels:
            if self.rels[name].body == body:
                return self.rels[name]
            raise ValueError(f"relation {name!r} already declared differently")
        r = NamedRel(name, body)
        self.rels[name] = r
        return r

    def copy(self) -> "RelEnv":
        e = RelEnv()
        e.rels = dict(self.rels)
        return e
