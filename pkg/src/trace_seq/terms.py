"""Arithmetic and boolean state expressions.

Arithmetic expressions are integer-valued and may mention program variables,
factorial and unary minus.  Boolean expressions (used as state predicates and
as branch guards) are comparisons closed under conjunction, disjunction and
negation, plus the ``even`` test.  Predicates are evaluated over a single
state; two-state relation bodies reuse the same ASTs with primed variable
names (``x'``) standing for the post-state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping


class EvalError(Exception):
    """Raised for factorial of a negative number or 64-bit overflow."""


_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1


# ---------------------------------------------------------------------------
# arithmetic


@dataclass(frozen=True)
class ArithExpr:
    def __str__(self) -> str:
        from .printer import pretty_arith

        return pretty_arith(self)


@dataclass(frozen=True)
class IntLit(ArithExpr):
    value: int


@dataclass(frozen=True)
class Var(ArithExpr):
    name: str


@dataclass(frozen=True)
class Add(ArithExpr):
    left: ArithExpr
    right: ArithExpr


@dataclass(frozen=True)
class Sub(ArithExpr):
    left: ArithExpr
    right: ArithExpr


@dataclass(frozen=True)
class Mul(ArithExpr):
    left: ArithExpr
    right: ArithExpr


@dataclass(frozen=True)
class Neg(ArithExpr):
    operand: ArithExpr


@dataclass(frozen=True)
class Factorial(ArithExpr):
    operand: ArithExpr


# ---------------------------------------------------------------------------
# boolean


@dataclass(frozen=True)
class BoolExpr:
    def __str__(self) -> str:
        from .printer import pretty_bool

        return pretty_bool(self)


@dataclass(frozen=True)
class BTrue(BoolExpr):
    pass


@dataclass(frozen=True)
class BFalse(BoolExpr):
    pass


#: comparison operator -> python semantics
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Cmp(BoolExpr):
    op: str  # one of CMP_OPS
    left: ArithExpr
    right: ArithExpr

    def __post_init__(self) -> None:
        if self.op not in CMP_OPS:
            raise ValueError(f"bad comparison operator {self.op!r}")


@dataclass(frozen=True)
class BAnd(BoolExpr):
    left: BoolExpr
    right: BoolExpr


@dataclass(frozen=True)
class BOr(BoolExpr):
    left: BoolExpr
    right: BoolExpr


@dataclass(frozen=True)
class BNot(BoolExpr):
    operand: BoolExpr


@dataclass(frozen=True)
class Even(BoolExpr):
    operand: ArithExpr


TRUE = BTrue()
FALSE = BFalse()


# ---------------------------------------------------------------------------
# evaluation


def eval_arith(e: ArithExpr, state: Mapping[str, int]) -> int:
    """Evaluate ``e`` in ``state``.

    Intermediate values may leave any configured domain range, but anything
    escaping 64-bit signed integers raises :class:`EvalError`, as does the
    factorial of a negative argument.
    """
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Var):
        try:
            return state[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Add):
        return _check(eval_arith(e.left, state) + eval_arith(e.right, state))
    if isinstance(e, Sub):
        return _check(eval_arith(e.left, state) - eval_arith(e.right, state))
    if isinstance(e, Mul):
        return _check(eval_arith(e.left, state) * eval_arith(e.right, state))
    if isinstance(e, Neg):
        return _check(-eval_arith(e.operand, state))
    if isinstance(e, Factorial):
        n = eval_arith(e.operand, state)
        if n < 0:
            raise EvalError(f"factorial of negative number {n}")
        acc = 1
        for k in range(2, n + 1):
            acc = _check(acc * k)
        return acc
    raise TypeError(f"not an arithmetic expression: {e!r}")


def _check(v: int) -> int:
    if v < _INT64_MIN or v > _INT64_MAX:
        raise EvalError(f"arithmetic overflow: {v}")
    return v


def eval_bool(b: BoolExpr, state: Mapping[str, int]) -> bool:
    if isinstance(b, BTrue):
        return True
    if isinstance(b, BFalse):
        return False
    if isinstance(b, Cmp):
        l = eval_arith(b.left, state)
        r = eval_arith(b.right, state)
        return {
            "==": l == r,
            "!=": l != r,
            "<": l < r,
            "<=": l <= r,
            ">": l > r,
            ">=": l >= r,
        }[b.op]
    if isinstance(b, BAnd):
        return eval_bool(b.left, state) and eval_bool(b.right, state)
    if isinstance(b, BOr):
        return eval_bool(b.left, state) or eval_bool(b.right, state)
    if isinstance(b, BNot):
        return not eval_bool(b.operand, state)
    if isinstance(b, Even):
        return eval_arith(b.operand, state) % 2 == 0
    raise TypeError(f"not a boolean expression: {b!r}")


# ---------------------------------------------------------------------------
# negation


_CMP_NEG = {"==": "!=", "!=": "==", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def negated(b: BoolExpr) -> BoolExpr:
    """Complement of ``b`` pushed into negation normal form.

    Comparisons flip, De Morgan distributes over /\\ and \\/, double negation
    cancels; ``even`` is the only atom that keeps an explicit negation.
    """
    if isinstance(b, BTrue):
        return FALSE
    if isinstance(b, BFalse):
        return TRUE
    if isinstance(b, Cmp):
        return Cmp(_CMP_NEG[b.op], b.left, b.right)
    if isinstance(b, BAnd):
        return BOr(negated(b.left), negated(b.right))
    if isinstance(b, BOr):
        return BAnd(negated(b.left), negated(b.right))
    if isinstance(b, BNot):
        return normalize_negations(b.operand)
    if isinstance(b, Even):
        return BNot(b)
    raise TypeError(f"not a boolean expression: {b!r}")


def normalize_negations(b: BoolExpr) -> BoolExpr:
    """Push all negations down to atoms (total; ``!even(e)`` stays)."""
    if isinstance(b, BNot):
        return negated(b.operand)
    if isinstance(b, BAnd):
        return BAnd(normalize_negations(b.left), normalize_negations(b.right))
    if isinstance(b, BOr):
        return BOr(normalize_negations(b.left), normalize_negations(b.right))
    return b


# ---------------------------------------------------------------------------
# variables and substitution


def arith_vars(e: ArithExpr) -> Iterator[str]:
    if isinstance(e, Var):
        yield e.name
    elif isinstance(e, (Add, Sub, Mul)):
        yield from arith_vars(e.left)
        yield from arith_vars(e.right)
    elif isinstance(e, (Neg, Factorial)):
        yield from arith_vars(e.operand)


def bool_vars(b: BoolExpr) -> Iterator[str]:
    if isinstance(b, Cmp):
        yield from arith_vars(b.left)
        yield from arith_vars(b.right)
    elif isinstance(b, (BAnd, BOr)):
        yield from bool_vars(b.left)
        yield from bool_vars(b.right)
    elif isinstance(b, BNot):
        yield from bool_vars(b.operand)
    elif isinstance(b, Even):
        yield from arith_vars(b.operand)


def subst_arith(e: ArithExpr, mapping: Mapping[str, ArithExpr]) -> ArithExpr:
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Add):
        return Add(subst_arith(e.left, mapping), subst_arith(e.right, mapping))
    if isinstance(e, Sub):
        return Sub(subst_arith(e.left, mapping), subst_arith(e.right, mapping))
    if isinstance(e, Mul):
        return Mul(subst_arith(e.left, mapping), subst_arith(e.right, mapping))
    if isinstance(e, Neg):
        return Neg(subst_arith(e.operand, mapping))
    if isinstance(e, Factorial):
        return Factorial(subst_arith(e.operand, mapping))
    return e


def subst_bool(b: BoolExpr, mapping: Mapping[str, ArithExpr]) -> BoolExpr:
    if isinstance(b, Cmp):
        return Cmp(b.op, subst_arith(b.left, mapping), subst_arith(b.right, mapping))
    if isinstance(b, BAnd):
        return BAnd(subst_bool(b.left, mapping), subst_bool(b.right, mapping))
    if isinstance(b, BOr):
        return BOr(subst_bool(b.left, mapping), subst_bool(b.right, mapping))
    if isinstance(b, BNot):
        return BNot(subst_bool(b.operand, mapping))
    if isinstance(b, Even):
        return Even(subst_arith(b.operand, mapping))
    return b


def conjuncts(b: BoolExpr) -> list[BoolExpr]:
    """Flatten a conjunction into its conjunct list."""
    if isinstance(b, BAnd):
        return conjuncts(b.left) + conjuncts(b.right)
    if isinstance(b, BTrue):
        return []
    return [b]


def conjoin(parts: list[BoolExpr]) -> BoolExpr:
    if not parts:
        return TRUE
    acc = parts[0]
    for p in parts[1:]:
        acc = BAnd(acc, p)
    return acc
