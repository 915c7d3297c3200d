"""Statements of the recursive while-free language and their trace formulas.

A program is a main statement plus a table of parameterless procedures, any
of which may call any other (or itself).  ``stf`` computes the strongest
trace formula of a statement: a fixed-point trace formula denoting exactly
the set of finite executions, where every assignment contributes an update
transition, ``skip`` an identity transition, and each guard evaluation or
procedure call an identity (stutter) transition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .terms import ArithExpr, BoolExpr, negated
from .formulas import (
    Chop,
    IdRel,
    Mu,
    Or,
    Pred,
    Rel,
    RVar,
    SbRel,
    TraceFormula,
    And,
)


@dataclass(frozen=True)
class Stmt:
    def __str__(self) -> str:
        from .printer import pretty_stmt

        return pretty_stmt(self)


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    expr: ArithExpr


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    second: Stmt


@dataclass(frozen=True)
class If(Stmt):
    cond: BoolExpr
    then: Stmt
    orelse: Stmt


@dataclass(frozen=True)
class Call(Stmt):
    proc: str


@dataclass
class RecProgram:
    """A main statement together with its procedure table."""

    main: Stmt
    procs: dict[str, Stmt] = field(default_factory=dict)

    def body_of(self, name: str) -> Stmt:
        try:
            return self.procs[name]
        except KeyError:
            raise KeyError(f"undefined procedure {name!r}") from None


def rvar_name(proc: str) -> str:
    """Recursion variable standing for procedure ``proc``."""
    return "X" + proc


def stf(program: RecProgram, stmt: Optional[Stmt] = None) -> TraceFormula:
    """Strongest trace formula of ``stmt`` (default: the program's main).

    Each procedure call inside its own unfolding becomes the bound recursion
    variable; the first call on a chain introduces the binder.  The result is
    a closed formula when every called procedure is defined.
    """
    return _stf(program, program.main if stmt is None else stmt, ())


def _stf(prog: RecProgram, s: Stmt, chain: tuple[str, ...]) -> TraceFormula:
    if isinstance(s, Skip):
        return Rel(IdRel())
    if isinstance(s, Assign):
        return Rel(SbRel(s.var, s.expr))
    if isinstance(s, Seq):
        return Chop(_stf(prog, s.first, chain), _stf(prog, s.second, chain))
    if isinstance(s, If):
        then_f = Chop(Rel(IdRel()), _stf(prog, s.then, chain))
        else_f = Chop(Rel(IdRel()), _stf(prog, s.orelse, chain))
        return Or(
            And(Pred(s.cond), then_f),
            And(Pred(negated(s.cond)), else_f),
        )
    if isinstance(s, Call):
        x = rvar_name(s.proc)
        if s.proc in chain:
            return Chop(Rel(IdRel()), RVar(x))
        body = _stf(prog, prog.body_of(s.proc), chain + (s.proc,))
        return Chop(Rel(IdRel()), Mu(x, body, proc=s.proc))
    raise TypeError(f"not a statement: {s!r}")
