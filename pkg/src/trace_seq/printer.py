"""Minimal-parenthesis pretty printing for every AST in the package.

The printers are inverse to the parsers on parsed trees: parsing a printed
tree yields the tree back.  Internally generated names containing ``#``
(symbolic-execution snapshots, fresh old-state copies) print fine but do not
re-parse, since ``#`` starts a comment; they only ever appear in displayed
sequents, never in stored scripts.
"""

from __future__ import annotations

from . import terms as t
from . import formulas as f
from . import programs as p

_CMP_SURFACE = {"==": "=", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


# ---------------------------------------------------------------------------
# arithmetic: levels  +,- (1) < * (2) < unary- (3) < ! (4) < primary (5)


def pretty_arith(e: t.ArithExpr, level: int = 0) -> str:
    if isinstance(e, t.IntLit):
        return str(e.value)
    if isinstance(e, t.Var):
        return e.name
    if isinstance(e, t.Add):
        s = f"{pretty_arith(e.left, 1)} + {pretty_arith(e.right, 2)}"
        return _wrap(s, level > 1)
    if isinstance(e, t.Sub):
        s = f"{pretty_arith(e.left, 1)} - {pretty_arith(e.right, 2)}"
        return _wrap(s, level > 1)
    if isinstance(e, t.Mul):
        s = f"{pretty_arith(e.left, 2)}*{pretty_arith(e.right, 3)}"
        return _wrap(s, level > 2)
    if isinstance(e, t.Neg):
        s = f"-{pretty_arith(e.operand, 4)}"
        return _wrap(s, level > 3)
    if isinstance(e, t.Factorial):
        return f"{pretty_arith(e.operand, 5)}!"
    raise TypeError(f"not arithmetic: {e!r}")


def _wrap(s: str, cond: bool) -> str:
    return f"({s})" if cond else s


# ---------------------------------------------------------------------------
# boolean: levels  \/ (1) < /\ (2) < atom


def pretty_bool(b: t.BoolExpr, level: int = 0) -> str:
    if isinstance(b, t.BTrue):
        return "true"
    if isinstance(b, t.BFalse):
        return "false"
    if isinstance(b, t.Cmp):
        return f"{pretty_arith(b.left, 1)} {_CMP_SURFACE[b.op]} {pretty_arith(b.right, 1)}"
    if isinstance(b, t.BAnd):
        s = f"{pretty_bool(b.left, 3)} /\\ {pretty_bool(b.right, 2)}"
        return _wrap(s, level > 2)
    if isinstance(b, t.BOr):
        s = f"{pretty_bool(b.left, 2)} \\/ {pretty_bool(b.right, 1)}"
        return _wrap(s, level > 1)
    if isinstance(b, t.BNot):
        op = b.operand
        if isinstance(op, (t.Even, t.BTrue, t.BFalse)):
            return f"!{pretty_bool(op, 3)}"
        return f"!({pretty_bool(op, 0)})"
    if isinstance(b, t.Even):
        return f"even({pretty_arith(b.operand, 0)})"
    raise TypeError(f"not boolean: {b!r}")


# ---------------------------------------------------------------------------
# relations


def pretty_rel(r: f.RelExpr) -> str:
    if isinstance(r, f.IdRel):
        return "Id"
    if isinstance(r, f.SbRel):
        return f"Sb[{r.var} := {pretty_arith(r.expr, 0)}]"
    if isinstance(r, f.NamedRel):
        return r.name
    raise TypeError(f"not a relation: {r!r}")


# ---------------------------------------------------------------------------
# trace formulas: levels  \/ (1) < /\ (2) < >> (3) < atom (4)
#
# ``mu`` swallows everything to its right, so it prints bare only in tail
# position (rightmost operand of the whole formula); elsewhere it gets
# parentheses.


def pretty_formula(phi: f.TraceFormula, level: int = 0, tail: bool = True) -> str:
    if isinstance(phi, f.Pred):
        b = phi.pred
        # comparison atoms sit directly in formulas; composite predicates
        # print through the formula connectives to keep one surface grammar
        if isinstance(b, t.BAnd):
            s = f"{pretty_formula(f.Pred(b.left), 3, False)} /\\ {pretty_formula(f.Pred(b.right), 2, tail)}"
            return _wrap(s, level > 2)
        if isinstance(b, t.BOr):
            s = f"{pretty_formula(f.Pred(b.left), 2, False)} \\/ {pretty_formula(f.Pred(b.right), 1, tail)}"
            return _wrap(s, level > 1)
        return pretty_bool(b, 3)
    if isinstance(phi, f.Rel):
        return pretty_rel(phi.rel)
    if isinstance(phi, f.RVar):
        return phi.name
    if isinstance(phi, f.And):
        s = f"{pretty_formula(phi.left, 3, False)} /\\ {pretty_formula(phi.right, 2, tail)}"
        return _wrap(s, level > 2)
    if isinstance(phi, f.Or):
        s = f"{pretty_formula(phi.left, 2, False)} \\/ {pretty_formula(phi.right, 1, tail)}"
        return _wrap(s, level > 1)
    if isinstance(phi, f.Chop):
        s = f"{pretty_formula(phi.left, 4, False)} >> {pretty_formula(phi.right, 3, tail)}"
        return _wrap(s, level > 3)
    if isinstance(phi, f.Mu):
        head = f"mu {phi.var}"
        if phi.proc is not None:
            head += f" @proc {phi.proc}"
        s = f"{head}. {pretty_formula(phi.body, 0, True)}"
        return _wrap(s, not tail)
    raise TypeError(f"not a trace formula: {phi!r}")


# ---------------------------------------------------------------------------
# programs


def pretty_stmt(s: p.Stmt) -> str:
    if isinstance(s, p.Skip):
        return "skip"
    if isinstance(s, p.Assign):
        return f"{s.var} := {pretty_arith(s.expr, 0)}"
    if isinstance(s, p.Seq):
        first = pretty_stmt(s.first)
        if isinstance(s.first, p.If):
            first = f"{{ {first} }}"
        return f"{first}; {pretty_stmt(s.second)}"
    if isinstance(s, p.If):
        return f"if {pretty_bool(s.cond, 0)} then {pretty_stmt(s.then)} else {pretty_stmt(s.orelse)}"
    if isinstance(s, p.Call):
        return f"{s.proc}()"
    raise TypeError(f"not a statement: {s!r}")


def pretty_program(prog: p.RecProgram) -> str:
    parts = [pretty_stmt(prog.main)]
    for name, body in prog.procs.items():
        parts.append(f"proc {name} {{ {pretty_stmt(body)} }}")
    return "\n".join(parts)
