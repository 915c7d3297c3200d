"""Programs and their trace-formula translation."""

from trace_seq.formulas import And, Chop, IdRel, Mu, Or, Pred, RVar, Rel, SbRel, chop
from trace_seq.parser import parse_arith, parse_formula, parse_pred, parse_program
from trace_seq.programs import Assign, Call, If, RecProgram, Seq, Skip, rvar_name, stf
from trace_seq.terms import Cmp, IntLit, Var, negated


def test_rvar_name():
    assert rvar_name("fac") == "Xfac"


def test_stf_skip_and_assign():
    prog = RecProgram(Skip(), {})
    assert stf(prog) == Rel(IdRel())
    prog2 = RecProgram(Assign("x", IntLit(1)), {})
    assert stf(prog2) == Rel(SbRel("x", IntLit(1)))


def test_stf_seq_is_chop():
    prog = parse_program("x := 1; y := 2")
    assert stf(prog) == Chop(
        Rel(SbRel("x", IntLit(1))), Rel(SbRel("y", IntLit(2)))
    )


def test_stf_if_guards_both_branches():
    prog = parse_program("if x = 1 then skip else x := 2")
    cond = Cmp("==", Var("x"), IntLit(1))
    want = Or(
        And(Pred(cond), Chop(Rel(IdRel()), Rel(IdRel()))),
        And(Pred(negated(cond)), Chop(Rel(IdRel()), Rel(SbRel("x", IntLit(2))))),
    )
    assert stf(prog) == want


def test_stf_call_wraps_body_in_mu():
    prog = parse_program("m()\nproc m { skip }")
    assert stf(prog) == Chop(Rel(IdRel()), Mu("Xm", Rel(IdRel()), proc="m"))


def test_stf_recursive_call_uses_variable():
    prog = parse_program("m()\nproc m { m() }")
    phi = stf(prog)
    mu = phi.right
    assert isinstance(mu, Mu)
    assert mu.body == Chop(Rel(IdRel()), RVar("Xm"))


def test_stf_mutual_recursion_nests_once_per_chain():
    prog = parse_program("a()\nproc a { b() }\nproc b { a() }")
    outer = stf(prog).right
    assert isinstance(outer, Mu)
    assert outer.proc == "a"
    inner = outer.body.right
    assert isinstance(inner, Mu)
    assert inner.proc == "b"
    # back-reference to a, not a third unfolding
    assert inner.body == Chop(Rel(IdRel()), RVar("Xa"))


def test_stf_factorial_golden():
    src = """
y := 1;
fac()
proc fac {
  if x = 1 then skip
  else { y := y*x; x := x - 1; fac() }
}
"""
    prog = parse_program(src)
    got = stf(prog)

    cond = Cmp("==", Var("x"), IntLit(1))
    body = Or(
        And(Pred(cond), Chop(Rel(IdRel()), Rel(IdRel()))),
        And(
            Pred(negated(cond)),
            chop(
                Rel(IdRel()),
                Rel(SbRel("y", parse_arith("y*x"))),
                Rel(SbRel("x", parse_arith("x - 1"))),
                Rel(IdRel()),
                RVar("Xfac"),
            ),
        ),
    )
    want = chop(Rel(SbRel("y", IntLit(1))), Rel(IdRel()), Mu("Xfac", body, proc="fac"))
    assert got == want
