"""Expression evaluation, negation, and substitution."""

import random

import pytest

from trace_seq.terms import (
    Add,
    BAnd,
    BNot,
    BOr,
    Cmp,
    EvalError,
    Even,
    FALSE,
    Factorial,
    IntLit,
    Mul,
    Neg,
    Sub,
    TRUE,
    Var,
    arith_vars,
    bool_vars,
    conjoin,
    conjuncts,
    eval_arith,
    eval_bool,
    negated,
    subst_arith,
    subst_bool,
)


def test_eval_arith_basics():
    e = Add(Mul(Var("x"), IntLit(3)), Neg(Var("y")))
    assert eval_arith(e, {"x": 2, "y": 5}) == 1
    assert eval_arith(Sub(IntLit(10), IntLit(4)), {}) == 6


def test_eval_factorial():
    assert eval_arith(Factorial(IntLit(0)), {}) == 1
    assert eval_arith(Factorial(IntLit(5)), {}) == 120
    assert eval_arith(Factorial(Var("n")), {"n": 4}) == 24


def test_factorial_negative_raises():
    with pytest.raises(EvalError):
        eval_arith(Factorial(IntLit(-1)), {})


def test_unbound_variable_raises():
    with pytest.raises(EvalError):
        eval_arith(Var("q"), {"x": 1})


def test_overflow_guard():
    big = IntLit(2**62)
    with pytest.raises(EvalError):
        eval_arith(Mul(big, IntLit(4)), {})


def test_eval_bool_connectives():
    st = {"x": 2, "y": 3}
    assert eval_bool(Cmp("<", Var("x"), Var("y")), st)
    assert not eval_bool(Cmp(">=", Var("x"), Var("y")), st)
    assert eval_bool(BAnd(TRUE, Cmp("!=", Var("x"), Var("y"))), st)
    assert eval_bool(BOr(FALSE, Even(Var("x"))), st)
    assert not eval_bool(BNot(TRUE), st)


def _random_arith(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return IntLit(rng.randint(0, 4))
        return Var(rng.choice("xyz"))
    kind = rng.randint(0, 3)
    if kind == 0:
        return Add(_random_arith(rng, depth - 1), _random_arith(rng, depth - 1))
    if kind == 1:
        return Sub(_random_arith(rng, depth - 1), _random_arith(rng, depth - 1))
    if kind == 2:
        return Mul(_random_arith(rng, depth - 1), _random_arith(rng, depth - 1))
    return Neg(_random_arith(rng, depth - 1))


def _random_bool(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        op = rng.choice(["==", "!=", "<", "<=", ">", ">="])
        return Cmp(op, _random_arith(rng, 1), _random_arith(rng, 1))
    kind = rng.randint(0, 3)
    if kind == 0:
        return BAnd(_random_bool(rng, depth - 1), _random_bool(rng, depth - 1))
    if kind == 1:
        return BOr(_random_bool(rng, depth - 1), _random_bool(rng, depth - 1))
    if kind == 2:
        return BNot(_random_bool(rng, depth - 1))
    return Even(_random_arith(rng, 1))


def test_negated_flips_truth_value():
    """negated(b) must disagree with b on every state."""
    rng = random.Random(901)
    for _ in range(300):
        b = _random_bool(rng, 3)
        st = {v: rng.randint(-3, 3) for v in "xyz"}
        assert eval_bool(negated(b), st) == (not eval_bool(b, st))


def test_negated_produces_no_cmp_negations():
    rng = random.Random(902)

    def no_cmp_under_not(b):
        if isinstance(b, BNot):
            return isinstance(b.operand, Even) and no_cmp_under_not(b.operand)
        if isinstance(b, (BAnd, BOr)):
            return no_cmp_under_not(b.left) and no_cmp_under_not(b.right)
        return True

    for _ in range(200):
        assert no_cmp_under_not(negated(_random_bool(rng, 3)))


def test_subst_arith():
    e = Add(Var("x"), Mul(Var("y"), Var("x")))
    out = subst_arith(e, {"x": IntLit(2)})
    assert eval_arith(out, {"y": 5}) == 12


def test_subst_bool_matches_state_update():
    rng = random.Random(903)
    for _ in range(200):
        b = _random_bool(rng, 2)
        repl = _random_arith(rng, 1)
        st = {v: rng.randint(-3, 3) for v in "xyz"}
        st2 = dict(st)
        st2["x"] = eval_arith(repl, st)
        assert eval_bool(subst_bool(b, {"x": repl}), st) == eval_bool(b, st2)


def test_vars_iterators():
    e = Add(Var("x"), Factorial(Var("n")))
    assert set(arith_vars(e)) == {"x", "n"}
    b = BAnd(Cmp("<", Var("a"), IntLit(1)), Even(Var("b")))
    assert set(bool_vars(b)) == {"a", "b"}


def test_conjuncts_and_conjoin():
    a = Cmp("<", Var("x"), IntLit(1))
    b = Even(Var("y"))
    c = conjoin([a, b])
    assert conjuncts(c) == [a, b]
    assert conjoin([]) == TRUE
    assert conjoin([a]) == a
