"""Rule-by-rule kernel checks plus two complete derivations.

The closing derivations double as integration tests for the prover
(symbolic execution, the factorial recurrence) and for premise texts
surviving a print/parse round trip, which the certificate format
depends on.
"""

import pytest

from trace_seq import formulas as f
from trace_seq import terms as t
from trace_seq.domain import Domain
from trace_seq.oracle import gen_members, member, refute_sequent
from trace_seq.parser import parse_formula, parse_pred, parse_program, parse_tf
from trace_seq.printer import pretty_formula
from trace_seq.programs import stf
from trace_seq.prover import Prover
from trace_seq.rules import (
    applicable_rules,
    RULE_PARAMS,
    RULES,
    RuleError,
    apply_rule,
    chain_parts,
    contract_scope,
    det,
    sole_non_pred,
)
from trace_seq.sequents import ContractEntry, Sequent, XiEntry


def pv():
    return Prover()


def mk(gamma, delta, relenv=None, xi=(), contracts=()):
    return Sequent.make(
        [parse_formula(g, relenv) if isinstance(g, str) else g for g in gamma],
        [parse_formula(d, relenv) if isinstance(d, str) else d for d in delta],
        xi,
        contracts,
    )


FAC_SRC = """
y := 1;
fac()
proc fac {
  if x = 1 then skip
  else { y := y*x; x := x - 1; fac() }
}
"""

DOWN_SRC = "down()\nproc down { if x = 0 then skip else { x := x - 1; down() } }"


def program_mu(src):
    w = stf(parse_program(src))
    while isinstance(w, f.Chop):
        w = w.right
    assert isinstance(w, f.Mu)
    return w


# ---------------------------------------------------------------------------
# registry


def test_unknown_rule_rejected():
    s = mk(["true"], ["true"])
    with pytest.raises(RuleError, match="unknown"):
        apply_rule(s, "NO-SUCH-RULE", {}, pv())


def test_conjunction_on_the_right_cannot_cross_a_chop():
    """The rule that would combine chops under a right conjunction is absent.

    It is unsound: each conjunct may need a different split point.  The
    kernel treats it as unknown, and the oracle exhibits the countermodel
    the rule would have proved away.
    """
    s = mk(["true"], ["true"])
    with pytest.raises(RuleError, match="unknown"):
        apply_rule(s, "CH-AND-R", {}, pv())

    dom = Domain(("x",), 0, 1)
    gamma = [parse_formula("Id >> Id >> Id")]
    d1 = [parse_formula("Id >> true")]
    d2 = [parse_formula("Id >> Id >> true")]
    bad = [parse_formula("(Id /\\ Id >> Id) >> true")]
    assert refute_sequent(gamma, d1, dom) is None
    assert refute_sequent(gamma, d2, dom) is None
    cm = refute_sequent(gamma, bad, dom)
    assert cm is not None and len(cm.trace) == 4


def test_applicable_rules_on_a_mu_vs_mu_goal():
    mu = program_mu(DOWN_SRC)
    relenv, _ = parse_tf("rel A := true")
    target = parse_formula("mu Xa. A >> A \\/ A >> A >> A >> Xa", relenv)
    s = Sequent.make([parse_formula("x >= 0"), mu], [target])
    listing = {name: cands for name, cands, _ in applicable_rules(s)}
    for expected in ("UNFL", "LENL", "FPI", "MC", "SYNC"):
        assert expected in listing
    assert listing["FPI"] == (1,)  # the mu sits after the predicate
    assert listing["SYNC"] == (0,)
    assert "CH-ID" not in listing and "REL" not in listing


def test_applicable_rules_never_lies_about_shape():
    """Anything unlisted must fail apply_rule outright."""
    s = mk(["x >= 1", "Id >> Sb[x := x + 1]"], ["Id >> true", "x = 2"])
    listed = {name for name, _, _ in applicable_rules(s)}
    assert "CH-ID" in listed and "END-ID" not in listed
    prover = pv()
    for name in set(RULES) - listed:
        schema = RULE_PARAMS[name]
        if any(kind in ("pred", "formula") and req for _, kind, req in schema):
            continue
        args = {arg: 1 for arg, kind, req in schema if req and kind == "int"}
        with pytest.raises(RuleError):
            apply_rule(s, name, args, prover)


def test_applicable_rules_is_deterministic():
    s = mk(["Id \\/ Id >> Id"], ["true >> Id"])
    a = applicable_rules(s)
    b = applicable_rules(s)
    assert a == b
    names = [name for name, _, _ in a]
    assert names.index("OR-L") < names.index("ARB1") or "ARB1" not in names


def test_every_rule_has_a_parameter_schema():
    assert set(RULE_PARAMS) == set(RULES)
    for params in RULE_PARAMS.values():
        for name, kind, required in params:
            assert kind in ("pred", "formula", "int", "index", "indices")
            assert isinstance(required, bool)


# ---------------------------------------------------------------------------
# axioms


def test_close_needs_a_shared_member():
    s = mk(["Id >> Id", "x >= 1"], ["Id >> Id"])
    assert apply_rule(s, "CLOSE", {}, pv()).premises == ()
    with pytest.raises(RuleError):
        apply_rule(mk(["Id"], ["Id >> Id"]), "CLOSE", {}, pv())


def test_true_and_false_axioms():
    assert apply_rule(mk(["Id"], ["true"]), "TRUE", {}, pv()).premises == ()
    with pytest.raises(RuleError):
        apply_rule(mk(["Id"], ["x = 1"]), "TRUE", {}, pv())
    assert apply_rule(mk(["x >= 1", "x <= 0"], []), "FALSE", {}, pv()).premises == ()
    with pytest.raises(RuleError):
        apply_rule(mk(["x >= 1"], []), "FALSE", {}, pv())


def test_pred_axiom_uses_the_prover():
    s = mk(["x >= 2", "Id"], ["x >= 1"])
    assert apply_rule(s, "PRED", {}, pv()).premises == ()
    with pytest.raises(RuleError, match="derive"):
        apply_rule(mk(["x >= 0"], ["x >= 1"]), "PRED", {}, pv())


def test_rel_axiom_checks_inclusion_under_facts():
    relenv, _ = parse_tf("rel Mono := x' <= x")
    s = mk(["Sb[x := x - 1]"], ["Mono"], relenv)
    assert apply_rule(s, "REL", {}, pv()).premises == ()
    s2 = mk(["Sb[x := x + 1]"], ["Mono"], relenv)
    with pytest.raises(RuleError, match="inclusion"):
        apply_rule(s2, "REL", {}, pv())


def test_rel_axiom_needs_a_single_transition_on_the_left():
    s = mk(["Id", "Id >> Id"], ["Id"])
    with pytest.raises(RuleError, match="exactly one"):
        apply_rule(s, "REL", {}, pv())


def test_named_relation_is_not_included_in_id():
    """A named relation says nothing about unmentioned variables."""
    relenv, _ = parse_tf("rel Keep := x' = x")
    s = mk(["Keep"], ["Id"], relenv)
    with pytest.raises(RuleError):
        apply_rule(s, "REL", {}, pv())
    dom = Domain(("x", "y"), 0, 1)
    cm = refute_sequent(
        [parse_formula("Keep", relenv)], [parse_formula("Id")], dom
    )
    assert cm is not None


def test_rvar_axiom_consults_xi():
    e = XiEntry("Xa", parse_pred("x >= 1"), parse_formula("Id >> true"))
    s = mk(["x >= 2", f.RVar("Xa")], ["Id >> true"], xi=[e])
    assert apply_rule(s, "RVAR", {}, pv()).premises == ()
    weak = mk(["x >= 0", f.RVar("Xa")], ["Id >> true"], xi=[e])
    with pytest.raises(RuleError):
        apply_rule(weak, "RVAR", {}, pv())
    wrong_target = mk(["x >= 2", f.RVar("Xa")], ["Id"], xi=[e])
    with pytest.raises(RuleError):
        apply_rule(wrong_target, "RVAR", {}, pv())


def test_ch_rvar_axiom_matches_the_tail_exactly():
    tail = parse_formula("Id >> Id")
    e = XiEntry("Xa", parse_pred("true"), parse_formula("true"), src_tail=tail)
    s = mk([f.Chop(f.RVar("Xa"), tail)], ["true"], xi=[e])
    assert apply_rule(s, "CH-RVAR", {}, pv()).premises == ()
    other = mk([f.Chop(f.RVar("Xa"), parse_formula("Id"))], ["true"], xi=[e])
    with pytest.raises(RuleError):
        apply_rule(other, "CH-RVAR", {}, pv())


# ---------------------------------------------------------------------------
# structural rules


def test_and_l_splits_one_member():
    s = mk(["Id /\\ Id >> Id"], ["true"])
    (p,) = apply_rule(s, "AND-L", {}, pv()).premises
    assert len(p.gamma) == 2


def test_and_r_forks():
    s = mk(["Id"], ["Id /\\ Id >> Id"])
    p1, p2 = apply_rule(s, "AND-R", {}, pv()).premises
    assert p1.delta != p2.delta
    assert p1.gamma == p2.gamma == s.gamma


def test_or_l_forks_and_or_r_keeps_both():
    s = mk(["Id \\/ Id >> Id"], ["true"])
    p1, p2 = apply_rule(s, "OR-L", {}, pv()).premises
    assert p1.gamma != p2.gamma
    s2 = mk(["Id"], ["Id \\/ Id >> Id"])
    (p,) = apply_rule(s2, "OR-R", {}, pv()).premises
    assert len(p.delta) == 2


def test_weaken_drops_by_index():
    s = mk(["x >= 1", "Id"], ["Id", "true"])
    (p,) = apply_rule(s, "WEAKEN", {"gamma": [0], "delta": [1]}, pv()).premises
    assert len(p.gamma) == 1 and len(p.delta) == 1
    with pytest.raises(RuleError):
        apply_rule(s, "WEAKEN", {}, pv())
    with pytest.raises(RuleError):
        apply_rule(s, "WEAKEN", {"gamma": [7]}, pv())


def test_cut_cases_on_a_predicate():
    s = mk(["Id"], ["Id"])
    p1, p2 = apply_rule(s, "CUT", {"pred": parse_pred("x >= 1")}, pv()).premises
    texts = {p1.pretty(), p2.pretty()}
    assert any("x >= 1" in x for x in texts)
    assert any("x < 1" in x or "!(x >= 1)" in x or "x <= 0" in x for x in texts)
    with pytest.raises(RuleError):
        apply_rule(s, "CUT", {}, pv())


# ---------------------------------------------------------------------------
# stepping


def test_ch_id_steps_and_drops_unmatched(capsys=None):
    relenv, _ = parse_tf("rel A := true")
    s = mk(
        ["x >= 1", "Id >> Sb[x := x - 1]"],
        ["A >> true", "x = 99", "Sb[x := 0] >> Id"],
        relenv,
    )
    app = apply_rule(s, "CH-ID", {}, pv())
    (p,) = app.premises
    # only the A-led chain steps: the predicate is not a chain, and Id is
    # not included in Sb[x := 0] under x >= 1
    assert len(p.delta) == 1
    assert any("dropped" in n for n in app.notes)


def test_ch_id_rejects_explicit_bad_target():
    relenv, _ = parse_tf("rel A := true")
    s = mk(["x >= 1", "Id >> Id"], ["Sb[x := 0] >> true", "A >> true"], relenv)
    with pytest.raises(RuleError, match="inclusion"):
        apply_rule(s, "CH-ID", {"targets": [0]}, pv())


def test_ch_upd_freezes_the_assigned_variable():
    s = mk(["x = 3", "Sb[x := x + 1] >> Id"], ["Sb[x := x + 1] >> Id"])
    (p,) = apply_rule(s, "CH-UPD", {}, pv()).premises
    text = p.pretty()
    assert "x#0" in text and "x = x#0 + 1" in text


def test_ch_upd_avoids_names_used_by_the_premise():
    relenv, _ = parse_tf("rel A := true")
    s = mk(
        ["x = 3", "Sb[x := x + 1] >> Id"],
        ["A >> (x#0 = 7 /\\ Id)"],
        relenv,
    )
    (p,) = apply_rule(s, "CH-UPD", {}, pv()).premises
    text = p.pretty()
    assert "x#1" in text and "x#0 = 7" in text


def test_end_id_splits_a_predicate_terminated_chain():
    s = mk(["x = 1", "Id"], ["Id >> (x = 1)"])
    p1, p2 = apply_rule(s, "END-ID", {}, pv()).premises
    assert [pretty_formula(d) for d in p1.delta] == ["Id"]
    assert [pretty_formula(d) for d in p2.delta] == ["x = 1"]
    assert apply_rule(p1, "REL", {}, pv()).premises == ()
    assert apply_rule(p2, "PRED", {}, pv()).premises == ()


def test_end_upd_projects_the_postcondition():
    s = mk(["x = 3", "Sb[x := x + 1]"], ["Sb[x := x + 1] >> (x = 4)"])
    p1, p2 = apply_rule(s, "END-UPD", {}, pv()).premises
    assert apply_rule(p1, "REL", {}, pv()).premises == ()
    assert apply_rule(p2, "PRED", {}, pv()).premises == ()


def test_arb1_drops_the_true_prefix():
    s = mk(["Id"], ["true >> Id", "x = 5"])
    (p,) = apply_rule(s, "ARB1", {}, pv()).premises
    assert len(p.delta) == 2
    assert apply_rule(p, "CLOSE", {}, pv()).premises == ()


def test_arb2_consumes_one_left_step():
    s = mk(["x >= 1", "Sb[x := x - 1] >> Id"], ["true >> Id", "x = 9"])
    app = apply_rule(s, "ARB2", {}, pv())
    (p,) = app.premises
    assert [pretty_formula(d) for d in p.delta] == ["true >> Id"]
    assert app.notes
    p2 = apply_rule(p, "ARB1", {}, pv()).premises[0]
    assert apply_rule(p2, "CLOSE", {}, pv()).premises == ()


def test_arb2_copies_an_unknown_lead_in_front():
    s = mk(["(mu Xa. Id \\/ Id >> Xa) >> Id"], ["true >> (x = 0)"])
    (p,) = apply_rule(s, "ARB2", {}, pv()).premises
    assert [pretty_formula(g) for g in p.gamma] == [
        "(mu Xa. Id \\/ Id >> Xa) >> Id"
    ]
    assert [pretty_formula(d) for d in p.delta] == [
        "(mu Xa. Id \\/ Id >> Xa) >> true >> x = 0"
    ]
    with pytest.raises(RuleError):
        apply_rule(mk(["mu Xa. Id \\/ Id >> Xa"], ["true >> Id"]), "ARB2", {}, pv())


def test_ch_predl_exposes_the_head_predicate():
    s = mk(["(x = 1) >> Id"], ["true"])
    (p,) = apply_rule(s, "CH-PREDL", {}, pv()).premises
    assert "x = 1" in [pretty_formula(g) for g in p.gamma]
    assert "true >> Id" in [pretty_formula(g) for g in p.gamma]
    with pytest.raises(RuleError):
        apply_rule(mk(["true >> Id"], ["true"]), "CH-PREDL", {}, pv())


def test_ch_predr_proves_the_head_and_keeps_the_junction_open():
    s = mk(["x = 2", "Id >> Id"], ["(x >= 1) >> (Id >> Id)"])
    p1, p2 = apply_rule(s, "CH-PREDR", {}, pv()).premises
    assert apply_rule(p1, "PRED", {}, pv()).premises == ()
    assert pretty_formula(p2.delta[0]) == "true >> Id >> Id"
    p2 = apply_rule(p2, "ARB1", {}, pv()).premises[0]
    assert apply_rule(p2, "CLOSE", {}, pv()).premises == ()
    with pytest.raises(RuleError):
        apply_rule(mk(["Id"], ["true >> Id"]), "CH-PREDR", {}, pv())


def test_ch_or_l_forks_the_chain_head():
    s = mk(["(Id \\/ Sb[x := 1]) >> Id"], ["true"])
    p1, p2 = apply_rule(s, "CH-OR-L", {}, pv()).premises
    heads = {pretty_formula(p.gamma[0]) for p in (p1, p2)}
    assert heads == {"Id >> Id", "Sb[x := 1] >> Id"}


def test_ch_or_r_picks_a_side():
    s = mk(["Id >> Id"], ["(Id \\/ Sb[x := 1]) >> Id"])
    (p,) = apply_rule(s, "CH-OR-R", {"pick": 1}, pv()).premises
    assert apply_rule(p, "CLOSE", {}, pv()).premises == ()
    with pytest.raises(RuleError):
        apply_rule(s, "CH-OR-R", {}, pv())


def test_ch_and_l_splits_into_two_chains():
    s = mk(["(Id /\\ Id >> Id) >> true"], ["x = 1"])
    app = apply_rule(s, "CH-AND-L", {}, pv())
    (p,) = app.premises
    assert len(p.gamma) == 2
    assert app.notes


# ---------------------------------------------------------------------------
# unfolding and repetition


def test_unfr_replaces_by_the_unfolding():
    mu = parse_formula("mu Xa. Id \\/ Id >> Xa")
    s = mk(["Id"], [mu])
    (p,) = apply_rule(s, "UNFR", {}, pv()).premises
    assert p.delta[0] == f.normalize(f.unfold(mu))


def test_unfl_and_chopped_variants():
    mu = parse_formula("mu Xa. Id \\/ Id >> Xa")
    s = mk([mu], ["true"])
    (p,) = apply_rule(s, "UNFL", {}, pv()).premises
    assert isinstance(p.gamma[0], f.Or)
    s2 = mk([f.Chop(mu, parse_formula("x = 1"))], ["true"])
    (p2,) = apply_rule(s2, "CH-UNFL", {}, pv()).premises
    assert isinstance(p2.gamma[0], (f.Or, f.Chop))


def test_len_rules_repeat_the_body():
    mu = parse_formula("mu Xa. Id \\/ Id >> Xa")
    s = mk(["Id"], [mu])
    (p,) = apply_rule(s, "LENR", {"count": 2}, pv()).premises
    new = p.delta[0]
    assert isinstance(new, f.Mu)
    # the doubled body mentions the variable under two levels of Or
    assert "Xa" in pretty_formula(new.body)
    assert pretty_formula(new) != pretty_formula(mu)
    with pytest.raises(RuleError):
        apply_rule(s, "LENR", {"count": 0}, pv())


def test_len_keeps_the_proc_tag():
    mu = program_mu(DOWN_SRC)
    s = mk([mu], ["true"])
    (p,) = apply_rule(s, "LENL", {"count": 2}, pv()).premises
    assert p.gamma_preds == [] and isinstance(p.gamma[0], f.Mu)
    assert p.gamma[0].proc == "down"


def test_len_same_members_on_a_small_domain():
    mu = parse_formula("mu Xa. Sb[x := x + 1] \\/ Sb[x := x + 1] >> Xa")
    s = mk(["Id"], [mu])
    (p,) = apply_rule(s, "LENR", {"count": 3}, pv()).premises
    tripled = p.delta[0]
    dom = Domain(("x",), 0, 5)
    for tr in gen_members(mu, dom, maxlen=5):
        assert member(tr, tripled, dom)
    for tr in gen_members(tripled, dom, maxlen=5):
        assert member(tr, mu, dom)


# ---------------------------------------------------------------------------
# determinism check


def test_det_accepts_guarded_functional_bodies():
    assert det(program_mu(FAC_SRC), pv())
    assert det(program_mu(DOWN_SRC), pv())


def test_det_rejects_overlapping_guards():
    mu = parse_formula("mu Xa. x >= 0 /\\ Id \\/ x >= 1 /\\ Id >> Xa")
    assert not det(mu, pv())


def test_det_accepts_guarded_non_tail_recursion():
    mu = parse_formula("mu Xa. x = 0 /\\ Id \\/ x != 0 /\\ Id >> Xa >> Id")
    assert det(mu, pv())


def test_det_rejects_unguarded_mid_chain_recursion():
    mu = parse_formula("mu Xa. Id \\/ Id >> Xa >> Id")
    assert not det(mu, pv())


def test_det_accepts_nested_guarded_choice():
    src = (
        "main()\n"
        "proc main { if x = 0 then skip else {\n"
        "  if x > 0 then { x := x - 1; main(); ev := 0 }\n"
        "  else { x := x + 1; main(); ev := 1 } } }"
    )
    assert det(program_mu(src), pv())


def test_det_rejects_overlap_inside_a_nested_choice():
    mu = parse_formula(
        "mu Xa. x = 0 /\\ Id \\/ x != 0 /\\ Id >> "
        "(x >= 0 /\\ Id >> Xa \\/ x <= 0 /\\ Id)"
    )
    assert not det(mu, pv())


def test_det_rejects_named_relation_steps():
    relenv, _ = parse_tf("rel A := true")
    mu = parse_formula("mu Xa. A \\/ A >> Xa", relenv)
    assert not det(mu, pv())


def test_det_rejects_unguarded_pair():
    mu = parse_formula("mu Xa. Id \\/ Id >> Xa")
    assert not det(mu, pv())


# ---------------------------------------------------------------------------
# contract scope


def test_contract_scope_unions_body_and_post_old_names():
    mu = program_mu(FAC_SRC)
    entry = ContractEntry(
        "fac", parse_pred("x >= 1"), parse_pred("z_old = z /\\ x = 1"), mu
    )
    assert contract_scope(entry) == ["x", "y", "z"]


# ---------------------------------------------------------------------------
# helpers


def test_chain_parts_and_sole_non_pred():
    phi = f.normalize(parse_formula("Id >> Sb[x := 1] >> true"))
    assert len(chain_parts(phi)) == 3
    s = mk(["x >= 1", "Id"], [])
    assert isinstance(sole_non_pred(s), f.Rel)
    with pytest.raises(RuleError):
        sole_non_pred(mk(["x >= 1"], []))


# ---------------------------------------------------------------------------
# full derivations


def close(seq, rule, args, prover):
    app = apply_rule(seq, rule, args, prover)
    assert app.premises == (), f"{rule} left premises open"
    return app


def reparse_check(seq, relenv):
    for phi in seq.gamma + seq.delta:
        text = pretty_formula(phi)
        assert f.normalize(parse_formula(text, relenv)) == phi, text


def test_down_is_covered_by_a_synchronized_chain():
    prover = pv()
    mu = program_mu(DOWN_SRC)
    relenv, _ = parse_tf("rel A := true")
    target = parse_formula("mu Xa. A >> A \\/ A >> A >> A >> Xa", relenv)
    root = Sequent.make([parse_formula("x >= 0"), mu], [target])

    p1, p2 = apply_rule(root, "FPI", {"invariant": parse_pred("true")}, prover).premises
    close(p1, "TRUE", {}, prover)
    reparse_check(p2, relenv)

    base, rec = apply_rule(p2, "OR-L", {}, prover).premises
    b = apply_rule(base, "AND-L", {}, prover).premises[0]
    b = apply_rule(b, "OR-R", {}, prover).premises[0]
    b = apply_rule(b, "CH-ID", {}, prover).premises[0]
    close(b, "REL", {}, prover)

    r = apply_rule(rec, "AND-L", {}, prover).premises[0]
    r = apply_rule(r, "OR-R", {}, prover).premises[0]
    for rule in ("CH-ID", "CH-UPD", "CH-ID"):
        r = apply_rule(r, rule, {}, prover).premises[0]
        reparse_check(r, relenv)
    close(r, "RVAR", {}, prover)

    # the root judgment holds on a finite domain
    dom = Domain(("x",), 0, 3)
    assert refute_sequent(list(root.gamma), list(root.delta), dom) is None


def prove_fac_validity(p1, prover):
    q1, q2 = apply_rule(p1, "CH-OR-L", {}, prover).premises
    b = apply_rule(q1, "AND-L", {}, prover).premises[0]
    b = apply_rule(b, "CH-OR-R", {"pick": 1}, prover).premises[0]
    left, right = apply_rule(b, "AND-R", {}, prover).premises
    close(left, "PRED", {}, prover)
    c = apply_rule(right, "CH-ID", {}, prover).premises[0]
    c = apply_rule(c, "CH-ID", {}, prover).premises[0]
    close(c, "PRED", {}, prover)

    r = apply_rule(q2, "AND-L", {}, prover).premises[0]
    r = apply_rule(r, "CH-OR-R", {"pick": 2}, prover).premises[0]
    gl, gr = apply_rule(r, "AND-R", {}, prover).premises
    close(gl, "PRED", {}, prover)
    s = gr
    for rule in ("CH-ID", "CH-UPD", "CH-UPD", "CH-ID"):
        s = apply_rule(s, rule, {}, prover).premises[0]
    s = apply_rule(s, "CH-RVAR-EQ", {}, prover).premises[0]
    close(s, "PRED", {}, prover)


def test_factorial_contract_validity_closes():
    prover = pv()
    mu = program_mu(FAC_SRC)
    pre = parse_pred("x >= 1")
    post = parse_pred("y = y_old * x_old! /\\ x = 1")
    concl = Sequent.make(
        [parse_formula("x >= 1"), f.Chop(mu, parse_formula("true"))],
        [parse_formula("true")],
    )
    p1, p2 = apply_rule(concl, "MC", {"pre": pre, "post": post}, prover).premises
    assert p2.contract_for("fac") is not None
    assert p2.gamma == concl.gamma and p2.delta == concl.delta
    reparse_check(p1, None)
    prove_fac_validity(p1, prover)
    close(p2, "TRUE", {}, prover)


def test_mc_argument_errors():
    prover = pv()
    mu = program_mu(FAC_SRC)
    pre, post = parse_pred("x >= 1"), parse_pred("x = 1")
    entry = ContractEntry("fac", pre, post, mu)
    have = Sequent.make([mu], [parse_formula("true")], contracts=[entry])
    with pytest.raises(RuleError, match="already"):
        apply_rule(have, "MC", {"pre": pre, "post": post}, prover)
    renamed = f.Mu("Xwrong", f.substitute(mu.body, mu.var, f.RVar("Xwrong")), "fac")
    s = Sequent.make([renamed], [parse_formula("true")])
    with pytest.raises(RuleError, match="bind"):
        apply_rule(s, "MC", {"pre": pre, "post": post}, prover)
    untagged = mk(["mu Xa. Id \\/ Id >> Xa"], ["true"])
    with pytest.raises(RuleError):
        apply_rule(untagged, "MC", {"pre": pre, "post": post}, prover)


def test_ch_rvar_eq_requires_contract_pre_and_det():
    prover = pv()
    mu = program_mu(FAC_SRC)
    post = parse_pred("y = y_old * x_old! /\\ x = 1")
    entry = ContractEntry("fac", parse_pred("x >= 1"), post, mu)
    tail = parse_formula("true")
    ok = Sequent.make(
        [parse_formula("x >= 3"), parse_formula("y = 1"), f.Chop(f.RVar("Xfac"), tail)],
        [f.Chop(f.RVar("Xfac"), parse_formula("x = 1"))],
        contracts=[entry],
    )
    (p,) = apply_rule(ok, "CH-RVAR-EQ", {}, prover).premises
    assert close(p, "PRED", {}, prover)

    weak = Sequent.make(
        [parse_formula("x >= 0"), f.Chop(f.RVar("Xfac"), tail)],
        [f.Chop(f.RVar("Xfac"), parse_formula("x = 1"))],
        contracts=[entry],
    )
    with pytest.raises(RuleError, match="precondition"):
        apply_rule(weak, "CH-RVAR-EQ", {}, prover)

    no_contract = Sequent.make(
        [f.Chop(f.RVar("Xfac"), tail)], [f.Chop(f.RVar("Xfac"), tail)]
    )
    with pytest.raises(RuleError, match="contract"):
        apply_rule(no_contract, "CH-RVAR-EQ", {}, prover)

    loose = f.Mu("Xfac", parse_formula("Id \\/ Id >> Xfac"), "fac")
    bad_entry = ContractEntry("fac", parse_pred("true"), post, loose)
    nondet = Sequent.make(
        [f.Chop(f.RVar("Xfac"), tail)],
        [f.Chop(f.RVar("Xfac"), tail)],
        contracts=[bad_entry],
    )
    with pytest.raises(RuleError, match="deterministic"):
        apply_rule(nondet, "CH-RVAR-EQ", {}, prover)


def test_ch_rvar_eq_freezes_under_fresh_old_names():
    prover = pv()
    mu = program_mu(FAC_SRC)
    post = parse_pred("y = y_old * x_old! /\\ x = 1")
    entry = ContractEntry("fac", parse_pred("x >= 1"), post, mu)
    tail = parse_formula("true")
    # x_old is already taken by a fact, so the freeze must move to x_old#1
    s = Sequent.make(
        [
            parse_formula("x >= 2"),
            parse_formula("x_old = x"),
            f.Chop(f.RVar("Xfac"), tail),
        ],
        [f.Chop(f.RVar("Xfac"), parse_formula("x = 1"))],
        contracts=[entry],
    )
    (p,) = apply_rule(s, "CH-RVAR-EQ", {}, prover).premises
    text = p.pretty()
    assert "x_old#1" in text
    close(p, "PRED", {}, prover)


def test_fpi_alt_requires_the_alternative_on_the_right():
    prover = pv()
    mu = program_mu(DOWN_SRC)
    alt = parse_formula("true >> (x = 0)")
    s = Sequent.make([parse_formula("x >= 0"), mu], [alt])
    app = apply_rule(
        s, "FPI-ALT", {"invariant": parse_pred("x >= 0"), "alt": alt}, prover
    )
    p1, p2 = app.premises
    close(p1, "PRED", {}, prover)
    assert any(e.target == f.normalize(alt) for e in p2.xi)
    missing = Sequent.make([mu], [parse_formula("true")])
    with pytest.raises(RuleError, match="right"):
        apply_rule(
            missing, "FPI-ALT", {"invariant": parse_pred("true"), "alt": alt}, prover
        )


def test_fpi_alt_keeps_the_binder_of_a_contracted_fixed_point():
    prover = pv()
    mu = program_mu(FAC_SRC)
    post = parse_pred("y = y_old * x_old! /\\ x = 1")
    entry = ContractEntry("fac", parse_pred("x >= 1"), post, mu)
    alt = parse_formula("true >> (x = 1)")
    s = Sequent.make([parse_formula("x >= 1"), mu], [alt], contracts=[entry])
    app = apply_rule(
        s, "FPI-ALT", {"invariant": parse_pred("x >= 1"), "alt": alt}, prover
    )
    p1, p2 = app.premises
    close(p1, "PRED", {}, prover)
    # The freed occurrences are the calls the contract describes, so the
    # binder must not move out from under it.
    assert p2.xi[-1].var == "Xfac"
    assert any("Xfac" in f.free_rvars(g) for g in p2.gamma)

    # A free Xfac elsewhere in the sequent still forces a rename.
    taken = Sequent.make(
        [parse_formula("x >= 1"), mu],
        [f.Chop(f.RVar("Xfac"), alt), alt],
        contracts=[entry],
    )
    app2 = apply_rule(
        taken, "FPI-ALT", {"invariant": parse_pred("x >= 1"), "alt": alt}, prover
    )
    assert app2.premises[1].xi[-1].var != "Xfac"


def test_ch_fpi_full_derivation_on_factorial():
    prover = pv()
    mu = program_mu(FAC_SRC)
    pre = parse_pred("x >= 1")
    post = parse_pred("y = y_old * x_old! /\\ x = 1")
    relenv, _ = parse_tf("rel A := true")
    target_mu = parse_formula(
        "mu Xa. A >> A \\/ A >> A >> A >> A >> Xa", relenv
    )
    concl = Sequent.make(
        [parse_formula("x >= 1"), f.Chop(mu, parse_formula("true"))],
        [f.Chop(target_mu, parse_formula("true >> (x = 1)"))],
    )
    v, step = apply_rule(concl, "MC", {"pre": pre, "post": post}, prover).premises
    prove_fac_validity(v, prover)

    p1, p2, p3 = apply_rule(
        step, "CH-FPI", {"invariant": parse_pred("true")}, prover
    ).premises
    close(p1, "TRUE", {}, prover)

    base, rec = apply_rule(p2, "OR-L", {}, prover).premises
    b = apply_rule(base, "AND-L", {}, prover).premises[0]
    b = apply_rule(b, "OR-R", {}, prover).premises[0]
    b = apply_rule(b, "CH-ID", {}, prover).premises[0]
    close(b, "REL", {}, prover)
    r = apply_rule(rec, "AND-L", {}, prover).premises[0]
    r = apply_rule(r, "OR-R", {}, prover).premises[0]
    for rule in ("CH-ID", "CH-UPD", "CH-UPD", "CH-ID"):
        r = apply_rule(r, rule, {}, prover).premises[0]
    close(r, "RVAR", {}, prover)

    # the boundary premise: the callee's postcondition pays for x = 1
    t = apply_rule(p3, "ARB1", {}, prover).premises[0]
    close(t, "PRED", {}, prover)


def test_ch_fpi_needs_matching_contract():
    prover = pv()
    mu = program_mu(FAC_SRC)
    doubled = f.Mu(mu.var, f.substitute(mu.body, mu.var, f.unfold(mu)), "fac")
    entry = ContractEntry("fac", parse_pred("x >= 1"), parse_pred("x = 1"), doubled)
    s = Sequent.make(
        [parse_formula("x >= 1"), f.Chop(mu, parse_formula("true"))],
        [f.Chop(parse_formula("mu Xa. Id \\/ Id >> Xa"), parse_formula("true"))],
        contracts=[entry],
    )
    with pytest.raises(RuleError, match="different fixed point"):
        apply_rule(s, "CH-FPI", {"invariant": parse_pred("true")}, prover)


def test_ch_fpi_alt_records_the_tail_in_xi():
    prover = pv()
    mu = program_mu(DOWN_SRC)
    tail = parse_formula("x = 0")
    alt = parse_formula("true >> (x = 0)")
    s = Sequent.make([parse_formula("x >= 0"), f.Chop(mu, tail)], [alt])
    p1, p2 = apply_rule(
        s, "CH-FPI-ALT", {"invariant": parse_pred("true"), "alt": alt}, prover
    ).premises
    close(p1, "TRUE", {}, prover)
    entries = [e for e in p2.xi if e.src_tail is not None]
    assert entries and entries[0].src_tail == f.normalize(tail)
    assert any(isinstance(g, f.Chop) for g in p2.gamma)


# ---------------------------------------------------------------------------
# grammar synchronization


def test_sync_replaces_with_a_sublanguage():
    prover = pv()
    body = parse_formula("Sb[x := x + 1] \\/ Sb[x := x + 1] >> Xa")
    mu = f.Mu("Xa", body)
    dbl = parse_formula(
        "Sb[x := x + 1] >> Sb[x := x + 1]"
        " \\/ Sb[x := x + 1] >> Sb[x := x + 1] >> Xa"
    )
    s = Sequent.make([parse_formula("Id")], [mu])
    (p,) = apply_rule(s, "SYNC", {"body": dbl}, prover).premises
    assert isinstance(p.delta[0], f.Mu)
    assert p.delta[0] != mu

    # the other direction admits odd lengths the doubled body lacks
    s2 = Sequent.make([parse_formula("Id")], [f.Mu("Xa", f.normalize(dbl))])
    with pytest.raises(RuleError, match="lengths"):
        apply_rule(s2, "SYNC", {"body": body}, prover)


def test_sync_rejects_letter_mismatch_and_bad_shape():
    prover = pv()
    mu = parse_formula("mu Xa. Sb[x := x + 1] \\/ Sb[x := x + 1] >> Xa")
    s = Sequent.make([parse_formula("Id")], [mu])
    with pytest.raises(RuleError, match="different transitions"):
        apply_rule(s, "SYNC", {"body": parse_formula("Id \\/ Id >> Xa")}, prover)
    with pytest.raises(RuleError, match="fragment"):
        apply_rule(s, "SYNC", {"body": parse_formula("x = 1 /\\ Id")}, prover)


def test_sync_on_program_grammar_lengths():
    """Aligning the generic chain target with down's 3-per-level shape."""
    prover = pv()
    relenv, _ = parse_tf("rel A := true")
    # lengths {2} + 1N: every chain of two or more letters
    free = parse_formula("mu Xa. A >> A \\/ A >> Xa", relenv)
    synced_body = parse_formula("A >> A \\/ A >> A >> A >> Xa", relenv)
    s = Sequent.make([parse_formula("Id")], [free])
    (p,) = apply_rule(s, "SYNC", {"body": synced_body}, prover).premises
    got = p.delta[0]
    assert isinstance(got, f.Mu)
    # lengths of the synced body: 2, 5, 8, ... all in 2 + 1N
    from trace_seq.grammar import chain_grammar, length_set

    _, cfg = chain_grammar(got)
    ls = length_set(cfg)
    assert ls.contains(2) and ls.contains(5) and not ls.contains(3)
