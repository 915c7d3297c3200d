"""Command line behavior: subcommands, exit codes, output formats."""

import json

import pytest

from trace_seq.cli import main

DOWN_REC = "down()\nproc down { if x = 0 then skip else { x := x - 1; down() } }\n"

DOWN_PROOF = r"""
program down from "down.rec"
rel A := true
domain (x) 0..3 maxlen 8
goal { x >= 0, mu(down) |- mu Xa. A >> A \/ A >> A >> A >> Xa }
rule FPI invariant=(true) {
  rule TRUE
  rule OR-L {
    rule AND-L { rule OR-R { rule CH-ID { rule REL } } }
    rule AND-L { rule OR-R { rule CH-ID { rule CH-UPD { rule CH-ID { rule RVAR } } } } }
  }
}
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "down.rec").write_text(DOWN_REC)
    (tmp_path / "down.proof").write_text(DOWN_PROOF)
    return tmp_path


def test_parse_rec(workdir, capsys):
    assert main(["parse", str(workdir / "down.rec")]) == 0
    assert "down" in capsys.readouterr().out


def test_parse_tf(tmp_path, capsys):
    p = tmp_path / "defs.tf"
    p.write_text("rel A := x' > x\ndef Step := A >> A\n")
    assert main(["parse", str(p)]) == 0
    out = capsys.readouterr().out
    assert "rel A" in out and "def Step" in out


def test_parse_proof_reports_goal(workdir, capsys):
    assert main(["parse", str(workdir / "down.proof")]) == 0
    assert "|-" in capsys.readouterr().out


def test_parse_unknown_extension(tmp_path, capsys):
    p = tmp_path / "notes.txt"
    p.write_text("hello")
    assert main(["parse", str(p)]) == 2


def test_missing_file_is_a_usage_error(capsys):
    assert main(["stf", "nope.rec"]) == 2
    assert "usage error" in capsys.readouterr().err


def test_bad_input_exits_one(tmp_path, capsys):
    p = tmp_path / "broken.rec"
    p.write_text("proc { {")
    assert main(["stf", str(p)]) == 1


def test_stf_prints_the_formula(workdir, capsys):
    assert main(["stf", str(workdir / "down.rec")]) == 0
    out = capsys.readouterr().out
    assert "mu Xdown" in out and "Sb[x := x - 1]" in out


def test_stf_json(workdir, capsys):
    assert main(["stf", str(workdir / "down.rec"), "--json"]) == 0
    blob = json.loads(capsys.readouterr().out)
    assert "mu Xdown" in blob["formula"]


def test_prove_writes_certificate_then_check_accepts(workdir, capsys):
    assert main(["prove", str(workdir / "down.proof")]) == 0
    cert = workdir / "down.cert.json"
    assert cert.exists()
    blob = json.loads(cert.read_text())
    assert blob["ruleCount"] == 13
    assert main(["check", str(cert)]) == 0
    assert "certificate ok" in capsys.readouterr().out


def test_prove_reports_hash(workdir, capsys):
    assert main(["prove", str(workdir / "down.proof"), "--json"]) == 0
    blob = json.loads(capsys.readouterr().out)
    assert len(blob["hash"]) == 64
    assert blob["rules"] == 13


def test_prove_failure_exits_one_with_location(workdir, capsys):
    bad = workdir / "bad.proof"
    bad.write_text(DOWN_PROOF.replace("invariant=(true)", "invariant=(x != x)"))
    assert main(["prove", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "line" in err and "at goal" in err
    assert not (workdir / "bad.cert.json").exists()


def test_check_flags_premise_mismatch(workdir, capsys):
    main(["prove", str(workdir / "down.proof")])
    capsys.readouterr()
    cert = workdir / "down.cert.json"
    blob = json.loads(cert.read_text())
    node = blob["proof"]["premises"][1]
    node["premises"] = node["premises"][:1]
    bad = workdir / "corrupted.json"
    bad.write_text(json.dumps(blob))
    assert main(["check", str(bad)]) == 1
    assert "premise mismatch at" in capsys.readouterr().err


def test_emit_smt_writes_one_file_per_obligation(workdir, capsys):
    out = workdir / "smt"
    assert main(["prove", str(workdir / "down.proof"), "--emit-smt", str(out)]) == 0
    files = sorted(out.glob("*.smt2"))
    assert files
    text = files[0].read_text()
    assert text.startswith("(set-logic") and "(check-sat)" in text


def test_oracle_valid_script(workdir, capsys):
    assert main(["oracle", str(workdir / "down.proof")]) == 0
    out = capsys.readouterr().out
    assert "goal: valid" in out and "0 refuted" in out


def test_oracle_finds_countermodel(tmp_path, capsys):
    p = tmp_path / "wrong.proof"
    p.write_text("goal { true |- x = 1 }\nrule TRUE\n")
    assert main(["oracle", str(p), "--domain", "x=0..2"]) == 1
    got = capsys.readouterr()
    assert "countermodel" in got.out
    assert "checking the goal only" in got.err


def test_oracle_requires_a_domain(tmp_path, capsys):
    p = tmp_path / "nodomain.proof"
    p.write_text("goal { x = 1 |- x = 1 }\nrule CLOSE\n")
    assert main(["oracle", str(p)]) == 2


def test_sync_decision_both_directions(tmp_path, capsys):
    sub = tmp_path / "sub.tf"
    sup = tmp_path / "sup.tf"
    sub.write_text("rel A := true\ndef Short := mu Xa. A >> A\n")
    sup.write_text("rel A := true\ndef Spine := mu Xa. A >> A \\/ A >> Xa\n")
    assert main(["sync", str(sub), str(sup)]) == 0
    assert "included" in capsys.readouterr().out
    assert main(["sync", str(sup), str(sub)]) == 1
    assert "not included" in capsys.readouterr().out


def test_sync_dump_grammar_prints_canonical_sets(tmp_path, capsys):
    sub = tmp_path / "sub.tf"
    sup = tmp_path / "sup.tf"
    sub.write_text("rel A := true\ndef Two := mu Xa. A >> A\n")
    sup.write_text(
        "rel A := true\ndef Shape := mu Xa. A >> A \\/ A >> A >> A >> Xa\n"
    )
    assert main(["sync", str(sub), str(sup), "--dump-grammar"]) == 0
    out = capsys.readouterr().out
    assert "X -> a a" in out
    assert "ℕ" in out and "lengths:" in out


def test_sync_rejects_letter_mismatch(tmp_path, capsys):
    a = tmp_path / "a.tf"
    b = tmp_path / "b.tf"
    a.write_text("rel A := true\ndef P := mu Xa. A >> A\n")
    b.write_text("rel B := x' = x\ndef Q := mu Xa. B >> B \\/ B >> Xa\n")
    assert main(["sync", str(a), str(b)]) == 1
    assert "different letters" in capsys.readouterr().out


def test_sync_needs_a_mu(tmp_path, capsys):
    a = tmp_path / "a.tf"
    a.write_text("rel A := true\ndef Flat := A >> A\n")
    b = tmp_path / "b.tf"
    b.write_text("rel A := true\ndef P := mu Xa. A >> A\n")
    assert main(["sync", str(a), str(b)]) == 2


def test_no_subcommand_is_a_usage_error(capsys):
    assert main([]) == 2
