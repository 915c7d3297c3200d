"""Command line front end.

Subcommands:

* ``parse FILE`` validates a ``.rec``, ``.tf``, or ``.proof`` file and
  echoes what it declares.
* ``stf FILE.rec`` prints the strongest trace formula of a program.
* ``prove FILE.proof`` runs a proof script and writes the certificate.
* ``check CERT.json`` replays a certificate through the kernel.
* ``oracle FILE.proof`` tests the goal, and every node of the proof,
  for validity on a finite domain.
* ``sync SUB.tf SUP.tf`` decides chain-length inclusion between the
  first fixed point defined in each file.
* ``serve`` starts the local HTTP session service.

Exit codes: 0 when the operation succeeds and answers yes; 1 when it
runs but answers no (failed proof, corrupt certificate, countermodel,
refuted inclusion) or when input does not parse; 2 for usage errors.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from . import formulas as f
from .certificates import (
    CheckError,
    certificate_from_json,
    certificate_hash,
    certificate_to_json,
    check_proof,
)
from .domain import Domain
from .grammar import GrammarError, chain_grammar, length_set
from .oracle import refute_sequent
from .parser import ParseError, parse_program, parse_tf
from .printer import pretty_bool, pretty_formula
from .programs import stf
from .prover import Prover, to_smt
from .rules import apply_rule
from .scripts import ScriptError, StepFailure, parse_script, run_script
from .sequents import Sequent


class _Usage(Exception):
    pass


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as e:
        raise _Usage(str(e))


def _emit(ns, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2) if ns.json else text)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_parse(ns) -> int:
    path = Path(ns.file)
    src = _read(path)
    if path.suffix == ".rec":
        prog = parse_program(src)
        procs = sorted(prog.procs)
        _emit(
            ns,
            {"kind": "program", "procedures": procs},
            f"program with procedures: {', '.join(procs)}",
        )
    elif path.suffix == ".tf":
        relenv, defs = parse_tf(src)
        lines = [f"rel {n} := {pretty_bool(r.body)}" for n, r in relenv.rels.items()]
        lines += [f"def {n} := {pretty_formula(phi)}" for n, phi in defs.items()]
        _emit(
            ns,
            {
                "kind": "definitions",
                "rels": {n: pretty_bool(r.body) for n, r in relenv.rels.items()},
                "defs": {n: pretty_formula(phi) for n, phi in defs.items()},
            },
            "\n".join(lines) if lines else "empty definition file",
        )
    elif path.suffix == ".proof":
        script = parse_script(src, base=path.parent)
        _emit(
            ns,
            {
                "kind": "script",
                "goal": script.goal.pretty(),
                "steps": sum(1 for _ in _walk_steps(script.steps)),
            },
            f"goal: {script.goal.pretty()}",
        )
    else:
        raise _Usage(f"cannot parse {path.name}: expected .rec, .tf, or .proof")
    return 0


def _walk_steps(steps):
    for s in steps:
        yield s
        yield from _walk_steps(s.children)


def _cmd_stf(ns) -> int:
    path = Path(ns.file)
    phi = stf(parse_program(_read(path)))
    _emit(ns, {"formula": pretty_formula(phi)}, pretty_formula(phi))
    return 0


def _cmd_prove(ns) -> int:
    path = Path(ns.file)
    got = run_script(_read(path), base=path.parent)
    if isinstance(got, StepFailure):
        print(got.pretty(), file=sys.stderr)
        return 1
    blob = certificate_to_json(got)
    out = Path(ns.out) if ns.out else path.with_suffix(".cert.json")
    out.write_text(json.dumps(blob, indent=2) + "\n")
    if ns.emit_smt:
        _write_smt(got, Path(ns.emit_smt))
    digest = certificate_hash(got)
    _emit(
        ns,
        {
            "certificate": str(out),
            "rules": got.rule_count,
            "axioms": list(got.axioms_used),
            "hash": digest,
        },
        f"closed: {got.rule_count} rules, "
        f"{len(got.side_conditions)} side conditions, "
        f"axioms: {', '.join(got.axioms_used) or 'none'}\n"
        f"certificate: {out}\nhash: {digest}",
    )
    return 0


def _write_smt(cert, outdir: Path) -> None:
    """One SMT-LIB file per side-condition obligation, replayed fresh."""
    outdir.mkdir(parents=True, exist_ok=True)
    prover = Prover(axioms=cert.axiom_defs)
    check_proof(cert.proof, prover)
    for i, ob in enumerate(prover.log):
        name = outdir / f"{i:03d}_{ob.kind.replace(' ', '_')}.smt2"
        name.write_text(to_smt(ob.hyps, ob.goal))


def _cmd_check(ns) -> int:
    path = Path(ns.file)
    try:
        blob = json.loads(_read(path))
    except json.JSONDecodeError as e:
        print(f"{path.name}: not JSON: {e}", file=sys.stderr)
        return 1
    try:
        cert = certificate_from_json(blob)
    except (CheckError, KeyError, ParseError, ValueError) as e:
        print(str(e), file=sys.stderr)
        return 1
    _emit(
        ns,
        {
            "ok": True,
            "rules": cert.rule_count,
            "axioms": list(cert.axioms_used),
            "hash": certificate_hash(cert),
        },
        f"certificate ok: {cert.rule_count} rules, "
        f"axioms: {', '.join(cert.axioms_used) or 'none'}",
    )
    return 0


def _parse_domain(spec: str) -> Domain:
    try:
        names, rng = spec.split("=", 1)
        lo, hi = rng.split("..", 1)
        return Domain(
            tuple(n.strip() for n in names.split(",") if n.strip()),
            int(lo),
            int(hi),
        )
    except ValueError as e:
        raise _Usage(f"bad domain {spec!r} (want x,y=0..3): {e}")


def _node_sequents(cert) -> list[tuple[str, Sequent]]:
    """Replay the tree, collecting the sequent at each node."""
    prover = Prover(axioms=cert.axiom_defs)
    out: list[tuple[str, Sequent]] = []

    def walk(n, goal, path):
        out.append(("/".join(str(i) for i in path) or "root", goal))
        app = apply_rule(goal, n.rule, n.args, prover)
        for i, (child, prem) in enumerate(zip(n.premises, app.premises)):
            walk(child, prem, path + (i,))

    walk(cert.proof, cert.proof.goal, ())
    return out


def _oracle_checkable(seq: Sequent) -> bool:
    if seq.xi or seq.contracts:
        return False
    return not any(f.free_rvars(phi) for phi in (*seq.gamma, *seq.delta))


def _cmd_oracle(ns) -> int:
    path = Path(ns.file)
    script = parse_script(_read(path), base=path.parent)
    domain = _parse_domain(ns.domain) if ns.domain else script.domain
    if domain is None:
        raise _Usage("no domain: give --domain or declare one in the script")
    maxlen = ns.maxlen or script.maxlen

    checks: list[tuple[str, Sequent]] = [("goal", script.goal)]
    got = run_script(script, base=path.parent)
    if isinstance(got, StepFailure):
        print(f"note: script does not close ({got.rule} at line {got.line}), "
              "checking the goal only", file=sys.stderr)
    else:
        checks = _node_sequents(got)
        checks[0] = ("goal", checks[0][1])

    bad = 0
    skipped = 0
    results = []
    for label, seq in checks:
        if not _oracle_checkable(seq):
            skipped += 1
            continue
        cm = refute_sequent(list(seq.gamma), list(seq.delta), domain, maxlen=maxlen)
        if cm is None:
            results.append((label, "valid", None))
        else:
            bad += 1
            results.append((label, "countermodel", cm.pretty(domain)))
    if ns.json:
        print(json.dumps(
            {
                "domain": {"names": list(domain.names), "lo": domain.lo, "hi": domain.hi},
                "maxlen": maxlen,
                "skipped": skipped,
                "results": [
                    {"node": lbl, "verdict": v, "trace": w} for lbl, v, w in results
                ],
            },
            indent=2,
        ))
    else:
        for label, verdict, witness in results:
            line = f"{label}: {verdict}"
            if witness:
                line += f"\n  {witness}"
            print(line)
        note = f"{len(results) - bad} valid, {bad} refuted"
        if skipped:
            note += f", {skipped} skipped (free recursion variables)"
        print(note)
    return 1 if bad else 0


def _first_mu(path: Path) -> tuple[str, f.Mu, f.RelEnv]:
    relenv, defs = parse_tf(_read(path))
    for name, phi in defs.items():
        if isinstance(phi, f.Mu):
            return name, phi, relenv
    raise _Usage(f"{path.name} defines no fixed-point formula")


def _cmd_sync(ns) -> int:
    sub_name, sub_mu, _ = _first_mu(Path(ns.sub))
    sup_name, sup_mu, _ = _first_mu(Path(ns.sup))
    try:
        sub_letter, sub_cfg = chain_grammar(sub_mu)
        sup_letter, sup_cfg = chain_grammar(sup_mu)
    except GrammarError as e:
        print(f"out of fragment: {e}", file=sys.stderr)
        return 1
    sub_set, sup_set = length_set(sub_cfg), length_set(sup_cfg)
    same_letter = sub_letter == sup_letter or sub_letter is None or sup_letter is None
    included = same_letter and sup_set.includes(sub_set)

    if ns.dump_grammar:
        for name, cfg, ls in ((sub_name, sub_cfg, sub_set), (sup_name, sup_cfg, sup_set)):
            print(f"{name}:")
            for k, m in cfg.productions:
                rhs = " ".join(["a"] * k + ["X"] * m) or "eps"
                print(f"  X -> {rhs}")
            print(f"  lengths: {ls.pretty()}")
    verdict = "included" if included else (
        "different letters" if not same_letter else "not included"
    )
    _emit(
        ns,
        {
            "sub": sub_name,
            "sup": sup_name,
            "included": included,
            "subLengths": sub_set.pretty(),
            "supLengths": sup_set.pretty(),
        },
        f"{sub_name} into {sup_name}: {verdict}",
    )
    return 0 if included else 1


def _cmd_serve(ns) -> int:
    from .server import create_app

    try:
        import uvicorn
    except ImportError:
        raise _Usage("serve needs uvicorn installed")
    app = create_app(persist=Path(ns.persist) if ns.persist else None)
    uvicorn.run(app, host=ns.host, port=ns.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _build() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="trace-seq",
        description="proof assistant for trace inclusion of recursive programs",
    )
    sub = top.add_subparsers(dest="cmd", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(fn=fn)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    p = add("parse", _cmd_parse, "validate a .rec, .tf, or .proof file")
    p.add_argument("file")

    p = add("stf", _cmd_stf, "print a program's strongest trace formula")
    p.add_argument("file")

    p = add("prove", _cmd_prove, "run a proof script and write its certificate")
    p.add_argument("file")
    p.add_argument("-o", "--out", help="certificate path (default FILE.cert.json)")
    p.add_argument("--emit-smt", metavar="DIR", help="write side conditions as SMT-LIB")

    p = add("check", _cmd_check, "replay a certificate through the kernel")
    p.add_argument("file")

    p = add("oracle", _cmd_oracle, "finite-domain validity of a script's sequents")
    p.add_argument("file")
    p.add_argument("--domain", help="override the script's domain, e.g. x,y=0..3")
    p.add_argument("--maxlen", type=int, help="trace length bound")

    p = add("sync", _cmd_sync, "decide chain-length inclusion of two fixed points")
    p.add_argument("sub", help=".tf whose first def is the candidate")
    p.add_argument("sup", help=".tf whose first def is the target")
    p.add_argument("--dump-grammar", action="store_true",
                   help="print productions and length sets")

    p = add("serve", _cmd_serve, "start the local HTTP session service")
    p.add_argument("--port", type=int, default=8713)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--persist", metavar="DIR", help="snapshot sessions as scripts")

    return top


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return ns.fn(ns)
    except _Usage as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (ParseError, ScriptError, CheckError) as e:
        print(str(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
