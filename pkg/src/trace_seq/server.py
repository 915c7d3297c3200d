"""Local HTTP session service for interactive proof construction.

A session holds one goal and a growing proof tree.  Every mutation is a
kernel-validated rule application (or a tactic that expands to one), so
the tree can always be replayed: the certificate endpoint re-checks it
from scratch, and the script endpoint serializes the session as a proof
script whose replay produces the same certificate.

Goal identifiers are tree paths ("root", "1.0", ...).  They are stable
under appends and become stale only when an ancestor is undone; a stale
identifier is a structured 409, never a silent misapplication.

All errors share one shape: {"code": ..., "message": ..., "goalPath": ...}.
"""

import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import formulas as f
from .certificates import (
    CheckError,
    ProofNode,
    _args_from_json,
    _args_to_json,
    _describe,
    certificate_hash,
    certificate_to_json,
    check_proof,
)
from .domain import Domain
from .oracle import refute_sequent
from .parser import ParseError
from .prover import Prover
from .rules import RuleError, applicable_rules, apply_rule
from .scripts import ProofScript, ScriptError, format_args, parse_script
from .sequents import Sequent
from .tactics import TACTICS, micro_close


@dataclass
class _Node:
    goal: Sequent
    rule: Optional[str] = None
    args: dict = field(default_factory=dict)
    children: list = field(default_factory=list)
    side: list = field(default_factory=list)

    @property
    def open(self) -> bool:
        return self.rule is None


@dataclass
class Session:
    sid: str
    script: ProofScript
    root: _Node
    prover: Prover
    log: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    revision: int = 0


def _path_id(path: tuple) -> str:
    return ".".join(str(i) for i in path) or "root"


def _parse_path(gid: str) -> Optional[tuple]:
    if gid == "root":
        return ()
    try:
        return tuple(int(p) for p in gid.split("."))
    except ValueError:
        return None


def _find(node: _Node, path: tuple) -> Optional[_Node]:
    for i in path:
        if not 0 <= i < len(node.children):
            return None
        node = node.children[i]
    return node


def _open_goals(node: _Node, path=()) -> list:
    if node.open:
        return [(path, node)]
    out = []
    for i, c in enumerate(node.children):
        out.extend(_open_goals(c, path + (i,)))
    return out


def _tree_json(node: _Node, path=()) -> dict:
    out = {
        "id": _path_id(path),
        "goal": node.goal.pretty(),
        "open": node.open,
    }
    if not node.open:
        out["rule"] = node.rule
        out["args"] = _args_to_json(node.rule, node.args)
        out["sideConditions"] = list(node.side)
        out["children"] = [
            _tree_json(c, path + (i,)) for i, c in enumerate(node.children)
        ]
    return out


def _to_proof(node: _Node) -> ProofNode:
    return ProofNode(
        node.rule, dict(node.args), tuple(_to_proof(c) for c in node.children)
    )


def _render_steps(node: _Node, indent: str = "") -> str:
    if node.open:
        return indent + "open"
    head = f"{indent}rule {node.rule}"
    argtext = format_args(node.rule, node.args)
    if argtext:
        head += " " + argtext
    if not node.children:
        return head
    inner = "\n".join(_render_steps(c, indent + "  ") for c in node.children)
    return f"{head} {{\n{inner}\n{indent}}}"


def _session_script(s: Session) -> str:
    return s.script.header.rstrip("\n") + "\n" + _render_steps(s.root) + "\n"


def _oracle_blocked(seq: Sequent) -> Optional[str]:
    if seq.xi:
        return "goal carries recursion-variable assumptions"
    if seq.contracts:
        return "goal carries procedure contracts"
    if any(f.free_rvars(phi) for phi in (*seq.gamma, *seq.delta)):
        return "goal mentions free recursion variables"
    return None


def create_app(persist: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="trace-seq sessions")
    sessions: dict[str, Session] = {}

    def err(status: int, code: str, message: str, goal_path: Optional[str] = None):
        return JSONResponse(
            status_code=status,
            content={"code": code, "message": message, "goalPath": goal_path},
        )

    def save(s: Session) -> None:
        s.revision += 1
        if persist is not None:
            persist.mkdir(parents=True, exist_ok=True)
            (persist / f"{s.sid}.proof").write_text(_session_script(s))

    def goals_payload(s: Session) -> dict:
        opens = _open_goals(s.root)
        return {
            "sessionId": s.sid,
            "revision": s.revision,
            "closed": not opens,
            "goals": [
                {"id": _path_id(p), "text": n.goal.pretty()} for p, n in opens
            ],
        }

    async def body_of(request: Request) -> Optional[dict]:
        try:
            data = await request.json()
        except Exception:
            return None
        return data if isinstance(data, dict) else None

    def get_session(sid: str) -> Optional[Session]:
        return sessions.get(sid)

    def locate(s: Session, gid: str):
        path = _parse_path(gid)
        if path is None:
            return None, err(404, "no-goal", f"malformed goal id {gid!r}", gid)
        node = _find(s.root, path)
        if node is None:
            return None, err(
                409, "stale-goal", "no such node; the tree has changed", gid
            )
        return (path, node), None

    def apply_at(s: Session, node: _Node, rule: str, args: dict) -> None:
        mark = len(s.prover.log)
        app_ = apply_rule(node.goal, rule, args, s.prover)
        node.rule, node.args = rule, dict(args)
        node.side = [
            f"{'ok' if ob.proved else 'FAILED'}: {_describe(ob)}"
            for ob in s.prover.log[mark:]
        ] + list(app_.notes)
        node.children = [_Node(goal=p) for p in app_.premises]

    def run_tactic(s: Session, node: _Node, name: str, fuel: int) -> Optional[str]:
        """Returns an error message, or None after grafting the expansion."""
        scratch = Prover(axioms=s.script.axioms)
        if name == "micro":
            done = micro_close(node.goal, scratch)
            if done is None:
                return "no axiom closes this goal"
            expansion = done
        else:
            out = TACTICS[name](node.goal, scratch, fuel=fuel)
            if not out.closed:
                return f"tactic left {len(out.open_goals)} goals open"
            expansion = out.node

        def graft(target: _Node, pn: ProofNode) -> None:
            apply_at(s, target, pn.rule, pn.args)
            for child, sub in zip(target.children, pn.premises):
                graft(child, sub)

        graft(node, expansion)
        return None

    def replay(s: Session) -> None:
        """Rebuild the tree from the log; every entry succeeded before."""
        s.root = _Node(goal=s.script.goal)
        s.prover = Prover(axioms=s.script.axioms)
        for entry in s.log:
            kind, path, name, payload = entry
            node = _find(s.root, path)
            if kind == "rule":
                apply_at(s, node, name, payload)
            else:
                run_tactic(s, node, name, payload)

    # ---- endpoints

    @app.post("/session")
    async def create_session(request: Request):
        data = await body_of(request)
        if data is None or "script" not in data:
            return err(400, "bad-request", "body must be JSON with a 'script' key")
        try:
            script = parse_script(data["script"], require_steps=False)
        except (ScriptError, ParseError) as e:
            return err(400, "parse-error", str(e))
        if script.steps:
            return err(
                400, "bad-request",
                "session scripts carry declarations and a goal; proof steps "
                "are applied through the API",
            )
        sid = secrets.token_hex(8)
        s = Session(
            sid=sid,
            script=script,
            root=_Node(goal=script.goal),
            prover=Prover(axioms=script.axioms),
        )
        sessions[sid] = s
        save(s)
        return {"sessionId": sid, "goal": script.goal.pretty(), **goals_payload(s)}

    @app.get("/session/{sid}/goals")
    async def list_goals(sid: str):
        s = get_session(sid)
        if s is None:
            return err(404, "no-session", f"unknown session {sid!r}")
        return goals_payload(s)

    @app.get("/session/{sid}/tree")
    async def tree(sid: str):
        s = get_session(sid)
        if s is None:
            return err(404, "no-session", f"unknown session {sid!r}")
        return {"revision": s.revision, "tree": _tree_json(s.root)}

    @app.get("/session/{sid}/goal/{gid}/rules")
    async def rules_for(sid: str, gid: str):
        s = get_session(sid)
        if s is None:
            return err(404, "no-session", f"unknown session {sid!r}")
        found, failure = locate(s, gid)
        if failure is not None:
            return failure
        _, node = found
        if not node.open:
            return err(409, "closed-goal", "this goal is already closed", gid)
        listing = applicable_rules(node.goal)
        return {
            "goal": node.goal.pretty(),
            "rules": [
                {
                    "rule": name,
                    "candidates": list(cands),
                    "params": [
                        {"name": arg, "kind": kind, "required": req}
                        for arg, kind, req in params
                    ],
                }
                for name, cands, params in listing
            ],
        }

    @app.post("/session/{sid}/goal/{gid}/apply")
    async def apply_endpoint(sid: str, gid: str, request: Request):
        s = get_session(sid)
        if s is None:
            return err(404, "no-session", f"unknown session {sid!r}")
        data = await body_of(request)
        if data is None or "rule" not in data:
            return err(400, "bad-request", "body must be JSON with a 'rule' key", gid)
        with s.lock:
            found, failure = locate(s, gid)
            if failure is not None:
                return failure
            path, node = found
            if not node.open:
                return err(409, "closed-goal", "this goal is already closed", gid)
            rule = data["rule"]
            try:
                args = _args_from_json(rule, data.get("args", {}), s.script.relenv)
            except (ParseError, ValueError, TypeError) as e:
                return err(400, "bad-args", str(e), gid)
            try:
                apply_at(s, node, rule, args)
            except RuleError as e:
                return err(400, "rule-failed", str(e), gid)
            s.log.append(("rule", path, rule, args))
            save(s)
            return {
                "applied": rule,
                "premises": [
                    {"id": _path_id(path + (i,)), "text": c.goal.pretty()}
                    for i, c in enumerate(node.children)
                ],
                "sideConditions": list(node.side),
                **goals_payload(s),
            }

    @app.post("/session/{sid}/goal/{gid}/tactic")
    async def tactic_endpoint(sid: str, gid: str, request: Request):
        s = get_session(sid)
        if s is None:
            return err(404, "no-session", f"unknown session {sid!r}")
        data = await body_of(request)
        if data is None or "name" not in data:
            return err(400, "bad-request", "body must be JSON with a 'name' key", gid)
        name = data["name"]
        if name != "micro" and name not in TACTICS:
            return err(400, "bad-request", f"unknown tactic {name!r}", gid)
        fuel = int(data.get("fuel", 64))
        with s.lock:
            found, failure = locate(s, gid)
            if failure is not None:
                return failure
            path, node = found
            if not node.open:
                return err(409, "closed-goal", "this goal is already closed", gid)
            msg = run_tactic(s, node, name, fuel)
            if msg is not None:
                return err(400, "tactic-failed", msg, gid)
            s.log.append(("tactic", path, name, fuel))
            save(s)
            return {"applied": f"auto {name}", **goals_payload(s)}

    @app.post("/session/{sid}/undo")
    async def undo(sid: str):
        s = get_session(sid)
        if s is None:
            return err(404, "no-session", f"unknown session {sid!r}")
        with s.lock:
            if not s.log:
                return err(409, "nothing-to-undo", "no steps have been applied")
            s.log.pop()
            replay(s)
            save(s)
            return goals_payload(s)

    @app.get("/session/{sid}/certificate")
    async def certificate(sid: str):
        s = get_session(sid)
        if s is None:
            return err(404, "no-session", f"unknown session {sid!r}")
        opens = _open_goals(s.root)
        if opens:
            return err(409, "open", f"{len(opens)} goals open")
        root = _to_proof(s.root)
        root = ProofNode(root.rule, root.args, root.premises, goal=s.script.goal)
        try:
            cert = check_proof(root, Prover(axioms=s.script.axioms))
        except CheckError as e:
            return err(500, "check-failed", str(e))
        blob = certificate_to_json(cert)
        blob["hash"] = certificate_hash(cert)
        return blob

    @app.get("/session/{sid}/script")
    async def script_text(sid: str):
        s = get_session(sid)
        if s is None:
            return err(404, "no-session", f"unknown session {sid!r}")
        return PlainTextResponse(_session_script(s))

    @app.post("/session/{sid}/oracle")
    async def oracle(sid: str, request: Request):
        s = get_session(sid)
        if s is None:
            return err(404, "no-session", f"unknown session {sid!r}")
        data = await body_of(request) or {}
        gid = data.get("goal", "root")
        found, failure = locate(s, gid)
        if failure is not None:
            return failure
        _, node = found
        domain = s.script.domain
        if "domain" in data:
            d = data["domain"]
            try:
                domain = Domain(tuple(d["names"]), int(d["lo"]), int(d["hi"]))
            except (KeyError, TypeError, ValueError) as e:
                return err(400, "bad-request", f"bad domain: {e}", gid)
        if domain is None:
            return err(400, "no-domain", "no domain declared or supplied", gid)
        blocked = _oracle_blocked(node.goal)
        if blocked is not None:
            return err(400, "uncheckable", blocked, gid)
        maxlen = int(data.get("maxlen", s.script.maxlen))
        cm = refute_sequent(
            list(node.goal.gamma), list(node.goal.delta), domain, maxlen=maxlen
        )
        if cm is None:
            return {"goal": gid, "verdict": "ValidOnDomain"}
        return {
            "goal": gid,
            "verdict": "CounterExample",
            "trace": [domain.to_dict(state) for state in cm.trace],
        }

    return app
