"""Proof scripts: a text format for replayable derivations.

A script declares its vocabulary (programs, named relations, formula
abbreviations, axioms, contracts, an optional test domain), states one
goal sequent, and then walks the proof as a tree of rule applications.
Tactic steps are allowed but expand to ordinary rule nodes, so the
resulting certificate never depends on the automation that found it.

    program fac from "fac.rec"
    rel A := true
    goal { x >= 1, stf(fac) |- true >> (x = 1) }
    rule MC pre=(x >= 1) post=(x = 1) {
      ...
      auto symbolic_exec fuel=32
    }

Formula positions understand three script-level abbreviations, spliced
before parsing: ``stf(name)`` for a program's trace formula, ``mu(name)``
for the fixed point of its main call, and any name bound by ``let`` or
loaded from a ``.tf`` file.

A step may also be the word ``open``, which deliberately leaves its goal
unproved.  Session snapshots use it to serialize partial proofs; running
such a script reports the open goal as the failure point.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from . import formulas as f
from . import terms as t
from .certificates import Certificate, ProofNode, check_proof
from .domain import Domain
from .parser import ParseError, parse_formula, parse_pred, parse_program, parse_tf
from .printer import pretty_bool, pretty_formula
from .programs import RecProgram, stf
from .prover import Prover
from .rules import RULE_PARAMS, RuleError, apply_rule
from .sequents import ContractEntry, Sequent, XiEntry
from .tactics import TACTICS, micro_close


class ScriptError(Exception):
    def __init__(self, msg: str, line: int = 0):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


@dataclass
class Step:
    line: int
    kind: str                     # "rule" or "auto"
    name: str
    args: dict = field(default_factory=dict)
    children: list = field(default_factory=list)
    fuel: int = 64


@dataclass
class ProofScript:
    goal: Sequent
    steps: list
    relenv: f.RelEnv
    programs: dict
    defs: dict
    axioms: tuple = ()
    domain: Optional[Domain] = None
    maxlen: int = 8
    header: str = ""


@dataclass
class StepFailure:
    line: int
    rule: str
    message: str
    goal: Sequent

    def pretty(self) -> str:
        return f"line {self.line}: {self.rule}: {self.message}\n  at goal {self.goal.pretty()}"


# ---------------------------------------------------------------------------
# lexing support


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self) -> None:
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == "#":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self.pos += 1
            elif c.isspace():
                self.pos += 1
            else:
                return

    def line(self) -> int:
        return self.text.count("\n", 0, self.pos) + 1

    def done(self) -> bool:
        self._skip_ws()
        return self.pos >= len(self.text)

    def peek_word(self) -> str:
        self._skip_ws()
        m = re.match(r"[A-Za-z_][\w.-]*", self.text[self.pos:])
        return m.group(0) if m else ""

    def word(self) -> str:
        w = self.peek_word()
        if not w:
            raise ScriptError(f"expected a name at {self.text[self.pos:self.pos+20]!r}", self.line())
        self.pos += len(w)
        return w

    def peek_char(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, lit: str) -> None:
        self._skip_ws()
        if not self.text.startswith(lit, self.pos):
            raise ScriptError(f"expected {lit!r}", self.line())
        self.pos += len(lit)

    def try_take(self, lit: str) -> bool:
        self._skip_ws()
        if self.text.startswith(lit, self.pos):
            self.pos += len(lit)
            return True
        return False

    def balanced(self, open_c: str, close_c: str) -> str:
        """Consume a balanced group and return its inside text."""
        self.expect(open_c)
        depth = 1
        start = self.pos
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == open_c:
                depth += 1
            elif c == close_c:
                depth -= 1
                if depth == 0:
                    inner = self.text[start:self.pos]
                    self.pos += 1
                    return inner
            self.pos += 1
        raise ScriptError(f"unbalanced {open_c!r} group", self.line())

    def quoted(self) -> str:
        self.expect('"')
        end = self.text.find('"', self.pos)
        if end < 0:
            raise ScriptError("unterminated string", self.line())
        s = self.text[self.pos:end]
        self.pos = end + 1
        return s

    def int_(self) -> int:
        self._skip_ws()
        m = re.match(r"-?\d+", self.text[self.pos:])
        if not m:
            raise ScriptError("expected an integer", self.line())
        self.pos += len(m.group(0))
        return int(m.group(0))


# ---------------------------------------------------------------------------
# script parsing


def _find_proc_mu(phi: f.TraceFormula, proc: str) -> Optional[f.Mu]:
    if isinstance(phi, f.Mu):
        if phi.proc == proc:
            return phi
        return _find_proc_mu(phi.body, proc)
    if isinstance(phi, (f.And, f.Or, f.Chop)):
        return _find_proc_mu(phi.left, proc) or _find_proc_mu(phi.right, proc)
    return None


def _main_mu(phi: f.TraceFormula) -> f.TraceFormula:
    while isinstance(phi, f.Chop):
        phi = phi.right
    return phi


class ScriptParser:
    def __init__(self, text: str, base: Optional[Path] = None):
        self.cur = _Cursor(text)
        self.base = base or Path(".")
        self.relenv = f.RelEnv()
        self.programs: dict[str, RecProgram] = {}
        self.defs: dict[str, f.TraceFormula] = {}
        self.axioms: list[tuple[str, t.BoolExpr]] = []
        self.contracts: list[ContractEntry] = []
        self.domain: Optional[Domain] = None
        self.maxlen = 8
        self.goal: Optional[Sequent] = None

    def parse(self, require_steps: bool = True) -> ProofScript:
        while not self.cur.done():
            word = self.cur.peek_word()
            if word in ("rule", "auto", "open"):
                break
            handler = getattr(self, f"_decl_{word.replace('-', '_')}", None)
            if handler is None:
                raise ScriptError(f"unknown declaration {word!r}", self.cur.line())
            self.cur.word()
            handler()
        if self.goal is None:
            raise ScriptError("script has no goal")
        header = self.cur.text[: self.cur.pos]
        steps = []
        while not self.cur.done():
            steps.append(self._step())
        if not steps and require_steps:
            raise ScriptError("script has no proof steps")
        return ProofScript(
            goal=self.goal,
            steps=steps,
            relenv=self.relenv,
            programs=dict(self.programs),
            defs=dict(self.defs),
            axioms=tuple(self.axioms),
            domain=self.domain,
            maxlen=self.maxlen,
            header=header.strip() + "\n",
        )

    # ---- declarations

    def _decl_program(self) -> None:
        line = self.cur.line()
        name = self.cur.word()
        if self.cur.try_take("from"):
            path = self.base / self.cur.quoted()
            try:
                src = path.read_text()
            except OSError as e:
                raise ScriptError(f"cannot read {path}: {e}", line)
        else:
            src = self.cur.balanced("{", "}")
        try:
            self.programs[name] = parse_program(src)
        except ParseError as e:
            raise ScriptError(f"program {name}: {e}", line)

    def _decl_use(self) -> None:
        line = self.cur.line()
        path = self.base / self.cur.quoted()
        try:
            src = path.read_text()
        except OSError as e:
            raise ScriptError(f"cannot read {path}: {e}", line)
        try:
            self.relenv, defs = parse_tf(src, self.relenv)
        except ParseError as e:
            raise ScriptError(f"{path.name}: {e}", line)
        self.defs.update(defs)

    def _decl_rel(self) -> None:
        line = self.cur.line()
        name = self.cur.word()
        self.cur.expect(":=")
        body = self.cur.balanced("(", ")") if self.cur.peek_char() == "(" else self._rest_of_line()
        try:
            self.relenv.declare(name, parse_pred(body, allow_primes=True))
        except (ParseError, ValueError) as e:
            raise ScriptError(f"rel {name}: {e}", line)

    def _decl_let(self) -> None:
        line = self.cur.line()
        name = self.cur.word()
        self.cur.expect(":=")
        text = self.cur.balanced("(", ")") if self.cur.peek_char() == "(" else self._rest_of_line()
        try:
            self.defs[name] = f.normalize(self._formula(text, line))
        except ParseError as e:
            raise ScriptError(f"let {name}: {e}", line)

    def _decl_axiom(self) -> None:
        line = self.cur.line()
        label = self.cur.word()
        self.cur.expect(":")
        text = self.cur.balanced("(", ")") if self.cur.peek_char() == "(" else self._rest_of_line()
        try:
            self.axioms.append((label, parse_pred(text)))
        except ParseError as e:
            raise ScriptError(f"axiom {label}: {e}", line)

    def _decl_contract(self) -> None:
        line = self.cur.line()
        proc = self.cur.word()
        self.cur.expect(":")
        try:
            pre = parse_pred(self.cur.balanced("(", ")"))
            self.cur.expect("=>")
            post = parse_pred(self.cur.balanced("(", ")"))
        except ParseError as e:
            raise ScriptError(f"contract {proc}: {e}", line)
        mu = None
        for prog in self.programs.values():
            mu = _find_proc_mu(stf(prog), proc)
            if mu is not None:
                break
        if mu is None:
            raise ScriptError(f"contract for unknown procedure {proc!r}", line)
        self.contracts.append(ContractEntry(proc, pre, post, mu))

    def _decl_domain(self) -> None:
        line = self.cur.line()
        names = tuple(n.strip() for n in self.cur.balanced("(", ")").split(",") if n.strip())
        lo = self.cur.int_()
        self.cur.expect("..")
        hi = self.cur.int_()
        if self.cur.try_take("maxlen"):
            self.maxlen = self.cur.int_()
        if not names or lo > hi:
            raise ScriptError("domain needs variables and a nonempty range", line)
        self.domain = Domain(names, lo, hi)

    def _decl_goal(self) -> None:
        line = self.cur.line()
        text = self.cur.balanced("{", "}")
        self.goal = self._sequent(text, line)

    # ---- formula plumbing

    def _rest_of_line(self) -> str:
        cur = self.cur
        cur._skip_ws()
        end = cur.text.find("\n", cur.pos)
        if end < 0:
            end = len(cur.text)
        out = cur.text[cur.pos:end]
        cur.pos = end
        if not out.strip():
            raise ScriptError("missing text", cur.line())
        return out.strip()

    def _expand(self, text: str) -> str:
        def prog_form(m):
            kind, name = m.group(1), m.group(2)
            if name not in self.programs:
                raise ScriptError(f"unknown program {name!r} in {kind}(...)")
            phi = stf(self.programs[name])
            if kind == "mu":
                phi = _main_mu(phi)
            return "(" + pretty_formula(phi) + ")"

        text = re.sub(r"\b(stf|mu)\(\s*([A-Za-z_]\w*)\s*\)", prog_form, text)
        if self.defs:
            pattern = r"\b(" + "|".join(re.escape(n) for n in self.defs) + r")\b"
            text = re.sub(
                pattern, lambda m: "(" + pretty_formula(self.defs[m.group(1)]) + ")", text
            )
        return text

    def _formula(self, text: str, line: int = 0) -> f.TraceFormula:
        try:
            return parse_formula(self._expand(text), self.relenv)
        except ParseError as e:
            raise ScriptError(f"in formula {text.strip()!r}: {e}", line)

    def _split_top(self, text: str, sep: str) -> list[str]:
        parts, depth, start = [], 0, 0
        for i, c in enumerate(text):
            if c in "([{":
                depth += 1
            elif c in ")]}":
                depth -= 1
            elif c == sep and depth == 0:
                parts.append(text[start:i])
                start = i + 1
        parts.append(text[start:])
        return [p for p in (q.strip() for q in parts) if p]

    def _xi_entry(self, text: str, line: int) -> XiEntry:
        m = re.match(r"\s*(\w+)\s*\|(.*)$", text)
        if not m:
            raise ScriptError(f"bad assumption entry {text!r}", line)
        var, rest = m.group(1), m.group(2)
        halves = self._split_arrow(rest)
        if halves is None:
            raise ScriptError(f"assumption entry {text!r} needs '->'", line)
        guard_text, target_text = halves
        tail = None
        tail_parts = self._split_top(target_text, "/")
        if len(tail_parts) == 2:
            target_text, tail_text = tail_parts
            tail = f.normalize(self._formula(tail_text, line))
        try:
            guard = parse_pred(guard_text)
        except ParseError as e:
            raise ScriptError(f"assumption guard {guard_text.strip()!r}: {e}", line)
        return XiEntry(var, guard, f.normalize(self._formula(target_text, line)), tail)

    @staticmethod
    def _split_arrow(text: str) -> Optional[tuple[str, str]]:
        depth = 0
        for i in range(len(text) - 1):
            c = text[i]
            if c in "([{":
                depth += 1
            elif c in ")]}":
                depth -= 1
            elif depth == 0 and text[i] == "-" and text[i + 1] == ">":
                return text[:i], text[i + 2:]
        return None

    def _sequent(self, text: str, line: int) -> Sequent:
        xi = []
        if "::" in text:
            xi_text, text = text.split("::", 1)
            chunk = _Cursor(xi_text)
            while not chunk.done():
                xi.append(self._xi_entry(chunk.balanced("(", ")"), line))
                chunk.try_take(",")
        if "|-" not in text:
            raise ScriptError("goal needs '|-'", line)
        left, right = text.split("|-", 1)
        gamma = [self._formula(s, line) for s in self._split_top(left, ",")]
        delta = [self._formula(s, line) for s in self._split_top(right, ",")]
        return Sequent.make(gamma, delta, xi, self.contracts)

    # ---- steps

    def _step(self) -> Step:
        line = self.cur.line()
        kind = self.cur.word()
        if kind == "open":
            return Step(line, "open", "open")
        if kind == "auto":
            name = self.cur.word()
            if name != "micro" and name not in TACTICS:
                raise ScriptError(f"unknown tactic {name!r}", line)
            step = Step(line, "auto", name)
            if self.cur.try_take("fuel"):
                self.cur.expect("=")
                step.fuel = self.cur.int_()
            return step
        if kind != "rule":
            raise ScriptError(f"expected 'rule' or 'auto', found {kind!r}", line)
        name = self.cur.word()
        if name not in RULE_PARAMS:
            raise ScriptError(f"unknown rule {name!r}", line)
        kinds = {arg: k for arg, k, _ in RULE_PARAMS[name]}
        args: dict = {}
        while True:
            word = self.cur.peek_word()
            if word in kinds and self._ahead_is_assignment(word):
                self.cur.word()
                self.cur.expect("=")
                args[word] = self._arg_value(kinds[word], line)
            else:
                break
        step = Step(line, "rule", name, args)
        if self.cur.peek_char() == "{":
            self.cur.expect("{")
            while not self.cur.try_take("}"):
                if self.cur.done():
                    raise ScriptError("unterminated sub-proof block", line)
                step.children.append(self._step())
        return step

    def _ahead_is_assignment(self, word: str) -> bool:
        save = self.cur.pos
        try:
            self.cur.word()
            ok = self.cur.try_take("=")
        finally:
            self.cur.pos = save
        return ok

    def _arg_value(self, kind: str, line: int):
        if kind == "pred":
            return parse_pred(self.cur.balanced("(", ")"))
        if kind == "formula":
            return self._formula(self.cur.balanced("(", ")"), line)
        if kind == "int":
            return self.cur.int_()
        if kind == "index":
            return self.cur.int_()
        if kind == "indices":
            inner = self.cur.balanced("[", "]")
            return [int(s) for s in inner.split(",") if s.strip()]
        raise ScriptError(f"unhandled argument kind {kind}", line)


def parse_script(
    text: str,
    base: Union[str, Path, None] = None,
    require_steps: bool = True,
) -> ProofScript:
    return ScriptParser(text, Path(base) if base else None).parse(require_steps)


def format_args(rule: str, args: dict) -> str:
    """Render rule arguments back into script syntax, kernel order."""
    kinds = {arg: kind for arg, kind, _ in RULE_PARAMS.get(rule, ())}
    bits = []
    for key in kinds:
        if key not in args or args[key] is None:
            continue
        val, kind = args[key], kinds[key]
        if kind == "pred":
            bits.append(f"{key}=({pretty_bool(val)})")
        elif kind == "formula":
            bits.append(f"{key}=({pretty_formula(val)})")
        elif kind == "indices":
            bits.append(f"{key}=[{','.join(str(int(i)) for i in val)}]")
        else:
            bits.append(f"{key}={int(val)}")
    return " ".join(bits)


# ---------------------------------------------------------------------------
# execution


def _run_step(step: Step, goal: Sequent, prover: Prover) -> Union[ProofNode, StepFailure]:
    if step.kind == "open":
        return StepFailure(step.line, "open", "goal deliberately left open", goal)
    if step.kind == "auto":
        if step.name == "micro":
            node = micro_close(goal, prover)
            if node is None:
                return StepFailure(step.line, "auto micro", "no axiom closes this goal", goal)
            return node
        out = TACTICS[step.name](goal, prover, fuel=step.fuel)
        if not out.closed:
            first = out.open_goals[0] if out.open_goals else goal
            return StepFailure(
                step.line,
                f"auto {step.name}",
                f"tactic left {len(out.open_goals)} goals open",
                first,
            )
        return out.node
    try:
        app = apply_rule(goal, step.name, step.args, prover)
    except RuleError as e:
        return StepFailure(step.line, step.name, str(e), goal)
    if len(app.premises) != len(step.children):
        return StepFailure(
            step.line,
            step.name,
            f"{step.name} produced {len(app.premises)} premises, "
            f"the script supplies {len(step.children)}",
            goal,
        )
    children = []
    for sub, prem in zip(step.children, app.premises):
        got = _run_step(sub, prem, prover)
        if isinstance(got, StepFailure):
            return got
        children.append(got)
    return ProofNode(step.name, step.args, tuple(children))


def run_script(
    script: Union[ProofScript, str],
    base: Union[str, Path, None] = None,
) -> Union[Certificate, StepFailure]:
    """Execute a proof script and certify the result.

    Returns the kernel's certificate on success, or the first StepFailure
    with its script line and the sequent that was open at that point.
    """
    if isinstance(script, str):
        script = parse_script(script, base)
    if len(script.steps) != 1:
        raise ScriptError("a script has exactly one root step")
    prover = Prover(axioms=script.axioms)
    got = _run_step(script.steps[0], script.goal, prover)
    if isinstance(got, StepFailure):
        return got
    root = ProofNode(got.rule, got.args, got.premises, goal=script.goal)
    return check_proof(root, Prover(axioms=script.axioms))
