"""Lexer and parsers for the surface syntaxes.

One token stream serves every input language (arithmetic, predicates, trace
formulas, programs, definition files); keywords are contextual, so the same
identifier rules apply everywhere.  ``#`` starts a line comment.  Formula
operator precedence, loosest first: ``\\/``, ``/\\``, ``>>``; all three
associate to the right.  ``mu`` is greedy: its body extends as far right as
possible, so a fixed point in non-tail position needs parentheses.

Predicates and relations share the comparison grammar; primed variables
(``x'`` for the post-state) are only legal inside ``rel`` definition bodies.
The token ``!=`` is one comparison; a factorial directly before ``=`` needs
a space (``x! = 1``) or it lexes as ``x != 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import terms as t
from . import formulas as f
from . import programs as p


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # INT, IDENT, OP, STR, EOF
    value: str
    line: int
    col: int


_MULTI_OPS = ["|-", ":=", "==", "!=", "<=", ">=", ">>", "/\\", "\\/", "->"]
_SINGLE_OPS = "(){}[];.,:|<>=+-*!@"

RESERVED = {
    "true", "false", "even", "mu", "Sb", "skip", "if", "then", "else",
    "proc", "rel", "def",
}


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c == '"':
            j = i + 1
            while j < n and src[j] != '"':
                if src[j] == "\n":
                    raise ParseError("unterminated string", line, col)
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            toks.append(Token("STR", src[i + 1 : j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("INT", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
                # '#' glued between alphanumerics stays inside the name
                # (machine-made names like x#0); '#' before a space still
                # opens a comment.
                if j < n - 1 and src[j] == "#" and src[j + 1].isalnum():
                    j += 1
            while j < n and src[j] == "'":
                j += 1
            toks.append(Token("IDENT", src[i:j], line, col))
            col += j - i
            i = j
            continue
        two = src[i : i + 2]
        if two in _MULTI_OPS:
            toks.append(Token("OP", two, line, col))
            i += 2
            col += 2
            continue
        if c in _SINGLE_OPS:
            toks.append(Token("OP", c, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


class Parser:
    """Token-stream cursor with the shared expression grammars."""

    def __init__(
        self,
        src: str,
        relenv: Optional[f.RelEnv] = None,
        allow_primes: bool = False,
    ):
        self.toks = tokenize(src)
        self.pos = 0
        self.relenv = relenv or f.RelEnv()
        self.allow_primes = allow_primes

    # -- cursor helpers

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, value: str, kind: str = "OP") -> bool:
        tok = self.peek()
        return tok.kind == kind and tok.value == value

    def at_word(self, word: str) -> bool:
        return self.at(word, "IDENT")

    def accept(self, value: str, kind: str = "OP") -> bool:
        if self.at(value, kind):
            self.next()
            return True
        return False

    def expect(self, value: str, kind: str = "OP") -> Token:
        tok = self.peek()
        if tok.kind != kind or tok.value != value:
            raise ParseError(
                f"expected {value!r}, found {tok.value or tok.kind!r}", tok.line, tok.col
            )
        return self.next()

    def expect_ident(self) -> str:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise ParseError(f"expected identifier, found {tok.value or tok.kind!r}", tok.line, tok.col)
        return self.next().value

    def expect_eof(self) -> None:
        tok = self.peek()
        if tok.kind != "EOF":
            raise ParseError(f"trailing input at {tok.value!r}", tok.line, tok.col)

    def fail(self, msg: str) -> ParseError:
        tok = self.peek()
        return ParseError(msg, tok.line, tok.col)

    # -- arithmetic

    def parse_sum(self) -> t.ArithExpr:
        e = self.parse_term()
        while True:
            if self.accept("+"):
                e = t.Add(e, self.parse_term())
            elif self.accept("-"):
                e = t.Sub(e, self.parse_term())
            else:
                return e

    def parse_term(self) -> t.ArithExpr:
        e = self.parse_unary()
        while self.accept("*"):
            e = t.Mul(e, self.parse_unary())
        return e

    def parse_unary(self) -> t.ArithExpr:
        if self.accept("-"):
            return t.Neg(self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> t.ArithExpr:
        e = self.parse_primary()
        while self.accept("!"):
            e = t.Factorial(e)
        return e

    def parse_primary(self) -> t.ArithExpr:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return t.IntLit(int(tok.value))
        if tok.kind == "IDENT":
            if tok.value in RESERVED or tok.value == "Id":
                raise self.fail(f"reserved word {tok.value!r} in expression")
            name = self.next().value
            if "'" in name and not self.allow_primes:
                raise ParseError(
                    f"primed variable {name!r} only allowed in relation bodies",
                    tok.line,
                    tok.col,
                )
            return t.Var(name)
        if self.accept("("):
            e = self.parse_sum()
            self.expect(")")
            return e
        raise self.fail(f"expected arithmetic term, found {tok.value or tok.kind!r}")

    # -- predicates

    def parse_pred(self) -> t.BoolExpr:
        left = self.parse_band()
        if self.accept("\\/"):
            return t.BOr(left, self.parse_pred())
        return left

    def parse_band(self) -> t.BoolExpr:
        left = self.parse_bunary()
        if self.accept("/\\"):
            return t.BAnd(left, self.parse_band())
        return left

    def parse_bunary(self) -> t.BoolExpr:
        if self.accept("!"):
            return t.BNot(self.parse_bunary())
        return self.parse_batom()

    def parse_batom(self) -> t.BoolExpr:
        if self.at_word("true"):
            self.next()
            return t.TRUE
        if self.at_word("false"):
            self.next()
            return t.FALSE
        if self.at_word("even"):
            self.next()
            self.expect("(")
            e = self.parse_sum()
            self.expect(")")
            return t.Even(e)
        save = self.pos
        try:
            return self.parse_cmp()
        except ParseError:
            self.pos = save
        if self.accept("("):
            b = self.parse_pred()
            self.expect(")")
            return b
        raise self.fail("expected predicate")

    def parse_cmp(self) -> t.Cmp:
        left = self.parse_sum()
        tok = self.peek()
        ops = {"=": "==", "==": "==", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}
        if tok.kind == "OP" and tok.value in ops:
            self.next()
            return t.Cmp(ops[tok.value], left, self.parse_sum())
        raise self.fail("expected comparison operator")

    # -- trace formulas

    def parse_formula(self, bound: tuple[str, ...] = ()) -> f.TraceFormula:
        left = self.parse_fand(bound)
        if self.accept("\\/"):
            return f.Or(left, self.parse_formula(bound))
        return left

    def parse_fand(self, bound: tuple[str, ...]) -> f.TraceFormula:
        left = self.parse_fchop(bound)
        if self.accept("/\\"):
            return f.And(left, self.parse_fand(bound))
        return left

    def parse_fchop(self, bound: tuple[str, ...]) -> f.TraceFormula:
        left = self.parse_fatom(bound)
        if self.accept(">>"):
            return f.Chop(left, self.parse_fchop(bound))
        return left

    def parse_fatom(self, bound: tuple[str, ...]) -> f.TraceFormula:
        if self.at_word("mu"):
            return self.parse_mu(bound)
        if self.at_word("Sb"):
            self.next()
            self.expect("[")
            var = self.expect_ident()
            self.expect(":=")
            e = self.parse_sum()
            self.expect("]")
            return f.Rel(f.SbRel(var, e))
        if self.at_word("true"):
            self.next()
            return f.Pred(t.TRUE)
        if self.at_word("false"):
            self.next()
            return f.Pred(t.FALSE)
        if self.at_word("even"):
            return f.Pred(self.parse_batom())
        if self.at("!"):
            return f.Pred(self.parse_bunary())
        save = self.pos
        try:
            return f.Pred(self.parse_cmp())
        except ParseError:
            self.pos = save
        if self.accept("("):
            phi = self.parse_formula(bound)
            self.expect(")")
            return phi
        tok = self.peek()
        if tok.kind == "IDENT" and tok.value not in RESERVED:
            name = self.next().value
            if name == "Id":
                return f.Rel(f.IdRel())
            if name in self.relenv.rels:
                return f.Rel(self.relenv.rels[name])
            if name in bound or name.startswith("X"):
                return f.RVar(name)
            raise ParseError(
                f"cannot resolve {name!r}: not Id, a declared relation, or a recursion variable",
                tok.line,
                tok.col,
            )
        raise self.fail(f"expected formula, found {tok.value or tok.kind!r}")

    def parse_mu(self, bound: tuple[str, ...]) -> f.Mu:
        self.expect("mu", "IDENT")
        var = self.expect_ident()
        proc = None
        if self.accept("@"):
            self.expect("proc", "IDENT")
            proc = self.expect_ident()
        self.expect(".")
        body = self.parse_formula(bound + (var,))
        return f.Mu(var, body, proc)

    # -- statements and programs

    _STMT_STOPS = {"else", "proc"}

    def parse_stmt_seq(self) -> p.Stmt:
        stmts = [self.parse_stmt_atom()]
        while self.at(";"):
            nxt = self.peek(1)
            if nxt.kind == "EOF" or (nxt.kind == "OP" and nxt.value == "}"):
                self.next()
                break
            if nxt.kind == "IDENT" and nxt.value in self._STMT_STOPS:
                self.next()
                break
            self.next()
            stmts.append(self.parse_stmt_atom())
        return _fold_seq(stmts)

    def parse_stmt_atom(self) -> p.Stmt:
        if self.at_word("skip"):
            self.next()
            return p.Skip()
        if self.accept("{"):
            s = self.parse_stmt_seq()
            self.expect("}")
            return s
        if self.at_word("if"):
            self.next()
            cond = self.parse_pred()
            self.expect("then", "IDENT")
            then = self.parse_stmt_seq()
            self.expect("else", "IDENT")
            orelse = self.parse_stmt_seq()
            return p.If(cond, then, orelse)
        tok = self.peek()
        if tok.kind == "IDENT" and tok.value not in RESERVED:
            name = self.next().value
            if self.accept(":="):
                return p.Assign(name, self.parse_sum())
            if self.accept("("):
                self.expect(")")
                return p.Call(name)
            raise ParseError(f"expected ':=' or '()' after {name!r}", tok.line, tok.col)
        raise self.fail(f"expected statement, found {tok.value or tok.kind!r}")

    def parse_program(self) -> p.RecProgram:
        chunks: list[p.Stmt] = []
        procs: dict[str, p.Stmt] = {}
        while self.peek().kind != "EOF":
            if self.at_word("proc"):
                self.next()
                name = self.expect_ident()
                if name in procs:
                    raise self.fail(f"procedure {name!r} defined twice")
                self.expect("{")
                procs[name] = self.parse_stmt_seq()
                self.expect("}")
                continue
            chunks.append(self.parse_stmt_atom())
            if self.at(";"):
                self.next()
            elif not (self.peek().kind == "EOF" or self.at_word("proc")):
                raise self.fail("expected ';' between statements")
        main = _fold_seq(chunks) if chunks else p.Skip()
        return p.RecProgram(main, procs)

    # -- definition files

    def parse_tf(self) -> dict[str, f.TraceFormula]:
        """``rel``/``def`` declarations; relations land in ``self.relenv``."""
        defs: dict[str, f.TraceFormula] = {}
        while self.peek().kind != "EOF":
            if self.at_word("rel"):
                self.next()
                name = self.expect_ident()
                self.expect(":=")
                old = self.allow_primes
                self.allow_primes = True
                body = self.parse_pred()
                self.allow_primes = old
                self.relenv.declare(name, body)
                continue
            if self.at_word("def"):
                self.next()
                name = self.expect_ident()
                if name in defs:
                    raise self.fail(f"definition {name!r} given twice")
                self.expect(":=")
                defs[name] = self.parse_formula()
                continue
            raise self.fail("expected 'rel' or 'def'")
        return defs


def _fold_seq(stmts: Sequence[p.Stmt]) -> p.Stmt:
    acc = stmts[-1]
    for s in reversed(stmts[:-1]):
        acc = p.Seq(s, acc)
    return acc


# ---------------------------------------------------------------------------
# convenience entry points


def parse_arith(src: str) -> t.ArithExpr:
    q = Parser(src)
    e = q.parse_sum()
    q.expect_eof()
    return e


def parse_pred(src: str, allow_primes: bool = False) -> t.BoolExpr:
    q = Parser(src, allow_primes=allow_primes)
    b = q.parse_pred()
    q.expect_eof()
    return b


def parse_formula(src: str, relenv: Optional[f.RelEnv] = None) -> f.TraceFormula:
    q = Parser(src, relenv=relenv)
    phi = q.parse_formula()
    q.expect_eof()
    return phi


def parse_program(src: str) -> p.RecProgram:
    q = Parser(src)
    prog = q.parse_program()
    q.expect_eof()
    return prog


def parse_tf(src: str, relenv: Optional[f.RelEnv] = None) -> tuple[f.RelEnv, dict[str, f.TraceFormula]]:
    q = Parser(src, relenv=relenv)
    defs = q.parse_tf()
    q.expect_eof()
    return q.relenv, defs
