"""Sequents: the judgment form the proof rules operate on.

A sequent reads: every trace in all of Gamma is in some Delta member,
under the recursion-variable assumptions of xi and the procedure
contracts of the contract set.  Members are kept normalized, deduplicated
and sorted, so two sequents describing the same judgment compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import formulas as f
from . import terms as t
from .printer import pretty_bool, pretty_formula


@dataclass(frozen=True)
class XiEntry:
    """Assumption about a free recursion variable.

    Plain entry: traces of var whose head satisfies guard are in target.
    With src_tail T: traces of var fused with a T-trace, head satisfying
    guard, are in target.
    """

    var: str
    guard: t.BoolExpr
    target: f.TraceFormula
    src_tail: Optional[f.TraceFormula] = None

    def pretty(self) -> str:
        base = f"({self.var} | {pretty_bool(self.guard)} -> {pretty_formula(self.target)}"
        if self.src_tail is not None:
            base += f" / {pretty_formula(self.src_tail)}"
        return base + ")"


@dataclass(frozen=True)
class ContractEntry:
    """A proved procedure contract: pre at entry, post relating v_old to v."""

    proc: str
    pre: t.BoolExpr
    post: t.BoolExpr
    mu: f.Mu

    def pretty(self) -> str:
        return f"[{self.proc}: {pretty_bool(self.pre)} => {pretty_bool(self.post)}]"


@dataclass(frozen=True)
class Sequent:
    xi: tuple[XiEntry, ...]
    gamma: tuple[f.TraceFormula, ...]
    delta: tuple[f.TraceFormula, ...]
    contracts: tuple[ContractEntry, ...] = ()

    @staticmethod
    def make(
        gamma: Iterable[f.TraceFormula],
        delta: Iterable[f.TraceFormula],
        xi: Iterable[XiEntry] = (),
        contracts: Iterable[ContractEntry] = (),
    ) -> "Sequent":
        def canon(phis):
            seen = []
            for phi in phis:
                n = f.normalize(phi)
                if n not in seen:
                    seen.append(n)
            return tuple(sorted(seen, key=f.sort_key))

        xi_out = []
        for e in xi:
            if e not in xi_out:
                xi_out.append(e)
        con = tuple(sorted(set(contracts), key=lambda c: c.proc))
        return Sequent(tuple(xi_out), canon(gamma), canon(delta), con)

    @property
    def gamma_preds(self) -> list[t.BoolExpr]:
        return [phi.pred for phi in self.gamma if isinstance(phi, f.Pred)]

    def contract_for(self, proc: str) -> Optional[ContractEntry]:
        for c in self.contracts:
            if c.proc == proc:
                return c
        return None

    def pretty(self) -> str:
        parts = []
        if self.xi:
            parts.append(" ".join(e.pretty() for e in self.xi) + " ::")
        if self.contracts:
            parts.append(" ".join(c.pretty() for c in self.contracts))
        left = ", ".join(pretty_formula(g) for g in self.gamma)
        right = ", ".join(pretty_formula(d) for d in self.delta)
        parts.append(f"{left} |- {right}")
        return " ".join(p for p in parts if p)


def used_names(seq: Sequent) -> set[str]:
    """Every variable name mentioned anywhere in the sequent."""
    out: set[str] = set()

    def from_bool(b):
        out.update(t.bool_vars(b))

    def from_formula(phi):
        out.update(f.formula_state_vars(phi))

    for phi in seq.gamma + seq.delta:
        from_formula(phi)
    for e in seq.xi:
        from_bool(e.guard)
        from_formula(e.target)
        if e.src_tail is not None:
            from_formula(e.src_tail)
    for c in seq.contracts:
        from_bool(c.pre)
        from_bool(c.post)
        from_formula(c.mu)
    return {n.rstrip("'") for n in out}
