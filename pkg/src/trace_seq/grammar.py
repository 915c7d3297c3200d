"""Length languages of single-letter recursion bodies.

A mu-body that is a disjunction of chop chains over one relation letter
R and the bound variable denotes a union of R-chains whose lengths form
the word lengths of a one-letter context-free grammar.  Those length
sets are exactly the ultimately periodic sets, computed here in closed
form: a finite exception part plus arithmetic ramps.

The derivation behind length_set: a derivation tree for the single
nonterminal S has internal nodes (productions with m >= 1 uses of S) and
leaves (productions with m = 0).  Grafting a new root on top of a tree,
filling its other children with fixed leaves, adds a constant; the set
of lengths is the closure of the leaf lengths under those constants, a
finitely generated additive reachability set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

from . import formulas as f


class GrammarError(Exception):
    """The body does not fit the single-letter chain fragment."""


@dataclass(frozen=True)
class UnaryCFG:
    """Productions (k, m): k terminal letters and m nonterminal uses."""

    productions: tuple[tuple[int, int], ...]


def chain_grammar(mu: f.Mu) -> tuple[Optional[f.RelExpr], UnaryCFG]:
    """Extract the letter and grammar from a single-letter mu body."""
    letter: Optional[f.RelExpr] = None
    prods = []
    for disjunct in _disjuncts(f.normalize(mu.body)):
        k = m = 0
        for part in _chain(disjunct):
            if isinstance(part, f.Rel):
                if letter is None:
                    letter = part.rel
                elif part.rel != letter:
                    raise GrammarError(
                        f"two different letters: {letter} and {part.rel}"
                    )
                k += 1
            elif isinstance(part, f.RVar) and part.name == mu.var:
                m += 1
            else:
                raise GrammarError(f"chain part out of fragment: {part}")
        prods.append((k, m))
    return letter, UnaryCFG(tuple(sorted(set(prods))))


def _disjuncts(phi):
    if isinstance(phi, f.Or):
        yield from _disjuncts(phi.left)
        yield from _disjuncts(phi.right)
    else:
        yield phi


def _chain(phi):
    if isinstance(phi, f.Chop):
        yield from _chain(phi.left)
        yield from _chain(phi.right)
    else:
        yield phi


def members_upto(cfg: UnaryCFG, n: int) -> list[bool]:
    """Derivability of each length 0..n, by direct fixed-point iteration.

    Deliberately naive; this is the reference the closed form is tested
    against.
    """
    can = [False] * (n + 1)
    while True:
        changed = False
        for k, m in cfg.productions:
            if m == 0:
                if k <= n and not can[k]:
                    can[k] = True
                    changed = True
                continue
            fold = can
            for _ in range(m - 1):
                nxt = [False] * (n + 1)
                for a in range(n + 1):
                    if not fold[a]:
                        continue
                    for b in range(n + 1 - a):
                        if can[b]:
                            nxt[a + b] = True
                fold = nxt
            for a in range(n + 1 - k):
                if fold[a] and not can[a + k]:
                    can[a + k] = True
                    changed = True
        if not changed:
            return can


@dataclass(frozen=True)
class SemilinearSet:
    exceptions: frozenset[int]
    ramps: tuple[tuple[int, int], ...]  # (start, period)

    def contains(self, n: int) -> bool:
        if n in self.exceptions:
            return True
        return any(n >= s and (n - s) % p == 0 for s, p in self.ramps)

    @property
    def finite(self) -> bool:
        return not self.ramps

    def includes(self, other: "SemilinearSet") -> bool:
        for n in other.exceptions:
            if not self.contains(n):
                return False
        if not other.ramps:
            return True
        if not self.ramps:
            return False
        period = math.lcm(*[p for _, p in self.ramps])
        bound = max(
            [*self.exceptions, *(s for s, _ in self.ramps), 0]
        )
        for s, p in other.ramps:
            # beyond `bound` membership in self only depends on n mod
            # period, so one full cycle of the ramp there settles it
            stop = max(bound, s) + math.lcm(p, period) + p
            n = s
            while n <= stop:
                if not self.contains(n):
                    return False
                n += p
        return True

    def pretty(self) -> str:
        """Canonical text form: finite exceptions, then arithmetic ramps."""
        bits = []
        if self.exceptions:
            bits.append("{" + ",".join(str(n) for n in sorted(self.exceptions)) + "}")
        for s, p in self.ramps:
            bits.append(f"({s} + {p}ℕ)")
        return " ∪ ".join(bits) if bits else "{}"


def length_set(cfg: UnaryCFG) -> SemilinearSet:
    """Closed-form length language of a unary grammar."""
    leaves = sorted({k for k, m in cfg.productions if m == 0})
    if not leaves:
        return SemilinearSet(frozenset(), ())
    internals = [(k, m) for k, m in cfg.productions if m >= 1]
    gens: set[int] = set()
    for k, m in internals:
        for fill in itertools.combinations_with_replacement(leaves, m - 1):
            d = k + sum(fill)
            if d > 0:
                gens.add(d)
    if not gens:
        return SemilinearSet(frozenset(leaves), ())
    g = math.gcd(*gens)
    reduced = sorted(d // g for d in gens)
    if reduced[0] == 1:
        conductor = 0
    else:
        conductor = (reduced[0] - 1) * (reduced[-1] - 1)
    bound = max(leaves) + g * conductor

    # reachability below the bound, straight from the closure definition
    reach = set()
    frontier = list(leaves)
    while frontier:
        n = frontier.pop()
        if n in reach or n >= bound:
            continue
        reach.add(n)
        for d in gens:
            if n + d < bound:
                frontier.append(n + d)

    residues = sorted({t % g for t in leaves})
    ramps = []
    for r in residues:
        start = bound + ((r - bound) % g)
        ramps.append((start, g))
    return SemilinearSet(frozenset(reach), tuple(ramps))


def lengths_included(sub: UnaryCFG, sup: UnaryCFG) -> bool:
    return length_set(sup).includes(length_set(sub))
