"""Finite state spaces for the semantic oracle.

A domain fixes a variable list and one integer interval shared by all of
them.  States are tuples of ints in variable order, traces are nonempty
tuples of states.  Everything is hashable so trace sets work as dict keys
and set members.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterator

State = tuple[int, ...]
Trace = tuple[State, ...]


class BudgetError(Exception):
    """An enumeration would exceed the configured capacity."""


@dataclass(frozen=True)
class Domain:
    names: tuple[str, ...]
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty interval")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate variable names")

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    def count(self) -> int:
        return self.width ** len(self.names)

    def contains(self, state: State) -> bool:
        return len(state) == len(self.names) and all(
            self.lo <= v <= self.hi for v in state
        )

    def states(self) -> Iterator[State]:
        rng = range(self.lo, self.hi + 1)
        return itertools.product(*[rng] * len(self.names))

    def to_dict(self, state: State) -> dict[str, int]:
        return dict(zip(self.names, state))

    def from_dict(self, d: dict[str, int]) -> State:
        return tuple(d[n] for n in self.names)

    def random_state(self, rng: random.Random) -> State:
        return tuple(rng.randint(self.lo, self.hi) for _ in self.names)


def parse_domain(spec: str) -> Domain:
    """``x,y:0..4`` becomes Domain(("x", "y"), 0, 4)."""
    head, _, rng = spec.partition(":")
    names = tuple(n.strip() for n in head.split(",") if n.strip())
    lo_s, _, hi_s = rng.partition("..")
    try:
        lo, hi = int(lo_s), int(hi_s)
    except ValueError:
        raise ValueError(f"bad domain spec {spec!r}") from None
    if not names:
        raise ValueError(f"bad domain spec {spec!r}")
    return Domain(names, lo, hi)


def fuse(a: Trace, b: Trace) -> Trace:
    """Concatenate two traces that share a middle state."""
    if a[-1] != b[0]:
        raise ValueError("traces do not share the middle state")
    return a + b[1:]


def all_traces(domain: Domain, maxlen: int, cap: int = 2_000_000) -> Iterator[Trace]:
    """Every trace with 1 <= len <= maxlen, shortest first."""
    total = 0
    n = domain.count()
    for length in range(1, maxlen + 1):
        total += n**length
        if total > cap:
            raise BudgetError(f"{total} traces exceed cap {cap}")
    for length in range(1, maxlen + 1):
        for combo in itertools.product(domain.states(), repeat=length):
            yield combo


def sample_traces(
    domain: Domain, rng: random.Random, count: int, maxlen: int
) -> list[Trace]:
    out = []
    for _ in range(count):
        length = rng.randint(1, maxlen)
        out.append(tuple(domain.random_state(rng) for _ in range(length)))
    return out


def mutate_trace(trace: Trace, domain: Domain, rng: random.Random) -> Trace:
    """Perturb one state by one coordinate; a cheap near-miss generator."""
    i = rng.randrange(len(trace))
    st = list(trace[i])
    j = rng.randrange(len(st))
    delta = rng.choice([-2, -1, 1, 2])
    st[j] = min(domain.hi, max(domain.lo, st[j] + delta))
    out = list(trace)
    out[i] = tuple(st)
    return tuple(out)
