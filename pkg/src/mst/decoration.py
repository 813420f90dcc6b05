"""State decorations of candidate machines, and transition origins/destinations."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

from .automata import LocalMachine, erase
from .events import AsyncEvent
from .syntax import GlobalType


@dataclass(frozen=True)
class DecorationMap:
    """Local state -> set of GAut node ids reachable on the same local words."""

    mapping: Mapping[Hashable, frozenset[int]]
    iterations: int = 0

    def __getitem__(self, s) -> frozenset[int]:
        return self.mapping[s]

    def __iter__(self):
        return iter(self.mapping)

    def items(self):
        return self.mapping.items()


@dataclass(frozen=True)
class SupertypeDecorationMap:
    """Subtype state -> set of supertype states (each with non-empty decoration)."""

    mapping: Mapping[Hashable, frozenset]
    base: DecorationMap

    def __getitem__(self, s) -> frozenset:
        return self.mapping[s]

    def __iter__(self):
        return iter(self.mapping)

    def items(self):
        return self.mapping.items()

    def union(self, s) -> frozenset[int]:
        """Global states decorating the supertype states that decorate ``s``."""
        out: set[int] = set()
        for t in self.mapping[s]:
            out |= self.base[t]
        return frozenset(out)


def decorate(g: GlobalType, a: LocalMachine) -> DecorationMap:
    """Fixpoint over the product of ``a`` and the erasure of ``g`` onto a's role."""
    erasure = erase(g, a.role)
    sets: dict[Hashable, set[int]] = {s: set() for s in a.states}
    queue: deque[tuple[Hashable, int]] = deque()

    def add(s, q):
        if q not in sets[s]:
            sets[s].add(q)
            queue.append((s, q))

    for q in erasure.closure_of(erasure.initial):
        add(a.initial, q)
    iterations = 0
    while queue:
        s, q = queue.popleft()
        iterations += 1
        for x, s2 in a.out(s):
            for q2 in erasure.post_of(q, x):
                add(s2, q2)
    return DecorationMap({s: frozenset(v) for s, v in sets.items()}, iterations)


def decorate_supertype(g: GlobalType, b: LocalMachine, a: LocalMachine) -> SupertypeDecorationMap:
    """Map states of ``a`` to the states of ``b`` reached on shared words."""
    if a.role != b.role:
        raise ValueError(f"roles differ: {a.role!r} vs {b.role!r}")
    base = decorate(g, b)
    pairs = {(a.initial, b.initial)}
    queue = deque(pairs)
    while queue:
        s, t = queue.popleft()
        for x, s2 in a.out(s):
            t2 = b.step(t, x)
            if t2 is not None and (s2, t2) not in pairs:
                pairs.add((s2, t2))
                queue.append((s2, t2))
    mapping: dict[Hashable, set] = {s: set() for s in a.states}
    for s, t in pairs:
        if base[t]:
            mapping[s].add(t)
    return SupertypeDecorationMap({s: frozenset(v) for s, v in mapping.items()}, base)


def tr_sets(
    g: GlobalType, role: str, s: Iterable[int], x: AsyncEvent, s2: Iterable[int]
) -> tuple[frozenset[int], frozenset[int]]:
    """(origins, destinations) of ``s --x--> s2`` inside the erasure of ``g``,
    where a connection may take epsilon steps before and after ``x``."""
    erasure = erase(g, role)
    target = frozenset(s2)
    origins, dests = set(), set()
    for q in s:
        hit = erasure.post(erasure.closure_of(q), x) & target
        if hit:
            origins.add(q)
            dests |= hit
    return frozenset(origins), frozenset(dests)


def tr_sets_machine(
    b: LocalMachine, s: Iterable, x: AsyncEvent, s2: Iterable
) -> tuple[frozenset, frozenset]:
    """(origins, destinations) of ``s --x--> s2`` inside machine ``b``."""
    target = frozenset(s2)
    origins, dests = set(), set()
    for t in s:
        t2 = b.step(t, x)
        if t2 is not None and t2 in target:
            origins.add(t)
            dests.add(t2)
    return frozenset(origins), frozenset(dests)
