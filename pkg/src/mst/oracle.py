"""Bounded execution of communicating state machines, and word-level utilities
(indistinguishability, possible runs, run splitting) used to test the checks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import permutations
from typing import Hashable, Iterable, Mapping, Optional, Sequence

from .automata import LocalMachine, subset_construction
from .events import AsyncEvent, SyncEvent, is_prefix, project_word, split, split_word
from .syntax import Choice, End, GlobalType, Rec, Var

Word = tuple[AsyncEvent, ...]


class NoSuchTransition(ValueError):
    pass


class EmptyOrMismatchedChannel(ValueError):
    pass


@dataclass(frozen=True)
class Configuration:
    """Local states (in role order) and channel contents (in channel order)."""

    states: tuple[Hashable, ...]
    channels: tuple[tuple[str, ...], ...]


class CSM:
    """A family of local machines, one per role, over FIFO channels."""

    def __init__(self, machines: Mapping[str, LocalMachine]):
        for role, machine in machines.items():
            if machine.role != role:
                raise ValueError(f"machine for {role!r} belongs to {machine.role!r}")
        self.machines = dict(machines)
        self.roles: tuple[str, ...] = tuple(machines)
        self.channels: tuple[tuple[str, str], ...] = tuple(permutations(self.roles, 2))
        self._role_index = {r: i for i, r in enumerate(self.roles)}
        self._chan_index = {c: i for i, c in enumerate(self.channels)}

    @classmethod
    def from_subsets(cls, g: GlobalType, overrides: Optional[Mapping[str, LocalMachine]] = None) -> CSM:
        """Subset constructions for every role of ``g``, except the overridden ones."""
        overrides = overrides or {}
        unknown = set(overrides) - set(g.roles)
        if unknown:
            raise ValueError(f"roles {sorted(unknown)} do not occur in the global type")
        return cls({p: overrides.get(p) or subset_construction(g, p) for p in g.roles})

    @property
    def initial(self) -> Configuration:
        return Configuration(
            tuple(self.machines[p].initial for p in self.roles),
            tuple(() for _ in self.channels),
        )

    def state(self, c: Configuration, role: str) -> Hashable:
        return c.states[self._role_index[role]]

    def channel(self, c: Configuration, sender: str, receiver: str) -> tuple[str, ...]:
        return c.channels[self._chan_index[(sender, receiver)]]

    def is_final(self, c: Configuration) -> bool:
        return all(not ch for ch in c.channels) and all(
            self.machines[p].is_final(s) for p, s in zip(self.roles, c.states)
        )

    def describe(self, c: Configuration) -> dict:
        return {
            "states": {p: self.machines[p].name(s) for p, s in zip(self.roles, c.states)},
            "channels": {f"{a},{b}": list(ch) for (a, b), ch in zip(self.channels, c.channels)},
        }

    def moves(self, c: Configuration) -> list[tuple[AsyncEvent, Configuration]]:
        """Enabled events and their successors: sends first, then receives;
        roles in declaration order; then peer and message."""
        sends, recvs = [], []
        for i, p in enumerate(self.roles):
            machine = self.machines[p]
            for x, dst in machine.out(c.states[i]):
                if x.channel not in self._chan_index:
                    continue
                if x.is_send:
                    sends.append((x, self._apply(c, i, x, dst)))
                else:
                    queue = self.channel(c, *x.channel)
                    if queue and queue[0] == x.message:
                        recvs.append((x, self._apply(c, i, x, dst)))
        return sends + recvs

    def _apply(self, c: Configuration, i: int, x: AsyncEvent, dst) -> Configuration:
        states = c.states[:i] + (dst,) + c.states[i + 1 :]
        k = self._chan_index[x.channel]
        queue = c.channels[k]
        queue = queue + (x.message,) if x.is_send else queue[1:]
        return Configuration(states, c.channels[:k] + (queue,) + c.channels[k + 1 :])


def step(csm: CSM, c: Configuration, x: AsyncEvent) -> Configuration:
    if x.active not in csm.machines:
        raise NoSuchTransition(f"no machine for role {x.active!r}")
    i = csm.roles.index(x.active)
    dst = csm.machines[x.active].step(c.states[i], x)
    if dst is None:
        raise NoSuchTransition(f"{x.active} has no {x} transition from {c.states[i]!r}")
    if x.is_recv:
        queue = csm.channel(c, *x.channel)
        if not queue or queue[0] != x.message:
            raise EmptyOrMismatchedChannel(f"channel {x.channel} holds {list(queue)}, cannot perform {x}")
    return csm._apply(c, i, x, dst)


def run_word(csm: CSM, word: Iterable[AsyncEvent]) -> Configuration:
    c = csm.initial
    for x in word:
        c = step(csm, c, x)
    return c


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Deadlock:
    config: Configuration
    trace: Word


@dataclass
class ExplorationReport:
    reachable: int
    deadlocks: list[Deadlock]
    terminated: list[Word]
    truncated: bool
    saturated: set[tuple[str, str]] = field(default_factory=set)
    terminated_capped: bool = False

    def to_json(self, csm: CSM) -> dict:
        return {
            "reachable": self.reachable,
            "deadlocks": [
                {**csm.describe(d.config), "trace": [str(x) for x in d.trace]} for d in self.deadlocks
            ],
            "terminated": [[str(x) for x in w] for w in self.terminated],
            "truncated": self.truncated,
            "saturated": sorted(f"{a},{b}" for a, b in self.saturated),
            "terminated_capped": self.terminated_capped,
        }


def explore(csm: CSM, depth_bound: int = 12, channel_bound: int = 2, max_traces: int = 10_000) -> ExplorationReport:
    """Breadth-first search over configurations reachable in at most
    ``depth_bound`` events with at most ``channel_bound`` messages per channel.

    A send that is only blocked by the channel bound makes the report
    truncated; it never turns a configuration into a deadlock.
    """
    if depth_bound < 1 or channel_bound < 1:
        raise ValueError("bounds must be at least 1")
    init = csm.initial
    depth = {init: 0}
    parent: dict[Configuration, tuple[Configuration, AsyncEvent]] = {}
    graph: dict[Configuration, list[tuple[AsyncEvent, Configuration]]] = {}
    order = [init]
    queue = deque([init])
    truncated = False
    saturated: set[tuple[str, str]] = set()
    deadlock_configs = []
    while queue:
        c = queue.popleft()
        for chan, content in zip(csm.channels, c.channels):
            if len(content) >= channel_bound:
                saturated.add(chan)
        moves = csm.moves(c)
        if not moves:
            if not csm.is_final(c):
                deadlock_configs.append(c)
            continue
        if depth[c] >= depth_bound:
            truncated = True
            continue
        kept = []
        for x, c2 in moves:
            if x.is_send and len(csm.channel(c2, *x.channel)) > channel_bound:
                truncated = True
                continue
            kept.append((x, c2))
            if c2 not in depth:
                depth[c2] = depth[c] + 1
                parent[c2] = (c, x)
                order.append(c2)
                queue.append(c2)
        graph[c] = kept

    def path_to(c: Configuration) -> Word:
        word = []
        while c in parent:
            c, x = parent[c]
            word.append(x)
        return tuple(reversed(word))

    deadlocks = [Deadlock(c, path_to(c)) for c in deadlock_configs]
    terminated, capped = _terminated_traces(csm, init, graph, depth_bound, max_traces)
    return ExplorationReport(len(depth), deadlocks, terminated, truncated, saturated, capped)


def _terminated_traces(csm, init, graph, bound, cap):
    # distance from each configuration to a final one, inside the explored graph
    reverse: dict[Configuration, list[Configuration]] = {}
    nodes = set(graph)
    for c, edges in graph.items():
        for _, c2 in edges:
            reverse.setdefault(c2, []).append(c)
            nodes.add(c2)
    dist = {c: 0 for c in nodes if csm.is_final(c)}
    queue = deque(dist)
    while queue:
        c = queue.popleft()
        for prev in reverse.get(c, ()):
            if prev not in dist:
                dist[prev] = dist[c] + 1
                queue.append(prev)
    out: list[Word] = []
    capped = False
    stack: list[tuple[Configuration, Word]] = [(init, ())]
    while stack:
        c, word = stack.pop()
        if c not in dist or len(word) + dist[c] > bound:
            continue
        if csm.is_final(c):
            if len(out) >= cap:
                capped = True
                break
            out.append(word)
        if len(word) < bound:
            for x, c2 in reversed(graph.get(c, [])):
                stack.append((c2, word + (x,)))
    out.sort(key=lambda w: (len(w), [str(x) for x in w]))
    return out, capped


# ---------------------------------------------------------------------------
# Bounded trace languages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    equal_prefixes: bool
    counterexample: Optional[Word] = None
    # 1 if the counterexample is a trace of the first CSM only, 2 if of the second only
    only_in: Optional[int] = None

    def __iter__(self):
        return iter((self.equal_prefixes, self.counterexample))


def _compare(csm1: CSM, csm2: CSM, k: int, inclusion: bool) -> Comparison:
    start = (csm1.initial, csm2.initial)
    seen = {start}
    frontier: list[tuple[Configuration, Configuration, Word]] = [(*start, ())]
    for _ in range(k):
        nxt = []
        for c1, c2, word in frontier:
            m1 = dict(csm1.moves(c1))
            m2 = dict(csm2.moves(c2))
            for x in m1.keys() - m2.keys():
                return Comparison(False, word + (x,), 1)
            if not inclusion:
                for x in m2.keys() - m1.keys():
                    return Comparison(False, word + (x,), 2)
            for x in sorted(m1.keys() & m2.keys(), key=str):
                pair = (m1[x], m2[x])
                if pair not in seen:
                    seen.add(pair)
                    nxt.append((*pair, word + (x,)))
        frontier = nxt
    return Comparison(True)


def bounded_trace_compare(csm1: CSM, csm2: CSM, k: int) -> Comparison:
    """Do both CSMs have the same traces of length at most ``k``?

    Every machine is deterministic, so a trace fixes the configuration and a
    breadth-first walk over configuration pairs finds a shortest word in the
    symmetric difference.
    """
    return _compare(csm1, csm2, k, inclusion=False)


def bounded_trace_inclusion(csm1: CSM, csm2: CSM, k: int) -> Comparison:
    """Is every trace of ``csm1`` of length at most ``k`` a trace of ``csm2``?"""
    return _compare(csm1, csm2, k, inclusion=True)


def bounded_traces(csm: CSM, k: int) -> set[Word]:
    """All traces of length at most ``k`` (the set is prefix-closed)."""
    out: set[Word] = set()
    stack: list[tuple[Configuration, Word]] = [(csm.initial, ())]
    while stack:
        c, word = stack.pop()
        out.add(word)
        if len(word) < k:
            for x, c2 in csm.moves(c):
                stack.append((c2, word + (x,)))
    return out


# ---------------------------------------------------------------------------
# Indistinguishability
# ---------------------------------------------------------------------------


def _count(word: Sequence[AsyncEvent], channel: tuple[str, str], sends: bool) -> int:
    return sum(1 for x in word if x.channel == channel and x.is_send == sends)


def swappable(prefix: Sequence[AsyncEvent], a: AsyncEvent, b: AsyncEvent) -> bool:
    """May ``prefix.a.b`` be rewritten to ``prefix.b.a`` by a single rule?"""
    if a.is_send and b.is_send:
        return a.active != b.active
    if a.is_recv and b.is_recv:
        return a.active != b.active
    snd, rcv = (a, b) if a.is_send else (b, a)
    p, q = snd.active, snd.peer
    s, r = rcv.active, rcv.peer
    if p != s and (p != r or q != s):
        return True
    if p == r and q == s:
        # a receive on the channel just written to commutes only if the
        # channel already held a message before the pair
        return _count(prefix, (p, q), True) > _count(prefix, (p, q), False)
    return False


def indist_neighbors(word: Sequence[AsyncEvent]) -> set[Word]:
    """Words one adjacent swap away from ``word`` under indistinguishability."""
    w = tuple(word)
    out = set()
    for i in range(len(w) - 1):
        a, b = w[i], w[i + 1]
        if swappable(w[:i], a, b):
            out.add(w[:i] + (b, a) + w[i + 2 :])
    return out


def closure_check(traces: Iterable[Sequence[AsyncEvent]], k: int) -> list[tuple[Word, Word]]:
    """Pairs (trace, neighbour) where the neighbour is missing from ``traces``."""
    pool = {tuple(w) for w in traces}
    violations = []
    for w in sorted(pool, key=lambda w: (len(w), [str(x) for x in w])):
        for n in sorted(indist_neighbors(w), key=lambda w: [str(x) for x in w]):
            if len(n) <= k and n not in pool:
                violations.append((w, n))
    return violations


# ---------------------------------------------------------------------------
# Runs of the global automaton
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GlobalRun:
    """``states[0] --labels[0]--> states[1] ...`` with epsilon steps elided.

    ``states[i + 1]`` is the continuation node reached by ``labels[i]``.
    ``maximal`` is False when the run was cut off by the unroll bound.
    """

    states: tuple[int, ...]
    labels: tuple[SyncEvent, ...]
    maximal: bool = True

    def trace(self) -> Word:
        return split_word(self.labels)


def _settle(g: GlobalType, nid: int, entries: dict[int, int], unroll: int):
    """Follow epsilon steps from ``nid``; None if a recursion exceeds ``unroll``."""
    entries = dict(entries)
    while True:
        n = g.nodes[nid]
        if isinstance(n, Var):
            nid = g.binder[nid]
            continue
        if isinstance(n, Rec):
            entries[nid] = entries.get(nid, 0) + 1
            if entries[nid] > unroll:
                return None, entries
            nid = n.body.id
            continue
        return n, entries


def possible_runs(g: GlobalType, w: Sequence[AsyncEvent], p: str, unroll: int = 2) -> set[GlobalRun]:
    """Runs whose split trace, projected onto ``p``, extends ``w`` projected onto ``p``.

    Runs end at an End node, or are cut off (``maximal=False``) when a
    recursion body would be entered more than ``unroll`` times.
    """
    if unroll < 1:
        raise ValueError("unroll must be at least 1")
    target = project_word(w, p)
    out: set[GlobalRun] = set()
    stack = [((g.root.id,), (), (), {})]
    while stack:
        states, labels, proj, entries = stack.pop()
        node, entries = _settle(g, states[-1], entries, unroll)
        if node is None or isinstance(node, End):
            if is_prefix(target, proj):
                out.add(GlobalRun(states, labels, node is not None))
            continue
        assert isinstance(node, Choice)
        for event, cont in node.events():
            proj2 = proj + project_word(split(event), p)
            n = min(len(proj2), len(target))
            if proj2[:n] != target[:n]:
                continue
            stack.append((states + (cont.id,), labels + (event,), proj2, entries))
    return out


def intersect_runs(g: GlobalType, w: Sequence[AsyncEvent], unroll: int = 2) -> set[GlobalRun]:
    """Runs possible for every role at once."""
    runs: Optional[set[GlobalRun]] = None
    for p in g.roles:
        rp = possible_runs(g, w, p, unroll)
        runs = rp if runs is None else runs & rp
    return runs or set()


@dataclass(frozen=True)
class Splitting:
    alpha: GlobalRun
    label: Optional[SyncEvent]
    target: Optional[int]  # state reached by ``label``
    beta: tuple[tuple[SyncEvent, int], ...]


def unique_splitting(run: GlobalRun, p: str, w: Sequence[AsyncEvent]) -> Splitting:
    """Split ``run`` at the longest prefix whose ``p``-projection stays within
    the ``p``-projection of ``w``."""
    target = project_word(w, p)
    proj: Word = ()
    i = 0
    while i < len(run.labels):
        nxt = proj + project_word(split(run.labels[i]), p)
        if not is_prefix(nxt, target):
            break
        proj = nxt
        i += 1
    if i == len(run.labels):
        if run.maximal and proj != target:
            raise ValueError("run does not match the word for this role")
        return Splitting(run, None, None, ())
    rest = proj
    for label in run.labels[i:]:
        rest = rest + project_word(split(label), p)
    if not is_prefix(target, rest) and run.maximal:
        raise ValueError("run does not match the word for this role")
    alpha = GlobalRun(run.states[: i + 1], run.labels[:i], False)
    beta = tuple(zip(run.labels[i + 1 :], run.states[i + 2 :]))
    return Splitting(alpha, run.labels[i], run.states[i + 1], beta)
