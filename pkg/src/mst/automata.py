"""Global automaton, projection by erasure, subset construction, local machines."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional

from .events import AsyncEvent, SyncEvent, event_sort_key, parse_event, project_word, split, split_word
from .syntax import Choice, End, GlobalType, Rec, Var

__all__ = [
    "AsyncEvent",
    "SyncEvent",
    "split_word",
    "project_word",
    "GlobalAutomaton",
    "ErasureMachine",
    "LocalMachine",
    "MachineError",
    "build_gaut",
    "erase",
    "subset_construction",
    "classify_states",
    "parse_machine",
    "format_machine",
]


@dataclass(frozen=True)
class GlobalAutomaton:
    states: tuple[int, ...]
    initial: int
    finals: frozenset[int]
    # (source, label, target); label None is an epsilon step
    transitions: tuple[tuple[int, Optional[SyncEvent], int], ...]

    def sync_transitions(self):
        return [t for t in self.transitions if t[1] is not None]

    def epsilon_transitions(self):
        return [t for t in self.transitions if t[1] is None]


def build_gaut(g: GlobalType) -> GlobalAutomaton:
    transitions: list[tuple[int, Optional[SyncEvent], int]] = []
    for node in g.nodes:
        if isinstance(node, Choice):
            for event, cont in node.events():
                transitions.append((node.id, event, cont.id))
        elif isinstance(node, Rec):
            transitions.append((node.id, None, node.body.id))
        elif isinstance(node, Var):
            transitions.append((node.id, None, g.binder[node.id]))
    return GlobalAutomaton(
        states=tuple(n.id for n in g.nodes),
        initial=g.root.id,
        finals=g.ends,
        transitions=tuple(transitions),
    )


class ErasureMachine:
    """GAut(G) with every label replaced by its projection onto one role."""

    def __init__(self, g: GlobalType, role: str):
        self.g = g
        self.role = role
        gaut = build_gaut(g)
        self.states = gaut.states
        self.initial = gaut.initial
        self.finals = gaut.finals
        transitions: list[tuple[int, Optional[AsyncEvent], int]] = []
        for src, label, dst in gaut.transitions:
            projected = None
            if label is not None:
                visible = project_word(split(label), role)
                projected = visible[0] if visible else None
            transitions.append((src, projected, dst))
        self.transitions = tuple(transitions)
        self._eps: dict[int, list[int]] = {q: [] for q in self.states}
        self._out: dict[int, list[tuple[AsyncEvent, int]]] = {q: [] for q in self.states}
        for src, label, dst in self.transitions:
            if label is None:
                self._eps[src].append(dst)
            else:
                self._out[src].append((label, dst))
        self._closure: dict[int, frozenset[int]] = {}
        self._post: dict[tuple[int, AsyncEvent], frozenset[int]] = {}

    def edges(self, q: int) -> list[tuple[AsyncEvent, int]]:
        """Visible (non-epsilon) transitions leaving ``q``."""
        return self._out[q]

    def closure_of(self, q: int) -> frozenset[int]:
        cached = self._closure.get(q)
        if cached is None:
            seen = {q}
            stack = [q]
            while stack:
                for nxt in self._eps[stack.pop()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            cached = self._closure[q] = frozenset(seen)
        return cached

    def closure(self, qs: Iterable[int]) -> frozenset[int]:
        out: set[int] = set()
        for q in qs:
            out |= self.closure_of(q)
        return frozenset(out)

    def post_of(self, q: int, x: AsyncEvent) -> frozenset[int]:
        """States reached from ``q`` by one ``x`` edge followed by epsilons."""
        key = (q, x)
        cached = self._post.get(key)
        if cached is None:
            cached = self._post[key] = self.closure(dst for ev, dst in self._out[q] if ev == x)
        return cached

    def post(self, qs: Iterable[int], x: AsyncEvent) -> frozenset[int]:
        out: set[int] = set()
        for q in qs:
            out |= self.post_of(q, x)
        return frozenset(out)

    def events_from(self, qs: Iterable[int]) -> set[AsyncEvent]:
        return {ev for q in qs for ev, _ in self._out[q]}


def erase(g: GlobalType, role: str) -> ErasureMachine:
    cache = g._cache.setdefault("erasure", {})
    machine = cache.get(role)
    if machine is None:
        machine = cache[role] = ErasureMachine(g, role)
    return machine


class MachineError(ValueError):
    pass


class Nondeterminism(MachineError):
    pass


State = Hashable


class LocalMachine:
    """Deterministic finite state machine over one role's asynchronous events."""

    def __init__(
        self,
        role: str,
        states: Iterable[State],
        initial: State,
        finals: Iterable[State],
        transitions: Iterable[tuple[State, AsyncEvent, State]],
        names: Optional[dict[State, str]] = None,
    ):
        self.role = role
        self.states: tuple[State, ...] = tuple(dict.fromkeys(states))
        known = set(self.states)
        if initial not in known:
            raise MachineError(f"unknown initial state {initial!r}")
        self.initial = initial
        self.finals = frozenset(finals)
        for s in self.finals - known:
            raise MachineError(f"unknown final state {s!r}")
        self.delta: dict[tuple[State, AsyncEvent], State] = {}
        self._out: dict[State, list[tuple[AsyncEvent, State]]] = {s: [] for s in self.states}
        for src, event, dst in transitions:
            if src not in known or dst not in known:
                bad = src if src not in known else dst
                raise MachineError(f"transition {src!r} {event} {dst!r} uses unknown state {bad!r}")
            if event.active != role:
                raise MachineError(f"event {event} is not performed by role {role!r}")
            if (src, event) in self.delta:
                raise Nondeterminism(f"two transitions from {src!r} labelled {event}")
            self.delta[(src, event)] = dst
            self._out[src].append((event, dst))
        for edges in self._out.values():
            edges.sort(key=lambda e: event_sort_key(e[0]))
        self._names = dict(names or {})

    def out(self, s: State) -> list[tuple[AsyncEvent, State]]:
        return self._out[s]

    def step(self, s: State, event: AsyncEvent) -> Optional[State]:
        return self.delta.get((s, event))

    @property
    def transitions(self) -> list[tuple[State, AsyncEvent, State]]:
        return [(s, ev, d) for s in self.states for ev, d in self._out[s]]

    def is_final(self, s: State) -> bool:
        return s in self.finals

    def name(self, s: State) -> str:
        if s in self._names:
            return self._names[s]
        if isinstance(s, frozenset):
            return "{" + ",".join(str(q) for q in sorted(s)) + "}"
        return str(s)

    def resolve(self, name_or_state) -> State:
        """Accept either a state or its printed name."""
        if name_or_state in self._out:
            return name_or_state
        for s in self.states:
            if self.name(s) == name_or_state:
                return s
        raise KeyError(f"no state named {name_or_state!r}")

    def reachable(self) -> set[State]:
        seen = {self.initial}
        queue = deque([self.initial])
        while queue:
            for _, dst in self._out[queue.popleft()]:
                if dst not in seen:
                    seen.add(dst)
                    queue.append(dst)
        return seen

    def __len__(self) -> int:
        return len(self.states)

    def __repr__(self) -> str:
        return f"LocalMachine(role={self.role!r}, states={len(self.states)}, transitions={len(self.delta)})"


def subset_construction(g: GlobalType, role: str) -> LocalMachine:
    cache = g._cache.setdefault("subset", {})
    if role in cache:
        return cache[role]
    erasure = erase(g, role)
    initial = erasure.closure_of(erasure.initial)
    states = [initial]
    seen = {initial}
    transitions = []
    queue = deque([initial])
    while queue:
        s = queue.popleft()
        for x in sorted(erasure.events_from(s), key=event_sort_key):
            target = erasure.post(s, x)
            if not target:
                continue
            transitions.append((s, x, target))
            if target not in seen:
                seen.add(target)
                states.append(target)
                queue.append(target)
    finals = [s for s in states if s & erasure.finals]
    machine = cache[role] = LocalMachine(role, states, initial, finals, transitions)
    return machine


def classify_states(g: GlobalType, role: str) -> tuple[frozenset[int], frozenset[int]]:
    """(send-originating, receive-originating) GAut states for ``role``."""
    sends, recvs = set(), set()
    for node in g.nodes:
        if isinstance(node, Choice):
            if node.sender == role:
                sends.add(node.id)
            if any(b.receiver == role for b in node.branches):
                recvs.add(node.id)
    return frozenset(sends), frozenset(recvs)


# ---------------------------------------------------------------------------
# Machine text format
# ---------------------------------------------------------------------------


def parse_machine(text: str) -> LocalMachine:
    """Parse the line-oriented machine format.

    ::

        role p
        state a0 initial
        state a1 final
        a0 p<q?m a1
    """
    role = None
    states: list[str] = []
    initial = None
    finals: list[str] = []
    transitions: list[tuple[str, AsyncEvent, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            if words[0] == "role":
                if len(words) != 2:
                    raise MachineError("expected 'role <ident>'")
                role = words[1]
            elif words[0] == "state":
                if len(words) < 2:
                    raise MachineError("expected 'state <ident> [initial] [final]'")
                name, flags = words[1], words[2:]
                for flag in flags:
                    if flag not in ("initial", "final"):
                        raise MachineError(f"unknown state flag {flag!r}")
                states.append(name)
                if "initial" in flags:
                    if initial is not None:
                        raise MachineError("more than one initial state")
                    initial = name
                if "final" in flags:
                    finals.append(name)
            elif len(words) == 3:
                src, event, dst = words[0], parse_event(words[1]), words[2]
                if role is not None and event.active != role:
                    raise MachineError(f"event {event} is not performed by role {role!r}")
                if any(t[0] == src and t[1] == event for t in transitions):
                    raise Nondeterminism(f"two transitions from {src!r} labelled {event}")
                transitions.append((src, event, dst))
            else:
                raise MachineError(f"cannot read {line!r}")
        except MachineError as exc:
            raise type(exc)(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise MachineError(f"line {lineno}: {exc}") from None
    if role is None:
        raise MachineError("missing 'role' declaration")
    if initial is None:
        raise MachineError("no initial state")
    return LocalMachine(role, states, initial, finals, transitions)


def format_machine(machine: LocalMachine, names: Optional[dict] = None) -> str:
    """Render ``machine`` in the text format accepted by :func:`parse_machine`.

    States whose printed name is not a plain identifier are renamed ``s0, s1, ...``
    and the original name is kept in a comment.
    """
    rename = {}
    for i, s in enumerate(machine.states):
        label = (names or {}).get(s, machine.name(s))
        rename[s] = label if label.replace("_", "a").isalnum() else f"s{i}"
    lines = [f"role {machine.role}"]
    for s in machine.states:
        flags = []
        if s == machine.initial:
            flags.append("initial")
        if s in machine.finals:
            flags.append("final")
        line = " ".join(["state", rename[s], *flags])
        if rename[s] != machine.name(s):
            line += f"  # {machine.name(s)}"
        lines.append(line)
    for src, ev, dst in machine.transitions:
        lines.append(f"{rename[src]} {ev} {rename[dst]}")
    return "\n".join(lines) + "\n"
