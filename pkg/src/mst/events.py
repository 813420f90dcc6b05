"""Synchronous and asynchronous communication events."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence


class Kind(str, Enum):
    SEND = "!"
    RECV = "?"


@dataclass(frozen=True, order=True)
class SyncEvent:
    """``sender -> receiver : message``, an atomic exchange in a global type."""

    sender: str
    receiver: str
    message: str

    def __post_init__(self) -> None:
        if self.sender == self.receiver:
            raise ValueError(f"sender and receiver coincide in {self}")

    def __str__(self) -> str:
        return f"{self.sender}->{self.receiver}:{self.message}"


@dataclass(frozen=True, order=True)
class AsyncEvent:
    """One half of an exchange, seen by the role that performs it.

    ``AsyncEvent(SEND, p, q, m)`` is ``p>q!m`` (p sends m to q);
    ``AsyncEvent(RECV, p, q, m)`` is ``p<q?m`` (p receives m from q).
    """

    kind: Kind
    active: str
    peer: str
    message: str

    def __post_init__(self) -> None:
        if self.active == self.peer:
            raise ValueError(f"active role and peer coincide in {self}")

    @property
    def is_send(self) -> bool:
        return self.kind is Kind.SEND

    @property
    def is_recv(self) -> bool:
        return self.kind is Kind.RECV

    @property
    def channel(self) -> tuple[str, str]:
        """The (sender, receiver) channel this event writes to or reads from."""
        if self.is_send:
            return (self.active, self.peer)
        return (self.peer, self.active)

    def matching_send(self) -> AsyncEvent:
        """For a receive ``p<q?m`` return ``q>p!m``."""
        assert self.is_recv
        return send(self.peer, self.active, self.message)

    def __str__(self) -> str:
        if self.is_send:
            return f"{self.active}>{self.peer}!{self.message}"
        return f"{self.active}<{self.peer}?{self.message}"


def send(p: str, q: str, m: str) -> AsyncEvent:
    return AsyncEvent(Kind.SEND, p, q, m)


def recv(p: str, q: str, m: str) -> AsyncEvent:
    return AsyncEvent(Kind.RECV, p, q, m)


_EVENT_RE = re.compile(r"^(\w+)([<>])(\w+)([!?])(\w+)$")


def parse_event(text: str) -> AsyncEvent:
    """Parse ``p>q!m`` or ``p<q?m``."""
    match = _EVENT_RE.match(text.strip())
    if not match:
        raise ValueError(f"malformed event {text!r}")
    active, arrow, peer, mark, message = match.groups()
    if (arrow, mark) == (">", "!"):
        return send(active, peer, message)
    if (arrow, mark) == ("<", "?"):
        return recv(active, peer, message)
    raise ValueError(f"malformed event {text!r}: direction and kind disagree")


def split(event: SyncEvent) -> tuple[AsyncEvent, AsyncEvent]:
    return (
        send(event.sender, event.receiver, event.message),
        recv(event.receiver, event.sender, event.message),
    )


def split_word(word: Iterable[SyncEvent]) -> tuple[AsyncEvent, ...]:
    out: list[AsyncEvent] = []
    for event in word:
        out.extend(split(event))
    return tuple(out)


def project_word(word: Iterable[AsyncEvent], role: str) -> tuple[AsyncEvent, ...]:
    return tuple(x for x in word if x.active == role)


def is_prefix(u: Sequence, v: Sequence) -> bool:
    return len(u) <= len(v) and tuple(v[: len(u)]) == tuple(u)


def event_sort_key(event: AsyncEvent) -> tuple:
    # sends before receives, then peer, then message
    return (0 if event.is_send else 1, event.peer, event.message)
