"""Available messages: send events that may sit at a channel head while some
roles are blocked."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .events import AsyncEvent, send
from .syntax import Choice, End, GlobalType, Rec, Var


@dataclass(frozen=True)
class BlockedSet:
    roles: frozenset[str]
    unfolded: frozenset[str] = field(default_factory=frozenset)

    @classmethod
    def of(cls, *roles: str) -> BlockedSet:
        return cls(frozenset(roles))


def available_messages(
    g: GlobalType,
    node: int,
    blocked: BlockedSet,
    unfold_log: Optional[list] = None,
) -> frozenset[AsyncEvent]:
    """Available messages at subterm ``node`` when ``blocked.roles`` cannot move.

    A sender outside the blocked set contributes its first message to each
    receiver and hides any later message to that receiver behind it. Once a
    sender is blocked, its receivers are blocked too. Every recursion variable
    is unfolded at most once along a path.

    ``unfold_log``, when given, receives ``("unfold", var)`` and
    ``("guard", var)`` entries as variables are expanded or cut off.
    """
    if not blocked.roles:
        raise ValueError("blocked set must name at least one role")
    g.node(node)
    memo: dict[tuple[int, frozenset[str], frozenset[str]], frozenset[AsyncEvent]] = {}

    def go(nid: int, roles: frozenset[str], unfolded: frozenset[str]) -> frozenset[AsyncEvent]:
        key = (nid, roles, unfolded)
        if key in memo:
            return memo[key]
        n = g.nodes[nid]
        if isinstance(n, End):
            result: frozenset[AsyncEvent] = frozenset()
        elif isinstance(n, Rec):
            result = go(n.body.id, roles, unfolded | {n.var})
        elif isinstance(n, Var):
            if n.var in unfolded:
                if unfold_log is not None:
                    unfold_log.append(("guard", n.var))
                result = frozenset()
            else:
                if unfold_log is not None:
                    unfold_log.append(("unfold", n.var))
                body = g.nodes[g.binder[nid]].body
                result = go(body.id, roles, unfolded | {n.var})
        else:
            assert isinstance(n, Choice)
            acc: set[AsyncEvent] = set()
            if n.sender not in roles:
                for b in n.branches:
                    inner = go(b.cont.id, roles, unfolded)
                    acc |= {x for x in inner if x.channel != (n.sender, b.receiver)}
                    acc.add(send(n.sender, b.receiver, b.message))
            else:
                for b in n.branches:
                    acc |= go(b.cont.id, roles | {b.receiver}, unfolded)
            result = frozenset(acc)
        memo[key] = result
        return result

    return go(node, frozenset(blocked.roles), frozenset(blocked.unfolded))


def available_for(g: GlobalType, node: int, role: str) -> frozenset[AsyncEvent]:
    """Available messages at ``node`` with only ``role`` blocked (cached per type)."""
    cache = g._cache.setdefault("avail", {})
    key = (node, role)
    if key not in cache:
        cache[key] = available_messages(g, node, BlockedSet.of(role))
    return cache[key]
