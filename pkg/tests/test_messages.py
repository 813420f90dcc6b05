import pytest

from helpers import TYPE_NAMES, load_type
from mst.events import send
from mst.messages import BlockedSet, available_for, available_messages
from mst.oracle import CSM, explore
from mst.syntax import parse_global_type


def test_single_sender_to_blocked_role():
    assert available_for(load_type("one_sender"), 0, "p") == {send("q", "p", "m")}


def test_two_senders():
    g = load_type("two_senders")
    assert available_for(g, 0, "p") == {send("q", "p", "m"), send("r", "p", "m")}
    assert available_for(g, 1, "p") == {send("r", "p", "m")}


def test_blocked_sender_contributes_nothing():
    g = parse_global_type("p->q:m.0")
    assert available_messages(g, 0, BlockedSet.of("p")) == frozenset()


def test_later_message_on_same_channel_is_hidden():
    g = load_type("v09_pipeline")  # p->q:a . p->q:b . q->p:c
    assert available_for(g, 0, "q") == {send("p", "q", "a")}
    assert available_for(g, 1, "q") == {send("p", "q", "b")}
    # with p blocked nothing is ever sent
    assert available_for(g, 0, "p") == frozenset()


def test_blocking_propagates_to_receivers():
    g = load_type("v02_ring")  # p->q:m . q->r:m . r->p:m
    assert available_messages(g, 0, BlockedSet.of("q")) == {send("p", "q", "m")}
    assert available_messages(g, 0, BlockedSet.of("p")) == frozenset()


def test_unfold_once_then_guard():
    g = load_type("g_loop")
    log = []
    assert available_messages(g, 1, BlockedSet.of("q"), log) == {send("p", "q", "m")}
    assert log == [("unfold", "t"), ("guard", "t")]
    log = []
    available_messages(g, 0, BlockedSet.of("q"), log)
    assert log == [("guard", "t")]


def test_errors():
    g = load_type("two_senders")
    with pytest.raises(KeyError):
        available_messages(g, 99, BlockedSet.of("p"))
    with pytest.raises(ValueError):
        available_messages(g, 0, BlockedSet(frozenset()))


@pytest.mark.parametrize("name", TYPE_NAMES)
def test_members_are_sends_of_the_type(name):
    g = load_type(name)
    sends = {send(s, r, m) for s, r, m in _exchanges(g)}
    bound = len(g.roles) ** 2 * len(g.messages)
    for p in g.roles:
        for n in g.nodes:
            got = available_for(g, n.id, p)
            assert got <= sends and len(got) <= bound


def _exchanges(g):
    for n in g.nodes:
        for b in getattr(n, "branches", ()):
            yield n.sender, b.receiver, b.message


@pytest.mark.parametrize("name", TYPE_NAMES)
def test_channel_heads_are_available_when_role_is_stuck(name):
    g = load_type(name)
    csm = CSM.from_subsets(g)
    seen = set()
    frontier = [csm.initial]
    for _ in range(12):
        nxt = []
        for c in frontier:
            moves = csm.moves(c)
            for p in g.roles:
                if any(x.active == p for x, _ in moves):
                    continue
                state = csm.state(c, p)
                allowed = set().union(*(available_for(g, q, p) for q in state))
                # a head addressed to the stuck role was sent at or after its
                # current position, so it must be available there
                for (a, b), content in zip(csm.channels, c.channels):
                    if b == p and content:
                        assert send(a, b, content[0]) in allowed, (p, sorted(state), a, b, content)
            for _, c2 in moves:
                if c2 not in seen:
                    seen.add(c2)
                    nxt.append(c2)
        frontier = nxt
    assert explore(csm, 12, 2).deadlocks == []
