"""Implementability, protocol verification (C1) and protocol refinement (C2', C2).

Every check returns a :class:`Verdict`. Each :class:`Violation` carries the
state, transitions and witness needed to re-evaluate the violated condition,
which :func:`reproduces` does from scratch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Optional

from .automata import LocalMachine, classify_states, erase, subset_construction
from .decoration import decorate, decorate_supertype, tr_sets, tr_sets_machine
from .events import AsyncEvent, parse_event
from .messages import available_for
from .syntax import GlobalType, validate

log = logging.getLogger(__name__)

SEND_VALIDITY = "SendValidity"
RECEIVE_VALIDITY = "ReceiveValidity"
SEND_DECORATION_VALIDITY = "SendDecorationValidity"
RECEIVE_DECORATION_VALIDITY = "ReceiveDecorationValidity"
TRANSITION_EXHAUSTIVITY = "TransitionExhaustivity"
FINAL_STATE_VALIDITY = "FinalStateValidity"
SEND_PRESERVATION = "SendPreservation"
RECEIVE_EXHAUSTIVITY = "ReceiveExhaustivity"
SEND_DECORATION_SUBTYPE_VALIDITY = "SendDecorationSubtypeValidity"
RECEIVE_DECORATION_SUBTYPE_VALIDITY = "ReceiveDecorationSubtypeValidity"
SEND_SUBTYPE_PRESERVATION = "SendSubtypePreservation"
RECEIVE_SUBTYPE_EXHAUSTIVITY = "ReceiveSubtypeExhaustivity"

# violations of these show up as a deadlock or missing behaviour
DEADLOCK_CLASS = frozenset(
    {
        TRANSITION_EXHAUSTIVITY,
        FINAL_STATE_VALIDITY,
        SEND_PRESERVATION,
        RECEIVE_EXHAUSTIVITY,
        SEND_SUBTYPE_PRESERVATION,
        RECEIVE_SUBTYPE_EXHAUSTIVITY,
    }
)

Transition = tuple[Hashable, AsyncEvent, Hashable]


class InvalidGlobalType(ValueError):
    pass


class RoleMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    condition: str
    role: str
    state: Hashable
    transitions: tuple[Transition, ...] = ()
    witness_node: Optional[int] = None
    witness_event: Optional[AsyncEvent] = None
    witness_supertype_state: Optional[Hashable] = None

    def to_json(self, machine: Optional[LocalMachine] = None) -> dict:
        name = machine.name if machine is not None else str
        out = {
            "condition": self.condition,
            "role": self.role,
            "state": name(self.state),
            "transitions": [[name(s), str(x), name(d)] for s, x, d in self.transitions],
            "witness_node": self.witness_node,
            "witness_event": None if self.witness_event is None else str(self.witness_event),
        }
        if self.witness_supertype_state is not None:
            out["witness_supertype_state"] = str(self.witness_supertype_state)
        return out

    @classmethod
    def from_json(cls, doc: Mapping) -> "Violation":
        """Rebuild a violation from :meth:`to_json` output; states stay as names."""
        event = doc.get("witness_event")
        return cls(
            condition=doc["condition"],
            role=doc["role"],
            state=doc["state"],
            transitions=tuple((s, parse_event(x), d) for s, x, d in doc.get("transitions", ())),
            witness_node=doc.get("witness_node"),
            witness_event=None if event is None else parse_event(event),
            witness_supertype_state=doc.get("witness_supertype_state"),
        )

    def __str__(self) -> str:
        parts = [f"{self.condition} for {self.role} at state {self.state}"]
        if self.transitions:
            parts.append("transitions " + ", ".join(f"{s} --{x}--> {d}" for s, x, d in self.transitions))
        if self.witness_node is not None:
            parts.append(f"witness node {self.witness_node}")
        if self.witness_event is not None:
            parts.append(f"witness event {self.witness_event}")
        if self.witness_supertype_state is not None:
            parts.append(f"supertype state {self.witness_supertype_state}")
        return "; ".join(parts)


@dataclass
class Verdict:
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed

    def conditions(self) -> set[str]:
        return {v.condition for v in self.violations}

    def to_json(self, machines: Optional[Mapping[str, LocalMachine]] = None) -> dict:
        machines = machines or {}
        return {
            "pass": self.passed,
            "violations": [v.to_json(machines.get(v.role)) for v in self.violations],
        }


def _require_valid(g: GlobalType) -> None:
    problems = validate(g)
    if problems:
        raise InvalidGlobalType("; ".join(str(p) for p in problems))


def _require_role(g: GlobalType, role: str) -> None:
    if role not in g.roles:
        raise RoleMismatch(f"role {role!r} does not occur in the global type")


# ---------------------------------------------------------------------------
# Shared condition evaluators. ``dec`` maps a local state to the global states
# that decorate it (d(s), or the union over d_B(s) for the subtype checks).
# ---------------------------------------------------------------------------


def _final_state(g, a: LocalMachine, dec, condition=FINAL_STATE_VALIDITY):
    out = []
    for s in a.states:
        hit = dec(s) & g.ends
        if hit and s not in a.finals:
            out.append(Violation(condition, a.role, s, witness_node=min(hit)))
    return out


def _exhaustive(g, a: LocalMachine, dec, condition, receives_only: bool):
    erasure = erase(g, a.role)
    out = []
    for s in a.states:
        reported = set()
        for q in sorted(dec(s)):
            for x, _ in erasure.edges(q):
                if receives_only and not x.is_recv:
                    continue
                if x in reported or a.step(s, x) is not None:
                    continue
                reported.add(x)
                out.append(Violation(condition, a.role, s, witness_node=q, witness_event=x))
    return out


def _send_preservation(g, a: LocalMachine, dec, condition):
    send_orig, _ = classify_states(g, a.role)
    out = []
    for s in a.states:
        hit = dec(s) & send_orig
        if hit and not any(x.is_send for x, _ in a.out(s)):
            out.append(Violation(condition, a.role, s, witness_node=min(hit)))
    return out


def _send_decoration(g, a: LocalMachine, d):
    out = []
    for s, x, s2 in a.transitions:
        if not x.is_send:
            continue
        origins, _ = tr_sets(g, a.role, d[s], x, d[s2])
        missing = d[s] - origins
        if missing:
            out.append(
                Violation(SEND_DECORATION_VALIDITY, a.role, s, ((s, x, s2),), witness_node=min(missing), witness_event=x)
            )
    return out


def _receive_conditions(
    g,
    a: LocalMachine,
    dests: Callable[[Hashable, AsyncEvent, Hashable], Iterable[int]],
    condition: str,
    alternatives_receive_only: bool = False,
):
    out = []
    for s in a.states:
        edges = a.out(s)
        for x1, s1 in edges:
            if not x1.is_recv:
                continue
            pending = x1.matching_send()
            for x, s2 in edges:
                if x.is_recv and x.peer == x1.peer:
                    continue
                if alternatives_receive_only and not x.is_recv:
                    continue
                for q in sorted(dests(s, x, s2)):
                    if pending in available_for(g, q, a.role):
                        out.append(
                            Violation(condition, a.role, s, ((s, x1, s1), (s, x, s2)), witness_node=q, witness_event=pending)
                        )
    return out


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_implementable(g: GlobalType) -> Verdict:
    """Send and Receive Validity of the subset construction for every role."""
    _require_valid(g)
    violations: list[Violation] = []
    for p in g.roles:
        c = subset_construction(g, p)
        for s, x, s2 in c.transitions:
            if x.is_send:
                origins, _ = tr_sets(g, p, s, x, s2)
                missing = s - origins
                if missing:
                    violations.append(
                        Violation(SEND_VALIDITY, p, s, ((s, x, s2),), witness_node=min(missing), witness_event=x)
                    )
        violations += _receive_conditions(
            g, c, lambda s, x, s2: tr_sets(g, p, s, x, s2)[1], RECEIVE_VALIDITY, alternatives_receive_only=True
        )
    return Verdict(violations)


def _c1_role(g: GlobalType, a: LocalMachine) -> list[Violation]:
    d = decorate(g, a)
    dec = d.__getitem__
    return (
        _final_state(g, a, dec)
        + _exhaustive(g, a, dec, TRANSITION_EXHAUSTIVITY, receives_only=False)
        + _send_decoration(g, a, d)
        + _receive_conditions(
            g, a, lambda s, x, s2: tr_sets(g, a.role, d[s], x, d[s2])[1], RECEIVE_DECORATION_VALIDITY
        )
    )


def check_c1(g: GlobalType, csm: Mapping[str, LocalMachine]) -> Verdict:
    """Does the CSM ``csm`` implement ``g``? (``g`` is assumed implementable.)"""
    _require_valid(g)
    if set(csm) != set(g.roles):
        raise RoleMismatch(f"CSM roles {sorted(csm)} differ from global type roles {sorted(g.roles)}")
    violations: list[Violation] = []
    for p in g.roles:
        if csm[p].role != p:
            raise RoleMismatch(f"machine given for {p!r} is a machine for {csm[p].role!r}")
        violations += _c1_role(g, csm[p])
    return Verdict(violations)


def check_c2_prime(g: GlobalType, a: LocalMachine) -> Verdict:
    """Can ``a`` replace the subset construction for its role in every
    well-behaved context?"""
    _require_valid(g)
    _require_role(g, a.role)
    d = decorate(g, a)
    dec = d.__getitem__
    violations = (
        _final_state(g, a, dec)
        + _exhaustive(g, a, dec, RECEIVE_EXHAUSTIVITY, receives_only=True)
        + _send_decoration(g, a, d)
        + _send_preservation(g, a, dec, SEND_PRESERVATION)
        + _receive_conditions(
            g, a, lambda s, x, s2: tr_sets(g, a.role, d[s], x, d[s2])[1], RECEIVE_DECORATION_VALIDITY
        )
    )
    return Verdict(violations)


def check_c2(g: GlobalType, b: LocalMachine, a: LocalMachine) -> Verdict:
    """Can ``a`` replace ``b`` in every well-behaved context?

    The verdict is only meaningful when ``b`` itself is safe in every
    well-behaved context; :func:`check_c2_prime` on ``b`` is a sufficient test.
    """
    _require_valid(g)
    if a.role != b.role:
        raise RoleMismatch(f"candidate is for {a.role!r} but supertype is for {b.role!r}")
    _require_role(g, a.role)
    db = decorate_supertype(g, b, a)
    dec = db.union
    violations = _final_state(g, a, dec)
    violations += _exhaustive(g, a, dec, RECEIVE_SUBTYPE_EXHAUSTIVITY, receives_only=True)
    for s, x, s2 in a.transitions:
        if not x.is_send:
            continue
        origins, _ = tr_sets_machine(b, db[s], x, db[s2])
        missing = db[s] - origins
        if missing:
            witness = sorted(missing, key=b.name)[0]
            violations.append(
                Violation(
                    SEND_DECORATION_SUBTYPE_VALIDITY,
                    a.role,
                    s,
                    ((s, x, s2),),
                    witness_event=x,
                    witness_supertype_state=b.name(witness),
                )
            )
    violations += _send_preservation(g, a, dec, SEND_SUBTYPE_PRESERVATION)

    def dests(s, x, s2):
        _, ts = tr_sets_machine(b, db[s], x, db[s2])
        out: set[int] = set()
        for t in ts:
            out |= db.base[t]
        return out

    violations += _receive_conditions(g, a, dests, RECEIVE_DECORATION_SUBTYPE_VALIDITY)
    return Verdict(violations)


# ---------------------------------------------------------------------------
# Re-evaluation of reported violations
# ---------------------------------------------------------------------------


def reproduces(
    violation: Violation,
    g: GlobalType,
    machine: Optional[LocalMachine] = None,
    supertype: Optional[LocalMachine] = None,
) -> bool:
    """Re-evaluate the formula named by ``violation`` on its recorded witness.

    ``machine`` is the checked machine for ``violation.role``; for
    implementability violations it defaults to the subset construction.
    ``violation.state`` and the transition endpoints may be states or their
    printed names.
    """
    cond = violation.condition
    p = violation.role
    if machine is None:
        if cond not in (SEND_VALIDITY, RECEIVE_VALIDITY):
            raise ValueError(f"{cond} needs the checked machine")
        machine = subset_construction(g, p)
    a = machine
    s = a.resolve(violation.state)
    trans = [(a.resolve(x), ev, a.resolve(y)) for x, ev, y in violation.transitions]
    for src, ev, dst in trans:
        if a.step(src, ev) != dst:
            return False
    node = violation.witness_node
    event = violation.witness_event

    subtype = cond in (
        SEND_DECORATION_SUBTYPE_VALIDITY,
        RECEIVE_DECORATION_SUBTYPE_VALIDITY,
        SEND_SUBTYPE_PRESERVATION,
        RECEIVE_SUBTYPE_EXHAUSTIVITY,
    ) or (cond == FINAL_STATE_VALIDITY and supertype is not None)
    if subtype:
        if supertype is None:
            raise ValueError(f"{cond} needs the supertype machine")
        db = decorate_supertype(g, supertype, a)
        dec = db.union
    elif cond in (SEND_VALIDITY, RECEIVE_VALIDITY):
        dec = lambda st: st  # subset states decorate themselves
    else:
        dec = decorate(g, a).__getitem__

    erasure = erase(g, p)
    if cond == FINAL_STATE_VALIDITY:
        return node in dec(s) and node in g.ends and s not in a.finals
    if cond in (TRANSITION_EXHAUSTIVITY, RECEIVE_EXHAUSTIVITY, RECEIVE_SUBTYPE_EXHAUSTIVITY):
        if cond != TRANSITION_EXHAUSTIVITY and not event.is_recv:
            return False
        enabled = any(x == event for x, _ in erasure.edges(node))
        return node in dec(s) and enabled and a.step(s, event) is None
    if cond in (SEND_PRESERVATION, SEND_SUBTYPE_PRESERVATION):
        send_orig, _ = classify_states(g, p)
        return node in dec(s) and node in send_orig and not any(x.is_send for x, _ in a.out(s))
    if cond in (SEND_VALIDITY, SEND_DECORATION_VALIDITY):
        (src, x, dst), = trans
        origins, _ = tr_sets(g, p, dec(src), x, dec(dst))
        return x.is_send and node in dec(src) and node not in origins
    if cond == SEND_DECORATION_SUBTYPE_VALIDITY:
        (src, x, dst), = trans
        t = supertype.resolve(violation.witness_supertype_state)
        origins, _ = tr_sets_machine(supertype, db[src], x, db[dst])
        return x.is_send and t in db[src] and t not in origins
    if cond in (RECEIVE_VALIDITY, RECEIVE_DECORATION_VALIDITY, RECEIVE_DECORATION_SUBTYPE_VALIDITY):
        (src1, x1, _), (src2, x, dst2) = trans
        if src1 != s or src2 != s or not x1.is_recv or (x.is_recv and x.peer == x1.peer):
            return False
        if cond == RECEIVE_VALIDITY and not x.is_recv:
            return False
        if event != x1.matching_send():
            return False
        if cond == RECEIVE_DECORATION_SUBTYPE_VALIDITY:
            _, ts = tr_sets_machine(supertype, db[s], x, db[dst2])
            dests = set().union(*(db.base[t] for t in ts)) if ts else set()
        else:
            _, dests = tr_sets(g, p, dec(s), x, dec(dst2))
        return node in dests and event in available_for(g, node, p)
    raise ValueError(f"unknown condition {cond!r}")
