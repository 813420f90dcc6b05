"""Global types: AST, concrete syntax, validation and the G_n family.

Concrete syntax::

    G      ::= "0" | "mu" IDENT "." G | IDENT | BRANCH | "(" BRANCH ("+" BRANCH)+ ")"
    BRANCH ::= IDENT "->" IDENT ":" IDENT "." G

``#`` starts a comment that runs to the end of the line.

Every AST node carries a positional ``id`` assigned in pre-order, so two equal
subterms at different positions are different nodes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Union

from .events import AsyncEvent, SyncEvent, recv, send


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line else ""
        super().__init__(f"{where}{message}")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class End:
    id: int = -1


@dataclass(frozen=True)
class Branch:
    receiver: str
    message: str
    cont: "Node"


@dataclass(frozen=True)
class Choice:
    sender: str
    branches: tuple[Branch, ...]
    id: int = -1

    def events(self) -> Iterator[tuple[SyncEvent, "Node"]]:
        for b in self.branches:
            yield SyncEvent(self.sender, b.receiver, b.message), b.cont


@dataclass(frozen=True)
class Rec:
    var: str
    body: "Node"
    id: int = -1


@dataclass(frozen=True)
class Var:
    var: str
    id: int = -1


Node = Union[End, Choice, Rec, Var]


def exchange(sender: str, receiver: str, message: str, cont: Node) -> Choice:
    """Singleton choice ``sender -> receiver : message . cont``."""
    return Choice(sender, (Branch(receiver, message, cont),))


def _children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, Choice):
        return tuple(b.cont for b in node.branches)
    if isinstance(node, Rec):
        return (node.body,)
    return ()


def _number(node: Node, counter: list[int]) -> Node:
    nid = counter[0]
    counter[0] += 1
    if isinstance(node, End):
        return End(nid)
    if isinstance(node, Var):
        return Var(node.var, nid)
    if isinstance(node, Rec):
        return Rec(node.var, _number(node.body, counter), nid)
    branches = tuple(
        Branch(b.receiver, b.message, _number(b.cont, counter)) for b in node.branches
    )
    return Choice(node.sender, branches, nid)


@dataclass(frozen=True)
class GlobalType:
    """A global type with its nodes indexed by pre-order position."""

    root: Node
    nodes: tuple[Node, ...] = field(repr=False)

    @classmethod
    def of(cls, tree: Node) -> GlobalType:
        root = _number(tree, [0])
        nodes: list[Node] = []
        stack = [root]
        while stack:
            node = stack.pop()
            nodes.append(node)
            stack.extend(reversed(_children(node)))
        assert [n.id for n in nodes] == list(range(len(nodes)))
        return cls(root, tuple(nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, nid: int) -> Node:
        if not 0 <= nid < len(self.nodes):
            raise KeyError(f"no node with id {nid}")
        return self.nodes[nid]

    def children(self, nid: int) -> tuple[int, ...]:
        return tuple(c.id for c in _children(self.nodes[nid]))

    @cached_property
    def parent(self) -> dict[int, int]:
        return {c: n.id for n in self.nodes for c in self.children(n.id)}

    @cached_property
    def binder(self) -> dict[int, int]:
        """Var node id -> id of the innermost enclosing Rec with the same name."""
        out: dict[int, int] = {}

        def walk(node: Node, env: dict[str, int]) -> None:
            if isinstance(node, Var):
                if node.var in env:
                    out[node.id] = env[node.var]
            elif isinstance(node, Rec):
                walk(node.body, {**env, node.var: node.id})
            else:
                for child in _children(node):
                    walk(child, env)

        walk(self.root, {})
        return out

    @cached_property
    def roles(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for n in self.nodes:
            if isinstance(n, Choice):
                seen.setdefault(n.sender)
                for b in n.branches:
                    seen.setdefault(b.receiver)
        return tuple(seen)

    @cached_property
    def messages(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for n in self.nodes:
            if isinstance(n, Choice):
                for b in n.branches:
                    seen.setdefault(b.message)
        return tuple(seen)

    @cached_property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.roles, self.messages)

    @cached_property
    def ends(self) -> frozenset[int]:
        return frozenset(n.id for n in self.nodes if isinstance(n, End))

    def head(self, nid: int) -> str:
        """Short rendering of a node's outermost construct."""
        node = self.nodes[nid]
        if isinstance(node, End):
            return "0"
        if isinstance(node, Var):
            return node.var
        if isinstance(node, Rec):
            return f"mu {node.var} . ..."
        return " + ".join(
            f"{node.sender}->{b.receiver}:{b.message}" for b in node.branches
        )

    # per-instance memo tables used by other modules
    @cached_property
    def _cache(self) -> dict:
        return {}

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class Alphabet:
    roles: tuple[str, ...]
    messages: tuple[str, ...]

    def sends(self, p: str) -> frozenset[AsyncEvent]:
        return frozenset(
            send(p, q, m) for q in self.roles if q != p for m in self.messages
        )

    def receives(self, p: str) -> frozenset[AsyncEvent]:
        return frozenset(
            recv(p, q, m) for q in self.roles if q != p for m in self.messages
        )

    def events(self, p: str) -> frozenset[AsyncEvent]:
        return self.sends(p) | self.receives(p)


# ---------------------------------------------------------------------------
# Parsing and printing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<zero>0)
  | (?P<punct>[:.+()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        if kind == "nl":
            line += 1
            line_start = match.end()
        elif kind not in ("ws", "comment"):
            value = match.group()
            if kind == "ident" and value == "mu":
                kind = "mu"
            elif kind in ("punct", "arrow"):
                kind = value
            tokens.append(_Token(kind, value, line, pos - line_start + 1))
        pos = match.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> _Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def expect(self, kind: str) -> _Token:
        tok = self.tok
        if tok.kind != kind:
            found = tok.text or "end of input"
            raise ParseError(f"expected {kind!r}, found {found!r}", tok.line, tok.column)
        self.pos += 1
        return tok

    def parse(self) -> Node:
        node = self.global_type(bound=())
        self.expect("eof")
        return node

    def global_type(self, bound: tuple[str, ...]) -> Node:
        tok = self.tok
        if tok.kind == "zero":
            self.pos += 1
            return End()
        if tok.kind == "mu":
            self.pos += 1
            var = self.expect("ident").text
            self.expect(".")
            return Rec(var, self.global_type(bound + (var,)))
        if tok.kind == "(":
            self.pos += 1
            first_tok = self.tok
            branches = [self.branch(bound)]
            while self.tok.kind == "+":
                self.pos += 1
                branches.append(self.branch(bound))
            self.expect(")")
            if len(branches) < 2:
                raise ParseError(
                    "parenthesised choice needs at least two branches",
                    first_tok.line,
                    first_tok.column,
                )
            senders = {s for s, _ in branches}
            if len(senders) > 1:
                raise ParseError(
                    f"choice branches have different senders {sorted(senders)}",
                    first_tok.line,
                    first_tok.column,
                )
            return Choice(branches[0][0], tuple(b for _, b in branches))
        if tok.kind == "ident":
            if self.peek().kind == "->":
                sender, branch = self.branch(bound)
                return Choice(sender, (branch,))
            self.pos += 1
            if tok.text not in bound:
                raise ParseError(f"unbound recursion variable {tok.text!r}", tok.line, tok.column)
            return Var(tok.text)
        found = tok.text or "end of input"
        raise ParseError(f"expected a global type, found {found!r}", tok.line, tok.column)

    def branch(self, bound: tuple[str, ...]) -> tuple[str, Branch]:
        sender = self.expect("ident").text
        self.expect("->")
        receiver = self.expect("ident").text
        self.expect(":")
        message = self.expect("ident").text
        self.expect(".")
        return sender, Branch(receiver, message, self.global_type(bound))


def parse_global_type(text: str) -> GlobalType:
    """Parse concrete syntax into a :class:`GlobalType` (not validated)."""
    return GlobalType.of(_Parser(text).parse())


def pretty(g: GlobalType | Node) -> str:
    node = g.root if isinstance(g, GlobalType) else g
    if isinstance(node, End):
        return "0"
    if isinstance(node, Var):
        return node.var
    if isinstance(node, Rec):
        return f"mu {node.var} . {pretty(node.body)}"
    parts = [f"{node.sender} -> {b.receiver} : {b.message} . {pretty(b.cont)}" for b in node.branches]
    if len(parts) == 1:
        return parts[0]
    return "(" + " + ".join(parts) + ")"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    node: int
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.rule} at node {self.node}: {self.detail}"


BRANCH_DISTINCTNESS = "BranchDistinctness"
SELF_MESSAGE = "SelfMessage"
UNGUARDED_RECURSION = "UnguardedRecursion"
UNBOUND_VARIABLE = "UnboundVariable"


def validate(g: GlobalType) -> list[Violation]:
    out: list[Violation] = []
    for node in g.nodes:
        if isinstance(node, Choice):
            seen = set()
            for b in node.branches:
                if b.receiver == node.sender:
                    out.append(Violation(node.id, SELF_MESSAGE, f"{node.sender} sends to itself"))
                key = (b.receiver, b.message)
                if key in seen:
                    out.append(
                        Violation(node.id, BRANCH_DISTINCTNESS, f"duplicate branch {b.receiver}:{b.message}")
                    )
                seen.add(key)
        elif isinstance(node, Var):
            rec = g.binder.get(node.id)
            if rec is None:
                out.append(Violation(node.id, UNBOUND_VARIABLE, f"{node.var} is not bound"))
                continue
            # walk up to the binder; an unguarded path crosses only Rec nodes
            cur = g.parent.get(node.id)
            guarded = False
            while cur is not None and cur != rec:
                if isinstance(g.nodes[cur], Choice):
                    guarded = True
                    break
                cur = g.parent.get(cur)
            if not guarded:
                out.append(
                    Violation(rec, UNGUARDED_RECURSION, f"no exchange between mu {node.var} and {node.var}")
                )
    return out


def get_mu(g: GlobalType) -> dict[str, int]:
    """Recursion variable -> id of the body of its binder."""
    return {n.var: n.body.id for n in g.nodes if isinstance(n, Rec)}


# ---------------------------------------------------------------------------
# The G_n family
# ---------------------------------------------------------------------------


def _chain(i: int) -> Node:
    if i == 0:
        return exchange("p", "q", "a", Var("t_1"))
    loop = f"t_3_{i}"
    body = Choice(
        "p",
        (
            Branch("r", "m_3", exchange("p", "q", "b", Var(loop))),
            Branch("r", "n_3", _chain(i - 1)),
        ),
    )
    return exchange("p", "q", "a", Rec(loop, body))


def _scaffold(inner: Node) -> Node:
    inner_loop = Rec(
        "t_2",
        Choice(
            "p",
            (
                Branch("r", "m_2", exchange("p", "q", "a", Var("t_2"))),
                Branch("r", "n_2", inner),
            ),
        ),
    )
    return Rec(
        "t_1",
        Choice("p", (Branch("r", "m_1", inner_loop), Branch("r", "n_1", End()))),
    )


def generate_gn(n: int) -> GlobalType:
    """Global type whose projection onto ``q`` tracks ``(a*(ab*)^n a)*``."""
    if n < 1:
        raise ValueError("n must be positive")
    return GlobalType.of(_scaffold(_chain(n)))
