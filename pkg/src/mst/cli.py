"""Command-line front end: ``mst <verb> ...``.

Exit codes: 0 on success or pass, 1 when a check fails, 2 on usage or
input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import checks
from .automata import LocalMachine, MachineError, format_machine, parse_machine, subset_construction
from .decoration import decorate
from .messages import BlockedSet, available_messages
from .oracle import CSM, explore
from .syntax import Choice, End, GlobalType, ParseError, Rec, Var, generate_gn, parse_global_type, pretty, validate

log = logging.getLogger("mst")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_type(path: str, require_valid: bool = True) -> GlobalType:
    try:
        g = parse_global_type(_read(path))
    except ParseError as exc:
        raise InputError(f"{path}: {exc}") from None
    if require_valid:
        problems = validate(g)
        if problems:
            raise InputError(f"{path}: " + "; ".join(map(str, problems)))
    return g


def _load_machine(path: str, g: GlobalType, role: Optional[str] = None) -> LocalMachine:
    try:
        machine = parse_machine(_read(path))
    except MachineError as exc:
        raise InputError(f"{path}: {exc}") from None
    if role is not None and machine.role != role:
        raise InputError(f"{path}: machine is for role {machine.role!r}, expected {role!r}")
    if machine.role not in g.roles:
        raise InputError(f"{path}: role {machine.role!r} does not occur in the global type")
    return machine


def _bindings(pairs: Sequence[str], g: GlobalType) -> dict[str, LocalMachine]:
    out = {}
    for item in pairs or ():
        role, sep, path = item.partition("=")
        if not sep or not role or not path:
            raise InputError(f"expected ROLE=FILE, got {item!r}")
        if role in out:
            raise InputError(f"role {role!r} bound twice")
        out[role] = _load_machine(path, g, role)
    return out


def _require_role(g: GlobalType, role: str) -> None:
    if role not in g.roles:
        raise InputError(f"role {role!r} does not occur in the global type (roles: {', '.join(g.roles)})")


class Output:
    def __init__(self, args):
        self.json = args.json
        self.quiet = args.quiet

    def say(self, text: str = "") -> None:
        if not self.json and not self.quiet:
            print(text)

    def emit(self, doc) -> None:
        if self.json:
            json.dump(doc, sys.stdout, indent=2)
            sys.stdout.write("\n")


def _verdict(out: Output, verdict: checks.Verdict, machines=None, heading: str = "") -> int:
    out.emit(verdict.to_json(machines))
    if verdict.passed:
        out.say(f"{heading}PASS")
        return EXIT_OK
    out.say(f"{heading}FAIL ({len(verdict.violations)} violation{'s' if len(verdict.violations) != 1 else ''})")
    for v in verdict.violations:
        out.say(f"  {v}")
    return EXIT_FAIL


# ---------------------------------------------------------------------------
# Verbs
# ---------------------------------------------------------------------------


def _node_json(g: GlobalType, n) -> dict:
    doc = {"id": n.id, "kind": type(n).__name__.lower(), "children": list(g.children(n.id))}
    if isinstance(n, Choice):
        doc["sender"] = n.sender
        doc["branches"] = [{"receiver": b.receiver, "message": b.message, "cont": b.cont.id} for b in n.branches]
    elif isinstance(n, (Rec, Var)):
        doc["var"] = n.var
        if isinstance(n, Var) and n.id in g.binder:
            doc["binder"] = g.binder[n.id]
    return doc


def cmd_parse(args, out: Output) -> int:
    g = _load_type(args.type, require_valid=False)
    problems = validate(g)
    out.emit(
        {
            "pretty": pretty(g),
            "roles": list(g.roles),
            "nodes": [_node_json(g, n) for n in g.nodes],
            "violations": [{"node": v.node, "rule": v.rule, "detail": v.detail} for v in problems],
        }
    )
    out.say(pretty(g))
    out.say(f"roles: {', '.join(g.roles)}")
    for n in g.nodes:
        kind = "end" if isinstance(n, End) else type(n).__name__.lower()
        out.say(f"  {n.id:3d}  {kind:6s}  {g.head(n.id)}")
    for v in problems:
        out.say(f"invalid: {v}")
    return EXIT_FAIL if problems else EXIT_OK


def _machine_json(m: LocalMachine) -> dict:
    return {
        "role": m.role,
        "states": [m.name(s) for s in m.states],
        "initial": m.name(m.initial),
        "finals": [m.name(s) for s in m.states if s in m.finals],
        "transitions": [[m.name(s), str(x), m.name(d)] for s, x, d in m.transitions],
    }


def cmd_project(args, out: Output) -> int:
    g = _load_type(args.type)
    roles = args.role or list(g.roles)
    for r in roles:
        _require_role(g, r)
    machines = {r: subset_construction(g, r) for r in roles}
    out.emit({r: _machine_json(m) for r, m in machines.items()})
    for r, m in machines.items():
        out.say(format_machine(m))
    return EXIT_OK


def cmd_implementable(args, out: Output) -> int:
    g = _load_type(args.type)
    verdict = checks.check_implementable(g)
    machines = {p: subset_construction(g, p) for p in g.roles}
    return _verdict(out, verdict, machines)


def cmd_verify(args, out: Output) -> int:
    g = _load_type(args.type)
    csm = _bindings(args.machine, g)
    missing = [p for p in g.roles if p not in csm]
    if missing:
        raise InputError(f"no --machine given for role(s) {', '.join(missing)}")
    if args.check_implementable:
        pre = checks.check_implementable(g)
        if not pre.passed:
            log.warning("global type is not implementable; the verdict below is not meaningful")
            for v in pre.violations:
                log.warning("  %s", v)
    return _verdict(out, checks.check_c1(g, csm), csm)


def cmd_refine(args, out: Output) -> int:
    g = _load_type(args.type)
    _require_role(g, args.role)
    a = _load_machine(args.candidate, g, args.role)
    if args.against:
        b = _load_machine(args.against, g, args.role)
        verdict = checks.check_c2(g, b, a)
    else:
        verdict = checks.check_c2_prime(g, a)
    return _verdict(out, verdict, {args.role: a})


def cmd_decorate(args, out: Output) -> int:
    g = _load_type(args.type)
    if args.machine:
        machine = _load_machine(args.machine, g, args.role)
    elif args.role:
        _require_role(g, args.role)
        machine = subset_construction(g, args.role)
    else:
        raise InputError("give a machine file or --role")
    d = decorate(g, machine)
    out.emit(
        {
            "role": machine.role,
            "iterations": d.iterations,
            "decoration": {machine.name(s): sorted(d[s]) for s in machine.states},
        }
    )
    for s in machine.states:
        out.say(f"{machine.name(s)}: {{{', '.join(map(str, sorted(d[s])))}}}")
        for q in sorted(d[s]):
            out.say(f"    {q:3d}  {g.head(q)}")
    return EXIT_OK


def cmd_avail(args, out: Output) -> int:
    g = _load_type(args.type)
    for r in args.blocked:
        _require_role(g, r)
    try:
        g.node(args.node)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    events = sorted(available_messages(g, args.node, BlockedSet.of(*args.blocked)), key=str)
    out.emit({"node": args.node, "blocked": sorted(set(args.blocked)), "available": [str(x) for x in events]})
    out.say(", ".join(map(str, events)) or "(none)")
    return EXIT_OK


def cmd_simulate(args, out: Output) -> int:
    if args.depth < 1 or args.channel < 1:
        raise InputError("--depth and --channel must be at least 1")
    g = _load_type(args.type)
    csm = CSM.from_subsets(g, _bindings(args.machine, g))
    report = explore(csm, args.depth, args.channel)
    out.emit(report.to_json(csm))
    out.say(f"reachable configurations: {report.reachable}")
    out.say(f"terminated traces: {len(report.terminated)}{' (capped)' if report.terminated_capped else ''}")
    out.say(f"truncated: {'yes' if report.truncated else 'no'}")
    if report.saturated:
        out.say("saturated channels: " + ", ".join(f"({a},{b})" for a, b in sorted(report.saturated)))
    out.say(f"deadlocks: {len(report.deadlocks)}")
    for d in report.deadlocks:
        info = csm.describe(d.config)
        states = " ".join(f"{p}={s}" for p, s in info["states"].items())
        chans = " ".join(f"({k})={v}" for k, v in info["channels"].items() if v)
        out.say(f"  [{states}] {chans or 'channels empty'} after {' '.join(map(str, d.trace)) or '(nothing)'}")
    return EXIT_FAIL if report.deadlocks else EXIT_OK


def cmd_gen_gn(args, out: Output) -> int:
    if args.n < 1:
        raise InputError("n must be positive")
    text = pretty(generate_gn(args.n))
    out.emit({"n": args.n, "type": text})
    if not out.json:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--json", action="store_true", default=default(False), help="emit one JSON document on stdout")
    parser.add_argument("--quiet", action="store_true", default=default(False), help="no human-readable output")
    parser.add_argument("--seed", type=int, default=default(None), help="accepted for compatibility; all algorithms are deterministic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mst", description="Multiparty session type projection and refinement checks.")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    def verb(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = verb("parse", cmd_parse, "parse and validate a global type")
    p.add_argument("type")

    p = verb("project", cmd_project, "print subset-construction machines")
    p.add_argument("type")
    p.add_argument("--role", action="append", help="role to project onto (repeatable; default all)")

    p = verb("implementable", cmd_implementable, "check implementability")
    p.add_argument("type")

    p = verb("verify", cmd_verify, "check that a CSM implements a global type")
    p.add_argument("type")
    p.add_argument("--machine", action="append", metavar="ROLE=FILE", required=True)
    p.add_argument("--check-implementable", action="store_true", help="warn if the type is not implementable")

    p = verb("refine", cmd_refine, "check that a machine can replace one role's implementation")
    p.add_argument("type")
    p.add_argument("--role", required=True)
    p.add_argument("--candidate", required=True, metavar="FILE")
    p.add_argument("--against", metavar="FILE", help="supertype machine (default: the subset construction)")

    p = verb("decorate", cmd_decorate, "print the state decoration of a machine")
    p.add_argument("type")
    p.add_argument("machine", nargs="?", help="machine file (default: the subset construction for --role)")
    p.add_argument("--role")

    p = verb("avail", cmd_avail, "available messages at a node")
    p.add_argument("type")
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--role", "--blocked", dest="blocked", action="append", required=True, metavar="ROLE",
                   help="blocked role (repeatable)")

    p = verb("simulate", cmd_simulate, "bounded exploration of a CSM")
    p.add_argument("type")
    p.add_argument("--machine", action="append", metavar="ROLE=FILE", help="override a role's machine")
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--channel", type=int, default=2)

    p = verb("gen-gn", cmd_gen_gn, "print the G_n family member")
    p.add_argument("n", type=int)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="mst: %(message)s")
    out = Output(args)
    try:
        return args.func(args, out)
    except (InputError, checks.RoleMismatch, checks.InvalidGlobalType) as exc:
        print(f"mst: error: {exc}", file=sys.stderr)
        out.emit({"error": str(exc)})
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
