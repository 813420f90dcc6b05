"""Shared corpus of global types and candidate machines."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

from mst.automata import LocalMachine, parse_machine
from mst.events import parse_event
from mst.syntax import GlobalType, generate_gn, parse_global_type

CORPUS = Path(__file__).parent / "corpus"
TYPES_DIR = CORPUS / "types"
MACHINES_DIR = CORPUS / "machines"


@lru_cache(maxsize=None)
def load_type(name: str) -> GlobalType:
    if name.startswith("gn_"):
        return generate_gn(int(name[3:]))
    return parse_global_type((TYPES_DIR / f"{name}.mst").read_text())


@lru_cache(maxsize=None)
def load_machine(name: str) -> LocalMachine:
    return parse_machine((MACHINES_DIR / f"{name}.fsm").read_text())


def type_path(name: str) -> str:
    return str(TYPES_DIR / f"{name}.mst")


def machine_path(name: str) -> str:
    return str(MACHINES_DIR / f"{name}.fsm")


def word(*texts: str):
    return tuple(parse_event(t) for t in texts)


# every implementable type in the corpus
TYPE_NAMES = sorted(p.stem for p in TYPES_DIR.glob("*.mst") if not p.stem.startswith("bad_")) + [
    "gn_1",
    "gn_2",
    "gn_3",
]
NON_IMPLEMENTABLE = sorted(p.stem for p in TYPES_DIR.glob("bad_*.mst"))


@dataclass(frozen=True)
class Candidate:
    type: str
    machine: str
    c2_prime: bool  # expected verdict of check_c2_prime
    supertype: Optional[str] = None
    c2: Optional[bool] = None  # expected verdict of check_c2 against the supertype

    @property
    def id(self) -> str:
        return f"{self.type}:{self.machine}" + (f"<{self.supertype}" if self.supertype else "")


CANDIDATES = [
    Candidate("one_sender", "p_either_first", True, "p_q_only", True),
    Candidate("two_senders", "p_either_first", False, "p_q_then_r", False),
    Candidate("one_sender", "p_q_only", True, "p_q_only", True),
    Candidate("two_senders", "p_q_then_r", True, "p_q_then_r", True),
    Candidate("echo", "echo_p_merged", True),
    Candidate("echo", "echo_p_universal", True),
    Candidate("echo", "echo_p_unreachable", True),
    Candidate("echo_notify", "echo_notify_p_split", True),
    Candidate("echo_notify", "echo_notify_p_merged", True),
    Candidate("echo", "echo_p_send_pruned", True),
    Candidate("echo", "echo_p_receive_pruned", False),
    Candidate("g_loop", "g_loop_q_idle", False),
    Candidate("g_prime", "g_prime_q", False),
    Candidate("g_prime", "g_prime_r", False),
    Candidate("v01_o_then_b", "v01_q_universal", True),
    Candidate("gn_1", "gn_q_universal", True),
    Candidate("gn_2", "gn_q_universal", True),
    Candidate("gn_3", "gn_q_universal", True),
]

# machines that keep the full behaviour of the subset construction (C1 candidates)
C1_REPLACEMENTS = [
    ("echo", "echo_p_merged"),
    ("echo", "echo_p_universal"),
    ("echo", "echo_p_unreachable"),
    ("echo_notify", "echo_notify_p_split"),
    ("echo_notify", "echo_notify_p_merged"),
]
