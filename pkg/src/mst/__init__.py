"""Projection, implementability and refinement checks for multiparty session
types with sender-driven choice."""

from .automata import LocalMachine, build_gaut, erase, format_machine, parse_machine, subset_construction
from .checks import Verdict, Violation, check_c1, check_c2, check_c2_prime, check_implementable, reproduces
from .decoration import decorate, decorate_supertype, tr_sets, tr_sets_machine
from .events import AsyncEvent, SyncEvent, parse_event, recv, send
from .messages import BlockedSet, available_messages
from .oracle import CSM, bounded_trace_compare, bounded_trace_inclusion, closure_check, explore, indist_neighbors
from .syntax import GlobalType, ParseError, generate_gn, parse_global_type, pretty, validate

__version__ = "0.1.0"
