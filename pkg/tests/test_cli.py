import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from helpers import CANDIDATES, NON_IMPLEMENTABLE, TYPE_NAMES, load_machine, load_type, machine_path, type_path
from mst import checks
from mst.automata import format_machine, subset_construction
from mst.cli import main
from mst.syntax import parse_global_type, pretty


def schema(name):
    return json.loads(resources.files("mst").joinpath("schemas", name).read_text())


VERDICT = schema("verdict.schema.json")
REPORT = schema("report.schema.json")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, "--json", *argv)
    return code, json.loads(out), err


def _type_file(name, tmp_path):
    # G_n members are generated, the rest live in the corpus
    if not name.startswith("gn_"):
        return type_path(name)
    path = tmp_path / f"{name}.mst"
    path.write_text(pretty(load_type(name)))
    return str(path)


def refine_args(cand, tmp_path, against=True):
    args = ["refine", _type_file(cand.type, tmp_path), "--role", load_machine(cand.machine).role,
            "--candidate", machine_path(cand.machine)]
    if against and cand.supertype:
        args += ["--against", machine_path(cand.supertype)]
    return args


# -- worked examples -----------------------------------------------------------


def test_implementable_echo_choice(capsys):
    code, out, _ = run(capsys, "implementable", type_path("echo"))
    assert code == 0 and out.strip() == "PASS"


def test_refine_single_sender_context(capsys):
    code, out, _ = run(capsys, "refine", type_path("one_sender"), "--role", "p",
                       "--candidate", machine_path("p_either_first"), "--against", machine_path("p_q_only"))
    assert code == 0 and "PASS" in out


def test_refine_two_sender_context(capsys):
    code, doc, _ = run_json(capsys, "refine", type_path("two_senders"), "--role", "p",
                            "--candidate", machine_path("p_either_first"), "--against", machine_path("p_q_then_r"))
    assert code == 1 and not doc["pass"]
    assert checks.RECEIVE_DECORATION_SUBTYPE_VALIDITY in {v["condition"] for v in doc["violations"]}
    [v] = [v for v in doc["violations"] if v["condition"] == checks.RECEIVE_DECORATION_SUBTYPE_VALIDITY]
    assert v["witness_event"] == "r>p!m"


def test_not_implementable_exits_one(capsys):
    for name in NON_IMPLEMENTABLE:
        code, doc, _ = run_json(capsys, "implementable", type_path(name))
        assert code == 1 and doc["violations"]
        jsonschema.validate(doc, VERDICT)


# -- input errors ----------------------------------------------------------------


def test_verify_requires_every_role(capsys):
    code, _, err = run(capsys, "verify", type_path("two_senders"), "--machine", f"p={machine_path('p_either_first')}")
    assert code == 2 and "q" in err and "r" in err


def test_verify_requires_machine_flag(capsys):
    code, _, _ = run(capsys, "verify", type_path("two_senders"))
    assert code == 2


@pytest.mark.parametrize(
    "argv, fragment",
    [
        (["implementable", "/nonexistent/g.mst"], "cannot read"),
        (["refine", type_path("two_senders"), "--role", "z", "--candidate", machine_path("p_either_first")], "'z'"),
        (["refine", type_path("two_senders"), "--role", "q", "--candidate", machine_path("p_either_first")], "expected 'q'"),
        (["verify", type_path("two_senders"), "--machine", "p"], "ROLE=FILE"),
        (["avail", type_path("two_senders"), "--node", "99", "--role", "p"], "99"),
        (["simulate", type_path("two_senders"), "--depth", "0"], "at least 1"),
        (["gen-gn", "0"], "positive"),
        (["decorate", type_path("two_senders")], "--role"),
    ],
)
def test_input_errors(capsys, argv, fragment):
    code, out, err = run(capsys, *argv)
    assert code == 2 and fragment in err and out == ""


def test_bad_machine_file_reports_line(capsys, tmp_path):
    bad = tmp_path / "bad.fsm"
    bad.write_text("role p\nstate a initial\na q<p?m a\n")
    code, _, err = run(capsys, "refine", type_path("two_senders"), "--role", "p", "--candidate", str(bad))
    assert code == 2 and "line 3" in err


def test_bad_type_file(capsys, tmp_path):
    bad = tmp_path / "bad.mst"
    bad.write_text("p -> q : m .")
    code, _, err = run(capsys, "implementable", str(bad))
    assert code == 2 and err.startswith("mst: error:")


def test_error_in_json_mode(capsys):
    code, doc, _ = run_json(capsys, "implementable", "/nonexistent/g.mst")
    assert code == 2 and "error" in doc


def test_unknown_verb(capsys):
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2


# -- verdicts in both modes -------------------------------------------------------


REFINE_CASES = [(c, False) for c in CANDIDATES] + [(c, True) for c in CANDIDATES if c.supertype]


@pytest.mark.parametrize("cand, against", REFINE_CASES, ids=[f"{c.id}-{'c2' if a else 'c2prime'}" for c, a in REFINE_CASES])
def test_refine_modes_agree(capsys, tmp_path, cand, against):
    args = refine_args(cand, tmp_path, against)
    code_h, out, _ = run(capsys, *args)
    code_j, doc, _ = run_json(capsys, *args)
    jsonschema.validate(doc, VERDICT)
    expected = cand.c2 if against else cand.c2_prime
    assert code_h == code_j == (0 if expected else 1)
    assert doc["pass"] is expected
    assert out.startswith("PASS" if expected else "FAIL")
    assert out.count("\n  ") == len(doc["violations"])


@pytest.mark.parametrize("cand", [c for c in CANDIDATES if not c.c2_prime or c.c2 is False], ids=lambda c: c.id)
def test_json_violations_reproduce(capsys, tmp_path, cand):
    g = load_type(cand.type)
    a = load_machine(cand.machine)
    for against in (False, True):
        if against and not cand.supertype:
            continue
        code, doc, _ = run_json(capsys, *refine_args(cand, tmp_path, against))
        if code == 0:
            continue
        supertype = load_machine(cand.supertype) if against else None
        assert doc["violations"]
        for v in doc["violations"]:
            assert checks.reproduces(checks.Violation.from_json(v), g, a, supertype), v


@pytest.mark.parametrize("name", TYPE_NAMES)
def test_implementable_json(capsys, tmp_path, name):
    code, doc, _ = run_json(capsys, "implementable", _type_file(name, tmp_path))
    jsonschema.validate(doc, VERDICT)
    assert code == 0 and doc == {"pass": True, "violations": []}


def test_non_implementable_json_reproduces(capsys):
    for name in NON_IMPLEMENTABLE:
        g = load_type(name)
        _, doc, _ = run_json(capsys, "implementable", type_path(name))
        for v in doc["violations"]:
            assert checks.reproduces(checks.Violation.from_json(v), g)


def test_verify_subset_machines(capsys, tmp_path):
    g = load_type("echo")
    argv = ["verify", type_path("echo"), "--machine", f"p={machine_path('echo_p_merged')}"]
    path = tmp_path / "q.fsm"
    path.write_text(format_machine(subset_construction(g, "q")))
    argv += ["--machine", f"q={path}"]
    code, doc, _ = run_json(capsys, *argv)
    jsonschema.validate(doc, VERDICT)
    assert code == 0 and doc["pass"]


def test_verify_failure_names_machine_states(capsys, tmp_path):
    g = load_type("echo")
    path = tmp_path / "q.fsm"
    path.write_text(format_machine(subset_construction(g, "q")))
    code, doc, _ = run_json(capsys, "verify", type_path("echo"),
                            "--machine", f"p={machine_path('echo_p_send_pruned')}", "--machine", f"q={path}")
    assert code == 1
    jsonschema.validate(doc, VERDICT)
    a = load_machine("echo_p_send_pruned")
    for v in doc["violations"]:
        assert v["state"] in {a.name(s) for s in a.states}
        assert checks.reproduces(checks.Violation.from_json(v), g, a)


def test_check_implementable_flag_warns(capsys, caplog, tmp_path):
    name = NON_IMPLEMENTABLE[0]
    g = load_type(name)
    argv = ["verify", type_path(name), "--check-implementable"]
    for p in g.roles:
        path = tmp_path / f"{p}.fsm"
        path.write_text(format_machine(subset_construction(g, p)))
        argv += ["--machine", f"{p}={path}"]
    run(capsys, *argv)
    assert "not implementable" in caplog.text


def test_quiet_suppresses_output(capsys):
    code, out, _ = run(capsys, "--quiet", "implementable", type_path("echo"))
    assert code == 0 and out == ""
    code, out, _ = run(capsys, "refine", "--quiet", type_path("two_senders"), "--role", "p", "--candidate", machine_path("p_either_first"))
    assert code == 1 and out == ""


def test_seed_is_accepted(capsys):
    a = run(capsys, "--seed", "7", "implementable", type_path("echo"))
    b = run(capsys, "implementable", type_path("echo"))
    assert a == b


# -- simulate ------------------------------------------------------------------


def test_simulate_deadlock(capsys):
    code, doc, _ = run_json(capsys, "simulate", type_path("two_senders"), "--machine", f"p={machine_path('p_either_first')}")
    jsonschema.validate(doc, REPORT)
    assert code == 1 and doc["deadlocks"]
    d = doc["deadlocks"][0]
    assert d["states"]["p"] == "a2" and d["channels"]["q,p"] == ["m"]


def test_simulate_human(capsys):
    code, out, _ = run(capsys, "simulate", type_path("two_senders"), "--machine", f"p={machine_path('p_either_first')}")
    assert code == 1 and "deadlocks: 1" in out and "p=a2" in out


@pytest.mark.parametrize("name", TYPE_NAMES)
def test_simulate_subset_csm(capsys, tmp_path, name):
    code, doc, _ = run_json(capsys, "simulate", _type_file(name, tmp_path), "--depth", "10")
    jsonschema.validate(doc, REPORT)
    assert code == 0 and doc["deadlocks"] == []


def test_simulate_saturation(capsys):
    code, doc, _ = run_json(capsys, "simulate", type_path("g_loop"),
                            "--machine", f"q={machine_path('g_loop_q_idle')}", "--channel", "1")
    assert code == 0
    assert doc["terminated"] == [] and doc["truncated"]


# -- remaining verbs -----------------------------------------------------------


def test_parse(capsys):
    code, doc, _ = run_json(capsys, "parse", type_path("g_loop"))
    assert code == 0 and doc["roles"] == ["p", "q"] and doc["violations"] == []
    assert [n["kind"] for n in doc["nodes"]] == ["rec", "choice", "var"]
    assert doc["nodes"][2]["binder"] == 0


def test_parse_reports_invalid_type(capsys, tmp_path):
    path = tmp_path / "dup.mst"
    path.write_text("( p -> q : m . 0 + p -> q : m . 0 )")
    code, doc, _ = run_json(capsys, "parse", str(path))
    assert code == 1 and doc["violations"]


def test_project(capsys):
    code, doc, _ = run_json(capsys, "project", type_path("echo"), "--role", "p")
    assert code == 0 and list(doc) == ["p"]
    assert len(doc["p"]["states"]) == len(subset_construction(load_type("echo"), "p"))


def test_project_round_trips_through_refine(capsys, tmp_path):
    code, out, _ = run(capsys, "project", type_path("v06_two_buyer"))
    assert code == 0
    g = load_type("v06_two_buyer")
    for block in out.strip().split("\n\n"):
        path = tmp_path / "m.fsm"
        path.write_text(block)
        role = block.split()[1]
        assert role in g.roles
        assert run(capsys, "refine", type_path("v06_two_buyer"), "--role", role, "--candidate", str(path))[0] == 0


def test_decorate(capsys):
    code, doc, _ = run_json(capsys, "decorate", type_path("two_senders"), machine_path("p_either_first"))
    assert code == 0
    assert doc["decoration"] == {"a0": [0], "a1": [1], "a2": [], "a3": [2]}
    code, out, _ = run(capsys, "decorate", type_path("two_senders"), machine_path("p_either_first"))
    assert "a2: {}" in out and "r->p:m" in out


def test_decorate_subset(capsys):
    code, doc, _ = run_json(capsys, "decorate", type_path("echo"), "--role", "q")
    assert code == 0 and doc["role"] == "q"


def test_avail(capsys):
    code, out, _ = run(capsys, "avail", type_path("two_senders"), "--role", "p", "--node", "0")
    assert code == 0 and out.strip() == "q>p!m, r>p!m"
    code, doc, _ = run_json(capsys, "avail", type_path("two_senders"), "--blocked", "p", "--node", "1")
    assert doc["available"] == ["r>p!m"]


def test_gen_gn(capsys):
    code, out, _ = run(capsys, "gen-gn", "2")
    assert code == 0
    assert pretty(parse_global_type(out)) == pretty(load_type("gn_2"))


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "mst", "--json", "implementable", type_path("echo")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["pass"] is True


def test_help_exits_zero(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0 and "refine" in out
