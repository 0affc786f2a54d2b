"""Scenario loading, the check runner, report formats, CLI behaviour."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from algebroid_lab import load_scenario, report_json, report_text, run_checks
from algebroid_lab.errors import ParseError, SchemaViolation, UnresolvedLabel
from algebroid_lab.runner import parse_report_json

FIXTURES = Path(__file__).resolve().parents[1] \
    / "src" / "algebroid_lab" / "fixtures"

REPORT_KEYS = {"id", "kind", "status", "residual", "worst_point", "ms"}


def write_scenario(tmp_path, payload, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return p


MINIMAL = {
    "name": "minimal",
    "charts": [{"name": "M", "dim": 2, "box": [[-1, 1], [-1, 1]]}],
    "algebroids": [{"name": "TM", "kind": "tangent", "chart": "M"}],
    "checks": [{"kind": "algebroid_axioms", "target": "TM"}],
}


# -- loading -------------------------------------------------------------------

def test_minimal_scenario(tmp_path):
    sc = load_scenario(write_scenario(tmp_path, MINIMAL))
    assert len(sc.checks) == 1
    reports, code = run_checks(sc)
    assert code == 0
    assert reports[0].status == "pass"


def test_unknown_label_is_named(tmp_path):
    bad = dict(MINIMAL)
    bad["checks"] = [{"kind": "algebroid_axioms", "target": "missing"}]
    with pytest.raises(UnresolvedLabel) as err:
        load_scenario(write_scenario(tmp_path, bad))
    assert "missing" in str(err.value)


def test_schema_violations(tmp_path):
    with pytest.raises(SchemaViolation):
        load_scenario(write_scenario(tmp_path, {"checks": [{"kind": "nope"}]}))
    dup = dict(MINIMAL)
    dup["checks"] = [
        {"id": "a", "kind": "algebroid_axioms", "target": "TM"},
        {"id": "a", "kind": "algebroid_axioms", "target": "TM"},
    ]
    with pytest.raises(SchemaViolation):
        load_scenario(write_scenario(tmp_path, dup))
    notjson = tmp_path / "broken.json"
    notjson.write_text("{")
    with pytest.raises(SchemaViolation):
        load_scenario(notjson)
    missing_key = {"charts": [{"name": "M", "dim": 2}]}
    with pytest.raises(SchemaViolation):
        load_scenario(write_scenario(tmp_path, missing_key))


def test_bad_expression_raises_parse_error(tmp_path):
    bad = {
        "name": "bad",
        "charts": [{"name": "M", "dim": 2, "box": [[-1, 1], [-1, 1]]}],
        "fields": [{"name": "f", "chart": "M", "expr": "x1 +"}],
    }
    with pytest.raises(ParseError):
        load_scenario(write_scenario(tmp_path, bad))


def test_dual_pair_fixture_shape():
    sc = load_scenario(FIXTURES / "dual_pair.json")
    assert len(sc.checks) == 6
    assert {c.kind for c in sc.checks} == {
        "algebroid_axioms", "action", "quasi_equivalence", "strong_morita"}


def test_empty_check_list(tmp_path):
    empty = dict(MINIMAL)
    empty["checks"] = []
    sc = load_scenario(write_scenario(tmp_path, empty))
    reports, code = run_checks(sc)
    assert reports == [] and code == 0


# -- runner --------------------------------------------------------------------

def test_dual_pair_runs_green():
    sc = load_scenario(FIXTURES / "dual_pair.json")
    reports, code = run_checks(sc)
    assert code == 0
    assert all(r.status == "pass" for r in reports)


def test_nonclosed_fixture_fails():
    sc = load_scenario(FIXTURES / "nonclosed_gauge.json")
    reports, code = run_checks(sc)
    assert code == 1
    assert reports[0].status == "fail"
    assert reports[0].residual > 0.1


def test_error_becomes_report(tmp_path):
    # a pullback-fiber check at a point outside the chart errors without
    # aborting the suite; exit code 2
    payload = {
        "name": "err",
        "charts": [{"name": "M", "dim": 2, "box": [[-1, 1], [-1, 1]]}],
        "maps": [{"name": "id", "source": "M", "target": "M",
                  "components": ["x1", "x2"]}],
        "algebroids": [{"name": "TM", "kind": "tangent", "chart": "M"}],
        "checks": [
            {"kind": "pullback_fiber", "algebroid": "TM", "map": "id",
             "at": [5.0, 5.0]},
            {"kind": "algebroid_axioms", "target": "TM"},
        ],
    }
    sc = load_scenario(write_scenario(tmp_path, payload))
    reports, code = run_checks(sc)
    assert code == 2
    assert reports[0].status == "error"
    assert "PointOutsideChart" in reports[0].details["error"]
    assert reports[1].status == "pass"


def test_runner_check_kind_coverage(tmp_path):
    # one scenario exercising the remaining scenario-level check kinds
    payload = {
        "name": "coverage",
        "charts": [
            {"name": "M", "dim": 2, "box": [[-2, 2], [-2, 2]]},
            {"name": "X", "dim": 4, "box": [[-2, 2], [-2, 2],
                                            [-2, 2], [-2, 2]]},
            {"name": "M2", "dim": 2, "box": [[-2, 2], [-2, 2]]},
            {"name": "X3", "dim": 3, "box": [[-1, 1], [-1, 1], [-1, 1]]},
            {"name": "L2", "dim": 2, "box": [[-1, 1], [-1, 1]]},
        ],
        "bivectors": [
            {"name": "Pi", "chart": "M", "entries": {"1,2": "1"}},
            {"name": "PiS", "chart": "X",
             "entries": {"1,2": "1", "3,4": "-1"}},
            {"name": "Pi2", "chart": "M2", "entries": {"1,2": "1"}},
        ],
        "two_forms": [{"name": "B", "chart": "M", "entries": {"1,2": "x1"}}],
        "maps": [
            {"name": "idM", "source": "M", "target": "M",
             "components": ["x1", "x2"]},
            {"name": "pr1", "source": "X", "target": "M",
             "components": ["x1", "x2"]},
            {"name": "J2", "source": "X", "target": "M2",
             "components": ["x3", "x4"]},
            {"name": "pr12", "source": "X3", "target": "L2",
             "components": ["x1", "x2"]},
            {"name": "sec12", "source": "L2", "target": "X3",
             "components": ["x1", "x2", "0"]},
        ],
        "algebroids": [
            {"name": "A", "kind": "cotangent", "bivector": "Pi"},
            {"name": "A2", "kind": "cotangent", "bivector": "Pi2"},
            {"name": "TM", "kind": "tangent", "chart": "M"},
            {"name": "TL", "kind": "tangent", "chart": "L2"},
            {"name": "Aop", "kind": "opposite", "of": "A"},
            {"name": "rot", "kind": "transformation", "chart": "M",
             "generators": [["-x2", "x1"]]},
        ],
        "dirac_structures": [
            {"name": "DM", "chart": "M", "graph_of_bivector": "Pi"},
            {"name": "DN", "chart": "X", "graph_of_bivector": "PiS"},
        ],
        "dirac_maps": [
            {"name": "F", "source": "DN", "target": "DM", "map": "pr1"}],
        "actions": [
            {"name": "xi1", "algebroid": "A", "total": "X",
             "momentum": "pr1", "side": "left",
             "fields": [["0", "1", "0", "0"], ["-1", "0", "0", "0"]]},
            {"name": "xi2", "algebroid": "A2", "total": "X",
             "momentum": "J2", "side": "right",
             "fields": [["0", "0", "0", "-1"], ["0", "0", "1", "0"]]},
            {"name": "zeta", "algebroid": "A", "total": "X",
             "momentum": "pr1", "side": "right",
             "fields": [["0", "-1", "0", "0"], ["1", "0", "0", "0"]]},
            {"name": "eta2", "algebroid": "A2", "total": "X",
             "momentum": "J2", "side": "left",
             "fields": [["0", "0", "0", "1"], ["0", "0", "-1", "0"]]},
            {"name": "canon", "algebroid": "A", "total": "M",
             "momentum": "idM", "side": "right",
             "fields": [["0", "-1"], ["1", "0"]]},
            {"name": "leafact", "algebroid": "TL", "total": "X3",
             "momentum": "pr12", "side": "right",
             "fields": [["1", "0", "x3"], ["0", "1", "0"]]},
        ],
        "witnesses": [{"name": "W", "total": "X", "j1": "pr1", "j2": "J2",
                       "left": "xi1", "right": "xi2"}],
        "quotients": [{"name": "q", "total": "X3", "leaf": "L2",
                       "projection": "pr12", "section": "sec12"}],
        "morphisms": [{"name": "anchorA", "source": "A", "target": "TM",
                       "base_map": "idM",
                       "matrix": [["0", "1"], ["-1", "0"]]}],
        "paths": [{"name": "p", "algebroid": "A",
                   "coefficients": ["1", "0"], "base": ["0", "-t"]}],
        "checks": [
            {"kind": "dirac", "target": "DM", "tolerance": 1e-10},
            {"kind": "gauge", "target": "DM", "two_form": "B"},
            {"kind": "dirac_map", "target": "F", "mode": "strong"},
            {"kind": "induced_action", "target": "F"},
            {"kind": "morphism", "target": "anchorA"},
            {"kind": "module", "target": "zeta"},
            {"kind": "unique_lift", "algebroid": "TM", "map": "idM"},
            {"kind": "pullback_fiber", "algebroid": "A", "map": "idM",
             "at": [0.1, 0.2], "expect_dim": 2},
            {"kind": "apath_valid", "target": "p"},
            {"kind": "apath_integrate", "path": "p", "action": "zeta",
             "start": [0, 0, 0, 0], "endpoint": [0, -1, 0, 0],
             "step": 0.001},
            {"kind": "transport_invariances", "path": "p",
             "action": "zeta", "witness": "W", "start": [0, 0, 0, 0]},
            {"kind": "tensor_distribution", "right": "xi2", "left": "eta2",
             "at": [[0.1, 0.2, 0.3, 0.4], [-0.2, 0.5, 0.3, 0.4]],
             "expect_dim": 2},
            {"kind": "leaf_action", "action": "leafact", "quotient": "q"},
            {"kind": "quasi_equivalence", "target": "W"},
            {"kind": "fibered_product", "m1": "anchorA", "m2": "anchorA",
             "at": [[0.1, 0.2], [0.1, 0.2]], "expect_dim": 2},
            {"kind": "psi_transport", "witness": "W", "module": "canon",
             "path": "p", "pair": [[0, 0, 0, 0], [0, -1, 0, 0]],
             "start": [0, 0], "endpoint": [0, -1], "step": 0.001},
        ],
    }
    sc = load_scenario(write_scenario(tmp_path, payload))
    reports, code = run_checks(sc)
    by_id = {r.check_id: r for r in reports}
    assert code == 0, {k: (v.status, v.details) for k, v in by_id.items()}
    assert all(r.status == "pass" for r in reports)


# -- report formats ---------------------------------------------------------------

def test_report_schema_and_roundtrip():
    sc = load_scenario(FIXTURES / "dual_pair.json")
    reports, _ = run_checks(sc)
    text = report_json(sc, reports)
    payload = parse_report_json(text)
    assert payload["scenario"] == "dual_pair"
    assert len(payload["reports"]) == 6
    for entry in payload["reports"]:
        assert set(entry) == REPORT_KEYS
        assert entry["ms"] == 0
    # emit -> parse -> emit is a fixed point
    again = json.dumps(payload, indent=2) + "\n"
    assert again == text


def test_report_text_counts():
    sc = load_scenario(FIXTURES / "nonclosed_gauge.json")
    reports, _ = run_checks(sc)
    text = report_text(sc, reports)
    assert "1 fail" in text
    assert "involutivity" in text


def test_tolerance_override_changes_default_only(tmp_path):
    sc = load_scenario(write_scenario(tmp_path, MINIMAL))
    reports, _ = run_checks(sc, overrides={"tolerance": 1e-2})
    assert reports[0].tolerance == 1e-2
    explicit = dict(MINIMAL)
    explicit["checks"] = [{"kind": "algebroid_axioms", "target": "TM",
                           "tolerance": 1e-4}]
    sc2 = load_scenario(write_scenario(tmp_path, explicit, "e.json"))
    reports2, _ = run_checks(sc2, overrides={"tolerance": 1e-2})
    assert reports2[0].tolerance == 1e-4


# -- CLI ----------------------------------------------------------------------------

def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "algebroid_lab", *args],
        capture_output=True, text=True)


def test_cli_exit_codes_on_bundled_fixtures():
    assert run_cli("check", str(FIXTURES / "dual_pair.json")).returncode == 0
    assert run_cli("check",
                   str(FIXTURES / "nonclosed_gauge.json")).returncode == 1
    bad = run_cli("check", str(FIXTURES / "unresolved_label.json"))
    assert bad.returncode == 2
    assert "no_such_algebroid" in bad.stderr


def test_cli_missing_file_is_exit_2(tmp_path):
    assert run_cli("check", str(tmp_path / "nope.json")).returncode == 2


def test_cli_deterministic_json():
    a = run_cli("check", str(FIXTURES / "dual_pair.json"), "--seed", "0")
    b = run_cli("check", str(FIXTURES / "dual_pair.json"), "--seed", "0")
    assert a.returncode == b.returncode == 0
    assert a.stdout == b.stdout
    payload = json.loads(a.stdout)
    assert [r["status"] for r in payload["reports"]] == ["pass"] * 6


def test_cli_text_report_and_out_file(tmp_path):
    out = tmp_path / "report.txt"
    res = run_cli("check", str(FIXTURES / "dual_pair.json"),
                  "--report", "text", "--out", str(out))
    assert res.returncode == 0
    assert "6 pass" in out.read_text()


def test_cli_backend_subcommand():
    res = run_cli("backend")
    assert res.returncode == 0
    assert res.stdout.strip() in ("compiled", "python")
