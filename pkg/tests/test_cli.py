import io
import json
from contextlib import redirect_stderr, redirect_stdout

from sepchan.cli import main

from conftest import FIXTURES


def run_cli(*args):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(args))
    return code, out.getvalue(), err.getvalue()


def fx(name):
    return str(FIXTURES / name)


class TestCheck:
    def test_corollary1_accepted(self):
        code, out, _ = run_cli("check", fx("corollary1.spec"))
        assert code == 0
        assert "accepted" in out

    def test_network_accepted(self):
        code, _, _ = run_cli("check", fx("example2_network.spec"))
        assert code == 0

    def test_broken_rejected_names_position(self):
        code, out, _ = run_cli("check", fx("corollary1_broken.spec"))
        assert code == 1
        assert "/1#s0" in out

    def test_parse_error_exit_2(self, tmp_path):
        bad = tmp_path / "bad.spec"
        bad.write_text("vars x : int;\n{ oops")
        code, _, err = run_cli("check", str(bad))
        assert code == 2
        assert "expected" in err

    def test_json_report_schema(self):
        code, out, _ = run_cli("check", fx("corollary1.spec"), "--json")
        report = json.loads(out)
        assert report["verdict"] == "accepted"
        assert {"tool_version", "input_hash", "verdict", "steps"} <= set(report)
        assert all({"position", "rule", "status"} <= set(s)
                   for s in report["steps"])

    def test_seed_flag_accepted_and_ignored(self):
        a = run_cli("check", fx("corollary1.spec"), "--json", "--seed", "1")
        b = run_cli("check", fx("corollary1.spec"), "--json", "--seed", "99")
        assert a == b


class TestValidate:
    def test_corollary1_valid(self):
        code, out, _ = run_cli(
            "validate", fx("corollary1.ecsl"),
            "--pre", "m |-> - * v |-> -", "--post", "v = m",
            "--cap", "1", "--domain", "0..3")
        assert code == 0
        assert "valid" in out

    def test_mutated_post_counterexample_with_trace(self):
        code, out, _ = run_cli(
            "validate", fx("corollary1.ecsl"),
            "--pre", "m |-> - * v |-> -", "--post", "v = m + 1")
        assert code == 1
        assert "counterexample" in out
        assert "c!m" in out and "c?v" in out  # dump includes the run

    def test_truncation_exit_4(self):
        code, _, _ = run_cli(
            "validate", fx("example2_network.ecsl"),
            "--pre", "m0 = 1 /\\ m1 = 2 /\\ n0 = 3 /\\ n1 = 0",
            "--post", "true", "--max-steps", "1")
        assert code == 4


class TestTrace:
    def test_corollary1_single_trace(self):
        code, out, _ = run_cli("trace", fx("corollary1.ecsl"))
        assert code == 0
        assert "1 trace(s)" in out

    def test_example1_ordering_property(self):
        # before-atoms read "ordered by now", so the whole-trace claim
        # is phrased as eventually-ordered
        code, out, _ = run_cli(
            "trace", fx("example1.ecsl"),
            "--prop", "F (occurred(c!m0) < occurred(c?v0))")
        assert code == 0
        assert "property: True" in out
        assert "property: False" not in out

    def test_liveness_formula(self):
        code, out, _ = run_cli(
            "trace", fx("corollary1.ecsl"),
            "--prop", "G(occurred(c!m) -> F occurred(c?v))")
        assert code == 0
        assert "property: True" in out

    def test_unknown_atom_rejected(self):
        code, _, err = run_cli("trace", fx("corollary1.ecsl"),
                               "--prop", "G occurred(c?m)")
        assert code == 2
        assert "references no action" in err

    def test_dump_format(self):
        _, out, _ = run_cli("trace", fx("corollary1.ecsl"))
        lines = out.splitlines()
        assert "1 | 0 | c!m | {0}" in lines
        assert "2 | 1 | c?v | {1}" in lines
        assert "1 -> 2" in lines


class TestDeterminism:
    def test_reports_byte_identical(self):
        jobs = [
            ("check", fx("corollary1.spec"), "--json"),
            ("check", fx("example2_network.spec"), "--json"),
            ("validate", fx("corollary1.ecsl"), "--pre", "m |-> - * v |-> -",
             "--post", "v = m", "--json"),
            ("trace", fx("example1.ecsl"), "--json"),
        ]
        for job in jobs:
            first = run_cli(*job)
            second = run_cli(*job)
            assert first == second, job
