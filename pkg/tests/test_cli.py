"""Command-line interface: exit codes, report schema, determinism."""

import json
import re

import pytest

from rellich.cli import (EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_IO, EXIT_PASS,
                         EXIT_USAGE, format_report, main)

_SCHEMA_TOP = {"command", "config", "space_form", "scans", "tests", "verdict",
               "seed", "timestamp"}


def _run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main(list(argv) + ["-o", str(out)])
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report


class TestCheckPair:
    def test_classical_passes_with_equality(self, tmp_path):
        code, rep = _run(tmp_path, "check-pair", "--catalog", "classical-rellich",
                         "--n", "6")
        assert code == EXIT_PASS
        assert set(rep.keys()) == _SCHEMA_TOP
        assert rep["verdict"] == "pass"
        assert rep["space_form"] == {"n": 6, "kappa": 0.0, "R": None} or \
            rep["space_form"]["n"] == 6
        for res in rep["config"]["results"].values():
            assert res["equality"] is True

    def test_inline_pair(self, tmp_path):
        code, rep = _run(tmp_path, "check-pair", "--n", "7",
                         "--H", "n/(2*t)", "--v", "1", "--V", "n^2/(4*t^2)")
        assert code == EXIT_PASS
        assert rep["config"]["results"]["dual"]["equality"] is True

    def test_inadmissible_inline_pair_fails(self, tmp_path):
        code, rep = _run(tmp_path, "check-pair", "--n", "5",
                         "--H", "n/(2*t)", "--v", "1", "--V", "n^2/(2*t^2)")
        assert code == EXIT_FAIL
        assert rep["verdict"] == "fail"


class TestScan:
    def test_failure_mode_detected(self, tmp_path):
        code, rep = _run(tmp_path, "scan", "--catalog", "ell-family", "--k", "6",
                         "--n", "5", "--R", "1", "--target", "E1")
        assert code == EXIT_FAIL
        scan = rep["scans"][0]
        assert scan["target"] == "E1"
        assert scan["verdict"] == "violated"
        assert scan["boundary_limit_R"] < 0
        assert rep["config"]["sign_changes"]

    def test_classical_e1_nonnegative(self, tmp_path):
        code, rep = _run(tmp_path, "scan", "--catalog", "classical-rellich",
                         "--n", "5", "--target", "E1")
        assert code == EXIT_PASS
        assert rep["scans"][0]["verdict"] == "nonnegative"

    def test_scan_requires_known_target(self, tmp_path):
        code, _ = _run(tmp_path, "scan", "--catalog", "classical-rellich",
                       "--n", "5", "--target", "Q")
        assert code == EXIT_USAGE


class TestVerify:
    def test_hyp_interp(self, tmp_path):
        code, rep = _run(tmp_path, "verify", "--catalog", "hyp-interp", "--n", "5",
                         "--kappa", "1", "--lambda", "0", "--tests", "8",
                         "--seed", "7")
        assert code == EXIT_PASS
        assert rep["verdict"] == "pass"
        assert len(rep["tests"]) == 8
        for row in rep["tests"]:
            assert set(row.keys()) == {"id", "params", "lhs", "rhs", "margin", "budget"}
            assert row["margin"] >= -row["budget"]

    def test_e2_gate_inconclusive(self, tmp_path):
        code, rep = _run(tmp_path, "verify", "--catalog", "classical-rellich",
                         "--n", "7", "--shape", "delta-vs-grad", "--tests", "3",
                         "--modes", "0,1")
        assert code == EXIT_INCONCLUSIVE
        assert rep["verdict"] == "inconclusive"

    def test_empty_batch_valid_document(self, tmp_path):
        code, rep = _run(tmp_path, "verify", "--catalog", "classical-rellich",
                         "--n", "5", "--tests", "0")
        assert code == EXIT_PASS
        assert rep["tests"] == []
        assert rep["scans"]


class TestChain:
    def test_iterlog_chain(self, tmp_path):
        code, rep = _run(tmp_path, "chain", "--catalog", "iterlog", "--k", "1",
                         "--n", "6", "--R", "1", "--tests", "4")
        assert code == EXIT_PASS
        ends = [t for t in rep["tests"] if t["id"].endswith(":end")]
        assert len(ends) == 4
        assert rep["config"]["meta"]["addon_constant"] == pytest.approx(2.5)

    def test_classical_chain(self, tmp_path):
        code, rep = _run(tmp_path, "chain", "--catalog", "classical-rellich",
                         "--n", "6", "--tests", "4")
        assert code == EXIT_PASS


class TestSolveBessel:
    def test_supercritical_constant(self, tmp_path):
        code, rep = _run(tmp_path, "solve-bessel", "--catalog", "iterlog",
                         "--k", "1", "--R", "1", "--c", "0.3")
        assert code == EXIT_FAIL
        assert rep["config"]["positive_solution"] is False
        assert rep["config"]["first_zero"] > 0

    def test_inline_potential(self, tmp_path):
        code, rep = _run(tmp_path, "solve-bessel",
                         "--z", "sqrt(logk(1, r/t))",
                         "--Z", "1/(t^2*logk(1,r/t)^2)",
                         "--c", "0.25", "--R", "1", "--r", "2.718281828459045")
        assert code == EXIT_PASS
        assert rep["config"]["positive_solution"] is True

    def test_best_constant(self, tmp_path):
        code, rep = _run(tmp_path, "solve-bessel", "--catalog", "iterlog",
                         "--k", "1", "--R", "1")
        assert code == EXIT_PASS
        assert rep["config"]["positive_solution"] is True


class TestEstimate:
    def test_hardy_estimate(self, tmp_path):
        code, rep = _run(tmp_path, "estimate", "--catalog", "classical-rellich",
                         "--n", "5", "--shape", "gradrad-vs-usq",
                         "--budget", "200")
        assert code == EXIT_PASS
        assert rep["config"]["claimed"] == pytest.approx(2.25)
        assert rep["config"]["estimate"] >= 2.25 - 1e-6


class TestCatalogCommand:
    def test_list(self, capsys):
        assert main(["catalog", "list"]) == EXIT_PASS
        out = capsys.readouterr().out
        assert "classical-rellich" in out and "hyp-final" in out

    def test_show(self, capsys):
        assert main(["catalog", "show", "hyp-interp", "--n", "5",
                     "--kappa", "1"]) == EXIT_PASS
        doc = json.loads(capsys.readouterr().out)
        assert doc["id"] == "hyp-interp"
        assert "dual" in doc["specs"]

    def test_show_unknown(self, capsys):
        assert main(["catalog", "show", "nope"]) == EXIT_USAGE


class TestUsageAndIO:
    def test_unknown_catalog_id(self, tmp_path):
        code, _ = _run(tmp_path, "check-pair", "--catalog", "nope")
        assert code == EXIT_USAGE

    def test_missing_pair_source(self, tmp_path):
        code, _ = _run(tmp_path, "check-pair", "--n", "5")
        assert code == EXIT_USAGE

    def test_both_pair_sources(self, tmp_path):
        code, _ = _run(tmp_path, "check-pair", "--catalog", "classical-rellich",
                       "--H", "1/t", "--v", "1", "--V", "1/t^2")
        assert code == EXIT_USAGE

    def test_bad_flag(self):
        with pytest.raises(SystemExit) as err:
            main(["verify", "--nope"])
        assert err.value.code == EXIT_USAGE

    def test_bad_dsl(self, tmp_path):
        code, _ = _run(tmp_path, "check-pair", "--H", "n/(2*", "--v", "1",
                       "--V", "1/t^2")
        assert code == EXIT_USAGE

    def test_io_failure(self):
        code = main(["check-pair", "--catalog", "classical-rellich", "--n", "5",
                     "-o", "/nonexistent-dir/report.json"])
        assert code == EXIT_IO


class TestFormatting:
    def _report(self, tmp_path):
        _, rep = _run(tmp_path, "verify", "--catalog", "classical-rellich",
                      "--n", "5", "--tests", "4", "--seed", "42")
        return rep

    def test_json_roundtrip_field_for_field(self, tmp_path):
        rep = self._report(tmp_path)
        assert json.loads(format_report(rep, "json")) == rep

    def test_csv_flattens_tests(self, tmp_path):
        rep = self._report(tmp_path)
        text = format_report(rep, "csv")
        lines = text.strip().splitlines()
        assert len(lines) == 1 + len(rep["tests"])
        assert lines[0].startswith("command,verdict,seed,id")

    def test_determinism_modulo_timestamp(self, tmp_path):
        a = self._report(tmp_path)
        b = self._report(tmp_path)
        a.pop("timestamp"), b.pop("timestamp")
        assert format_report(a, "json") == format_report(b, "json")

    def test_report_carries_reproduction_context(self, tmp_path):
        rep = self._report(tmp_path)
        cfg = rep["config"]
        assert cfg["quad_tol"] == 1e-10
        assert cfg["scan_grid"] == 10000
        assert rep["seed"] == 42
        assert re.match(r"\d{4}-\d{2}-\d{2}T", rep["timestamp"])
