import json
import subprocess
import sys

import pytest

from nonlocality_wb.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out


def run_json(capsys, *argv):
    code, out = run_cli(capsys, *argv, "--json")
    return code, json.loads(out)


class TestClassicalBound:
    def test_n2(self, capsys):
        code, report = run_json(capsys, "classical-bound", "2")
        assert code == 0
        assert report["outputs"]["value"] == 3.0
        assert report["outputs"]["maximizer_count"] == 8
        assert report["outputs"]["strategy_count"] == 16

    def test_n4(self, capsys):
        code, report = run_json(capsys, "classical-bound", "4")
        assert code == 0
        assert report["outputs"]["value"] == 10.0

    def test_odd_n_exits_2(self, capsys):
        assert main(["classical-bound", "3"]) == 2
        err = capsys.readouterr().err
        assert "even" in err

    def test_human_output(self, capsys):
        code, out = run_cli(capsys, "classical-bound", "2")
        assert code == 0
        assert "classical bound for n=2: 3" in out


class TestCertify:
    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_sound(self, capsys, n):
        code, report = run_json(capsys, "certify", str(n))
        assert code == 0
        assert report["outputs"]["sound"] is True
        assert report["outputs"]["checked"] == 4**n


class TestOptimize:
    def test_small_run_converges(self, capsys, tmp_path):
        cfg = tmp_path / "opt.json"
        cfg.write_text(json.dumps({"restarts": 12, "seed": 42}))
        code, report = run_json(capsys, "optimize", "2", "--config", str(cfg))
        assert code == 0
        out = report["outputs"]
        assert out["converged"] is True
        assert 0.0 <= out["hardy_value"] <= 0.4143
        assert len(out["model"]["alpha"]) == 2
        assert report["seed"] == 42

    def test_nonconvergence_exits_1(self, capsys, tmp_path):
        # a penalty schedule too weak to enforce the condition
        cfg = tmp_path / "opt.json"
        cfg.write_text(
            json.dumps(
                {"restarts": 2, "seed": 1, "penalty_start": 1e-3,
                 "penalty_growth": 1.5, "penalty_stages": 1}
            )
        )
        code, report = run_json(capsys, "optimize", "2", "--config", str(cfg))
        assert code == 1
        assert report["outputs"]["converged"] is False

    def test_bad_target_exits_2(self, capsys):
        assert main(["optimize", "five"]) == 2

    def test_bad_config_keys_exit_2(self, capsys, tmp_path):
        cfg = tmp_path / "opt.json"
        cfg.write_text(json.dumps({"nope": 1}))
        assert main(["optimize", "2", "--config", str(cfg)]) == 2


class TestNpa:
    def test_level1_value(self, capsys):
        code, report = run_json(capsys, "npa", "2", "--level", "1")
        assert code == 0
        assert report["outputs"]["status"] == "optimal"
        assert report["outputs"]["upper_bound"] == pytest.approx(0.41421356, abs=1e-6)

    def test_monotone_level1_vs_level2(self, capsys):
        _, r1 = run_json(capsys, "npa", "2", "--level", "1")
        _, r2 = run_json(capsys, "npa", "2", "--level", "2")
        assert r1["outputs"]["upper_bound"] >= r2["outputs"]["upper_bound"] - 1e-6

    def test_level2_bracket(self, capsys):
        _, report = run_json(capsys, "npa", "2", "--level", "2")
        assert 0.4139 <= report["outputs"]["upper_bound"] <= 0.41422

    def test_original_paradox_level1(self, capsys):
        code, report = run_json(capsys, "npa", "original", "--level", "1")
        assert code == 0
        assert report["outputs"]["status"] == "optimal"
        assert report["outputs"]["upper_bound"] >= 0.09016


class TestTable1:
    def test_default(self, capsys):
        code, report = run_json(capsys, "table1")
        assert code == 0
        rows = report["outputs"]["rows"]
        assert [row["n"] for row in rows] == [2, 4]
        assert rows[0]["hardy_value"] == pytest.approx(0.4140, abs=1e-3)
        assert rows[1]["hardy_value"] == pytest.approx(0.7734, abs=1e-3)
        assert all(row["condition_residual"] <= 2e-3 for row in rows)

    def test_csv(self, capsys):
        code, out = run_cli(capsys, "table1", "--csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("n,condition_residual")
        assert len(lines) == 3

    def test_impossible_tolerance_exits_1(self, capsys):
        code, _ = run_json(capsys, "table1", "--tol", "1e-9")
        assert code == 1


class TestDumpParadox:
    def test_paradox_document(self, capsys):
        code, report = run_json(capsys, "dump-paradox", "4")
        assert code == 0
        doc = report["outputs"]["paradox"]
        assert doc["n"] == 4
        assert len(doc["conditions"][0]["terms"]) == 25

    def test_with_moment_program(self, capsys):
        code, report = run_json(capsys, "dump-paradox", "2", "--level", "1")
        assert code == 0
        assert report["outputs"]["moment_program"]["basis"] == ["1", "E1", "E2", "F1", "F2"]

    def test_original(self, capsys):
        code, report = run_json(capsys, "dump-paradox", "original")
        assert code == 0
        assert len(report["outputs"]["paradox"]["conditions"]) == 3


class TestDeterminism:
    def test_identical_reports_modulo_wall_time(self, capsys):
        _, r1 = run_json(capsys, "npa", "2", "--level", "2")
        _, r2 = run_json(capsys, "npa", "2", "--level", "2")
        r1.pop("wall_time_ms")
        r2.pop("wall_time_ms")
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)

    def test_optimize_deterministic_for_seed(self, capsys, tmp_path):
        cfg = tmp_path / "opt.json"
        cfg.write_text(json.dumps({"restarts": 4, "seed": 7}))
        _, r1 = run_json(capsys, "optimize", "2", "--config", str(cfg), "--seed", "7")
        _, r2 = run_json(capsys, "optimize", "2", "--config", str(cfg), "--seed", "7")
        r1.pop("wall_time_ms")
        r2.pop("wall_time_ms")
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)


class TestEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "nonlocality_wb.cli", "classical-bound", "2", "--json"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        report = json.loads(proc.stdout)
        assert report["outputs"]["value"] == 3.0
        assert report["versions"]["schema_version"] == "1"
