"""Command-line behavior: exit codes, config merging, report files."""

import csv
import json

import numpy as np
import pytest

from breglab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDivergenceCommand:
    def test_value_and_transport(self, capsys):
        code, out, _ = run(capsys, "divergence", "--gen", "sqeuclid", "--x", "1", "--y", "0")
        assert code == 0
        assert "bregman_divergence = 0.5" in out
        assert "dual_transport = 0.5" in out

    def test_vector_points(self, capsys):
        code, out, _ = run(
            capsys, "divergence", "--gen", "sqeuclid", "--x", "1,2", "--y", "0,0"
        )
        assert code == 0
        assert "bregman_divergence = 2.5" in out

    def test_domain_error_exit_2(self, capsys):
        code, _, err = run(capsys, "divergence", "--gen", "neglog", "--x", "2", "--y", "-1")
        assert code == 2
        assert "y[0] = -1.0" in err

    def test_unknown_generator_exit_2(self, capsys):
        code, _, err = run(capsys, "divergence", "--gen", "nope", "--x", "1", "--y", "2")
        assert code == 2 and "error:" in err

    def test_mismatched_points_exit_2(self, capsys):
        code, _, _ = run(capsys, "divergence", "--gen", "sqeuclid", "--x", "1,2", "--y", "0")
        assert code == 2

    def test_missing_required_exit_2(self, capsys):
        code, _, _ = run(capsys, "divergence", "--gen", "sqeuclid", "--x", "1")
        assert code == 2

    def test_bad_subcommand_exit_2(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_matrix_file(self, capsys, tmp_path):
        mat = tmp_path / "spd.mat"
        mat.write_text("2\n2.0 0.5\n0.5 1.0\n")
        code, out, _ = run(
            capsys, "divergence", "--gen", f"mahalanobis:{mat}", "--x", "1,0", "--y", "0,0"
        )
        assert code == 0
        assert "bregman_divergence = 1.0" in out


class TestRiskCommand:
    ARGS = (
        "risk", "--model", "exp", "--gen", "neglog", "--estimator", "type1",
        "--theta", "2.0", "--n", "5", "-M", "2000", "--seed", "7",
    )

    def test_runs_and_reports(self, capsys):
        code, out, _ = run(capsys, *self.ARGS)
        assert code == 0
        assert "risk = " in out and "bias = " in out

    def test_out_file_json(self, capsys, tmp_path):
        path = tmp_path / "r.json"
        code, _, _ = run(capsys, *self.ARGS, "--out", str(path))
        assert code == 0
        doc = json.loads(path.read_text())
        assert doc["version"]
        assert doc["config"]["theta"] == 2.0
        (report,) = doc["reports"]
        assert report["estimator_id"] == "type1"
        assert report["replicates"] == 2000

    def test_out_file_reruns_byte_identical(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run(capsys, *self.ARGS, "--out", str(a))
        run(capsys, *self.ARGS, "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_out_file_csv(self, capsys, tmp_path):
        path = tmp_path / "r.csv"
        code, _, _ = run(capsys, *self.ARGS, "--format", "csv", "--out", str(path))
        assert code == 0
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# ")
        json.loads(lines[0][2:])  # header comment is the config record
        rows = list(csv.DictReader(lines[1:]))
        assert len(rows) == 1 and rows[0]["estimator_id"] == "type1"

    def test_replicates_floor_exit_2(self, capsys):
        code, _, err = run(
            capsys, "risk", "--model", "exp", "--gen", "neglog", "--estimator", "classical",
            "--theta", "2.0", "--n", "5", "-M", "10",
        )
        assert code == 2 and "1000" in err


class TestConfigFiles:
    def test_config_file_supplies_missing_flags(self, capsys, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({
            "model": "exp", "gen": "neglog", "estimator": "classical",
            "theta": 2.0, "n": 5, "replicates": 2000,
        }))
        code, out, _ = run(capsys, "risk", "--config", str(cfgfile))
        assert code == 0
        assert '"replicates": 2000' in out

    def test_flags_override_config_file(self, capsys, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({
            "model": "exp", "gen": "neglog", "estimator": "classical",
            "theta": 2.0, "n": 5, "replicates": 2000, "seed": 1,
        }))
        code, out, _ = run(capsys, "risk", "--config", str(cfgfile), "--seed", "99")
        assert code == 0
        assert '"seed": 99' in out

    def test_malformed_config_exit_2(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, _ = run(capsys, "risk", "--config", str(bad))
        assert code == 2
        code, _, _ = run(capsys, "risk", "--config", str(tmp_path / "missing.json"))
        assert code == 2


class TestCheckCommand:
    def test_type1_pass(self, capsys):
        code, out, _ = run(
            capsys, "check", "--kind", "type1", "--model", "exp", "--gen", "neglog",
            "--estimator", "type1", "--theta", "2.0", "--n", "5", "-M", "20000", "--seed", "7",
        )
        assert code == 0 and "-> PASS" in out

    def test_type2_classical_passes_on_grid(self, capsys):
        code, out, _ = run(
            capsys, "check", "--kind", "type2", "--model", "exp",
            "--estimator", "classical", "--theta", "1.0,2.0", "--n", "5", "-M", "20000",
        )
        assert code == 0 and out.count("-> PASS") == 2

    def test_lehmann(self, capsys):
        code, out, _ = run(
            capsys, "check", "--kind", "lehmann", "--model", "exp", "--gen", "neglog",
            "--estimator", "type1", "--theta", "2.0", "--grid", "1.0,1.5,2.0,2.5,3.0",
            "--n", "5", "-M", "20000", "--seed", "7",
        )
        assert code == 0 and "argmin at theta" in out

    def test_lehmann_requires_grid(self, capsys):
        code, _, _ = run(
            capsys, "check", "--kind", "lehmann", "--model", "exp", "--gen", "neglog",
            "--estimator", "type1", "--theta", "2.0", "--n", "5", "-M", "2000",
        )
        assert code == 2

    def test_type1_requires_generator(self, capsys):
        code, _, _ = run(
            capsys, "check", "--kind", "type1", "--model", "exp",
            "--estimator", "classical", "--theta", "2.0", "--n", "5", "-M", "2000",
        )
        assert code == 2


class TestCompareCommand:
    def test_paired_comparison(self, capsys, tmp_path):
        path = tmp_path / "cmp.json"
        code, out, _ = run(
            capsys, "compare", "--model", "exp", "--gen", "neglog", "--e1", "type1",
            "--e2", "first-k:3", "--theta", "2.0", "--n", "5", "-M", "20000",
            "--seed", "7", "--out", str(path),
        )
        assert code == 0
        (report,) = json.loads(path.read_text())["reports"]
        assert report["risk_diff"] < 0.0


class TestOracleCommand:
    def test_pass_run(self, capsys):
        code, out, _ = run(
            capsys, "oracle", "--m", "3", "--n", "4", "--gen", "neglog",
            "--estimator", "first-k:1", "--theta", "0.5,1.0,2.0",
        )
        assert code == 0
        assert out.count("theta = ") == 3
        assert "PASS max_residual = " in out

    def test_explicit_support(self, capsys):
        code, out, _ = run(
            capsys, "oracle", "--support", "0.5,1.5,2.5", "--n", "3", "--gen", "sqeuclid",
            "--estimator", "mean", "--theta", "1.0",
        )
        assert code == 0 and "PASS" in out

    def test_budget_exit_2(self, capsys):
        code, _, err = run(
            capsys, "oracle", "--m", "10", "--n", "8", "--gen", "neglog",
            "--estimator", "mean", "--theta", "1.0",
        )
        assert code == 2 and "budget" in err

    def test_needs_support_or_m(self, capsys):
        code, _, _ = run(
            capsys, "oracle", "--n", "3", "--gen", "neglog", "--estimator", "mean",
            "--theta", "1.0",
        )
        assert code == 2


class TestReproduceCommand:
    def test_exp_example_reduced(self, capsys):
        code, out, _ = run(capsys, "reproduce", "--example", "exp", "-M", "20000", "--seed", "7")
        assert code == 0
        assert "UNEXPECTED" not in out
        assert out.count("PASS") >= 2 and out.count("FAIL") >= 2
        assert "improves by > 5 se" in out

    def test_lognormal_example_reduced(self, capsys):
        code, out, _ = run(
            capsys, "reproduce", "--example", "lognormal", "-M", "20000", "--seed", "7"
        )
        assert code == 0 and "UNEXPECTED" not in out

    def test_tiny_replicates_exit_2(self, capsys):
        code, _, _ = run(capsys, "reproduce", "--example", "exp", "-M", "100")
        assert code == 2

    def test_bad_example_from_config_exit_2(self, capsys, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({"example": "bogus"}))
        code, _, _ = run(capsys, "reproduce", "--config", str(cfgfile))
        assert code == 2


class TestDeterminismAcrossWorkers:
    def test_risk_out_file_worker_invariant(self, capsys, tmp_path):
        paths = []
        for i, workers in enumerate((1, 2, 8)):
            path = tmp_path / f"w{i}.json"
            code, _, _ = run(
                capsys, "risk", "--model", "lognormal", "--gen", "negentropy",
                "--estimator", "type1", "--theta", str(np.e), "--n", "10",
                "-M", "20000", "--seed", "7", "--workers", str(workers),
                "--out", str(path),
            )
            assert code == 0
            paths.append(path.read_bytes())
        assert paths[0] == paths[1] == paths[2]
