import json

import numpy as np
import pytest

import aoii_jam.core as core_mod
from aoii_jam.cli import main
from aoii_jam.core import SubsystemParams, lambda_limit
from aoii_jam.verify import CHECKS, MANIFEST, default_grid, run_checks


class TestVerifySuite:
    def test_manifest_matches_registry(self):
        assert MANIFEST == [(name, tol) for name, (_, tol) in CHECKS.items()]
        assert len(MANIFEST) == len(set(name for name, _ in MANIFEST))

    def test_grid_is_large_enough(self):
        grid = default_grid()
        assert len(grid) >= 50
        assert any(p.q == 0.0 for p in grid)
        assert any(p.r == 0.5 for p in grid)
        assert any(p.p == 1.0 for p in grid)

    def test_selected_checks_run(self):
        report = run_checks(names=["eaoii_identities", "kernel_stochastic"])
        assert [c["name"] for c in report["checks"]] == [
            "eaoii_identities",
            "kernel_stochastic",
        ]
        assert report["passed"]

    def test_unknown_check_rejected(self):
        with pytest.raises(ValueError):
            run_checks(names=["no_such_check"])

    def test_corrupted_formula_fails_with_witness(self, monkeypatch):
        real = core_mod.avg_eaoii_closed
        monkeypatch.setattr(core_mod, "avg_eaoii_closed", lambda p, n: real(p, n) * 1.001)
        report = run_checks(names=["avg_eaoii_closed_vs_numeric"])
        assert not report["passed"]
        witness = report["checks"][0]["witness"]
        assert {"p", "q", "r", "n"} <= set(witness)


def run_cli(*argv):
    return main(list(argv))


class TestCliCommands:
    def test_verify_subcommand_exit_codes(self, tmp_path, monkeypatch):
        out = tmp_path / "report.json"
        code = run_cli("verify", "--checks", "eaoii_identities,kernel_stochastic",
                       "--out", str(out))
        assert code == 0
        report = json.loads(out.read_text())
        assert report["passed"]
        # Negative control: a corrupted closed form must flip the exit code.
        real = core_mod.avg_eaoii_closed
        monkeypatch.setattr(core_mod, "avg_eaoii_closed", lambda p, n: real(p, n) + 1e-3)
        code = run_cli("verify", "--checks", "avg_eaoii_closed_vs_numeric",
                       "--out", str(out))
        assert code == 1
        report = json.loads(out.read_text())
        assert not report["passed"]

    def test_sweep_lambda_schema_and_decimation(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run_cli(
            "sweep-lambda", "--params", "0.9,0.9,0.1",
            "--lambda-min", "0", "--lambda-max", "2", "--lambda-step", "0.1",
            "--horizon", "4000", "--seed", "3", "--out", str(out),
        )
        assert code == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        header = lines[0].split(",")
        assert header == [
            "lambda",
            "optimal_reward_closed",
            "optimal_reward_sim",
            "random_reward_sim",
            "threshold_n",
        ]
        # 21 grid points decimated to every 10th -> 3 rows.
        assert len(lines) - 1 == 3
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert first[4] == "0"

    def test_sweep_lambda_full_flag(self, tmp_path):
        out = tmp_path / "sweep_full.csv"
        run_cli(
            "sweep-lambda", "--params", "0.9,0.9,0.1",
            "--lambda-min", "0", "--lambda-max", "2", "--lambda-step", "0.1",
            "--horizon", "4000", "--seed", "3", "--full", "--out", str(out),
        )
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert len(lines) - 1 == 21

    def test_threshold_curve_monotone_and_inf_onset(self, tmp_path):
        out = tmp_path / "curve.csv"
        params = SubsystemParams(0.9, 0.9, 0.1)
        code = run_cli(
            "threshold-curve", "--params", "0.9,0.9,0.1",
            "--lambda-min", "0", "--lambda-max", "6", "--lambda-step", "0.01",
            "--full", "--out", str(out),
        )
        assert code == 0
        rows = [
            line.split(",")
            for line in out.read_text().splitlines()
            if line and not line.startswith("#") and not line.startswith("lambda")
        ]
        limit = lambda_limit(params)
        previous = -1
        for lam_text, cell in rows:
            lam = float(lam_text)
            if cell == "INF":
                assert lam >= limit
                previous = np.inf
            else:
                assert lam < limit
                assert int(cell) >= previous
                previous = int(cell)

    def test_threshold_curve_useless_jammer_is_all_inf(self, tmp_path):
        out = tmp_path / "curve_q0.csv"
        run_cli(
            "threshold-curve", "--params", "0.9,0.0,0.1",
            "--lambda-min", "0", "--lambda-max", "1", "--lambda-step", "0.5",
            "--full", "--out", str(out),
        )
        cells = [
            line.split(",")[1]
            for line in out.read_text().splitlines()
            if line and not line.startswith("#") and not line.startswith("lambda")
        ]
        assert cells == ["INF", "INF", "INF"]

    def test_whittle_table_zero_without_jamming_power(self, tmp_path):
        out = tmp_path / "table.csv"
        code = run_cli(
            "whittle-table", "--params", "0.5,0.0,0.25", "--k-max", "10",
            "--out", str(out),
        )
        assert code == 0
        rows = [
            line.split(",")
            for line in out.read_text().splitlines()
            if line and not line.startswith("#") and not line.startswith("subsystem_id")
        ]
        assert len(rows) == 11
        assert all(float(row[3]) == 0.0 for row in rows)

    def test_whittle_table_methods_agree(self, tmp_path):
        closed_out = tmp_path / "closed.csv"
        iterative_out = tmp_path / "iterative.csv"
        for method, path in (("closed", closed_out), ("iterative", iterative_out)):
            run_cli(
                "whittle-table", "--params", "0.8,0.8,0.2", "--k-max", "40",
                "--method", method, "--out", str(path),
            )

        def values(path):
            return [
                float(line.split(",")[3])
                for line in path.read_text().splitlines()
                if line and not line.startswith("#") and not line.startswith("subsystem_id")
            ]

        closed = np.array(values(closed_out))
        iterative = np.array(values(iterative_out))
        assert np.max(np.abs(closed - iterative)) < 1e-8

    def test_multi_sim_schema_and_class_split_error(self, tmp_path):
        out = tmp_path / "multi.csv"
        code = run_cli(
            "multi-sim",
            "--classes", "0.2,0.2,0.4,0.5;0.8,0.8,0.2,0.5",
            "--n-list", "4", "--horizon", "2000", "--seeds", "0,1",
            "--out", str(out),
        )
        assert code == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0].split(",") == [
            "N", "whittle_avg_aoii", "whittle_stderr", "random_avg_aoii", "random_stderr",
        ]
        # Odd fleet size cannot be split 50/50.
        code = run_cli(
            "multi-sim",
            "--classes", "0.2,0.2,0.4,0.5;0.8,0.8,0.2,0.5",
            "--n-list", "5", "--horizon", "1000", "--seeds", "0",
            "--out", str(tmp_path / "x.csv"),
        )
        assert code == 2

    def test_sim_stats_and_trace(self, tmp_path):
        out = tmp_path / "stats.json"
        trace = tmp_path / "trace.csv"
        code = run_cli(
            "sim", "--params", "0.9,0.9,0.1", "--policy", "threshold:2",
            "--lambda", "1.0", "--horizon", "500", "--seed", "11",
            "--format", "json", "--out", str(out), "--trace", str(trace),
        )
        assert code == 0
        stats = json.loads(out.read_text())
        row = stats["rows"][0]
        assert row["slots"] == 500
        assert 0.0 <= row["avg_aat"] <= 1.0
        lines = trace.read_text().splitlines()
        header_idx = next(i for i, l in enumerate(lines) if not l.startswith("#"))
        assert lines[header_idx].split(",") == [
            "slot", "subsystem_id", "age_index", "true_aoii", "jammed", "delivered",
        ]
        assert len(lines) - header_idx - 1 == 500

    def test_invalid_params_exit_code(self, tmp_path):
        assert run_cli("sim", "--params", "2.0,0.9,0.1", "--horizon", "10") == 2
        assert run_cli("sweep-lambda") == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"params": "0.9,0.9,0.1", "horizon": 300, "seed": 5}))
        out = tmp_path / "s.csv"
        code = run_cli("sim", "--config", str(cfg), "--policy", "never",
                       "--horizon", "200", "--out", str(out))
        assert code == 0
        text = out.read_text()
        assert "# horizon=200" in text  # flag wins over the file value
        assert "# seed=5" in text

    @pytest.mark.parametrize(
        "argv",
        [
            ("sim", "--params", "0.9,0.9,0.1", "--policy", "random:0.5",
             "--horizon", "300", "--seed", "4"),
            ("threshold-curve", "--params", "0.8,0.5,0.2",
             "--lambda-min", "0", "--lambda-max", "1", "--lambda-step", "0.05"),
            ("whittle-table", "--params", "0.8,0.8,0.2", "--k-max", "25"),
            ("sweep-lambda", "--params", "0.9,0.9,0.1", "--lambda-min", "0",
             "--lambda-max", "1", "--lambda-step", "0.1", "--horizon", "2000",
             "--seed", "2"),
            ("multi-sim", "--classes", "0.2,0.2,0.4,0.5;0.8,0.8,0.2,0.5",
             "--n-list", "4", "--horizon", "1500", "--seeds", "0,1"),
        ],
    )
    def test_byte_identical_reruns(self, tmp_path, argv):
        first = tmp_path / "first.out"
        second = tmp_path / "second.out"
        assert run_cli(*argv, "--out", str(first)) == 0
        assert run_cli(*argv, "--out", str(second)) == 0
        assert first.read_bytes() == second.read_bytes()
