
import json
from pathlib import Path

import numpy as np
import pytest

from disgrad.cli import main
from disgrad.errors import ConfigError
from disgrad.experiment import (
    apply_seed_override,
    assemble,
    dump_lasso_data,
    load_config,
    load_lasso_data,
    parse_config,
    run_experiment,
    serialize_config,
    solve_reference,
    synthesize_lasso_data,
    validate_config,
)

from conftest import CONFIG_DIR, redirect_outputs

TINY_CONFIG = {
    "schema": 1,
    "problem": {
        "kind": "lasso_huber",
        "lambda": 1.0,
        "synth": {
            "seed": 7,
            "total_rows": 30,
            "agents": 3,
            "block_rows": 10,
            "dimension": 2,
            "x0": [1.0, 0.0],
            "noise_halfwidth": 0.01,
        },
    },
    "graph": {
        "phases": [{"edges": [[1, 2], [2, 3]], "dwell": 5}, {"edges": [[1, 3], [2, 3]], "dwell": 5}],
        "cycling": True,
        "weights": {"kind": "randomized", "eta_floor": 0.05, "seed": 3},
    },
    "schedule": {
        "step": {"kind": "harmonic", "a": 0.5, "b": 10.0},
        "accuracy": {"kind": "constant", "value": 1.0},
    },
    "run": {
        "horizon": 300,
        "x_init": {"kind": "uniform", "low": -1.0, "high": 1.0, "seed": 5},
        "record_stride": 10,
        "retention_stride": 50,
    },
    "output": {"csv": "metrics.csv", "reference": True},
}

def tiny_config(tmp_path: Path, **problem_overrides) -> Path:
    doc = json.loads(json.dumps(TINY_CONFIG))
    doc["problem"].update(problem_overrides)
    doc["output"]["csv"] = str(tmp_path / "metrics.csv")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path

class TestSynthesis:
    def test_shapes_and_partition(self):
        a_blocks, y_blocks = synthesize_lasso_data(
            1, 1000, 10, [100] * 10, 5, [0, 1, 2, 0, 1], 0.01
        )
        assert len(a_blocks) == 10
        assert all(a.shape == (100, 5) for a in a_blocks)
        assert sum(len(y) for y in y_blocks) == 1000
        a = np.vstack(a_blocks)
        assert np.all((a >= 0) & (a <= 1))

    def test_zero_noise_exact(self):
        x0 = [0.5, -1.0]
        a_blocks, y_blocks = synthesize_lasso_data(3, 8, 2, [4, 4], 2, x0, 0.0)
        for a, y in zip(a_blocks, y_blocks):
            assert y == pytest.approx(a @ np.array(x0))

    def test_noise_bounded(self):
        x0 = [1.0]
        a_blocks, y_blocks = synthesize_lasso_data(9, 50, 1, [50], 1, x0, 0.01)
        resid = y_blocks[0] - a_blocks[0] @ np.array(x0)
        assert np.max(np.abs(resid)) <= 0.01

    def test_same_seed_identical(self):
        one = synthesize_lasso_data(5, 20, 2, [10, 10], 3, [0, 0, 1], 0.01)
        two = synthesize_lasso_data(5, 20, 2, [10, 10], 3, [0, 0, 1], 0.01)
        for a1, a2 in zip(one[0], two[0]):
            assert np.array_equal(a1, a2)

    def test_partition_mismatch_rejected(self):
        from disgrad.errors import InvalidParameter

        with pytest.raises(InvalidParameter):
            synthesize_lasso_data(1, 10, 2, [4, 4], 1, [0.0], 0.0)

    def test_dump_and_reload_round_trip(self, tmp_path):
        blocks = synthesize_lasso_data(2, 12, 3, [4, 4, 4], 2, [1, 0], 0.01)
        path = dump_lasso_data(blocks[0], blocks[1], tmp_path / "d.npz")
        a2, y2 = load_lasso_data(path)
        for a, b in zip(blocks[0], a2):
            assert np.array_equal(a, b)
        for a, b in zip(blocks[1], y2):
            assert np.array_equal(a, b)

class TestConfigParsing:
    def test_round_trip(self):
        cfg = parse_config(TINY_CONFIG)
        again = parse_config(serialize_config(cfg))
        assert cfg == again

    def test_shipped_configs_parse_and_round_trip(self):
        for name in ("paper_fig3.json", "paper_fig4.json", "quadratic_toy.json",
                     "constant_step.json"):
            cfg = load_config(CONFIG_DIR / name)
            assert parse_config(serialize_config(cfg)) == cfg

    def test_missing_field_names_path(self):
        doc = json.loads(json.dumps(TINY_CONFIG))
        del doc["problem"]["synth"]["seed"]
        with pytest.raises(ConfigError, match="problem.synth.seed"):
            parse_config(doc)

    def test_wrong_schema_rejected(self):
        doc = json.loads(json.dumps(TINY_CONFIG))
        doc["schema"] = 2
        with pytest.raises(ConfigError, match="schema"):
            parse_config(doc)

    def test_block_partition_checked(self):
        doc = json.loads(json.dumps(TINY_CONFIG))
        doc["problem"]["synth"]["block_rows"] = [10, 10, 11]
        with pytest.raises(ConfigError, match="block_rows"):
            parse_config(doc)

    def test_malformed_json_reports_location(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json }")
        with pytest.raises(ConfigError, match="1:3"):
            load_config(path)

    def test_unknown_problem_kind(self):
        doc = json.loads(json.dumps(TINY_CONFIG))
        doc["problem"] = {"kind": "cubic"}
        with pytest.raises(ConfigError, match="kind"):
            parse_config(doc)

class TestValidateConfig:
    def test_shipped_configs_pass(self):
        for name in ("paper_fig3.json", "paper_fig4.json", "quadratic_toy.json"):
            report = validate_config(load_config(CONFIG_DIR / name))
            assert report.passed, report.entries

    def test_disconnected_phase_names_connectivity(self):
        doc = json.loads(json.dumps(TINY_CONFIG))
        doc["graph"]["phases"][0]["edges"] = [[1, 2]]
        report = validate_config(parse_config(doc))
        assert not report.passed
        assert any("connectivity" in e.message for e in report.errors)

    def test_constant_step_warns_neither(self):
        report = validate_config(load_config(CONFIG_DIR / "constant_step.json"))
        assert report.passed
        assert any("neither" in e.message for e in report.entries if e.level == "warning")

class TestSeedOverride:
    def test_deterministic_and_purpose_split(self):
        cfg = parse_config(TINY_CONFIG)
        a = apply_seed_override(cfg, 123)
        b = apply_seed_override(cfg, 123)
        c = apply_seed_override(cfg, 124)
        assert a == b
        assert a != c
        assert a.problem.synth.seed != a.graph.weights.seed
        assert a.problem.synth.seed != a.run.x_init.seed

class TestRunExperiment:
    def test_end_to_end_tiny(self, tmp_path):
        cfg = redirect_outputs(parse_config(TINY_CONFIG), tmp_path, dump=True)
        outcome = run_experiment(cfg)
        assert outcome.exit_code == 0
        assert outcome.csv_path.exists()
        assert outcome.trajectory_path.exists()
        assert (tmp_path / "data.npz").exists()
        header = outcome.csv_path.read_text().splitlines()[0]
        assert header == "k,alpha_k,delta_k,consensus_error,f_av_true,f_oracle_sum,subopt,grad_sup"
        assert outcome.summary["regime"] == "theorem1"
        assert outcome.summary["checks"]["average_identity"]["passed"]

    def test_byte_identical_reruns(self, tmp_path):
        cfg1 = redirect_outputs(parse_config(TINY_CONFIG), tmp_path / "a")
        cfg2 = redirect_outputs(parse_config(TINY_CONFIG), tmp_path / "b")
        out1 = run_experiment(cfg1)
        out2 = run_experiment(cfg2)
        assert out1.csv_path.read_bytes() == out2.csv_path.read_bytes()
        assert out1.trajectory_path.read_bytes() == out2.trajectory_path.read_bytes()

    def test_data_file_reload_matches_synthesis(self, tmp_path):
        cfg = redirect_outputs(parse_config(TINY_CONFIG), tmp_path / "a", dump=True)
        out1 = run_experiment(cfg)
        doc = serialize_config(cfg)
        doc["problem"].pop("synth")
        doc["problem"]["data_file"] = str(tmp_path / "a" / "data.npz")
        doc["output"]["csv"] = str(tmp_path / "b" / "metrics.csv")
        doc["output"]["trajectory"] = str(tmp_path / "b" / "trajectory.csv")
        doc["output"]["data_dump"] = None
        out2 = run_experiment(parse_config(doc))
        assert out1.csv_path.read_bytes() == out2.csv_path.read_bytes()

    def test_horizon_and_seed_overrides(self, tmp_path):
        cfg = redirect_outputs(parse_config(TINY_CONFIG), tmp_path)
        outcome = run_experiment(cfg, horizon_override=50, seed_override=9)
        assert outcome.summary["horizon"] == 50
        assert outcome.result.records[-1].k == 50

    def test_quadratic_kind(self, tmp_path):
        doc = json.loads(json.dumps(TINY_CONFIG))
        doc["problem"] = {
            "kind": "exact_quadratic",
            "centers": [[1.0], [2.0], [3.0]],
            "curvatures": [1.0, 1.0, 1.0],
        }
        doc["schedule"]["accuracy"] = {"kind": "constant", "value": 0.0}
        doc["run"]["x_init"] = {"kind": "zeros"}
        doc["output"]["csv"] = str(tmp_path / "m.csv")
        outcome = run_experiment(parse_config(doc))
        assert outcome.summary["regime"] == "theorem2"
        assert outcome.summary["reference"]["x_star"] == [2.0]

    def test_failed_applicable_check_exits_1(self, tmp_path):
        # exact-convergence regime with far too few rounds for the tolerance
        doc = json.loads(json.dumps(TINY_CONFIG))
        doc["problem"] = {
            "kind": "exact_quadratic",
            "centers": [[0.0], [4.0], [8.0]],
            "curvatures": [1.0, 1.0, 1.0],
        }
        doc["schedule"]["accuracy"] = {"kind": "constant", "value": 0.0}
        doc["run"]["horizon"] = 25
        doc["run"]["x_init"] = {"kind": "zeros"}
        doc["checks"] = {"theorem2_tol": 1e-9}
        doc["output"]["csv"] = str(tmp_path / "m.csv")
        outcome = run_experiment(parse_config(doc))
        assert outcome.exit_code == 1
        assert "theorem2" in outcome.summary["failed_checks"]

    def test_rows_init_shape_checked(self, tmp_path):
        doc = json.loads(json.dumps(TINY_CONFIG))
        doc["run"]["x_init"] = {"kind": "rows", "values": [[0.0, 0.0]]}
        doc["output"]["csv"] = str(tmp_path / "m.csv")
        with pytest.raises(ConfigError, match="x_init"):
            run_experiment(parse_config(doc))

class TestReferenceCommandPath:
    def test_solve_reference_lasso(self):
        cfg = parse_config(TINY_CONFIG)
        assembled = assemble(cfg)
        sol = solve_reference(cfg, assembled.family)
        assert sol.gap_bound <= 1e-10
        # optimum should sit near the synthesis ground truth (1, 0)
        assert abs(sol.x_star[0] - 1.0) < 0.3

class TestCli:
    def test_run_success_prints_summary(self, tmp_path, capsys):
        path = tiny_config(tmp_path)
        code = main(["run", str(path), "--csv", str(tmp_path / "out.csv")])
        captured = capsys.readouterr()
        assert code == 0
        summary = json.loads(captured.out)
        assert summary["regime"] == "theorem1"
        assert (tmp_path / "out.csv").exists()

    def test_run_with_figures(self, tmp_path, capsys):
        path = tiny_config(tmp_path)
        code = main([
            "run", str(path), "--csv", str(tmp_path / "out.csv"),
            "--horizon", "60", "--figures", str(tmp_path / "figs"),
        ])
        assert code == 0
        produced = sorted(p.name for p in (tmp_path / "figs").glob("*.png"))
        assert produced == ["components.png", "consensus.png", "objective.png"]
        assert all((tmp_path / "figs" / n).stat().st_size > 0 for n in produced)

    def test_malformed_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        assert main(["run", str(bad)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_assumption_violation_exits_2(self, tmp_path, capsys):
        doc = json.loads(json.dumps(TINY_CONFIG))
        doc["graph"]["phases"][0]["edges"] = [[1, 2]]
        doc["output"]["csv"] = str(tmp_path / "m.csv")
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        assert main(["run", str(path)]) == 2
        assert "connectivity" in capsys.readouterr().err

    def test_validate_shipped_config(self, capsys):
        code = main(["validate", str(CONFIG_DIR / "paper_fig3.json")])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"]

    def test_reference_prints_solution(self, tmp_path, capsys):
        path = tiny_config(tmp_path)
        assert main(["reference", str(path)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert set(doc) >= {"x_star", "f_star", "gap_bound"}

    def test_plot_from_csv(self, tmp_path, capsys):
        path = tiny_config(tmp_path)
        main(["run", str(path), "--csv", str(tmp_path / "out.csv"), "--horizon", "40"])
        capsys.readouterr()
        code = main([
            "plot", str(tmp_path / "out.csv"),
            "--trajectory", str(tmp_path / "out_trajectory.csv"),
            "--out", str(tmp_path / "figs2"),
        ])
        assert code == 0
        listed = json.loads(capsys.readouterr().out)["figures"]
        assert len(listed) == 3

    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
