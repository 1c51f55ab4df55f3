import json
import os

import numpy as np
import pytest

from levyou.cli import main
from levyou.config import config_hash, parse_config
from levyou.errors import ConfigError, ExpressionError
from levyou.expressions import compile_expression, matrix_entries


def minimal_config(**overrides):
    cfg = {
        "model": {"dimension": 1, "seminorms": {"profile": "hermite", "levels": 1}},
        "chars": {"drift": [0.0], "covariance": [[0.0]], "atoms": []},
        "evolution": {"variant": "diagonal", "eigenvalues": [0.0]},
        "integrand": {"kind": "constant", "matrix": [[1.0]]},
        "initial": {"kind": "point", "value": [0.0]},
        "experiment": {"horizon": 1.0, "grid_cells": 4, "ensemble": 2, "seed": 1},
    }
    cfg.update(overrides)
    return cfg


def test_minimal_config_parses():
    rc = parse_config(json.dumps(minimal_config()))
    assert rc.dimension == 1
    assert rc.problem.horizon == 1.0
    assert rc.tolerances["exact"] == 1e-10


def test_negative_rate_names_offending_atom():
    cfg = minimal_config()
    cfg["chars"]["atoms"] = [{"rate": 1.0, "mark": [1.0]}, {"rate": -2.0, "mark": [1.0]}]
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(cfg))
    assert any("atoms[1].rate" in issue for issue in exc.value.issues)


def test_non_psd_covariance_rejected():
    cfg = minimal_config()
    cfg["chars"]["covariance"] = [[-0.1]]
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(cfg))
    assert any("negative eigenvalue" in issue for issue in exc.value.issues)


def test_unknown_keys_rejected():
    cfg = minimal_config()
    cfg["mystery"] = 1
    cfg["experiment"]["bogus"] = True
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(cfg))
    text = "\n".join(exc.value.issues)
    assert "mystery" in text and "bogus" in text


def test_all_errors_collected_not_just_first():
    cfg = minimal_config()
    cfg["chars"]["atoms"] = [{"rate": -1.0, "mark": [1.0]}]
    cfg["chars"]["drift"] = [1.0, 2.0]
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(cfg))
    assert len(exc.value.issues) >= 2


def test_dimension_inconsistency_diagnosed():
    cfg = minimal_config()
    cfg["evolution"]["eigenvalues"] = [0.0, 1.0]
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(cfg))
    assert any("eigenvalues" in issue for issue in exc.value.issues)


def test_expression_grammar_evaluates():
    fn = compile_expression("-(k+1)^2 * (1 + 0.5*sin(t))", ("t", "k"))
    assert fn(0.0, 1.0) == pytest.approx(-4.0)
    assert fn(np.pi / 2, 0.0) == pytest.approx(-1.5)
    g = compile_expression("exp(-t) + cos(t)/2", ("t",))
    assert g(0.0) == pytest.approx(1.5)


def test_expression_grammar_rejects_bad_symbols():
    with pytest.raises(ExpressionError):
        compile_expression("__import__('os')", ("t",))
    with pytest.raises(ExpressionError):
        compile_expression("t + q", ("t",))
    with pytest.raises(ExpressionError):
        compile_expression("t.real", ("t",))
    with pytest.raises(ExpressionError):
        compile_expression("tan(t)", ("t",))


def test_matrix_entries_mixed():
    fn = matrix_entries([[0.0, "t"], ["-t", 1.0]], ("t",))
    assert np.allclose(fn(2.0), [[0.0, 2.0], [-2.0, 1.0]])


def test_time_dependent_evolution_from_config():
    cfg = minimal_config()
    cfg["model"]["dimension"] = 2
    cfg["chars"] = {"drift": [0.0, 0.0], "covariance": [[0.0, 0.0], [0.0, 0.0]], "atoms": []}
    cfg["evolution"] = {"variant": "diagonal_t", "coefficient": "-(k+1) * (1 + 0*t)"}
    cfg["integrand"] = {"kind": "constant", "matrix": [[1.0, 0.0], [0.0, 1.0]]}
    cfg["initial"] = {"kind": "point", "value": [1.0, 1.0]}
    rc = parse_config(json.dumps(cfg))
    out = rc.system.apply(0.0, 1.0, np.array([1.0, 1.0]))
    assert np.allclose(out, [np.exp(-1.0), np.exp(-2.0)], rtol=1e-10)


def test_config_hash_stable_and_distinct():
    a = minimal_config()
    b = minimal_config()
    assert config_hash(a) == config_hash(b)
    b["experiment"]["seed"] = 2
    assert config_hash(a) != config_hash(b)


def test_cli_simulate_deterministic(tmp_path):
    cfg = minimal_config()
    cfg["chars"] = {
        "drift": [0.3],
        "covariance": [[0.1]],
        "atoms": [{"rate": 2.0, "mark": [0.5]}],
    }
    cfg["experiment"]["ensemble"] = 3
    cfg["experiment"]["grid_cells"] = 8
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out2)]) == 0
    csv1 = (out1 / "trajectory.csv").read_bytes()
    csv2 = (out2 / "trajectory.csv").read_bytes()
    assert csv1 == csv2
    header = csv1.decode().splitlines()[0]
    assert header == "replica,t,k,value"
    meta = json.loads((out1 / "trajectory.meta.json").read_text())
    assert meta["config_hash"] == config_hash(cfg)


def test_cli_simulate_row_count(tmp_path):
    cfg = minimal_config()
    cfg["model"]["dimension"] = 2
    cfg["chars"] = {
        "drift": [0.0, 0.0],
        "covariance": [[0.0, 0.0], [0.0, 0.0]],
        "atoms": [{"rate": 3.0, "mark": [1.0, 0.0]}],
    }
    cfg["evolution"] = {"variant": "diagonal", "eigenvalues": [-1.0, -1.0]}
    cfg["integrand"] = {"kind": "constant", "matrix": [[1.0, 0.0], [0.0, 1.0]]}
    cfg["initial"] = {"kind": "point", "value": [0.0, 0.0]}
    cfg["experiment"]["ensemble"] = 1
    cfg["experiment"]["grid_cells"] = 4
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
    lines = (out / "trajectory.csv").read_text().splitlines()[1:]
    # |grid ∪ jumps| x dimension rows for the single replica
    from levyou.config import parse_config as pc
    from levyou.levy import simulate_path
    from levyou.rng import derive_seed

    rc = pc(json.dumps(cfg))
    path = simulate_path(rc.chars, 1.0, rc.grid, derive_seed(rc.seed, "simulate/0"))
    expected = (rc.grid.size + path.jump_times.size) * 2
    assert len(lines) == expected


def test_cli_threads_match_sequential(tmp_path):
    cfg = minimal_config()
    cfg["chars"] = {"drift": [0.1], "covariance": [[0.2]], "atoms": [{"rate": 1.0, "mark": [2.0]}]}
    cfg["experiment"]["ensemble"] = 4
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out1 = tmp_path / "seq"
    out2 = tmp_path / "par"
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out2), "--threads", "4"]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()


def test_cli_seed_override_changes_output(tmp_path):
    cfg = minimal_config()
    cfg["chars"] = {"drift": [0.0], "covariance": [[0.5]], "atoms": []}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out2), "--seed", "999"]) == 0
    assert (out1 / "trajectory.csv").read_bytes() != (out2 / "trajectory.csv").read_bytes()


def test_cli_rejects_bad_config(tmp_path):
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text("{not json")
    assert main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 2
    cfg = minimal_config()
    cfg["chars"]["atoms"] = [{"rate": -1.0, "mark": [1.0]}]
    cfg_path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 2


def test_cli_command_mismatch_rejected(tmp_path):
    cfg = minimal_config()
    cfg["experiment"]["command"] = "verify"
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 2


def test_cli_verify_reference_config(tmp_path):
    # small, noise-free reference problem: every identity row must pass
    cfg = {
        "model": {"dimension": 2, "seminorms": {"profile": "hermite", "levels": 2}},
        "chars": {
            "drift": [0.4, -0.2],
            "covariance": [[0.0, 0.0], [0.0, 0.0]],
            "atoms": [
                {"rate": 2.0, "mark": [0.25, 0.1]},
                {"rate": 1.0, "mark": [3.0, -1.0]},
            ],
        },
        "evolution": {"variant": "diagonal", "eigenvalues": [-1.0, -2.0]},
        "integrand": {"kind": "constant", "matrix": [[1.0, 0.0], [0.3, 1.0]]},
        "initial": {"kind": "point", "value": [1.0, -0.5]},
        "experiment": {
            "horizon": 1.0,
            "grid_cells": 16,
            "ensemble": 1000,
            "seed": 515,
            "probes": [[1.0, 0.5]],
            "times": [1.0],
        },
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg_path), "--out", str(out)]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    assert report["all_passed"] is True
    assert report["config_hash"] == config_hash(cfg)
    ids = {row["check_id"] for row in report["rows"]}
    assert "weak_strong_compatibility" in ids
    assert "jump_reconstruction" in ids


def test_perturbed_evolution_from_config():
    cfg = minimal_config()
    cfg["evolution"] = {
        "variant": "perturbed",
        "base": {"variant": "diagonal", "eigenvalues": [-1.0]},
        "perturbation": [["0.5 + 0*t"]],
        "substep": 0.01,
    }
    rc = parse_config(json.dumps(cfg))
    out = rc.system.apply(0.0, 1.0, np.array([1.0]))
    # commuting scalar case has the closed form e^{(a + d) t}
    assert out[0] == pytest.approx(np.exp(-0.5), rel=1e-10)


def test_mark_dependent_integrand_from_config():
    cfg = minimal_config()
    cfg["model"]["dimension"] = 2
    cfg["chars"] = {"drift": [0.0, 0.0], "covariance": [[0.0, 0.0], [0.0, 0.0]], "atoms": []}
    cfg["evolution"] = {"variant": "diagonal", "eigenvalues": [-1.0, -1.0]}
    cfg["integrand"] = {"kind": "mark_dependent", "matrix": [["f1", 0.0], [0.0, "t + f2"]]}
    cfg["initial"] = {"kind": "point", "value": [0.0, 0.0]}
    rc = parse_config(json.dumps(cfg))
    m = rc.integrand.mat(0.5, np.array([2.0, 3.0]))
    assert np.allclose(m, [[2.0, 0.0], [0.0, 3.5]])


def test_scenario_expression_form():
    from levyou.config import build_scenario

    cfg = minimal_config()
    cfg["model"]["dimension"] = 2
    cfg["chars"] = {"drift": [0.5, -0.3], "covariance": [[0.1, 0.0], [0.0, 0.1]], "atoms": []}
    cfg["evolution"] = {"variant": "diagonal", "eigenvalues": [-1.0, -2.0]}
    cfg["integrand"] = {"kind": "constant", "matrix": [[1.0, 0.0], [0.0, 1.0]]}
    cfg["initial"] = {"kind": "point", "value": [0.5, 0.5]}
    cfg["experiment"]["probes"] = [[1.0, 0.0]]
    cfg["experiment"]["times"] = [1.0]
    cfg["scenario"] = {
        "n_values": [1, 2, 4],
        "q_level": 1,
        "eigenvalues": ["-1.0 + 0.5/n", "-2.0 - 0.25/n"],
        "drift": ["0.5 + 0.3/n", -0.3],
        "b_matrix": [["1 + 0.2/n", 0.0], [0.0, 1.0]],
    }
    rc = parse_config(json.dumps(cfg))
    scenario = build_scenario(rc)
    assert scenario.indices == [1, 2, 4]
    assert np.allclose(scenario.problem(2).system.a, [-0.75, -2.125])
    assert np.allclose(scenario.problem(0).system.a, [-1.0, -2.0])
    assert scenario.problem(4).integrand.constant_matrix[0, 0] == pytest.approx(1.05)


def test_scenario_expression_form_rejects_empty():
    from levyou.config import build_scenario
    from levyou.errors import ConfigError as CE

    cfg = minimal_config()
    cfg["scenario"] = {"n_values": [1], "q_level": 0}
    rc = parse_config(json.dumps(cfg))
    with pytest.raises(CE):
        build_scenario(rc)


def test_shipped_reference_configs_parse():
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    for name in ("scalar_ou.json", "jump_ou.json", "converge_perturbed.json"):
        with open(os.path.join(here, "configs", name)) as fh:
            rc = parse_config(fh.read())
        assert rc.dimension >= 1
