"""CLI contract tests: subcommands, file outputs, exit codes."""

import json

import numpy as np
import pytest

from tensorcircuits.circuits import cp_forward
from tensorcircuits.cli import cli_main
from tensorcircuits.decompositions import cp_reconstruct, sample_random
from tensorcircuits.serialize import decomposition_to_dict, grid_to_dict


@pytest.fixture()
def cp_file(tmp_path):
    cp = sample_random("cp", n_modes=4, mode_dim=2, n_terms=2, n_classes=2, seed=80)
    path = tmp_path / "cp.json"
    path.write_text(json.dumps(decomposition_to_dict(cp)))
    return cp, path


@pytest.fixture()
def grid_file(tmp_path):
    rng = np.random.default_rng(81)
    grid = rng.uniform(0.1, 1.5, size=(2, 4))
    path = tmp_path / "grid.json"
    path.write_text(json.dumps(grid_to_dict(grid)))
    return grid, path


def test_reconstruct_writes_tensor(tmp_path, cp_file):
    cp, path = cp_file
    out = tmp_path / "tensor.json"
    code = cli_main(
        ["reconstruct", "--decomposition", str(path), "--class-index", "1",
         "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["shape"] == [2, 2, 2, 2]
    np.testing.assert_allclose(
        np.array(doc["values"]).reshape(2, 2, 2, 2), cp_reconstruct(cp, 1)
    )


def test_forward_scores_match_library(tmp_path, cp_file, grid_file):
    cp, cp_path = cp_file
    grid, grid_path = grid_file
    out = tmp_path / "scores.json"
    code = cli_main(
        ["forward", "--decomposition", str(cp_path), "--grid", str(grid_path),
         "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    np.testing.assert_allclose(doc["scores"], cp_forward(cp, grid), rtol=1e-12)


def test_forward_ht_decomposition(tmp_path, grid_file):
    from tensorcircuits.circuits import ht_forward

    ht = sample_random("ht", n_modes=4, mode_dim=2, ranks=(2, 2), n_classes=2, seed=83)
    ht_path = tmp_path / "ht.json"
    ht_path.write_text(json.dumps(decomposition_to_dict(ht)))
    grid, grid_path = grid_file
    out = tmp_path / "ht_scores.json"
    code = cli_main(
        ["forward", "--decomposition", str(ht_path), "--grid", str(grid_path),
         "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    np.testing.assert_allclose(doc["scores"], ht_forward(ht, grid), rtol=1e-12)


def test_forward_log_space_rejects_negative_weight(tmp_path, cp_file, grid_file, capsys):
    _, cp_path = cp_file  # normal weights: some are negative
    _, grid_path = grid_file
    code = cli_main(
        ["forward", "--decomposition", str(cp_path), "--grid", str(grid_path),
         "--log-space"]
    )
    assert code == 2
    assert "non-negative" in capsys.readouterr().err


def test_forward_log_space_on_nonnegative(tmp_path, grid_file):
    cp = sample_random(
        "cp", n_modes=4, mode_dim=2, n_terms=2, seed=82, distribution="uniform01"
    )
    cp_path = tmp_path / "cp_pos.json"
    cp_path.write_text(json.dumps(decomposition_to_dict(cp)))
    grid, grid_path = grid_file
    out = tmp_path / "log_scores.json"
    code = cli_main(
        ["forward", "--decomposition", str(cp_path), "--grid", str(grid_path),
         "--log-space", "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert np.exp(doc["log_scores"][0]) == pytest.approx(
        cp_forward(cp, grid)[0], rel=1e-9
    )


def test_rank_experiment_writes_reports_and_figure(tmp_path):
    cfg = {
        "kind": "rank-separation", "n_modes": 4, "mode_dim": 2,
        "ranks": [2, 2], "trials": 10, "seed": 5,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "report"
    code = cli_main(
        ["rank-experiment", "--config", str(cfg_path), "--out", str(out)]
    )
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["aggregate"]["failures"] == 0
    assert report["config"]["ranks"] == [2, 2]
    csv_lines = (tmp_path / "report.csv").read_text().splitlines()
    assert csv_lines[0] == "trial,seed,observed_rank,bound,residual,pass"
    assert len(csv_lines) == 11
    assert (tmp_path / "report.png").stat().st_size > 0


def test_no_plot_skips_figure(tmp_path):
    out = tmp_path / "r"
    code = cli_main(
        ["rank-experiment", "--n-modes", "4", "--mode-dim", "2", "--ranks", "2,2",
         "--trials", "5", "--seed", "1", "--out", str(out), "--no-plot"]
    )
    assert code == 0
    assert (tmp_path / "r.json").exists()
    assert not (tmp_path / "r.png").exists()


def test_flags_override_config(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "kind": "rank-separation", "n_modes": 4, "mode_dim": 2,
        "ranks": [2, 2], "trials": 100, "seed": 5,
    }))
    code = cli_main(
        ["rank-experiment", "--config", str(cfg_path), "--trials", "4",
         "--out", str(tmp_path / "r"), "--no-plot", "--format", "json"]
    )
    assert code == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["aggregate"]["trials"] == 4
    assert not (tmp_path / "r.csv").exists()


def test_experiment_without_out_prints_report(capsys):
    code = cli_main(
        ["lemma-check", "--lemma", "lemma1", "--rows", "3", "--cols", "2",
         "--trials", "5", "--seed", "3"]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["aggregate"]["failures"] == 0
    assert doc["config"]["kind"] == "lemma1"


def test_generalized_and_approx_gap_commands(tmp_path):
    assert cli_main(
        ["generalized-experiment", "--trials", "5", "--seed", "2",
         "--out", str(tmp_path / "g"), "--no-plot"]
    ) == 0
    assert cli_main(
        ["approx-gap", "--trials", "5", "--seed", "2",
         "--out", str(tmp_path / "a"), "--no-plot"]
    ) == 0
    gap = json.loads((tmp_path / "a.json").read_text())
    assert all(rec["residual"] > 0 for rec in gap["records"])


def test_malformed_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli_main(["rank-experiment", "--config", str(bad)]) == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_unknown_config_field_named(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"kind": "rank-separation", "n_modez": 4}))
    assert cli_main(["rank-experiment", "--config", str(cfg_path)]) == 2
    assert "n_modez" in capsys.readouterr().err


def test_mismatched_config_kind_exits_2(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "kind": "lemma1", "rows": 3, "cols": 2, "trials": 2,
    }))
    assert cli_main(["rank-experiment", "--config", str(cfg_path)]) == 2
    assert "does not match" in capsys.readouterr().err


def test_unknown_subcommand_exits_2(capsys):
    assert cli_main(["no-such-command"]) == 2


def test_unwritable_output_exits_2(tmp_path, capsys):
    out = tmp_path / "missing_dir" / "report"
    code = cli_main(
        ["rank-experiment", "--n-modes", "4", "--mode-dim", "2", "--ranks", "2,2",
         "--trials", "2", "--out", str(out)]
    )
    assert code == 2
    assert "cannot write report" in capsys.readouterr().err


def test_failure_threshold_exit_code_1(tmp_path):
    # An absurdly large rel_tol forces every rank decision to zero, so every
    # trial fails its bound and the exit code reports it.
    code = cli_main(
        ["rank-experiment", "--n-modes", "4", "--mode-dim", "2", "--ranks", "2,2",
         "--trials", "3", "--rel-tol", "1e6", "--out", str(tmp_path / "r"),
         "--no-plot"]
    )
    assert code == 1


def test_help_exits_0(capsys):
    assert cli_main(["--help"]) == 0
    assert "reconstruct" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    result = subprocess.run(
        [sys.executable, "-m", "tensorcircuits.cli", "lemma-check",
         "--lemma", "lemma2", "--trials", "3", "--seed", "1"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert json.loads(result.stdout)["aggregate"]["failures"] == 0
