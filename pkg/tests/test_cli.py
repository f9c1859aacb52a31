import json

import pytest

from pushcen.cli import build_parser, main, results_table


SMALL = ["--clients", "5", "--events", "300", "--alpha", "0.4", "--seed", "1"]


def test_show_config_prints_resolved_json(capsys):
    assert main(["show-config", "--method", "independent"]) == 0
    out = capsys.readouterr().out
    cfg = json.loads(out)
    assert cfg["method"] == "independent"
    assert cfg["topology"]["fanout"] == 0  # resolved, not raw


def test_run_writes_metrics_and_manifest(tmp_path, capsys):
    rc = main(["run", *SMALL, "--out", str(tmp_path)])
    assert rc == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert any(f.endswith("_metrics.csv") for f in files)
    manifest_file = next(p for p in tmp_path.iterdir() if p.name.endswith("_manifest.json"))
    manifest = json.loads(manifest_file.read_text())
    assert "config_hash" in manifest
    out = capsys.readouterr().out
    assert "acc=" in out


def test_run_flags_reach_config(capsys):
    assert main(["show-config", "--clusters", "8", "--lambda", "0.3",
                 "--buffer-limit", "4", "--epochs", "2"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["trainer"]["k"] == 8
    assert cfg["trainer"]["lam"] == 0.3
    assert cfg["buffer_limit"] == 4
    assert cfg["trainer"]["epochs"] == 2


def test_cost_subcommand(capsys):
    assert main(["cost", "--model", "mlp"]) == 0
    out = capsys.readouterr().out
    assert "ratio" in out


def test_verify_small_run(capsys):
    rc = main(["verify", *SMALL])
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "mass conservation" in out
    assert "FAIL" not in out


def test_matrix_small(tmp_path, capsys):
    rc = main([
        "matrix", *SMALL, "--methods", "pushcen", "independent",
        "--alphas", "0.4", "--seeds", "1", "--out", str(tmp_path),
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "pushcen" in out and "independent" in out
    csv = (tmp_path / "matrix.csv").read_text()
    assert csv.startswith("method,alpha,")
    cells = json.loads((tmp_path / "matrix_cells.json").read_text())
    assert len(cells) == 2
    # relative cost column: the compressed method is the 1.00 reference
    pc_row = next(l for l in csv.splitlines() if l.startswith("pushcen"))
    assert ",1.0000," in pc_row


def test_results_table_flags_failures():
    cells = [
        {"method": "pushcen", "alpha": 0.4, "seed": 0, "final_acc": 0.5,
         "acc_sd": 0.1, "per_push_bytes": 100.0, "cum_bytes": 1000,
         "config_hash": "x", "error": None},
        {"method": "independent", "alpha": 0.4, "seed": 0, "error": "boom"},
    ]
    text, csv = results_table(cells)
    assert "PARTIAL" in text
    assert "boom" in text


def test_ablate_rows(tmp_path, capsys):
    rc = main(["ablate", *SMALL, "--seeds", "1", "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    for name in ("full", "no_reg", "no_buffer"):
        assert name in out
    assert (tmp_path / "ablation.txt").exists()


def test_parser_rejects_unknown_method():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--method", "fedsgd"])
