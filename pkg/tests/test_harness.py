import json
import os

import numpy as np
import pytest

from ivusgan.cli import main as cli_main
from ivusgan.config import experiment_config_from_sections, parse_config_text
from ivusgan.harness import (
    REPORT_COLUMNS,
    merge_reports,
    read_report_csv,
    report_plots,
    run_experiment,
    write_report_csv,
    provenance_block,
)
from ivusgan.reference import (
    BETA_GRID,
    GENERATOR_COMPARISON_REFERENCE,
    LOSS_ABLATION_REFERENCE,
    all_reference_tables,
)
from ivusgan.serialize import canonical_json

SMOKE_BODY = """
[dataset]
n_train = 4
n_val = 2
n_test = 2

[phantom]
image_size = 16
seed = 0

[generator]
variant = "unet"
depth = 3
base_channels = 2

[discriminator]
n_down = 2
base_channels = 2

[train]
epochs = 2
batch_size = 2
"""


def smoke_experiment(name, out_dir, seeds="[0]"):
    text = f'[experiment]\nname = "{name}"\nseeds = {seeds}\nout_dir = "{out_dir}"\n' + SMOKE_BODY
    return experiment_config_from_sections(parse_config_text(text))


def test_reference_tables_match_checked_in_fixture():
    here = os.path.dirname(__file__)
    with open(os.path.join(here, "data", "reference_tables.json")) as fh:
        fixture_text = fh.read().strip()
    assert canonical_json(all_reference_tables()) == fixture_text


def test_reference_spot_values():
    assert LOSS_ABLATION_REFERENCE["adv_l2"]["lu_jm"] == 0.9206
    assert LOSS_ABLATION_REFERENCE["adv_l2"]["lu_hd"] == 0.2020
    assert LOSS_ABLATION_REFERENCE["adv_only"]["lu_jm"] == 0.8968
    assert GENERATOR_COMPARISON_REFERENCE["unet"]["model_size_m"] == 226.4130
    assert GENERATOR_COMPARISON_REFERENCE["encoder_decoder"]["model_size_m"] == 79.7940


def test_loss_ablation_report_shape(tmp_path):
    exp = smoke_experiment("loss_ablation", str(tmp_path / "runs"))
    results = run_experiment(exp)
    assert [r.configuration for r in results] == [
        "adv_only", "l1_only", "l2_only", "adv_l1", "adv_l2",
    ]
    assert all(r.failed_runs == 0 for r in results)
    report = tmp_path / "runs" / "report.csv"
    write_report_csv(report, results, provenance_block("abc", exp.seeds, exp.name))
    header, rows, prov = read_report_csv(report)
    assert header == list(REPORT_COLUMNS)
    assert len(rows) == 5
    metric_cols = [c for c in header if c in
                   ("lu_jm", "ma_jm", "lu_pad", "ma_pad", "lu_hd", "ma_hd", "lu_ad", "ma_ad")]
    assert len(metric_cols) == 8
    assert any("provenance" in p and "config_sha256=abc" in p for p in prov)
    for row in rows:
        assert row["ref_lu_jm"] != ""
        assert float(row["lu_jm"]) <= 1.0


def test_generator_comparison_model_sizes(tmp_path):
    exp = smoke_experiment("generator_comparison", str(tmp_path / "runs"))
    results = run_experiment(exp)
    sizes = {r.configuration: r.model_size_m for r in results}
    assert sizes["encoder_decoder"] < sizes["unet"]
    assert sizes["hourglass"] < sizes["hourglass_reinject"]
    for r in results:
        assert r.reference.get("model_size_m") is not None


def test_beta_sweep_rows_labeled_with_grid(tmp_path):
    exp = smoke_experiment("beta_sweep_l1", str(tmp_path / "runs"))
    results = run_experiment(exp)
    assert [r.configuration for r in results] == [str(b) for b in BETA_GRID]
    for r in results:
        assert "lu_jm" in r.reference and "lu_pad" not in r.reference


def test_merge_reports_dedupes_with_warning(tmp_path):
    exp = smoke_experiment("loss_ablation", str(tmp_path / "runs"))
    results = run_experiment(exp)
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    prov = provenance_block("x", [0], "loss_ablation")
    write_report_csv(p1, results, prov)
    write_report_csv(p2, results, prov)
    header, rows, warnings = merge_reports([p1, p2])
    assert len(rows) == 5
    assert len(warnings) == 5
    plots = report_plots(header, rows)
    assert "bars_loss_ablation.svg" in plots
    assert plots["bars_loss_ablation.svg"].startswith("<?xml")


def test_merge_rejects_mismatched_columns(tmp_path):
    p1 = tmp_path / "a.csv"
    p1.write_text("# prov\nexperiment,configuration\nx,y\n")
    p2 = tmp_path / "b.csv"
    p2.write_text("# prov\nexperiment,other\nx,y\n")
    with pytest.raises(ValueError, match="column set differs"):
        merge_reports([p1, p2])


# ---------------------------------------------------------------------------
# CLI contract

def write_smoke_config(tmp_path, extra=""):
    cfg = tmp_path / "smoke.toml"
    cfg.write_text(SMOKE_BODY + extra)
    return str(cfg)


def test_cli_gen_data_idempotent(tmp_path, capsys):
    cfg = write_smoke_config(tmp_path)
    out1, out2 = str(tmp_path / "d1"), str(tmp_path / "d2")
    assert cli_main(["gen-data", "--spec", cfg, "--out", out1]) == 0
    assert cli_main(["gen-data", "--spec", cfg, "--out", out2]) == 0
    files1 = sorted(os.path.join(r, f) for r, _, fs in os.walk(out1) for f in fs)
    for f1 in files1:
        f2 = f1.replace(out1, out2)
        with open(f1, "rb") as a, open(f2, "rb") as b:
            assert a.read() == b.read(), f1


def test_cli_gen_data_count_flags(tmp_path, capsys):
    cfg = write_smoke_config(tmp_path)
    out = str(tmp_path / "d")
    assert cli_main(["gen-data", "--spec", cfg, "--out", out, "--n-train", "2",
                     "--n-val", "1", "--n-test", "1"]) == 0
    with open(os.path.join(out, "manifest.json")) as fh:
        manifest = json.load(fh)
    assert manifest["splits"] == {"train": [0, 1], "val": [2], "test": [3]}


def test_cli_corrupt_config_exits_1_with_line(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[phantom]\nimage_size == 16\n")
    code = cli_main(["gen-data", "--spec", str(bad), "--out", str(tmp_path / "o")])
    assert code == 1
    err = capsys.readouterr().err
    assert "bad.toml:2" in err


def test_cli_usage_error_exits_1(capsys):
    assert cli_main(["train"]) == 1  # missing required flags
    assert cli_main(["no-such-command"]) == 1


def test_cli_train_deterministic_and_eval(tmp_path, capsys):
    cfg = write_smoke_config(tmp_path)
    r1, r2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    assert cli_main(["train", "--config", cfg, "--out", r1]) == 0
    assert cli_main(["train", "--config", cfg, "--out", r2]) == 0
    for name in ("history.csv", "checkpoint.ivck"):
        with open(os.path.join(r1, name), "rb") as a, open(os.path.join(r2, name), "rb") as b:
            assert a.read() == b.read(), name

    data = str(tmp_path / "ds")
    assert cli_main(["gen-data", "--spec", cfg, "--out", data]) == 0
    ev = str(tmp_path / "ev")
    assert cli_main(["eval", "--checkpoint", os.path.join(r1, "checkpoint.ivck"),
                     "--data", data, "--split", "test", "--out", ev]) == 0
    assert os.path.exists(os.path.join(ev, "metrics.csv"))
    overlays = os.listdir(os.path.join(ev, "overlays"))
    assert len(overlays) == 2  # one svg per test sample
    assert all(f.endswith(".svg") for f in overlays)


def test_cli_eval_missing_checkpoint_exits_2(tmp_path, capsys):
    code = cli_main(["eval", "--checkpoint", str(tmp_path / "nope.ivck"),
                     "--data", str(tmp_path), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "not found" in capsys.readouterr().err


def test_cli_report_empty_input_usage_error(tmp_path, capsys):
    assert cli_main(["report", "--out", str(tmp_path / "o")]) == 1


def test_cli_set_overrides_win(tmp_path, capsys):
    cfg = write_smoke_config(tmp_path)
    out = str(tmp_path / "r")
    assert cli_main(["train", "--config", cfg, "--out", out,
                     "--set", "train.epochs=1"]) == 0
    with open(os.path.join(out, "history.csv")) as fh:
        lines = fh.read().strip().split("\n")
    assert len(lines) == 2  # header + 1 epoch


def test_cli_experiment_and_report_roundtrip(tmp_path, capsys):
    cfg = tmp_path / "exp.toml"
    out_dir = str(tmp_path / "exp_out")
    cfg.write_text(
        f'[experiment]\nname = "beta_sweep_l2"\nseeds = [0]\nout_dir = "{out_dir}"\n'
        + SMOKE_BODY
    )
    assert cli_main(["experiment", "--config", str(cfg)]) == 0
    header, rows, prov = read_report_csv(os.path.join(out_dir, "report.csv"))
    assert len(rows) == len(BETA_GRID)
    assert any("provenance" in p for p in prov)
    summary = str(tmp_path / "summary")
    assert cli_main(["report", out_dir, "--out", summary]) == 0
    with open(os.path.join(summary, "merged.csv")) as fh:
        assert len(fh.read().strip().split("\n")) == 1 + len(BETA_GRID)  # row count preserved
    assert os.path.exists(os.path.join(summary, "metric_vs_beta_beta_sweep_l2.svg"))


def test_cli_output_root_env(tmp_path, capsys, monkeypatch):
    cfg = write_smoke_config(tmp_path)
    monkeypatch.setenv("IVUSGAN_OUTPUT_ROOT", str(tmp_path / "root"))
    assert cli_main(["gen-data", "--spec", cfg, "--out", "rel_ds"]) == 0
    assert os.path.exists(tmp_path / "root" / "rel_ds" / "manifest.json")
