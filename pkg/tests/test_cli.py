import json
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from irregular_har.cli import main
from irregular_har.ingest import CsvSchema, load_csv

DATA = Path(__file__).parent / "data"
SMOKE = DATA / "smoke_sweep.json"


@pytest.fixture()
def synth_csv(tmp_path):
    cfg = tmp_path / "synth.json"
    cfg.write_text(json.dumps({"num_subjects": 2, "num_classes": 3, "channels": 2,
                               "sample_rate": 25, "segment_seconds": 4,
                               "segments_per_subject": 3}))
    assert main(["synth", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path)]) == 0
    return tmp_path / "synth.csv"


def count_rows(path):
    return len(Path(path).read_text().splitlines()) - 1


def test_synth_deterministic(tmp_path, synth_csv):
    assert count_rows(synth_csv) == 2 * 3 * 100
    other = tmp_path / "again"
    cfg = tmp_path / "synth.json"
    main(["synth", "--config", str(cfg), "--seed", "1", "--out", str(other)])
    assert (other / "synth.csv").read_bytes() == synth_csv.read_bytes()
    main(["synth", "--config", str(cfg), "--seed", "2", "--out", str(other)])
    assert (other / "synth.csv").read_bytes() != synth_csv.read_bytes()


def test_perturb_zero_jitter_is_identity(tmp_path, synth_csv):
    out = tmp_path / "p.csv"
    assert main(["perturb", str(synth_csv), str(out), "--jitter", "0"]) == 0
    assert out.read_bytes() == synth_csv.read_bytes()


def test_perturb_dropout_row_count(tmp_path):
    src = tmp_path / "in.csv"
    lines = ["subject,timestamp,label,x"] + [f"1,{i / 50!r},a,{i}" for i in range(1000)]
    src.write_text("\n".join(lines) + "\n")
    out = tmp_path / "out.csv"
    assert main(["perturb", str(src), str(out), "--dropout", "0.25", "--seed", "3"]) == 0
    assert count_rows(out) == 750


def test_perturb_downsample(tmp_path, synth_csv):
    out = tmp_path / "d.csv"
    assert main(["perturb", str(synth_csv), str(out), "--downsample", "5"]) == 0
    assert count_rows(out) == count_rows(synth_csv) // 5


def test_perturb_jitter_golden(tmp_path):
    out = tmp_path / "j.csv"
    rc = main(["perturb", str(DATA / "two_subjects.csv"), str(out), "--jitter", "0.9", "--seed", "7"])
    assert rc == 0
    assert out.read_text() == (DATA / "two_subjects_jitter_0.9_seed7.csv").read_text()


def test_perturb_jitter_keeps_order_and_bounds(tmp_path, synth_csv):
    out = tmp_path / "j.csv"
    main(["perturb", str(synth_csv), str(out), "--jitter", "0.5", "--seed", "1"])
    schema = CsvSchema(("ch0", "ch1"), timestamp_column="timestamp")
    a, b = load_csv(synth_csv, schema, 25.0), load_csv(out, schema, 25.0)
    for (_, s), (_, p) in zip(a.recordings, b.recordings):
        assert np.all(np.diff(p.timestamps) > 0)
        assert np.max(np.abs(p.timestamps - s.timestamps)) <= 0.5 * 0.04 + 1e-12
        np.testing.assert_array_equal(p.labels, s.labels)


def test_perturb_needs_one_kind(tmp_path, synth_csv, capsys):
    assert main(["perturb", str(synth_csv), str(tmp_path / "x.csv")]) == 1
    assert main(["perturb", str(synth_csv), str(tmp_path / "x.csv"),
                 "--jitter", "0.1", "--dropout", "0.1"]) == 1
    assert main(["perturb", str(tmp_path / "missing.csv"), str(tmp_path / "x.csv"),
                 "--jitter", "0.1"]) == 1
    assert main(["perturb", str(synth_csv), str(tmp_path / "x.csv"), "--dropout", "1.5"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_flag_is_user_error(capsys):
    assert_exit = pytest.raises(SystemExit)
    with assert_exit as exc:
        main(["sweep", "--bogus"])
    assert exc.value.code == 1


def test_windows_command(tmp_path, synth_csv):
    assert main(["windows", str(synth_csv), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "windows.csv").read_text().splitlines()
    assert lines[0] == "subject,window,start_time,label,n_samples,mean_elapsed"
    # 12 s per subject, 2 s windows with 1 s step
    assert len(lines) - 1 == 2 * 11
    assert all(line.split(",")[4] == "50" for line in lines[1:])


def test_train_command(tmp_path, synth_csv):
    cfg = tmp_path / "train.json"
    cfg.write_text(json.dumps({"training": {"epochs": 2}, "hidden_size": 6,
                               "conv_channels": 4, "kernel_size": 3}))
    out = tmp_path / "model"
    for arch in ("conv_dense", "deep_conv_lstm", "cfc_net"):
        rc = main(["train", str(synth_csv), "--arch", arch, "--test-subject", "1",
                   "--config", str(cfg), "--out", str(out)])
        assert rc == 0
        metrics = json.loads((out / "train_metrics.json").read_text())
        assert metrics["test_subject"] == "1" and len(metrics["history"]) == 2
        assert (out / "model.ckpt").read_text().startswith("irregular-har-checkpoint 1")
    assert main(["train", str(synth_csv), "--test-subject", "99", "--out", str(out)]) == 1


def test_sweep_smoke_is_fast_and_deterministic(tmp_path):
    start = time.perf_counter()
    for name in ("a", "b"):
        assert main(["sweep", "--config", str(SMOKE), "--out", str(tmp_path / name)]) == 0
    assert time.perf_counter() - start < 60
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    header = (a / "results.csv").read_text().splitlines()[0]
    assert header == ("seed,train_rate,fold,test_subject,architecture,perturbation,"
                      "magnitude,p_regular,p_irregular,p_loss")
    # 3 folds x (conv_dense: baseline + 2 jitter, cfc_net: baseline + 2 jitter + 1 dropout)
    assert count_rows(a / "results.csv") == 3 * (3 + 4)


def test_sweep_bad_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    cfg.write_text(json.dumps({"architectures": ["nope"]}))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_report_single_cell(tmp_path):
    results = tmp_path / "results.csv"
    results.write_text(
        "seed,train_rate,fold,test_subject,architecture,perturbation,magnitude,p_regular,p_irregular,p_loss\n"
        "0,50.0,0,1,cfc_net,regular,0.0,0.8,0.8,0.0\n"
        "0,50.0,0,1,cfc_net,jitter,0.5,0.8,0.6,0.25\n"
        "0,50.0,1,2,cfc_net,regular,0.0,0.6,0.6,0.0\n"
        "0,50.0,1,2,cfc_net,jitter,0.5,0.6,0.6,0.0\n"
    )
    assert main(["report", str(results), "--out", str(tmp_path)]) == 0
    table = (tmp_path / "loss_table.csv").read_text().splitlines()
    assert table == ["train_rate,architecture,macro_f1,jitter_0.5", "50.0,cfc_net,0.7,0.125"]
    series = (tmp_path / "rate_series.csv").read_text().splitlines()
    assert series[1] == "cfc_net,50.0,0.5,0.125,0.125,2"
    assert (tmp_path / "dropout_series.csv").read_text().splitlines() == [
        "architecture,train_rate,alpha,mean_p_loss,std_p_loss,n_rows"
    ]


def test_report_empty_input(tmp_path):
    results = tmp_path / "results.csv"
    results.write_text("seed,train_rate,fold,test_subject,architecture,perturbation,"
                       "magnitude,p_regular,p_irregular,p_loss\n")
    assert main(["report", str(results), "--out", str(tmp_path)]) == 1
    assert main(["report", str(tmp_path / "none.csv")]) == 1


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("irregular-har")
    cmd = [exe] if exe else [sys.executable, "-m", "irregular_har"]
    proc = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout


def test_report_matches_spreadsheet_oracle(tmp_path):
    pd = pytest.importorskip("pandas")
    rng = np.random.default_rng(0)
    lines = ["seed,train_rate,fold,test_subject,architecture,perturbation,magnitude,"
             "p_regular,p_irregular,p_loss"]
    for seed in (0, 1):
        for rate in (10.0, 50.0):
            for fold in range(3):
                for arch in ("conv_dense", "cfc_net"):
                    p_reg = float(rng.uniform(0.5, 1.0))
                    for kind, mag in (("jitter", 0.3), ("jitter", 0.9), ("dropout", 0.4)):
                        p_irr = float(rng.uniform(0.3, 1.0))
                        lines.append(f"{seed},{rate!r},{fold},{fold},{arch},{kind},{mag!r},"
                                     f"{p_reg!r},{p_irr!r},{(p_reg - p_irr) / p_reg!r}")
    results = tmp_path / "results.csv"
    results.write_text("\n".join(lines) + "\n")
    before = results.read_bytes()
    assert main(["report", str(results), "--out", str(tmp_path)]) == 0
    assert results.read_bytes() == before

    df = pd.read_csv(results)
    oracle = (df.groupby(["architecture", "train_rate", "perturbation", "magnitude", "seed"])["p_loss"]
              .mean().groupby(level=[0, 1, 2, 3]).mean())
    for name in ("rate_series.csv", "dropout_series.csv"):
        got = pd.read_csv(tmp_path / name)
        kind = "jitter" if name.startswith("rate") else "dropout"
        x = "epsilon" if kind == "jitter" else "alpha"
        assert len(got) == sum(1 for key in oracle.index if key[2] == kind)
        for _, r in got.iterrows():
            expected = oracle[(r["architecture"], r["train_rate"], kind, r[x])]
            assert abs(r["mean_p_loss"] - expected) <= 1e-9
    table = pd.read_csv(tmp_path / "loss_table.csv")
    for _, r in table.iterrows():
        for e in (0.3, 0.9):
            expected = oracle[(r["architecture"], r["train_rate"], "jitter", e)]
            assert abs(r[f"jitter_{e!r}"] - expected) <= 1e-9


def test_commands_do_not_mutate_inputs(tmp_path, synth_csv):
    before = synth_csv.read_bytes()
    main(["perturb", str(synth_csv), str(tmp_path / "p.csv"), "--jitter", "0.4"])
    main(["windows", str(synth_csv), "--out", str(tmp_path)])
    assert synth_csv.read_bytes() == before
