from __future__ import annotations

import hashlib
import json
import math

import numpy as np
import pytest

from xlmimo_gan import __version__, sweep as sweep_mod
from xlmimo_gan.cli import main
from xlmimo_gan.config import build, parse_text
from xlmimo_gan.errors import ConfigError, ParameterError, TrainingAborted
from xlmimo_gan.report import HEADER, read_rows, rows_path
from xlmimo_gan.sweep import SweepSpec, run_sweep

TINY = ["--set", "n_train=4", "--set", "n_test=2", "--set", "width=4", "--epochs", "1"]
TINY_VALUES = {"n_train": 4, "n_test": 2, "width": 4, "epochs": 1}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def error_kind(err: str) -> str:
    lines = err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])["error"]


def md5(path) -> str:
    return hashlib.md5(path.read_bytes()).hexdigest()


def test_version_and_help(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and __version__ in out
    code, out, _ = run(capsys, "--help")
    assert code == 0 and "gen-data" in out
    code, out, _ = run(capsys, "sweep", "--help")
    assert code == 0 and "--axis" in out


def test_gen_data_full_preset_manifest(capsys, tmp_path):
    code, out, _ = run(capsys, "gen-data", "--preset", "full", "--set", "n_train=2",
                       "--set", "n_test=1", "--out", str(tmp_path / "ds"))
    assert code == 0
    manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
    g = manifest["config"]["geometry"]
    assert (g["n_t"], g["n_r"], g["f_c"], manifest["config"]["L"]) == (256, 128, 5e10, 3)
    echo = json.loads(out)
    assert (echo["n_t"], echo["n_r"], echo["f_c"], echo["L"]) == (256, 128, 5e10, 3)


def test_train_then_eval(capsys, tmp_path):
    ds, ck, table = tmp_path / "ds", tmp_path / "ck", tmp_path / "eval.tsv"
    assert run(capsys, "gen-data", *TINY, "--out", str(ds))[0] == 0
    code, out, _ = run(capsys, "train", *TINY, "--data", str(ds), "--out", str(ck))
    assert code == 0 and json.loads(out)["iterations"] == 4
    code, _, _ = run(capsys, "eval", "--data", str(ds), "--checkpoint", str(ck),
                     "--out", str(table))
    assert code == 0
    lines = table.read_text().splitlines()
    assert tuple(lines[0].split("\t")) == HEADER
    assert sorted(l.split("\t")[1] for l in lines[1:]) == ["far_field_omp", "ie_only",
                                                            "ie_pix2pix"]


def test_eval_missing_checkpoint(capsys, tmp_path):
    ds = tmp_path / "ds"
    run(capsys, "gen-data", *TINY, "--out", str(ds))
    code, _, err = run(capsys, "eval", "--data", str(ds), "--checkpoint", str(tmp_path / "nope"))
    assert code == 2 and error_kind(err) == "missing_checkpoint"


def test_missing_dataset(capsys, tmp_path):
    code, _, err = run(capsys, "train", "--data", str(tmp_path / "nope"), "--out",
                       str(tmp_path / "ck"))
    assert code == 2 and error_kind(err) == "missing_dataset"


@pytest.mark.parametrize("argv", [
    ["gen-data", "--bogus", "--out", "x"],
    ["frobnicate"],
    ["gen-data"],
    ["sweep", "--axis", "nope", "1", "--out", "x"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and error_kind(err) == "usage_error"


def test_config_errors(capsys, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("n_train 4\n")
    code, _, err = run(capsys, "gen-data", "--config", str(bad), "--out", str(tmp_path / "d"))
    assert code == 2 and error_kind(err) == "config_error"
    bad.write_text("colour = blue\n")
    code, _, err = run(capsys, "gen-data", "--config", str(bad), "--out", str(tmp_path / "d"))
    assert code == 2 and error_kind(err) == "config_error"
    code, _, err = run(capsys, "gen-data", "--r", "500", "--out", str(tmp_path / "d"))
    assert code == 2 and error_kind(err) == "config_error"


def test_config_file_and_flag_precedence(tmp_path):
    values = parse_text("# comment\nn_train = 7\nr = 5.5\n eta=3 \n")
    assert values == {"n_train": 7, "r": 5.5, "eta": 3.0}
    cfg = build({**values, "r": 6.0})
    assert (cfg.dataset.n_train, cfg.dataset.r, cfg.train.eta) == (7, 6.0, 3.0)
    with pytest.raises(ConfigError):
        build({"input_mode": "spectral"})


def test_sweep_spec_validation():
    base = build(dict(TINY_VALUES))
    with pytest.raises(ParameterError):
        SweepSpec("distance_r", [5.0, 13.0], base)
    with pytest.raises(ParameterError):
        SweepSpec("pilot_length", [16.5], base)
    with pytest.raises(ParameterError):
        SweepSpec("snr_db", [], base)
    with pytest.raises(ParameterError):
        SweepSpec("gain", [1.0], base)


def test_single_point_three_rows_and_db(tmp_path):
    spec = SweepSpec("snr_db", [10.0], build(dict(TINY_VALUES)), seeds=[3])
    rows = run_sweep(spec, out_dir=tmp_path)
    assert len(rows) == 3
    assert {r.method for r in rows} == {"ie_pix2pix", "ie_only", "far_field_omp"}
    for r in rows:
        assert r.nmse_linear >= 0 and r.n_test == 2 and r.seed == 3
        assert abs(r.nmse_db - 10 * math.log10(r.nmse_linear)) <= 1e-12
    assert read_rows(rows_path(tmp_path, 8.0)) == rows


def test_sweep_deterministic(tmp_path):
    spec = SweepSpec("pilot_length", [16, 32], build(dict(TINY_VALUES)), seeds=[0, 1])
    a = run_sweep(spec, out_dir=tmp_path / "a")
    b = run_sweep(spec, out_dir=tmp_path / "b")
    assert a == b and len(a) == 12
    assert md5(rows_path(tmp_path / "a", 8.0)) == md5(rows_path(tmp_path / "b", 8.0))


def test_no_retrain_shares_one_estimator(tmp_path, monkeypatch):
    calls = []
    real = sweep_mod.train
    monkeypatch.setattr(sweep_mod, "train", lambda *a, **k: calls.append(1) or real(*a, **k))
    spec = SweepSpec("snr_db", [0.0, 10.0, 20.0], build(dict(TINY_VALUES)), retrain=False)
    assert len(run_sweep(spec)) == 9
    assert len(calls) == 1


def test_sweep_cli_then_report_idempotent(capsys, tmp_path):
    out = tmp_path / "sw"
    code, echo, _ = run(capsys, "sweep", *TINY, "--axis", "eta", "1", "100",
                        "--distances", "4", "8", "--out", str(out))
    assert code == 0 and json.loads(echo)["rows"] == 12
    summary, plot = out / "summary.tsv", out / "nmse.png"
    before = (md5(summary), md5(plot))
    assert run(capsys, "report", "--out", str(out))[0] == 0
    assert (md5(summary), md5(plot)) == before
    lines = summary.read_text().splitlines()
    assert lines[0] == "distance\taxis_value\tie_pix2pix_db\tie_only_db\tfar_field_omp_db"
    assert len(lines) == 5
    for r in (4.0, 8.0):
        text = rows_path(out, r).read_text().splitlines()
        assert tuple(text[0].split("\t")) == HEADER and len(text) == 7


def test_report_without_sweep(capsys, tmp_path):
    code, _, err = run(capsys, "report", "--out", str(tmp_path))
    assert code == 2 and error_kind(err) == "config_error"


def test_abort_preserves_partial_rows(tmp_path, monkeypatch):
    real = sweep_mod.train
    calls = []

    def flaky(*args, **kwargs):
        calls.append(1)
        if len(calls) == 2:
            raise TrainingAborted("non-finite loss at iteration 0")
        return real(*args, **kwargs)

    monkeypatch.setattr(sweep_mod, "train", flaky)
    spec = SweepSpec("snr_db", [0.0, 10.0, 20.0], build(dict(TINY_VALUES)))
    with pytest.raises(TrainingAborted):
        run_sweep(spec, out_dir=tmp_path)
    rows = read_rows(rows_path(tmp_path, 8.0))
    assert len(rows) == 3 and {r.axis_value for r in rows} == {0.0}
    assert (tmp_path / "sweep.json").is_file()


def test_training_abort_exit_code(capsys, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise TrainingAborted("non-finite loss at iteration 0")

    monkeypatch.setattr("xlmimo_gan.gan.training.train", boom)
    code, _, err = run(capsys, "train", *TINY, "--out", str(tmp_path / "ck"))
    assert code == 1 and error_kind(err) == "training_aborted"


def test_raw_mode_sweep(tmp_path):
    base = build({**TINY_VALUES, "input_mode": "raw", "P": 16})
    rows = run_sweep(SweepSpec("snr_db", [10.0], base))
    assert {r.method for r in rows} == {"raw_pix2pix", "ie_only", "far_field_omp"}
    assert all(np.isfinite(r.nmse_db) for r in rows)
