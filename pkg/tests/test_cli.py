import json
import os
import re
import time

import pytest

from fadv import cli
from fadv import toydata

SPEC = toydata.ToySpec(n_train=200, n_dev=50, n_test=100, concepts=8, filler_clusters=12, seed=1)


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for k in list(os.environ):
        if k.startswith("FADV_"):
            monkeypatch.delenv(k)
    toydata.write_toy_corpus(tmp_path / "data", SPEC)
    (tmp_path / "run.cfg").write_text(
        "# smoke settings\n"
        "data = data\n"
        "synonyms = data/synonyms.tsv\n"
        "similarity = data/similarity.txt\n"
        "epochs = 20\n"
        "sample_size = 40\n"
        "workers = 1\n", encoding="utf-8")
    return tmp_path


def run(*args):
    return cli.main(["--config" if a == "CFG" else a for a in args])


def test_resolve_config_precedence(workspace):
    cfg = cli.resolve_config("run.cfg", {"lr": "0.25"}, environ={"FADV_LR": "0.1", "FADV_SEED": "4"})
    assert cfg["lr"] == 0.25 and cfg["seed"] == 4 and cfg["epochs"] == 20
    assert cfg["cache"] == "runs/cache" and cfg["p_max"] == [0.15]
    assert cli.resolve_config(None, {"p_max": "0.1,0.15", "project": "yes"}, environ={})["p_max"] == [0.1, 0.15]


@pytest.mark.parametrize("overrides,environ", [({"bogus": "1"}, {}), ({}, {"FADV_BOGUS": "1"}),
                                               ({"seed": "x"}, {}), ({"mode": "mixup"}, {}),
                                               ({"project": "maybe"}, {})])
def test_resolve_config_rejects(overrides, environ):
    with pytest.raises(cli.UsageError):
        cli.resolve_config(None, overrides, environ=environ)


def test_config_file_rejects_unknown_and_duplicate_keys(workspace):
    (workspace / "bad.cfg").write_text("seed = 1\ncolour = red\n")
    with pytest.raises(cli.UsageError, match="bad.cfg:2: unknown key"):
        cli.read_config_file("bad.cfg")
    (workspace / "dup.cfg").write_text("seed = 1\nseed = 2\n")
    with pytest.raises(cli.UsageError, match="duplicate"):
        cli.read_config_file("dup.cfg")
    assert run("prepare", "CFG", "bad.cfg") == 2


def test_prepare_is_idempotent_and_records_seed(workspace, capsys):
    assert run("prepare", "CFG", "run.cfg", "--seed", "7") == 0
    vocab = workspace / "runs/cache/vocab.txt"
    stamp = vocab.stat().st_mtime_ns
    time.sleep(0.01)
    assert run("prepare", "CFG", "run.cfg", "--seed", "7") == 0
    assert vocab.stat().st_mtime_ns == stamp
    out = capsys.readouterr().out
    assert "status=written" in out and "status=up-to-date" in out
    assert "seed=7" in (workspace / "runs/cache/config.txt").read_text().splitlines()


def test_input_errors_exit_2(workspace, capsys):
    assert run("prepare", "CFG", "run.cfg", "--synonyms", "nope.tsv") == 2
    assert "nope.tsv" in capsys.readouterr().err
    assert run("evaluate", "CFG", "run.cfg", "--checkpoint", "missing.ckpt") == 2
    assert run("evaluate", "CFG", "run.cfg") == 2  # no checkpoint at all
    assert run("train", "CFG", "run.cfg", "--mode", "gat") == 2  # no augmentation
    assert run("sweep", "CFG", "run.cfg", "--mode", "at", "--sweep_kind", "step_size", "--grid", "0.1") == 2
    assert run("train", "CFG", "run.cfg", "--no-such-flag", "1") == 2
    assert not (workspace / "runs").exists() or not any(
        p.name != "cache" for p in (workspace / "runs").iterdir())


def test_io_error_exits_3(workspace):
    (workspace / "blocker").write_text("")
    assert run("train", "CFG", "run.cfg", "--run_dir", "blocker/sub") == 3


def test_run_directory_naming(workspace, capsys):
    assert run("train", "CFG", "run.cfg", "--epochs", "1", "--plots", "false") == 0
    out = capsys.readouterr().out
    run_dir = re.search(r"run_dir=(\S+)", out).group(1)
    assert re.fullmatch(r"runs/\d{8}-\d{6}-[0-9a-f]{8}", run_dir)
    text = (workspace / run_dir / "config.txt").read_text()
    assert "epochs=1" in text and "seed=0" in text
    assert sorted(p.name for p in (workspace / run_dir).iterdir()) == [
        "config.txt", "model.ckpt", "model_report.jsonl", "model_timing.jsonl"]


PRIMARY = ("natural.ckpt", "gat.ckpt", "fada.tsv", "report.jsonl", "report.csv",
           "natural_report.jsonl", "gat_report.jsonl")


def test_pipeline_smoke_and_determinism(workspace, capsys):
    start = time.perf_counter()
    assert run("pipeline", "CFG", "run.cfg", "--run_dir", "a") == 0
    assert time.perf_counter() - start < 300
    assert run("pipeline", "CFG", "run.cfg", "--run_dir", "b") == 0
    for name in PRIMARY:
        assert (workspace / "a" / name).read_bytes() == (workspace / "b" / name).read_bytes(), name
    assert (workspace / "a/report.png").stat().st_size > 0
    recs = [json.loads(x) for x in (workspace / "a/report.jsonl").read_text().splitlines()]
    assert [r["defense"] for r in recs] == ["natural", "gat_fgm"]

    # the same GAT model again through train with the pipeline's augmentation
    assert run("train", "CFG", "run.cfg", "--mode", "gat", "--augmentation", "a/fada.tsv", "--run_dir", "t") == 0
    assert (workspace / "t/model.ckpt").read_bytes() == (workspace / "a/gat.ckpt").read_bytes()


def test_commands_write_their_outputs(workspace):
    assert run("train", "CFG", "run.cfg", "--run_dir", "m") == 0
    assert run("augment", "CFG", "run.cfg", "--checkpoint", "m/model.ckpt", "--run_dir", "g") == 0
    assert run("attack", "CFG", "run.cfg", "--checkpoint", "m/model.ckpt", "--trace", "true", "--run_dir", "k") == 0
    assert run("evaluate", "CFG", "run.cfg", "--checkpoint", "m/model.ckpt", "--p_max", "0.1,0.15",
               "--run_dir", "e") == 0
    assert run("sweep", "CFG", "run.cfg", "--sweep_kind", "epochs", "--grid", "1,2", "--run_dir", "s") == 0
    assert run("figure1", "CFG", "run.cfg", "--run_dir", "f") == 0
    for path in ("m/model_curve.png", "g/augmentation.tsv", "k/attack.jsonl", "k/summary.json", "k/trace.txt",
                 "e/report.csv", "e/report.png", "s/sweep.csv", "s/sweep.png", "f/figure1.csv", "f/figure1.png",
                 "f/ada.tsv", "f/fada.tsv"):
        assert (workspace / path).exists(), path
    summary = json.loads((workspace / "k/summary.json").read_text())
    assert summary["counter_queries"] == summary["total_queries"]
    assert len((workspace / "e/report.csv").read_text().splitlines()) == 3
    assert run("augment", "CFG", "run.cfg", "--checkpoint", "m/model.ckpt", "--p_max", "0.1,0.2") == 2


def test_toy_command(workspace):
    assert run("toy", "--data", "toy", "--seed", "2") == 0
    assert all((workspace / "toy" / f).exists() for f in ("train.tsv", "synonyms.tsv", "similarity.txt"))
    assert "seed=2" in (workspace / "toy/toy_config.txt").read_text()
