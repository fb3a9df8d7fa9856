import csv
import io
import json
import shutil

import numpy as np
import pytest

from agitation_ssl.cli import build_parser
from agitation_ssl.data import load_dataset
from agitation_ssl.data.matrix import dumps_dataset

from .conftest import run_cli

REPORTS = ["selfsup.json", "autoencoder_losses.png", "fusion_log.json", "crossval.json", "crossval.txt",
           "crossval_curves.csv", "crossval_curves.png", "holdout.json", "holdout.txt", "holdout_alerts.csv",
           "holdout_alerts.png", "holdout_curves.csv"]


def test_every_stage_has_a_subcommand():
    parser = build_parser()
    for name in ("simulate", "aggregate", "pretrain", "train-selfsup", "train-ensemble", "crossval", "holdout",
                 "predict", "gradcheck", "all"):
        assert parser.parse_args([name] + (["a", "b"] if name == "aggregate" else
                                           ["m"] if name == "predict" else [])).command == name


def test_full_run_produces_everything(tiny_runs):
    root = tiny_runs[0]
    for name in REPORTS:
        assert (root / "reports" / name).stat().st_size > 0, name
    artifacts = sorted(p.name for p in (root / "artifacts").iterdir())
    assert artifacts == sorted([f"autoencoder_{i:02d}.nnw" for i in range(1, 11)]
                               + ["extractor.nnw", "model.nnw", "transform.nnw"])
    cv = json.loads((root / "reports" / "crossval.json").read_text())
    assert [m["model_id"] for m in cv["models"]] == ["proposed", "supervised-only", "random-forest", "lstm"]
    table = (root / "reports" / "crossval.txt").read_text().splitlines()
    assert table[0].split()[:2] == ["Model", "Accuracy"] and len(table) == 6


def test_missing_artifact_names_producing_command(tmp_path, capsys):
    assert run_cli(tmp_path, "pretrain", "--config", "tiny") == 1
    assert "agitation simulate" in capsys.readouterr().err
    assert run_cli(tmp_path, "simulate", "--config", "tiny", "-q") == 0
    assert run_cli(tmp_path, "train-ensemble", "--config", "tiny") == 1
    assert "agitation train-selfsup" in capsys.readouterr().err


def test_lineage_mismatch_rejected(tiny_runs, tmp_path, capsys):
    shutil.copytree(tiny_runs[0] / "data", tmp_path / "data")
    shutil.copytree(tiny_runs[0] / "artifacts", tmp_path / "artifacts")
    # a changed stage-1 setting invalidates the extractor downstream
    assert run_cli(tmp_path, "train-ensemble", "--config", "tiny", "--set", "selfsup.transform_epochs=2") == 1
    assert "rerun `agitation train-selfsup`" in capsys.readouterr().err
    assert run_cli(tmp_path, "pretrain", "--config", "tiny", "--set", "seed=1") == 1
    assert "agitation simulate" in capsys.readouterr().err


def test_k_larger_than_labelled_set(tiny_runs, tmp_path, capsys):
    shutil.copytree(tiny_runs[0] / "data", tmp_path / "data")
    shutil.copytree(tiny_runs[0] / "artifacts", tmp_path / "artifacts")
    assert run_cli(tmp_path, "crossval", "--config", "tiny", "--set", "eval.k=1000") == 1
    assert "1000" in capsys.readouterr().err


def test_bad_overrides_exit_one(tmp_path, capsys):
    assert run_cli(tmp_path, "simulate", "--set", "cohort.n_homes") == 1
    assert run_cli(tmp_path, "simulate", "--set", "unknown.key=3") == 1
    assert "unknown.key" in capsys.readouterr().err


def test_predict_csv(tiny_runs, tmp_path, capsys):
    root = tiny_runs[0]
    hold = load_dataset(root / "data" / "holdout.adm1")
    assert run_cli(root, "predict", "data/holdout.adm1", "--config", "tiny", "--out", str(tmp_path / "p.csv")) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "p.csv").read_text())))
    assert [r["home_id"] for r in rows] == [m.home_id for m in hold]
    for r in rows:
        p0, p1 = float(r["p_not_agitation"]), float(r["p_agitation"])
        assert abs(p0 + p1 - 1) < 1e-12 and int(r["alert"]) == int(p1 > 0.5)
    assert run_cli(root, "predict", "data/holdout.adm1", "--config", "tiny", "--threshold", "1.0") == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows and all(r["alert"] == "0" for r in rows)


def test_predict_empty_dataset(tiny_runs, tmp_path):
    (tmp_path / "empty.adm1").write_bytes(dumps_dataset([]))
    assert run_cli(tiny_runs[0], "predict", str(tmp_path / "empty.adm1"), "--config", "tiny") == 1


def test_aggregate(tmp_path):
    (tmp_path / "events.csv").write_text("timestamp,home_id,sensor\n2020-01-01T09:05:00Z,h1,kitchen\n"
                                         "2020-01-01T09:59:00Z,h1,kitchen\n2020-01-02T23:00:00Z,h1,bedroom\n")
    assert run_cli(tmp_path, "aggregate", "events.csv", "out.adm1", "-q") == 0
    days = load_dataset(tmp_path / "out.adm1")
    assert len(days) == 2 and days[0].counts[9, 4] == 2 and days[1].counts[23, 2] == 1
    (tmp_path / "bad.csv").write_text("2020-01-01T09:05:00Z,h1,garage\n")
    assert run_cli(tmp_path, "aggregate", "bad.csv", "out2.adm1") == 1


def test_gradcheck_command(tmp_path, capsys):
    assert run_cli(tmp_path, "gradcheck") == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "passed" in out


def test_simulate_matches_spec_counts(tiny_runs):
    info = json.loads((tiny_runs[0] / "data" / "cohort.json").read_text())
    assert info["train"]["days"] == 120 and info["train"]["labelled"] == 36
    days = load_dataset(tiny_runs[0] / "data" / "train.adm1")
    assert sum(m.labelled for m in days) == 36
    assert not {m.home_id for m in days} & {m.home_id for m in load_dataset(tiny_runs[0] / "data" / "holdout.adm1")}
    assert np.all(np.stack([m.counts for m in days]) >= 0)


@pytest.mark.parametrize("name", ["crossval.json", "holdout.json", "selfsup.json", "fusion_log.json"])
def test_reports_are_canonical_json(tiny_runs, name):
    text = (tiny_runs[0] / "reports" / name).read_text()
    assert json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n" == text
