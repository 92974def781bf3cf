import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from slackrescale.cli import main
from slackrescale.model import load_checkpoint


def run(argv):
    try:
        return main(argv)
    except SystemExit as e:
        return e.code


def test_train_both_objectives(tmp_path, capsys):
    assert run(["train", "--objective", "both", "--epochs", "2", "--out", str(tmp_path)]) == 0
    for obj in ("slack", "margin"):
        m = json.loads((tmp_path / f"metrics-{obj}.json").read_text())
        assert set(m) == {"acc", "label_loss", "micro_f1", "macro_f1", "n"}
        hist = (tmp_path / f"history-{obj}.jsonl").read_text().splitlines()
        assert len(hist) == 2 and "time" not in json.loads(hist[0])
        assert load_checkpoint(tmp_path / f"model-{obj}.json").w.shape == (24 * 14,)
    assert "slack" in capsys.readouterr().out


def test_train_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["train", "--epochs", "2", "--seed", "3", "--out", str(d)]) == 0
    for name in ("model-slack.json", "history-slack.jsonl", "metrics-slack.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_zero_epochs_writes_initial_model(tmp_path):
    assert run(["train", "--epochs", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "history-slack.jsonl").read_text() == ""
    assert not np.any(load_checkpoint(tmp_path / "model-slack.json").w)


def test_train_cutting_plane_and_hierarchy(tmp_path):
    from slackrescale.data import fixture_path
    assert run(["train", "--trainer", "cutting-plane", "--rounds", "2", "--timing",
                "--data", str(fixture_path("hierarchy.svm")),
                "--hierarchy", str(fixture_path("hierarchy.parents")), "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "history-slack.jsonl").read_text().splitlines()[0])
    assert {"round", "working_set", "dual", "time"} <= set(rec)


def test_exit_codes(tmp_path, capsys):
    assert run(["train", "--epochs", "-1", "--out", str(tmp_path)]) == 2
    assert run(["train", "-C", "0"]) == 2
    assert run(["bogus"]) == 2
    assert run(["emit-points"]) == 2
    assert run(["adversarial-demo", "--eps", "0.9"]) == 2
    assert run(["train", "--data", str(tmp_path / "missing.svm"), "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.svm"
    bad.write_text("0 1:1\n0 oops\n")
    assert run(["train", "--data", str(bad), "--out", str(tmp_path)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_search_bench_csv_and_trace(tmp_path, capsys):
    out, tr = tmp_path / "bench.csv", tmp_path / "trace.jsonl"
    argv = ["search-bench", "--instances", "20", "-M", "30", "--csv", str(out), "--trace", str(tr)]
    assert run(argv) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["search"] for r in rows] == ["angular", "bisecting", "binary", "sarawagi"]
    assert all(int(r["instances"]) == 20 for r in rows)
    assert float(rows[0]["exact_rate"]) == 1.0
    recs = [json.loads(line) for line in tr.read_text().splitlines()]
    ang = [r for r in recs if r["search"] == "angular"]
    assert ang and all({"instance", "t", "lam", "phi_hat"} <= set(r) for r in ang)
    first = out.read_bytes()
    assert run(argv) == 0
    assert out.read_bytes() == first


def test_adversarial_demo(capsys):
    assert run(["adversarial-demo", "--eps", "0.001"]) == 0
    text = capsys.readouterr().out
    assert "optimum: C with phi=0.25" in text
    lines = {ln.split()[0]: ln.split() for ln in text.splitlines() if ln.strip().split()[:1]}
    assert lines["angular"][1] == "C"
    for n in ("bisecting", "binary", "sarawagi"):
        assert float(lines[n][2]) == pytest.approx(0.001)


def test_emit_points(tmp_path, capsys):
    assert run(["emit-points", "--instance", "adversarial"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["label", "h", "g", "phi"] and len(rows) == 4
    assert run(["train", "--epochs", "1", "--out", str(tmp_path)]) == 0
    pts = tmp_path / "pts.csv"
    model = str(tmp_path / "model-slack.json")
    assert run(["emit-points", "--model", model, "--out", str(pts)]) == 0
    assert len(pts.read_text().splitlines()) == 2 ** 14 + 1
    assert run(["emit-points", "--model", model, "--exclude-gold", "--out", str(pts)]) == 0
    assert len(pts.read_text().splitlines()) == 2 ** 14
    assert run(["emit-points", "--model", model, "--index", "999"]) == 2


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "slackrescale.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "slackrescale" in r.stdout
