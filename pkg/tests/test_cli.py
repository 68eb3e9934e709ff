import csv
import json

import numpy as np
import pytest

from svexposure.cli import main
from svexposure.io import read_pfm, write_pfm


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "scene.pfm"
    assert main(["synth", "--kind", "hdr-composite", "--width", "32", "--height", "32",
                 "--seed", "4", "--out", str(path)]) == 0
    return path


def test_version_and_parse_errors(capsys):
    assert main(["--version"]) == 0
    assert main(["rank"]) == 2
    assert main(["nosuch"]) == 2


def test_precondition_and_io_codes(tmp_path):
    assert main(["synth", "--width", "31", "--out", str(tmp_path / "x.pfm")]) == 4
    assert main(["capture", "--scene", str(tmp_path / "missing.pfm"), "--tau", "1,1,1,1",
                 "--alpha", "1,1,1,1", "--out", str(tmp_path / "c.pfm")]) == 3
    bad = tmp_path / "bad.pfm"
    bad.write_bytes(b"garbage")
    assert main(["reconstruct", "--capture", str(bad), "--out", str(tmp_path / "r.pfm")]) == 3


def test_resource_guard(tmp_path):
    big = tmp_path / "big.pfm"
    write_pfm(big, np.full((300, 300), 100.0))
    args = ["eval", "--scene", str(big), "--estimators", "snr", "--reconstructors", "lpa",
            "--out", str(tmp_path / "e")]
    assert main(args) == 5


def test_capture_reconstruct_round_trip(tmp_path, scene_file):
    cap = tmp_path / "cap.pfm"
    assert main(["capture", "--scene", str(scene_file), "--tau", "0.25,1,0.5,1",
                 "--alpha", "1,10,80,1", "--seed", "1", "--out", str(cap)]) == 0
    side = json.loads((tmp_path / "cap.pfm.json").read_text())
    assert side["kind"] == "raw-capture" and side["seed"] == 1
    for method in ("lpa", "admm-tv"):
        out = tmp_path / f"{method}.pfm"
        assert main(["reconstruct", "--capture", str(cap), "--method", method, "--out", str(out)]) == 0
        assert read_pfm(out).shape == (32, 32)


def test_rank_lists_every_class(tmp_path, scene_file):
    hist = tmp_path / "h.json"
    assert main(["pilot", "--scene", str(scene_file), "--out", str(hist)]) == 0
    out = tmp_path / "rank.csv"
    assert main(["rank", "--estimator", "sve", "--histogram", str(hist), "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 495
    assert main(["rank", "--estimator", "sve", "--out", str(out)]) == 4


def _top(path):
    with open(path) as fh:
        return next(csv.DictReader(fh))["pattern_id"]


def test_sve_and_snr_disagree_on_split_scene(tmp_path):
    scene = tmp_path / "split.pfm"
    assert main(["synth", "--kind", "two-level", "--param", "levels_ab=[2,9000]",
                 "--width", "64", "--height", "64", "--out", str(scene)]) == 0
    hist = tmp_path / "h.json"
    assert main(["pilot", "--scene", str(scene), "--out", str(hist)]) == 0
    assert main(["rank", "--estimator", "sve", "--histogram", str(hist), "--out", str(tmp_path / "a.csv")]) == 0
    assert main(["rank", "--estimator", "snr", "--scene", str(scene), "--out", str(tmp_path / "b.csv")]) == 0
    assert _top(tmp_path / "a.csv") != _top(tmp_path / "b.csv")


def test_pipeline_is_deterministic(tmp_path, scene_file):
    outs = []
    for name in ("p1", "p2"):
        out = tmp_path / name
        assert main(["pipeline", "--scene", str(scene_file), "--seed", "11", "--out", str(out)]) == 0
        outs.append(out)
    for fname in ("rank.csv", "histogram.json", "metrics.json", "reconstruction.pfm"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
    metrics = json.loads((outs[0] / "metrics.json").read_text())
    assert metrics["seed"] == 11


def test_eval_small(tmp_path, scene_file):
    out = tmp_path / "ev"
    assert main(["eval", "--scene", str(scene_file), "--synthetic", "1", "--size", "16",
                 "--estimators", "sve,snr", "--reconstructors", "lpa", "--out", str(out)]) == 0
    for fname in ("scores.csv", "statistics.csv", "spearman.csv", "summary.json", "risks.csv"):
        assert (out / fname).exists()
    with open(out / "statistics.csv") as fh:
        estimators = {r["estimator"] for r in csv.DictReader(fh)}
    assert {"sve", "snr", "oracle"} <= estimators


def test_bench_rows(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--resolutions", "16x16,32x32", "--repeats", "2", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert {(r["estimator"], r["height"]) for r in rows} == {
        (e, h) for e in ("sve", "snr") for h in ("16", "32")}
