import json
import subprocess
import sys

import numpy as np
import pytest
from _fixtures import COMBINATION_FIXTURES

from mogsim.cli import build_parser, main
from mogsim.records import GraspRecord, load_record, record_to_json
from mogsim.scene import scene_from_text

TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)


def test_all_verbs_registered():
    parser = build_parser()
    for verb in ("settle", "grasp", "batch", "classify", "closure", "report"):
        with pytest.raises(SystemExit) as e:
            parser.parse_args([verb, "--help"])
        assert e.value.code == 0


def test_global_flags_before_verb(tmp_path):
    args = build_parser().parse_args(["--seed", "4", "settle", "--count", "2"])
    assert args.seed == 4
    args = build_parser().parse_args(["settle", "--seed", "6"])
    assert args.seed == 6


def test_settle(tmp_path, capsys):
    out = tmp_path / "scene.txt"
    assert main(["settle", "--seed", "1", "--count", "3", "--out", str(out)]) == 0
    scene = scene_from_text(out.read_text())
    assert len(scene.objects) == 3


def test_grasp_and_closure_on_record(tmp_path, capsys):
    scene = tmp_path / "scene.txt"
    assert main(["settle", "--seed", "2", "--count", "6", "--out", str(scene)]) == 0
    rec_path = tmp_path / "rec.json"
    assert main(["grasp", "--seed", "3", "--scene", str(scene), "--no-trajectory", "--out", str(rec_path)]) == 0
    rec = load_record(str(rec_path))
    assert rec.trajectory is None and rec.labels is not None
    out = tmp_path / "holds.json"
    assert main(["closure", str(rec_path), "--out", str(out)]) == 0
    holds = json.loads(out.read_text())
    assert holds["held_count"] == rec.held_count


def test_closure_raw_points(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"points": (10 * TETRA).tolist(), "normals": (-TETRA).tolist(), "radius": 10.0}))
    assert main(["closure", str(p)]) == 0
    assert json.loads(capsys.readouterr().out)["force_closure"] is True
    p.write_text(json.dumps({"points": [[0, 0, 10], [0, 0, -10]], "normals": [[0, 0, -1], [0, 0, 1]],
                             "radius": 10.0}))
    assert main(["closure", str(p)]) == 0
    assert json.loads(capsys.readouterr().out)["force_closure"] is False


def test_classify_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    d = COMBINATION_FIXTURES["Multiple finger-palm clips"][0]()
    good.write_text(json.dumps(d))
    assert main(["classify", str(good)]) == 0
    assert "Multiple finger-palm clips" in capsys.readouterr().out
    empty = tmp_path / "empty.json"
    empty.write_text(record_to_json(GraspRecord()))
    assert main(["classify", str(empty)]) == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["classify", str(broken)]) == 1
    assert main(["classify", str(tmp_path / "missing.json")]) == 2


def test_batch_and_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["batch", "--seed", "5", "--pile-size", "12", "--target", "1", "--max-trials", "12",
                 "--out", str(out), "--quiet", "--no-trajectory"]) == 0
    text = capsys.readouterr().out
    assert "sphere-large" in text
    assert main(["report", str(out), "--out", str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["groups"][0]["successes"] == 1


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("pile_size = 0\n")
    assert main(["settle", "--config", str(cfg)]) == 1
    cfg.write_text("[policy]\np = 0.9\nq = 0.9\n")
    assert main(["batch", "--config", str(cfg)]) == 1
    assert main(["batch", "--target", "5", "--max-trials", "2"]) == 1
    assert main(["settle", "--shape", "blob:large"]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "mogsim", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "classify" in r.stdout
