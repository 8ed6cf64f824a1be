import json
import subprocess
import sys

import numpy as np
import pytest

from mmreg.cli import main
from mmreg.imaging import SimilarityParams
from mmreg.io import load_field, load_image, load_landmarks
from mmreg.pipeline import StageError, run_pipeline_arrays
from mmreg.config import PipelineConfig

from conftest import phantom


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--seed", "3", "--size", "128", "--translation", "5", "--rotation", "5",
                 "--scale", "0.05", "--deform", "3", "--out", str(out)]) == 0
    return out


def test_synth_outputs(synth_dir):
    names = sorted(p.name for p in synth_dir.iterdir())
    assert names == ["fixed.pgm", "landmarks_fixed.csv", "landmarks_moving.csv", "moving.pgm", "truth.json",
                     "truth_field.dfld"]
    assert load_image(synth_dir / "fixed.pgm").shape == (128, 128)
    assert load_field(synth_dir / "truth_field.dfld").shape == (128, 128, 2)
    assert load_landmarks(synth_dir / "landmarks_moving.csv").shape == (8, 2)
    truth = json.loads((synth_dir / "truth.json").read_text())
    assert truth["seed"] == 3 and abs(truth["tx"]) <= 5


def test_eval_prints_report(synth_dir, capsys):
    assert main(["eval", "--landmarks-a", str(synth_dir / "landmarks_fixed.csv"),
                 "--landmarks-b", str(synth_dir / "landmarks_fixed.csv"), "--scale-mm", "2"]) == 0
    out = capsys.readouterr().out
    assert "error_mm       0.000000" in out and "scale_mm_px    2.0000" in out


def test_edges_and_overlay(synth_dir, tmp_path):
    assert main(["edges", "--input", str(synth_dir / "fixed.pgm"), "--out", str(tmp_path / "e.pgm"),
                 "--low", "0.1", "--high", "0.3"]) == 0
    e = load_image(tmp_path / "e.pgm")
    assert set(np.unique(e)) <= {0.0, 1.0} and e.any()
    assert main(["overlay", "--a", str(synth_dir / "fixed.pgm"), "--b", str(synth_dir / "moving.pgm"),
                 "--tile", "16", "--out", str(tmp_path / "c.pgm")]) == 0
    c = load_image(tmp_path / "c.pgm")
    np.testing.assert_array_equal(c[:16, :16], load_image(synth_dir / "fixed.pgm")[:16, :16])


def test_coarse_and_fine_subcommands(synth_dir, tmp_path):
    f, m = str(synth_dir / "fixed.pgm"), str(synth_dir / "moving.pgm")
    assert main(["coarse", "--fixed", f, "--moving", m, "--out", str(tmp_path / "c"), "--samples", "5000"]) == 0
    params = json.loads((tmp_path / "c" / "coarse_params.json").read_text())
    assert set(params) == {"tx", "ty", "theta", "scale"}
    assert main(["fine", "--fixed", f, "--moving", str(tmp_path / "c" / "coarse_warped.pgm"),
                 "--out", str(tmp_path / "f"), "--levels", "2", "--iters", "20"]) == 0
    report = (tmp_path / "f" / "report.txt").read_text()
    assert report.count("level ") == 2
    assert load_field(tmp_path / "f" / "field.dfld").shape == (128, 128, 2)


def test_pipeline_with_landmarks(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_samples": 5000, "demons": {"iterations_per_level": 50}}))
    out = tmp_path / "run"
    rc = main(["pipeline", "--config", str(cfg), "--fixed", str(synth_dir / "fixed.pgm"),
               "--moving", str(synth_dir / "moving.pgm"), "--out", str(out),
               "--landmarks-fixed", str(synth_dir / "landmarks_fixed.csv"),
               "--landmarks-moving", str(synth_dir / "landmarks_moving.csv"), "--seed", "11"])
    assert rc == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["checker_coarse.pgm", "checker_fine.pgm", "coarse_params.json", "coarse_warped.pgm",
                     "config.json", "edges_fixed.pgm", "edges_moving.pgm", "field.dfld", "fine_warped.pgm",
                     "report.txt"]
    written = json.loads((out / "config.json").read_text())
    # file values kept, flag values override
    assert written["n_samples"] == 5000 and written["demons"]["iterations_per_level"] == 50 and written["seed"] == 11
    report = (out / "report.txt").read_text()
    for section in ("[coarse]", "[fine]", "[landmarks before]", "[landmarks coarse]", "[landmarks fine]",
                    "mi_before", "mi_coarse"):
        assert section in report
    mse = [float(line.split()[1]) for line in report.splitlines() if line.startswith("mse_px2")]
    before, coarse, fine = mse
    assert coarse < before and fine < coarse


def test_identical_inputs_near_identity():
    img = phantom(96)
    res = run_pipeline_arrays(img, img, PipelineConfig(n_samples=5000))
    p = res.coarse.params
    assert abs(p.tx) < 0.5 and abs(p.ty) < 0.5 and abs(p.theta) < 0.01 and abs(p.scale - 1) < 0.01
    assert np.hypot(res.fine.field[..., 0], res.fine.field[..., 1]).max() < 0.1


def test_roi_field_embedded():
    img = phantom(96)
    moving = np.roll(img, 1, axis=1)
    res = run_pipeline_arrays(img, moving, PipelineConfig(n_samples=5000, roi=(20, 30, 48, 32)))
    f = res.fine.field
    assert f.shape == (96, 96, 2)
    assert not f[:30].any() and not f[:, :20].any() and not f[62:].any() and not f[:, 68:].any()


def test_missing_moving_path(synth_dir, tmp_path, capsys):
    out = tmp_path / "never"
    rc = main(["pipeline", "--fixed", str(synth_dir / "fixed.pgm"), "--moving", str(tmp_path / "ghost.pgm"),
               "--out", str(out)])
    assert rc != 0
    err = capsys.readouterr().err
    assert "FileNotFoundError" in err and "ghost.pgm" in err
    assert not out.exists()


def test_failure_leaves_no_partial_artifacts(synth_dir, tmp_path, capsys):
    out = tmp_path / "partial"
    rc = main(["pipeline", "--fixed", str(synth_dir / "fixed.pgm"), "--moving", str(synth_dir / "moving.pgm"),
               "--out", str(out), "--samples", "2000", "--roi", "100", "100", "64", "64"])
    assert rc == 1
    assert "[fine] OutOfBounds" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_mismatched_shapes_error():
    with pytest.raises(StageError, match=r"\[input\]"):
        run_pipeline_arrays(np.zeros((20, 20)), np.zeros((20, 21)))


def test_bad_landmark_flags(synth_dir, tmp_path, capsys):
    rc = main(["pipeline", "--fixed", str(synth_dir / "fixed.pgm"), "--moving", str(synth_dir / "moving.pgm"),
               "--out", str(tmp_path / "x"), "--landmarks-fixed", str(synth_dir / "landmarks_fixed.csv")])
    assert rc == 1 and "go together" in capsys.readouterr().err


def test_bad_synth_options(tmp_path, capsys):
    assert main(["synth", "--deform", "50", "--out", str(tmp_path / "s")]) == 1
    assert "deform" in capsys.readouterr().err


def test_unparseable_landmarks(tmp_path, capsys):
    (tmp_path / "a.csv").write_text("1,2\nfoo\n")
    (tmp_path / "b.csv").write_text("1,2\n3,4\n")
    assert main(["eval", "--landmarks-a", str(tmp_path / "a.csv"), "--landmarks-b", str(tmp_path / "b.csv")]) == 1
    assert "line 2" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    a = tmp_path / "a.pgm"
    a.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 50, 100, 150]))
    proc = subprocess.run([sys.executable, "-m", "mmreg", "overlay", "--a", str(a), "--b", str(a),
                           "--out", str(tmp_path / "o.pgm"), "--tile", "1"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o.pgm").read_bytes() == a.read_bytes()
    proc = subprocess.run([sys.executable, "-m", "mmreg", "nosuch"], capture_output=True, text=True)
    assert proc.returncode != 0
