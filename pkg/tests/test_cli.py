"""CLI: synth, render, eval round trips (training/inference are covered at
scale by the acceptance suite)."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from lfvideo.cli import main
from lfvideo.synthdata import read_sequence


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory, runner):
    out = tmp_path_factory.mktemp("scenes") / "demo"
    r = runner.invoke(main, ["synth", "--out", str(out), "--count", "1", "--seed", "5",
                             "--size", "48", "--frames", "4", "--keyframe-stride", "3"])
    assert r.exit_code == 0, r.output
    return out / "scene_000"


def test_synth_writes_container(scene_dir):
    bundle = read_sequence(scene_dir)
    assert bundle.frames == 4
    assert bundle.spatial_dims == (48, 48)


def test_synth_from_scene_json(tmp_path, runner, scene_dir):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text((scene_dir / "scene.json").read_text())
    out = tmp_path / "seq"
    r = runner.invoke(main, ["synth", "--scene", str(spec_path), "--out", str(out)])
    assert r.exit_code == 0, r.output
    again = read_sequence(out)
    base = read_sequence(scene_dir)
    np.testing.assert_array_equal(again.video[0].image, base.video[0].image)


def test_render_view_and_refocus(tmp_path, runner, scene_dir):
    out_png = tmp_path / "v.png"
    r = runner.invoke(main, ["render", "view", "--seq", str(scene_dir), "--t", "0",
                             "--u", "1", "--v", "-1", "--out", str(out_png)])
    assert r.exit_code == 0, r.output
    assert out_png.stat().st_size > 100
    r = runner.invoke(main, ["render", "refocus", "--seq", str(scene_dir), "--t", "0",
                             "--s", "0.5", "--r", "2.0", "--out", str(tmp_path / "r.png")])
    assert r.exit_code == 0, r.output


def test_eval_identical_is_capped(tmp_path, runner, scene_dir):
    json_out = tmp_path / "report.json"
    r = runner.invoke(main, ["eval", "--pred", str(scene_dir), "--gt", str(scene_dir),
                             "--json-out", str(json_out)])
    assert r.exit_code == 0, r.output
    assert "99.00" in r.output
    report = json.loads(json_out.read_text())
    assert report["mean_psnr"] == 99.0
    assert report["mean_ssim"] == 1.0


def test_eval_prints_per_frame_table(runner, scene_dir):
    r = runner.invoke(main, ["eval", "--pred", str(scene_dir), "--gt", str(scene_dir)])
    assert r.exit_code == 0
    # one line per (frame, view): frames 1..2, four corners
    assert r.output.count("( 2, 2)") == 2
    assert "mean PSNR" in r.output


def test_unknown_flag_fails(runner):
    r = runner.invoke(main, ["synth", "--bogus", "x"])
    assert r.exit_code != 0


def test_missing_file_fails(runner, tmp_path):
    r = runner.invoke(main, ["eval", "--pred", str(tmp_path / "nope"), "--gt", str(tmp_path)])
    assert r.exit_code != 0
