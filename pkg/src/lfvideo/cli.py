"""Command-line interface: synth, train, infer, render, eval, serve."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .config import PipelineConfig
from .lightfield import AngularCoord
from .synthdata import (
    SceneSpec,
    dataset_scene_specs,
    read_sequence,
    render_scene,
    write_sequence,
)

# per-stage iteration budgets: smoke satisfies the 500-iteration training
# criterion quickly; full is the budget behind the synthesis experiments
PRESETS = {
    "smoke": {"disparity": 500, "flow": 500, "warp": 400, "appearance": 500, "joint": 300},
    "full": {"disparity": 800, "flow": 2000, "warp": 600, "appearance": 1200, "joint": 800},
}
STAGE_LR = {"disparity": 1e-3, "flow": 1e-3, "warp": 1e-3, "appearance": 1e-3, "joint": 3e-4}


@click.group()
def main():
    """Light-field video synthesis tools."""


@main.command()
@click.option("--scene", "scene_path", type=click.Path(exists=True), default=None,
              help="SceneSpec JSON; omit to generate a random scene set")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--count", default=1, help="number of random scenes when --scene is omitted")
@click.option("--seed", default=0)
@click.option("--size", default=64)
@click.option("--frames", default=12)
@click.option("--keyframe-stride", default=10)
def synth(scene_path, out_dir, count, seed, size, frames, keyframe_stride):
    """Render synthetic light-field video sequences with ground truth."""
    out = Path(out_dir)
    if scene_path is not None:
        spec = SceneSpec.from_json(Path(scene_path).read_text())
        bundle = render_scene(spec)
        write_sequence(bundle, out)
        click.echo(f"wrote {out}")
        return
    specs = dataset_scene_specs(seed, count, size=size, frames=frames,
                                keyframe_stride=keyframe_stride)
    for i, spec in enumerate(specs):
        path = out / f"scene_{i:03d}"
        write_sequence(render_scene(spec), path)
        click.echo(f"wrote {path}")


def _load_dataset(data_dir: Path):
    root = Path(data_dir)
    if (root / "manifest.json").exists():
        return [read_sequence(root)]
    subdirs = sorted(p for p in root.iterdir() if (p / "manifest.json").exists())
    if not subdirs:
        raise click.ClickException(f"no sequence containers under {root}")
    return [read_sequence(p) for p in subdirs]


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--stage", type=click.Choice(["disparity", "flow", "warp", "appearance",
                                            "joint", "all"]), required=True)
@click.option("--out", "run_dir", type=click.Path(), required=True)
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default="smoke")
@click.option("--iters", default=None, type=int, help="override the preset's iterations")
@click.option("--lr", default=None, type=float)
@click.option("--batch", default=4)
@click.option("--crop", default=48)
@click.option("--seed", default=0)
@click.option("--resume", is_flag=True)
def train(data_dir, stage, run_dir, preset, iters, lr, batch, crop, seed, resume):
    """Train one stage (or all stages in order) on a directory of sequences."""
    from .training import TrainConfig, train_stage

    dataset = _load_dataset(Path(data_dir))
    pipeline_cfg = PipelineConfig(angular_resolution=dataset[0].angular_resolution)
    stages = ["disparity", "flow", "warp", "appearance", "joint"] if stage == "all" else [stage]
    for st in stages:
        cfg = TrainConfig(
            stage=st,
            iterations=iters if iters is not None else PRESETS[preset][st],
            batch_size=batch, crop=crop, seed=seed,
            learning_rate=lr if lr is not None else STAGE_LR[st],
            run_dir=str(run_dir),
        )
        click.echo(f"[{st}] {cfg.iterations} iterations ...")
        path = train_stage(st, dataset, cfg, pipeline_cfg, resume=resume)
        click.echo(f"[{st}] checkpoint {path}")


@main.command()
@click.option("--keyframes", "keyframes_dir", type=click.Path(exists=True), required=True,
              help="container holding the keyframe light fields")
@click.option("--video", "video_dir", type=click.Path(exists=True), required=True,
              help="container holding the 2D video (may be the same directory)")
@click.option("--ckpt", "ckpt", type=click.Path(exists=True), required=True,
              help="run directory or checkpoint file")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def infer(keyframes_dir, video_dir, ckpt, out_dir):
    """Synthesize the full light-field video between the keyframes."""
    from .synthesis import PipelineNets
    from .training import infer_sequence

    key_bundle = read_sequence(keyframes_dir)
    video_bundle = key_bundle if Path(video_dir).resolve() == Path(keyframes_dir).resolve() \
        else read_sequence(video_dir)
    ckpt_path = Path(ckpt)
    if ckpt_path.is_dir():
        for name in ("joint.lfnn", "appearance.lfnn"):
            if (ckpt_path / name).exists():
                ckpt_path = ckpt_path / name
                break
        else:
            raise click.ClickException(f"no joint/appearance checkpoint in {ckpt}")
    cfg = PipelineConfig(angular_resolution=key_bundle.angular_resolution)
    nets = PipelineNets(cfg)
    nets.load(ckpt_path, dtype=np.float32)  # inference runs in single precision
    keyframes = [key_bundle.light_fields[t] for t in key_bundle.keyframe_indices()]
    out = infer_sequence(keyframes, video_bundle.video, nets)
    write_sequence(out, out_dir)
    click.echo(f"wrote {out_dir}")


@main.command()
@click.argument("mode", type=click.Choice(["refocus", "view"]))
@click.option("--seq", "seq_dir", type=click.Path(exists=True), required=True)
@click.option("--t", default=0)
@click.option("--s", default=0.0, help="focus disparity (refocus)")
@click.option("--r", default=0.0, help="aperture radius (refocus)")
@click.option("--u", default=0, help="angular x (view)")
@click.option("--v", default=0, help="angular y (view)")
@click.option("--out", "out_path", type=click.Path(), required=True)
def render(mode, seq_dir, t, s, r, u, v, out_path):
    """Render a refocused image or a raw view to PNG."""
    from PIL import Image

    from .render import RefocusParams, refocus as run_refocus

    bundle = read_sequence(seq_dir)
    lf = bundle.light_fields[t]
    if lf is None:
        raise click.ClickException(f"frame {t} has no light field")
    if mode == "refocus":
        img = run_refocus(lf, RefocusParams(focus_disparity=s, aperture_radius=r))
    else:
        img = np.asarray(lf.view(AngularCoord(u, v)), dtype=np.float64)
    u8 = np.round(np.clip(img, 0, 1).transpose(1, 2, 0) * 255).astype(np.uint8)
    Image.fromarray(u8).save(out_path)
    click.echo(f"wrote {out_path}")


@main.command(name="eval")
@click.option("--pred", "pred_dir", type=click.Path(exists=True), required=True)
@click.option("--gt", "gt_dir", type=click.Path(exists=True), required=True)
@click.option("--views", type=click.Choice(["corners", "all"]), default="corners")
@click.option("--json-out", type=click.Path(), default=None)
def eval_cmd(pred_dir, gt_dir, views, json_out):
    """PSNR/SSIM of synthesized frames vs ground truth, with baselines."""
    from .evaluate import corner_views, evaluate_synthesis

    pred = read_sequence(pred_dir)
    gt = read_sequence(gt_dir)
    a = gt.angular_resolution
    c = (a - 1) // 2
    view_list = corner_views(a) if views == "corners" else \
        [AngularCoord(u, v) for u in range(-c, c + 1) for v in range(-c, c + 1)]
    report = evaluate_synthesis(pred, gt, view_list)
    click.echo(f"{'t':>4} {'view':>8} {'psnr':>7} {'ssim':>7}")
    for row in report["rows"]:
        click.echo(f"{row['t']:>4} ({row['u']:>2},{row['v']:>2}) "
                   f"{row['psnr']:>7.2f} {row['ssim']:>7.4f}")
    click.echo(f"mean PSNR {report['mean_psnr']:.2f} dB   mean SSIM {report['mean_ssim']:.4f}")
    click.echo(f"copy-nearest-keyframe baseline: PSNR {report['copy_psnr']:.2f} "
               f"SSIM {report['copy_ssim']:.4f}")
    if report["warp_psnr"] is not None:
        click.echo(f"warped-central baseline: PSNR {report['warp_psnr']:.2f} "
                   f"SSIM {report['warp_ssim']:.4f}")
    if json_out:
        slim = {k: v for k, v in report.items() if k != "rows"}
        Path(json_out).write_text(json.dumps(slim, indent=2))


@main.command()
@click.option("--seq", "seq_dirs", type=click.Path(exists=True), multiple=True,
              help="sequence container(s); defaults to LFV_DATA_DIR subdirectories")
@click.option("--port", default=8080)
@click.option("--host", default="127.0.0.1")
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="static viewer bundle to serve at /")
def serve(seq_dirs, port, host, ui_dir):
    """Serve sequences over HTTP for the interactive viewer."""
    from .server import serve as run_server

    paths: dict[str, Path] = {}
    if seq_dirs:
        for d in seq_dirs:
            paths[Path(d).name] = Path(d)
    else:
        root = os.environ.get("LFV_DATA_DIR")
        if not root:
            raise click.ClickException("pass --seq or set LFV_DATA_DIR")
        for p in sorted(Path(root).iterdir()):
            if (p / "manifest.json").exists():
                paths[p.name] = p
    if not paths:
        raise click.ClickException("no sequences found")
    click.echo(f"serving {sorted(paths)} on http://{host}:{port}")
    run_server(paths, port=port, host=host, ui_dir=ui_dir)


if __name__ == "__main__":
    sys.exit(main())
