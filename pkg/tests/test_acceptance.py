"""Acceptance gate: one test per criterion, each printing a pass/fail line.

The synthesis experiments train the full pipeline once (session fixture) at
desk scale: 12 training scenes, 8 held-out scenes, 5x5 views, 64x64 frames,
keyframes every 10 frames. Budget on a desktop CPU: the full-training fixture
dominates (roughly an hour); the smoke criterion runs its own fast training.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from lfvideo import tensor as T
from lfvideo.config import PipelineConfig, PlaneSweepConfig
from lfvideo.disparity import disparity_loss, plane_sweep_features, variance_argmin_disparity
from lfvideo.evaluate import corner_views, evaluate_datasets
from lfvideo.flow import FlowEstimator, flow_loss
from lfvideo.gradcheck import max_relative_error
from lfvideo.lightfield import AngularCoord, LightFieldFrame
from lfvideo.metrics import psnr, ssim
from lfvideo.nn import load_checkpoint, save_checkpoint
from lfvideo.render import RefocusParams, refocus, variance_of_laplacian
from lfvideo.synthdata import (
    LayerSpec,
    SceneSpec,
    dataset_scene_specs,
    read_sequence,
    render_scene,
    write_sequence,
)
from lfvideo.synthesis import (
    AppearanceNetwork,
    DisparityNetwork,
    FrameContext,
    PipelineNets,
    WarpFlowNetwork,
    borrow_disparity,
    estimate_target_disparity,
    synthesize_view,
)
from lfvideo.tensor import Tensor
from lfvideo.training import TrainConfig, infer_sequence, train_stage
from lfvideo.warp import cascade_flow, sample_image_np, warp_five, warp_with_flow

CFG = PipelineConfig()

FULL_BUDGET = {
    "disparity": dict(iterations=800, learning_rate=1e-3, batch_size=4, crop=48),
    "flow": dict(iterations=1800, learning_rate=1e-3, batch_size=3, crop=48),
    "warp": dict(iterations=600, learning_rate=1e-3, batch_size=4, crop=48),
    "appearance": dict(iterations=1200, learning_rate=1e-3, batch_size=4, crop=48),
    "joint": dict(iterations=700, learning_rate=3e-4, batch_size=2, crop=48),
}


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


# -- shared data -------------------------------------------------------------------


@pytest.fixture(scope="session")
def train_bundles():
    return [render_scene(s) for s in dataset_scene_specs(1, 12)]


@pytest.fixture(scope="session")
def test_bundles():
    return [render_scene(s) for s in dataset_scene_specs(2, 8)]


def run_inference_eval(ckpt: Path, bundles) -> dict:
    nets = PipelineNets(CFG)
    nets.load(ckpt, dtype=np.float32)  # inference in single precision
    preds = []
    for b in bundles:
        keyframes = [b.light_fields[t] for t in b.keyframe_indices()]
        preds.append(infer_sequence(keyframes, b.video, nets))
    return evaluate_datasets(preds, bundles, corner_views(CFG.angular_resolution))


@pytest.fixture(scope="session")
def full_run(tmp_path_factory, train_bundles, test_bundles):
    run_dir = tmp_path_factory.mktemp("full_run")
    for stage in ("disparity", "flow", "warp", "appearance", "joint"):
        cfg = TrainConfig(stage=stage, seed=0, run_dir=str(run_dir), **FULL_BUDGET[stage])
        t0 = time.time()
        train_stage(stage, train_bundles, cfg, CFG)
        print(f"[full_run] {stage}: {time.time() - t0:.0f}s")
    stage_eval = run_inference_eval(run_dir / "appearance.lfnn", test_bundles)
    joint_eval = run_inference_eval(run_dir / "joint.lfnn", test_bundles)
    return {"run_dir": run_dir, "stage_eval": stage_eval, "joint_eval": joint_eval}


# -- criterion 1: gradient suite ------------------------------------------------------


def test_gradient_suite():
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst = {}

    def rt(*shape, scale=1.0):
        return Tensor(rng.uniform(-scale, scale, shape), requires_grad=True)

    # elementary differentiable ops on <= 8x8 double inputs
    x, y = rt(3, 8, 8), rt(3, 8, 8)
    worst["arithmetic"] = max_relative_error(
        lambda: (T.square(x * y + 2.0) - T.div(x, y + 4.0)).mean(), [x, y], rng=rng)
    worst["relu"] = max_relative_error(lambda: T.relu(x + 0.3).sum(), [x], rng=rng)
    worst["tanh"] = max_relative_error(lambda: T.tanh(x).sum(), [x], rng=rng)
    worst["reductions"] = max_relative_error(
        lambda: T.square(T.tsum(x, axis=0)).mean() + T.tmean(y, axis=2).sum(), [x, y], rng=rng)
    k, b = rt(4, 3, 3, 3, scale=0.5), rt(4, scale=0.2)
    worst["conv2d"] = max_relative_error(
        lambda: T.square(T.conv2d(x, k, b)).mean(), [x, k, b], rng=rng)
    gx = Tensor(rng.uniform(1.2, 6.3, (6, 6)), requires_grad=True)
    gy = Tensor(rng.uniform(1.2, 6.3, (6, 6)), requires_grad=True)
    img = rt(3, 8, 8)
    worst["bilinear"] = max_relative_error(
        lambda: T.square(T.bilinear_sample(img, gx, gy)).mean(), [img, gx, gy], rng=rng)
    worst["resample"] = max_relative_error(
        lambda: T.square(T.upsample_bilinear(T.downsample2(x), (8, 8))).mean(), [x], rng=rng)
    blur_k = np.outer([0.25, 0.5, 0.25], [0.25, 0.5, 0.25])
    worst["blur"] = max_relative_error(lambda: T.square(T.blur2d(x, blur_k)).mean(), [x], rng=rng)

    # the four full networks through their actual losses, 8x8 inputs
    views = LightFieldFrame(rng.uniform(0.2, 0.8, (3, 3, 3, 8, 8)))
    dnet = DisparityNetwork(PlaneSweepConfig(16, -2, 2)).init(1)
    feats = plane_sweep_features(views, dnet.sweep)

    def disparity_net_loss():
        return disparity_loss(views, dnet(feats))

    worst["disparity-network"] = max_relative_error(
        disparity_net_loss, list(dnet.parameters().values()), max_entries_per_param=6, rng=rng)

    from lfvideo.config import FlowPyramidConfig

    fest = FlowEstimator(FlowPyramidConfig(levels=1, min_coarse=8), search_range=8.0).init(2)
    fa = rng.uniform(0.2, 0.8, (3, 8, 8))
    fb = sample_image_np(fa, *np.meshgrid(np.arange(8) + 0.4, np.arange(8) + 0.2)[::1])

    def flow_net_loss():
        return flow_loss(fa, fb, fest.estimate(fa, fb))

    worst["flow-network"] = max_relative_error(
        flow_net_loss, list(fest.parameters().values()), max_entries_per_param=6, rng=rng)

    wnet = WarpFlowNetwork(CFG).init(3)
    d0b = rng.uniform(-0.5, 0.5, (8, 8))
    dTb = rng.uniform(-0.5, 0.5, (8, 8))
    f0 = rng.uniform(-0.4, 0.4, (2, 8, 8))
    fT = rng.uniform(-0.4, 0.4, (2, 8, 8))
    I_t = rng.uniform(0.2, 0.8, (3, 8, 8))
    target = rng.uniform(0.2, 0.8, (3, 8, 8))
    gxg, gyg = T.grid_2d(8, 8)

    def warp_net_loss():
        d_t = estimate_target_disparity(d0b, dTb, f0, fT, 0.4, wnet)
        warped = T.bilinear_sample(Tensor(I_t), Tensor(gxg) - 1.0 * d_t + 0.23,
                                   Tensor(gyg) + 1.0 * d_t + 0.31)
        return T.tmean(T.tsum(T.square(warped - Tensor(target)), axis=0))

    worst["warpflow-network"] = max_relative_error(
        warp_net_loss, list(wnet.parameters().values()), max_entries_per_param=6, rng=rng)

    anet = AppearanceNetwork(CFG).init(4)
    ctx = FrameContext(
        I_t=I_t, I_0=rng.uniform(0.2, 0.8, (3, 8, 8)), I_T=rng.uniform(0.2, 0.8, (3, 8, 8)),
        d0=d0b, dT=dTb, d0_borrowed=d0b, dT_borrowed=dTb, f_0t=f0, f_Tt=fT,
        lam=0.4, d_t=Tensor(rng.uniform(-0.5, 0.5, (8, 8)) + 0.27))
    L0u = rng.uniform(0.2, 0.8, (3, 8, 8))
    LTu = rng.uniform(0.2, 0.8, (3, 8, 8))

    def appearance_net_loss():
        out = synthesize_view(ctx, L0u, LTu, AngularCoord(1, -1), anet, clamp_output=False)
        return T.tmean(T.tsum(T.square(out - Tensor(target)), axis=0))

    worst["appearance-network"] = max_relative_error(
        appearance_net_loss, list(anet.parameters().values()), max_entries_per_param=6, rng=rng)

    elapsed = time.time() - t0
    bad = {k: v for k, v in worst.items() if v >= 1e-4}
    report("gradient-suite",
           not bad and elapsed < 60.0,
           f"max rel err {max(worst.values()):.2e} over {len(worst)} checks, {elapsed:.1f}s"
           + (f"; failing: {bad}" if bad else ""))


# -- criterion 2: warp oracle suite ----------------------------------------------------


def smooth_image(h, w, seed=0, max_freq=0.018):
    rng = np.random.default_rng(seed)
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    img = np.zeros((3, h, w))
    for ch in range(3):
        for _ in range(3):
            f = rng.uniform(0.008, max_freq)
            th = rng.uniform(0, 2 * np.pi)
            img[ch] += rng.uniform(0.3, 1.0) * np.cos(
                2 * np.pi * f * (np.cos(th) * xs + np.sin(th) * ys) + rng.uniform(0, 6))
    img -= img.min()
    img /= img.max()
    return img


def smooth_field(h, w, seed=0, amplitude=1.0):
    rng = np.random.default_rng(seed)
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    fx, fy = rng.uniform(0.01, 0.04, 2)
    return amplitude * np.sin(2 * np.pi * (fx * xs + fy * ys) + rng.uniform(0, 6))


def test_warp_oracle_suite():
    h = w = 48
    details = []
    ok = True

    # exact identity at zero flow / zero disparity
    img = np.random.default_rng(0).random((3, h, w))
    ident = warp_with_flow(img, np.zeros((2, h, w))).data
    exact = np.array_equal(ident, img)
    zero1, zero2 = np.zeros((h, w)), np.zeros((2, h, w))
    outs = warp_five(img, img, img, img, img, zero1, zero2, zero2, zero1, zero1,
                     AngularCoord(2, -2))
    exact &= all(np.array_equal(o.data, img) for o in outs)
    ok &= exact
    details.append(f"zero-field identity exact: {exact}")

    # cascade vs two-step warping
    src = smooth_image(h, w, 3, max_freq=0.028)
    f_ab = np.stack([smooth_field(h, w, 1, 1.2), smooth_field(h, w, 2, 1.2)])
    f_bc = np.stack([smooth_field(h, w, 3, 1.2), smooth_field(h, w, 4, 1.2)])
    one = warp_with_flow(src, cascade_flow(f_ab, f_bc)).data
    two = warp_with_flow(warp_with_flow(src, f_ab).data, f_bc).data
    rms_cascade = float(np.sqrt(np.mean((one - two)[:, 4:-4, 4:-4] ** 2)))
    ok &= rms_cascade < 1e-3
    details.append(f"cascade RMS {rms_cascade:.2e}")

    # composed five-image warps vs sequential multi-resample routes
    imgs = [smooth_image(h, w, 10 + i) for i in range(5)]
    d_t = smooth_field(h, w, 20, 0.8)
    f0 = np.stack([smooth_field(h, w, 21), smooth_field(h, w, 22)])
    fT = np.stack([smooth_field(h, w, 23), smooth_field(h, w, 24)])
    d0 = smooth_field(h, w, 25, 0.8)
    dT = smooth_field(h, w, 26, 0.8)
    u = AngularCoord(1, -1)
    outs = warp_five(*imgs, d_t, f0, fT, d0, dT, u)
    gx, gy = T.grid_2d(h, w)
    yx, yy = gx - u.u * d_t, gy - u.v * d_t
    seq_I0 = sample_image_np(warp_with_flow(imgs[1], f0).data, yx, yy)
    gxv, gyv = gx + u.u * d0, gy + u.v * d0
    seq_L0 = sample_image_np(warp_with_flow(sample_image_np(imgs[3], gxv, gyv), f0).data, yx, yy)
    seq_IT = sample_image_np(warp_with_flow(imgs[2], fT).data, yx, yy)
    rms_comp = max(
        float(np.sqrt(np.mean((outs[1].data - seq_I0)[:, 4:-4, 4:-4] ** 2))),
        float(np.sqrt(np.mean((outs[3].data - seq_L0)[:, 4:-4, 4:-4] ** 2))),
        float(np.sqrt(np.mean((outs[2].data - seq_IT)[:, 4:-4, 4:-4] ** 2))),
    )
    ok &= rms_comp < 1e-3
    details.append(f"composed-vs-sequential RMS {rms_comp:.2e}")
    report("warp-oracle-suite", ok, "; ".join(details))


# -- criterion 3: plane-sweep oracle ---------------------------------------------------


def test_plane_sweep_oracle():
    sweep = CFG.plane_sweep()
    hyp = sweep.hypotheses()
    rng = np.random.default_rng(11)
    fractions = []
    for trial in range(4):
        k = int(rng.integers(2, sweep.levels - 2))
        d_true = float(hyp[k] + rng.uniform(-0.09, 0.09))
        spec = SceneSpec(layers=[LayerSpec(disparity=d_true)], frames=1,
                         height=64, width=64, seed=int(rng.integers(10 ** 6)))
        lf = render_scene(spec).light_fields[0]
        d_hat = variance_argmin_disparity(lf, sweep)
        q = hyp[np.argmin(np.abs(hyp - d_true))]
        match = float(np.mean(np.abs(d_hat.values[5:-5, 5:-5] - q) < 1e-9))
        fractions.append(match)
    ok = all(f >= 0.9 for f in fractions)
    report("plane-sweep-oracle", ok,
           f"argmin match fractions {[round(f, 3) for f in fractions]} (need >= 0.9)")


# -- criterion 4: training smoke -------------------------------------------------------


def test_training_smoke(tmp_path):
    scenes = [render_scene(s) for s in dataset_scene_specs(5, 4)]
    budgets = {
        "disparity": dict(iterations=500, learning_rate=1e-3, batch_size=4, crop=48),
        "flow": dict(iterations=500, learning_rate=1e-3, batch_size=3, crop=48),
        "warp": dict(iterations=500, learning_rate=1e-3, batch_size=4, crop=48),
        "appearance": dict(iterations=500, learning_rate=1e-3, batch_size=4, crop=48),
        "joint": dict(iterations=150, learning_rate=3e-4, batch_size=2, crop=48),
    }
    t0 = time.time()
    drops = {}
    for stage in ("disparity", "flow", "warp", "appearance", "joint"):
        cfg = TrainConfig(stage=stage, seed=1, run_dir=str(tmp_path), **budgets[stage])
        train_stage(stage, scenes, cfg, CFG)
        probe = json.loads((tmp_path / f"probe_{stage}.json").read_text())["probe"]
        drops[stage] = probe[-1][1] / probe[0][1]
    wall = time.time() - t0
    component_ok = all(drops[s] <= 0.5 for s in ("disparity", "flow", "warp", "appearance"))
    joint_ok = drops["joint"] < 1.0
    ok = component_ok and joint_ok and wall < 1800
    report("training-smoke", ok,
           f"probe ratios {dict((k, round(v, 3)) for k, v in drops.items())} "
           f"(components need <= 0.5, joint < 1), wall {wall / 60:.1f} min (< 30)")


# -- criteria 5 & 6: synthesis experiments ---------------------------------------------


def test_end_to_end_synthesis(full_run):
    ev = full_run["joint_eval"]
    psnr_gain_copy = ev["mean_psnr"] - ev["copy_psnr"]
    psnr_gain_warp = ev["mean_psnr"] - ev["warp_psnr"]
    ssim_ok = ev["mean_ssim"] > ev["copy_ssim"] and ev["mean_ssim"] > ev["warp_ssim"]
    ok = psnr_gain_copy >= 3.0 and psnr_gain_warp >= 1.0 and ssim_ok
    report("end-to-end-synthesis", ok,
           f"PSNR {ev['mean_psnr']:.2f} vs copy {ev['copy_psnr']:.2f} (+{psnr_gain_copy:.2f}, "
           f"need +3) and warped-central {ev['warp_psnr']:.2f} (+{psnr_gain_warp:.2f}, need +1); "
           f"SSIM {ev['mean_ssim']:.4f} vs {ev['copy_ssim']:.4f}/{ev['warp_ssim']:.4f}")


def test_joint_vs_stagewise(full_run):
    stage_psnr = full_run["stage_eval"]["mean_psnr"]
    joint_psnr = full_run["joint_eval"]["mean_psnr"]
    gain = joint_psnr - stage_psnr
    report("joint-vs-stagewise", gain >= 0.3,
           f"joint {joint_psnr:.2f} dB vs stage-wise {stage_psnr:.2f} dB (+{gain:.2f}, need +0.3)")


# -- criterion 7: rendering ------------------------------------------------------------


def test_rendering_refocus():
    spec = SceneSpec(layers=[LayerSpec(disparity=1.0)], frames=1, height=64, width=64, seed=41)
    lf = render_scene(spec).light_fields[0]
    out = refocus(lf, RefocusParams(focus_disparity=1.0, aperture_radius=2.0))
    m = 5
    rms = float(np.sqrt(np.mean((out - lf.central_view)[:, m:-m, m:-m] ** 2)))

    sweep = np.linspace(-2.0, 2.0, 17)
    sharpness = [variance_of_laplacian(
        refocus(lf, RefocusParams(focus_disparity=float(s), aperture_radius=2.0))[:, m:-m, m:-m])
        for s in sweep]
    peak_at = float(sweep[int(np.argmax(sharpness))])
    ok = rms < 1e-3 and abs(peak_at - 1.0) < 0.26
    report("rendering-refocus", ok,
           f"true-disparity refocus RMS {rms:.2e} (< 1e-3); sharpness peak at s={peak_at:+.2f} "
           f"(true +1.00)")


# -- criterion 8: format & CLI ---------------------------------------------------------


def test_format_and_cli_pipeline(tmp_path):
    # container round trip is bit-exact
    bundle = render_scene(dataset_scene_specs(9, 1)[0])
    write_sequence(bundle, tmp_path / "seq")
    write_sequence(read_sequence(tmp_path / "seq"), tmp_path / "seq2")
    files_equal = all(
        (tmp_path / "seq" / f.name).read_bytes() == f.read_bytes()
        for f in sorted((tmp_path / "seq2").glob("*.bin"))
    )
    # checkpoint round trip is bit-exact
    ck = {"a/b": np.random.default_rng(0).normal(size=(3, 4)).astype(np.float32)}
    save_checkpoint(tmp_path / "w.lfnn", ck)
    save_checkpoint(tmp_path / "w2.lfnn", load_checkpoint(tmp_path / "w.lfnn"))
    ck_equal = (tmp_path / "w.lfnn").read_bytes() == (tmp_path / "w2.lfnn").read_bytes()

    # synth -> train -> infer -> eval from the single pipeline script
    script = Path(__file__).resolve().parent.parent / "scripts" / "run_pipeline.sh"
    env = {"OUT": str(tmp_path / "pipe"), "SCENES": "2", "ITERS": "40",
           "PATH": "/usr/bin:/bin:/usr/local/bin"}
    proc = subprocess.run(["bash", str(script)], env=env, capture_output=True, text=True,
                          cwd=tmp_path, timeout=1800)
    script_ok = proc.returncode == 0 and (tmp_path / "pipe" / "report.json").exists()
    if not script_ok:
        print(proc.stdout[-2000:], proc.stderr[-2000:])
    ok = files_equal and ck_equal and script_ok
    report("format-and-cli", ok,
           f"LFV1 round trip bit-exact: {files_equal}; LFNN round trip bit-exact: {ck_equal}; "
           f"pipeline script green: {script_ok}")
