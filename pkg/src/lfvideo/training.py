"""Dataset sampling, stage-wise and joint training, and sequence inference.

Training follows the two-phase recipe: each component first trains on its own
reconstruction loss (later stages consume frozen upstream outputs), then joint
training lets every network move while minimizing the final synthesis loss.
All randomness is derived statelessly from (seed, stage, iteration), so runs
are reproducible and resumable.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import tensor as T
from .config import PipelineConfig
from .disparity import disparity_loss, estimate_disparity, plane_sweep_features
from .flow import estimate_flow, flow_loss, keyframe_flows
from .lightfield import AngularCoord, LightFieldFrame, TemporalPosition, VideoFrame
from .nn import AdamState, adam_step
from .synthdata import SequenceBundle
from .synthesis import (
    FrameContext,
    PipelineNets,
    borrow_disparity,
    estimate_target_disparity,
    synthesize_view,
)
from .tensor import Tensor
from .warp import sample_image_np

STAGE_ORDER = ("disparity", "flow", "warp", "appearance", "joint")


@dataclass
class TrainConfig:
    """One stage's training run. ``crop`` is ignored by stages that need whole
    frames (flow, joint); scale augmentation is restricted per stage so frozen
    caches and pyramid invariants stay valid."""

    stage: str = "disparity"
    iterations: int = 500
    batch_size: int = 4
    crop: int = 96
    seed: int = 0
    learning_rate: float = 1e-4
    scale_range: tuple[float, float] = (0.9, 1.1)
    channel_swap: bool = True
    flow_gap_max: int = 10
    probe_interval: int = 100
    lr_decay_points: tuple[float, ...] = (0.65, 0.88)
    lr_decay: float = 0.3
    run_dir: str = "run"

    def __post_init__(self):
        if self.stage not in STAGE_ORDER:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.batch_size < 1 or self.iterations < 0:
            raise ValueError("bad batch size / iteration count")


@dataclass
class TrainingSample:
    """One draw: a keyframe pair, five sampled views, one in-between frame,
    one target view, a crop window, and the augmentation parameters."""

    scene_index: int
    keyframe_pair: tuple[int, int]
    views: list[AngularCoord]
    t: int
    target_view: AngularCoord
    window: tuple[int, int, int, int]
    scale: float
    channel_perm: tuple[int, int, int]
    flow_pair: tuple[int, int]
    keyframe_choice: int  # which end the disparity stage trains on
    # when set, the flow stage trains on (frame, bilinearly shifted frame)
    # instead of a real frame pair: teaches the near-aligned regime
    flow_shift: tuple[float, float] | None = None


# -- sampling -------------------------------------------------------------------


def _segment_pairs(bundle: SequenceBundle) -> list[tuple[int, int]]:
    keys = bundle.keyframe_indices()
    return [(a, b) for a, b in zip(keys, keys[1:]) if b - a >= 2]


def _resize_np(img: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    _, h, w = img.shape
    ht, wt = size
    ys = (np.arange(ht, dtype=np.float64) + 0.5) * (h / ht) - 0.5
    xs = (np.arange(wt, dtype=np.float64) + 0.5) * (w / wt) - 0.5
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return sample_image_np(img, gx, gy)


def _stage_scale_range(cfg: TrainConfig) -> tuple[float, float]:
    lo, hi = cfg.scale_range
    if cfg.stage in ("flow", "joint"):
        lo = max(lo, 1.0)  # pyramid needs the full frame size
    if cfg.stage in ("warp", "appearance"):
        lo = hi = 1.0  # frozen per-scene caches are unscaled
    return lo, hi


def sample_batch(dataset: list[SequenceBundle], cfg: TrainConfig,
                 rng: np.random.Generator) -> list[TrainingSample]:
    """Draw a reproducible batch; crops, view subsets, t, and the target view
    are uniform, and augmentation parameters apply to a whole sample."""
    if not dataset:
        raise ValueError("empty dataset")
    samples = []
    lo, hi = _stage_scale_range(cfg)
    for _ in range(cfg.batch_size):
        scene = int(rng.integers(len(dataset)))
        bundle = dataset[scene]
        pairs = _segment_pairs(bundle)
        if not pairs:
            raise ValueError(f"scene {scene} has no keyframe segment with in-between frames")
        k0, k1 = pairs[int(rng.integers(len(pairs)))]
        t = int(rng.integers(k0 + 1, k1))
        a = bundle.angular_resolution
        c = (a - 1) // 2
        non_central = [AngularCoord(u, v) for v in range(-c, c + 1) for u in range(-c, c + 1)
                       if (u, v) != (0, 0)]
        idx = rng.choice(len(non_central), size=min(4, len(non_central)), replace=False)
        views = [AngularCoord(0, 0)] + [non_central[i] for i in idx]
        if cfg.stage == "warp":
            target = non_central[int(rng.integers(len(non_central)))]
        else:
            all_views = [AngularCoord(0, 0)] + non_central
            target = all_views[int(rng.integers(len(all_views)))]

        scale = float(rng.uniform(lo, hi))
        h, w = bundle.spatial_dims
        hs, ws = int(round(h * scale)), int(round(w * scale))
        if cfg.stage in ("flow", "joint"):
            window = (0, 0, ws, hs)
        else:
            if cfg.crop > min(hs, ws):
                raise ValueError(
                    f"crop {cfg.crop} larger than the (scaled) image {hs}x{ws}"
                )
            crop = cfg.crop
            x0 = int(rng.integers(0, ws - crop + 1))
            y0 = int(rng.integers(0, hs - crop + 1))
            window = (x0, y0, crop, crop)

        perm = tuple(rng.permutation(3)) if cfg.channel_swap else (0, 1, 2)

        gap_hi = min(cfg.flow_gap_max, bundle.frames - 1)
        flow_shift = None
        draw = rng.random()
        if draw < 0.2:
            # virtual translation pair on one frame
            fa = fb = int(rng.integers(bundle.frames))
            flow_shift = (float(rng.uniform(-2.0, 2.0)), float(rng.uniform(-2.0, 2.0)))
        else:
            if draw < 0.25:
                gap = 0
            elif draw < 0.62:
                gap = int(rng.integers(1, min(3, gap_hi + 1)))
            else:
                gap = int(rng.integers(1, gap_hi + 1))
            fa = int(rng.integers(0, bundle.frames - gap))
            fb = fa + gap
            if rng.random() < 0.5:
                fa, fb = fb, fa

        samples.append(TrainingSample(
            scene_index=scene, keyframe_pair=(k0, k1), views=views, t=t,
            target_view=target, window=window, scale=scale,
            channel_perm=(int(perm[0]), int(perm[1]), int(perm[2])),
            flow_pair=(fa, fb), keyframe_choice=int(rng.integers(2)),
            flow_shift=flow_shift,
        ))
    return samples


def _prep(img: np.ndarray, sample: TrainingSample) -> np.ndarray:
    """Apply the sample's augmentations (channel swap, scale) to an image."""
    out = np.asarray(img, dtype=np.float64)[list(sample.channel_perm)]
    if sample.scale != 1.0:
        h, w = out.shape[1:]
        out = _resize_np(out, (int(round(h * sample.scale)), int(round(w * sample.scale))))
    return out


def _crop(img: np.ndarray, window) -> np.ndarray:
    x0, y0, w, h = window
    return img[..., y0:y0 + h, x0:x0 + w]


# -- frozen per-scene caches -------------------------------------------------------


@dataclass
class SegmentCache:
    """Frozen upstream outputs for one keyframe segment of one scene."""

    k0: int
    k1: int
    d0: np.ndarray
    dT: np.ndarray
    from_first: list[np.ndarray]  # index by t - k0
    from_last: list[np.ndarray]
    d0_borrowed: dict[int, np.ndarray] = field(default_factory=dict)
    dT_borrowed: dict[int, np.ndarray] = field(default_factory=dict)
    d_t: dict[int, np.ndarray] = field(default_factory=dict)


def build_segment_cache(bundle: SequenceBundle, nets: PipelineNets,
                        with_target_disparity: bool) -> dict[tuple[int, int], SegmentCache]:
    """Run the frozen upstream networks over a scene: keyframe disparities
    (all views), cascaded neighbor flows, borrowed disparities, and (for the
    appearance stage) the fused target disparity per frame."""
    caches = {}
    for k0, k1 in _segment_pairs(bundle):
        lf0, lfT = bundle.light_fields[k0], bundle.light_fields[k1]
        d0 = estimate_disparity(lf0, nets.disparity).values
        dT = estimate_disparity(lfT, nets.disparity).values
        frames = [bundle.video[t].image.astype(np.float64) for t in range(k0, k1 + 1)]
        from_first, from_last = keyframe_flows(frames, nets.flow)
        cache = SegmentCache(k0, k1, d0, dT,
                             [f.values for f in from_first],
                             [f.values for f in from_last])
        for t in range(k0 + 1, k1):
            rel = t - k0
            d0_b = borrow_disparity(d0, cache.from_first[rel]).data
            dT_b = borrow_disparity(dT, cache.from_last[rel]).data
            cache.d0_borrowed[t] = d0_b
            cache.dT_borrowed[t] = dT_b
            if with_target_disparity:
                lam = rel / (k1 - k0)
                d_t = estimate_target_disparity(d0_b, dT_b, cache.from_first[rel],
                                                cache.from_last[rel], lam, nets.warp)
                cache.d_t[t] = d_t.data
        caches[(k0, k1)] = cache
    return caches


# -- per-stage losses ----------------------------------------------------------------


def _disparity_sample_loss(nets: PipelineNets, bundle: SequenceBundle,
                           sample: TrainingSample) -> Tensor:
    k = sample.keyframe_pair[sample.keyframe_choice]
    lf = bundle.light_fields[k]
    views = [(u, _prep(lf.view(u), sample)) for u in sample.views]
    feats = plane_sweep_features(views, nets.disparity.sweep, window=sample.window)
    d = nets.disparity(feats)
    return disparity_loss(views, d, window=sample.window)


def _flow_sample_loss(nets: PipelineNets, bundle: SequenceBundle,
                      sample: TrainingSample) -> Tensor:
    from .flow import contrast_normalize, virtual_translation_pair

    fa, fb = sample.flow_pair
    if sample.flow_shift is not None:
        frame_a, frame_b = virtual_translation_pair(
            _prep(bundle.video[fa].image, sample), *sample.flow_shift)
    else:
        frame_a = _prep(bundle.video[fa].image, sample)
        frame_b = _prep(bundle.video[fb].image, sample)
    total = None
    # the finest-level raw term is the actual objective; the per-level
    # contrast-equalized terms supervise every level of the hierarchy with a
    # texture-independent error scale (still purely self-supervised)
    levels = nets.flow.estimate_levels(frame_a, frame_b)
    for li, (f_l, a_l, b_l) in enumerate(levels):
        term = flow_loss(contrast_normalize(a_l), contrast_normalize(b_l), f_l) * 0.02
        if li == len(levels) - 1:
            term = term + flow_loss(a_l, b_l, f_l)
        total = term if total is None else total + term
    return total


def _warp_sample_loss(nets: PipelineNets, bundle: SequenceBundle,
                      sample: TrainingSample, caches: dict) -> Tensor:
    cache: SegmentCache = caches[sample.scene_index][sample.keyframe_pair]
    t = sample.t
    k0, k1 = sample.keyframe_pair
    rel = t - k0
    lam = rel / (k1 - k0)
    u = sample.target_view
    window = sample.window
    d0_b = _crop(cache.d0_borrowed[t], window)
    dT_b = _crop(cache.dT_borrowed[t], window)
    f0 = _crop(cache.from_first[rel], window)
    fT = _crop(cache.from_last[rel], window)
    d_t = estimate_target_disparity(d0_b, dT_b, f0, fT, lam, nets.warp,
                                    u=u if nets.cfg.warp_net_uses_view else None)
    I_t = _prep(bundle.video[t].image, sample)
    x0, y0, ww, wh = window
    gy, gx = np.meshgrid(np.arange(y0, y0 + wh, dtype=np.float64),
                         np.arange(x0, x0 + ww, dtype=np.float64), indexing="ij")
    from .tensor import bilinear_sample

    warped = bilinear_sample(Tensor(I_t), Tensor(gx) - float(u.u) * d_t,
                             Tensor(gy) - float(u.v) * d_t)
    target = Tensor(_crop(_prep(bundle.light_fields[t].view(u), sample), window))
    return T.tmean(T.tsum(T.square(warped - target), axis=0))


def _appearance_context(nets, bundle, sample, caches, live=False):
    cache: SegmentCache = caches[sample.scene_index][sample.keyframe_pair]
    t = sample.t
    k0, k1 = sample.keyframe_pair
    rel = t - k0
    return FrameContext(
        I_t=_prep(bundle.video[t].image, sample),
        I_0=_prep(bundle.video[k0].image, sample),
        I_T=_prep(bundle.video[k1].image, sample),
        d0=cache.d0, dT=cache.dT,
        d0_borrowed=cache.d0_borrowed[t], dT_borrowed=cache.dT_borrowed[t],
        f_0t=cache.from_first[rel], f_Tt=cache.from_last[rel],
        lam=rel / (k1 - k0), d_t=Tensor(_crop(cache.d_t[t], sample.window)),
    )


def _appearance_sample_loss(nets: PipelineNets, bundle: SequenceBundle,
                            sample: TrainingSample, caches: dict) -> Tensor:
    ctx = _appearance_context(nets, bundle, sample, caches)
    u = sample.target_view
    t = sample.t
    L0_u = _prep(bundle.light_fields[sample.keyframe_pair[0]].view(u), sample)
    LT_u = _prep(bundle.light_fields[sample.keyframe_pair[1]].view(u), sample)
    out = synthesize_view(ctx, L0_u, LT_u, u, nets.appearance,
                          window=sample.window, clamp_output=False)
    target = Tensor(_crop(_prep(bundle.light_fields[t].view(u), sample), sample.window))
    return T.tmean(T.tsum(T.square(out - target), axis=0))


def _joint_sample_loss(nets: PipelineNets, bundle: SequenceBundle,
                       sample: TrainingSample) -> Tensor:
    k0, k1 = sample.keyframe_pair
    t = sample.t
    u = sample.target_view
    lf0, lfT = bundle.light_fields[k0], bundle.light_fields[k1]
    # memory-lean angular crop: the sampled five views feed the disparity nets
    views0 = [(v, _prep(lf0.view(v), sample)) for v in sample.views]
    viewsT = [(v, _prep(lfT.view(v), sample)) for v in sample.views]
    d0 = nets.disparity(plane_sweep_features(views0, nets.disparity.sweep))
    dT = nets.disparity(plane_sweep_features(viewsT, nets.disparity.sweep))
    I_0 = views0[0][1]
    I_T = viewsT[0][1]
    I_t = _prep(bundle.video[t].image, sample)
    # direct keyframe-to-frame flow estimates keep the joint graph tractable
    f_0t = nets.flow.estimate(I_0, I_t)
    f_Tt = nets.flow.estimate(I_T, I_t)
    d0_b = borrow_disparity(d0, f_0t)
    dT_b = borrow_disparity(dT, f_Tt)
    lam = (t - k0) / (k1 - k0)
    d_t = estimate_target_disparity(d0_b, dT_b, f_0t, f_Tt, lam, nets.warp,
                                    u=u if nets.cfg.warp_net_uses_view else None)
    ctx = FrameContext(I_t=I_t, I_0=I_0, I_T=I_T, d0=d0, dT=dT,
                       d0_borrowed=d0_b, dT_borrowed=dT_b,
                       f_0t=f_0t, f_Tt=f_Tt, lam=lam, d_t=d_t)
    out = synthesize_view(ctx, _prep(lf0.view(u), sample), _prep(lfT.view(u), sample),
                          u, nets.appearance, clamp_output=False)
    target = Tensor(_prep(bundle.light_fields[t].view(u), sample))
    return T.tmean(T.tsum(T.square(out - target), axis=0))


# -- the training loop -----------------------------------------------------------------


def _stage_index(stage: str) -> int:
    return STAGE_ORDER.index(stage)


def _checkpoint_path(run_dir: Path, stage: str) -> Path:
    return run_dir / f"{stage}.lfnn"


def _save_stage(nets: PipelineNets, adam: AdamState, iteration: int,
                run_dir: Path, stage: str) -> Path:
    extra = {"meta/iteration": np.array(float(iteration), dtype=np.float32),
             "meta/adam_step": np.array(float(adam.step), dtype=np.float32)}
    for name, m in adam.m.items():
        extra[f"adam/m/{name}"] = m
        extra[f"adam/v/{name}"] = adam.v[name]
    path = _checkpoint_path(run_dir, stage)
    nets.save(path, extra=extra)
    return path


def _restore_adam(blob: dict, params: dict, adam: AdamState) -> None:
    adam.step = int(float(blob.get("meta/adam_step", np.zeros(()))))
    for name in params:
        if f"adam/m/{name}" in blob:
            adam.m[name] = blob[f"adam/m/{name}"].astype(np.float64)
            adam.v[name] = blob[f"adam/v/{name}"].astype(np.float64)


def train_stage(stage: str, dataset: list[SequenceBundle], cfg: TrainConfig,
                pipeline_cfg: PipelineConfig | None = None,
                resume: bool = False) -> Path:
    """Train one stage, enforcing the stage order via checkpoint files.

    Initializes from the previous stage's checkpoint (fresh MSRA weights for
    the first stage), writes ``<stage>.lfnn``, a config snapshot, and appends
    to the loss log. Returns the checkpoint path.
    """
    if stage != cfg.stage:
        cfg = replace(cfg, stage=stage)
    pipeline_cfg = pipeline_cfg or PipelineConfig()
    run_dir = Path(cfg.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    nets = PipelineNets(pipeline_cfg)
    start_iter = 0
    adam = AdamState(learning_rate=cfg.learning_rate)
    stage_idx = _stage_index(stage)
    own_path = _checkpoint_path(run_dir, stage)
    if resume and own_path.exists():
        blob = nets.load(own_path)
        start_iter = int(float(blob.get("meta/iteration", np.zeros(()))))
        _restore_adam(blob, nets.stage_parameters(stage), adam)
    elif stage_idx == 0:
        nets.init(cfg.seed)
    else:
        prev = STAGE_ORDER[stage_idx - 1]
        prev_path = _checkpoint_path(run_dir, prev)
        if not prev_path.exists():
            raise FileNotFoundError(
                f"stage '{stage}' requires the '{prev}' checkpoint at {prev_path}; "
                f"run the stages in order"
            )
        nets.load(prev_path)
        # the stage's own sub-networks start fresh
        if stage != "joint":
            getattr(nets, stage).init(cfg.seed + 10 * stage_idx)

    snapshot = {"pipeline": json.loads(pipeline_cfg.to_json()),
                "train": {**cfg.__dict__}}
    (run_dir / "config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True, default=str))

    caches = None
    if stage in ("warp", "appearance"):
        caches = [build_segment_cache(b, nets, with_target_disparity=(stage == "appearance"))
                  for b in dataset]

    def batch_loss(samples) -> Tensor:
        total = None
        for s in samples:
            if stage == "disparity":
                term = _disparity_sample_loss(nets, dataset[s.scene_index], s)
            elif stage == "flow":
                term = _flow_sample_loss(nets, dataset[s.scene_index], s)
            elif stage == "warp":
                term = _warp_sample_loss(nets, dataset[s.scene_index], s, caches)
            elif stage == "appearance":
                term = _appearance_sample_loss(nets, dataset[s.scene_index], s, caches)
            else:
                term = _joint_sample_loss(nets, dataset[s.scene_index], s)
            total = term if total is None else total + term
        return total * (1.0 / len(samples))

    probe_rng = np.random.default_rng([cfg.seed, stage_idx, 10 ** 6])
    probe_batch = sample_batch(dataset, cfg, probe_rng)

    params = nets.stage_parameters(stage)
    decay_iters = {int(cfg.iterations * frac) for frac in cfg.lr_decay_points}
    log_path = run_dir / "loss_log.csv"
    new_log = not log_path.exists()
    t_start = time.time()
    with open(log_path, "a", newline="") as log_file:
        log = csv.writer(log_file)
        if new_log:
            log.writerow(["iteration", "stage", "loss"])
        with T.finite_checks(False):
            probe_losses: list[tuple[int, float]] = []
            for it in range(start_iter, cfg.iterations):
                if it in decay_iters:
                    adam.learning_rate *= cfg.lr_decay
                if it % cfg.probe_interval == 0 or it == cfg.iterations - 1:
                    probe_losses.append((it, batch_loss(probe_batch).item()))
                rng = np.random.default_rng([cfg.seed, stage_idx, it])
                loss = batch_loss(sample_batch(dataset, cfg, rng))
                value = loss.item()
                if not np.isfinite(value):
                    raise RuntimeError(
                        f"{stage} training diverged at iteration {it}: loss={value}"
                    )
                log.writerow([it, stage, f"{value:.8f}"])
                for p in params.values():
                    p.zero_grad()
                loss.backward()
                grads = {k: p.grad for k, p in params.items()}
                adam_step(params, grads, adam)
            final_probe = batch_loss(probe_batch).item()
            probe_losses.append((cfg.iterations, final_probe))

    probe_path = run_dir / f"probe_{stage}.json"
    probe_path.write_text(json.dumps({
        "stage": stage,
        "probe": probe_losses,
        "wall_seconds": time.time() - t_start,
    }, indent=2))
    if probe_losses and probe_losses[-1][1] > probe_losses[0][1] and cfg.iterations > start_iter:
        # component stages must end below where they started; joint starts
        # from converged weights and micro-runs are still inside the ADAM
        # warmup bounce, so those only warn
        msg = (f"{stage} probe loss increased: "
               f"{probe_losses[0][1]:.6f} -> {probe_losses[-1][1]:.6f}")
        if stage == "joint" or cfg.iterations - start_iter < 50:
            print(f"warning: {msg}")
        else:
            raise RuntimeError(msg)
    return _save_stage(nets, adam, cfg.iterations, run_dir, stage)


def train_joint(dataset: list[SequenceBundle], cfg: TrainConfig,
                pipeline_cfg: PipelineConfig | None = None,
                resume: bool = False) -> Path:
    """Joint end-to-end training of all four networks, initialized from the
    stage-wise checkpoints (all must exist)."""
    run_dir = Path(cfg.run_dir)
    for prereq in STAGE_ORDER[:-1]:
        if not _checkpoint_path(run_dir, prereq).exists():
            raise FileNotFoundError(f"joint training requires the '{prereq}' checkpoint")
    return train_stage("joint", dataset, cfg, pipeline_cfg, resume=resume)


# -- inference ---------------------------------------------------------------------------


def infer_sequence(keyframes: list[LightFieldFrame], video: list[VideoFrame],
                   nets: PipelineNets) -> SequenceBundle:
    """Synthesize every in-between frame and every view between consecutive
    keyframes; keyframes pass through verbatim. The estimated disparities are
    stored in the output bundle's extras."""
    if not keyframes:
        raise ValueError("need at least one keyframe")
    key_idx = [lf.frame_index for lf in keyframes]
    if any(b <= a for a, b in zip(key_idx, key_idx[1:])):
        raise ValueError(f"keyframe indices must strictly increase, got {key_idx}")
    video_idx = [vf.frame_index for vf in video]
    if video_idx != list(range(len(video))):
        raise ValueError("video must cover frames 0..N-1 contiguously")
    if key_idx[0] != 0 or key_idx[-1] >= len(video):
        raise ValueError("keyframes must start at frame 0 and lie within the video")

    a = keyframes[0].angular_resolution
    c = (a - 1) // 2
    h, w = keyframes[0].spatial_dims
    out_lfs: list[LightFieldFrame | None] = [None] * len(video)
    extras: dict[str, np.ndarray] = {}

    disp_cache: dict[int, np.ndarray] = {}

    def keyframe_disparity(lf: LightFieldFrame) -> np.ndarray:
        if lf.frame_index not in disp_cache:
            d = estimate_disparity(lf, nets.disparity).values
            disp_cache[lf.frame_index] = d
            extras[f"disp/{lf.frame_index:05d}"] = d.astype(np.float32)
        return disp_cache[lf.frame_index]

    for lf in keyframes:
        out_lfs[lf.frame_index] = lf

    for lf0, lfT in zip(keyframes, keyframes[1:]):
        k0, k1 = lf0.frame_index, lfT.frame_index
        seg_len = k1 - k0
        if seg_len < 2:
            continue  # adjacent keyframes: nothing to synthesize
        d0 = keyframe_disparity(lf0)
        dT = keyframe_disparity(lfT)
        frames = [np.asarray(video[t].image, dtype=d0.dtype) for t in range(k0, k1 + 1)]
        from_first, from_last = keyframe_flows(frames, nets.flow)
        for t in range(k0 + 1, k1):
            rel = t - k0
            lam = TemporalPosition.from_indices(rel, seg_len)
            f0 = from_first[rel].values
            fT = from_last[rel].values
            d0_b = borrow_disparity(d0, f0).data
            dT_b = borrow_disparity(dT, fT).data
            views = np.zeros((a, a, 3, h, w), dtype=np.float32)
            d_t_shared: np.ndarray | None = None
            for vi in range(a):
                for ui in range(a):
                    u = AngularCoord(ui - c, vi - c)
                    if nets.cfg.warp_net_uses_view or d_t_shared is None:
                        d_t = estimate_target_disparity(
                            d0_b, dT_b, f0, fT, lam.value, nets.warp,
                            u=u if nets.cfg.warp_net_uses_view else None).data
                        if not nets.cfg.warp_net_uses_view:
                            d_t_shared = d_t
                    else:
                        d_t = d_t_shared
                    ctx = FrameContext(I_t=frames[rel], I_0=frames[0], I_T=frames[seg_len],
                                       d0=d0, dT=dT, d0_borrowed=d0_b, dT_borrowed=dT_b,
                                       f_0t=f0, f_Tt=fT, lam=lam.value, d_t=Tensor(d_t))
                    out = synthesize_view(ctx, np.asarray(lf0.view(u), dtype=d0.dtype),
                                          np.asarray(lfT.view(u), dtype=d0.dtype),
                                          u, nets.appearance)
                    views[vi, ui] = out.data.astype(np.float32)
            out_lfs[t] = LightFieldFrame(views, frame_index=t)
            extras[f"disp/{t:05d}"] = (d_t_shared if d_t_shared is not None else d_t).astype(np.float32)

    strides = [b - a for a, b in zip(key_idx, key_idx[1:])]
    stride = strides[0] if strides else len(video)
    return SequenceBundle(out_lfs, video, keyframe_stride=stride, extras=extras,
                          d_range=(nets.cfg.d_min, nets.cfg.d_max))
