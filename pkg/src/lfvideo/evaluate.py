"""Synthesis quality evaluation against ground truth, with the two reference
baselines: copying the nearest keyframe's view, and the warped current frame
alone (no appearance fusion)."""

from __future__ import annotations

import numpy as np

from .lightfield import AngularCoord
from .metrics import psnr, ssim
from .synthdata import SequenceBundle
from .warp import sample_image_np


def corner_views(angular_resolution: int) -> list[AngularCoord]:
    c = (angular_resolution - 1) // 2
    return [AngularCoord(u, v) for u in (-c, c) for v in (-c, c)]


def _warped_central_baseline(video_frame: np.ndarray, d_t: np.ndarray,
                             u: AngularCoord) -> np.ndarray:
    h, w = d_t.shape
    gy, gx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    return sample_image_np(video_frame, gx - u.u * d_t, gy - u.v * d_t)


def evaluate_synthesis(pred: SequenceBundle, gt: SequenceBundle,
                       views: list[AngularCoord] | None = None) -> dict:
    """Mean PSNR/SSIM of the synthesized in-between views, plus baselines.

    Frames evaluated: every non-keyframe frame that has both a prediction and
    ground truth. The warped-central baseline needs the per-frame disparity
    maps the inference run stores in the prediction bundle.
    """
    views = views or corner_views(gt.angular_resolution)
    key_set = set(pred.keyframe_indices()) & set(gt.keyframe_indices())
    rows = []
    for t in range(min(pred.frames, gt.frames)):
        if pred.light_fields[t] is None or gt.light_fields[t] is None or t in key_set:
            continue
        gt_lf = gt.light_fields[t]
        pred_lf = pred.light_fields[t]
        keys = sorted(gt.keyframe_indices())
        nearest_key = min(keys, key=lambda k: (abs(k - t), k))
        d_t = pred.extras.get(f"disp/{t:05d}")
        for u in views:
            target = np.asarray(gt_lf.view(u), dtype=np.float64)
            row = {
                "t": t, "u": u.u, "v": u.v,
                "psnr": psnr(np.asarray(pred_lf.view(u), dtype=np.float64), target),
                "ssim": ssim(np.asarray(pred_lf.view(u), dtype=np.float64), target),
                "copy_psnr": psnr(np.asarray(gt.light_fields[nearest_key].view(u),
                                             dtype=np.float64), target),
                "copy_ssim": ssim(np.asarray(gt.light_fields[nearest_key].view(u),
                                             dtype=np.float64), target),
            }
            if d_t is not None:
                warped = _warped_central_baseline(
                    np.asarray(gt.video[t].image, dtype=np.float64),
                    np.asarray(d_t, dtype=np.float64), u)
                row["warp_psnr"] = psnr(warped, target)
                row["warp_ssim"] = ssim(warped, target)
            rows.append(row)
    if not rows:
        raise ValueError("no overlapping in-between frames to evaluate")

    def mean(key):
        vals = [r[key] for r in rows if key in r]
        return float(np.mean(vals)) if vals else None

    return {
        "rows": rows,
        "mean_psnr": mean("psnr"),
        "mean_ssim": mean("ssim"),
        "copy_psnr": mean("copy_psnr"),
        "copy_ssim": mean("copy_ssim"),
        "warp_psnr": mean("warp_psnr"),
        "warp_ssim": mean("warp_ssim"),
    }


def evaluate_datasets(preds: list[SequenceBundle], gts: list[SequenceBundle],
                      views: list[AngularCoord] | None = None) -> dict:
    """Aggregate evaluate_synthesis over paired sequences."""
    reports = [evaluate_synthesis(p, g, views) for p, g in zip(preds, gts)]
    out = {"sequences": reports}
    for key in ("mean_psnr", "mean_ssim", "copy_psnr", "copy_ssim", "warp_psnr", "warp_ssim"):
        vals = [r[key] for r in reports if r[key] is not None]
        out[key] = float(np.mean(vals)) if vals else None
    return out
