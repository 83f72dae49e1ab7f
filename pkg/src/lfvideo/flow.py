"""Hierarchical coarse-to-fine temporal flow estimation.

A Gaussian pyramid is built for both frames; at each level the first frame is
warped by the upsampled coarser flow, a small conv net predicts a residual
from (warped frame, target frame, upsampled flow), and the residual refines
the flow. Training minimizes the photometric warp error only; no ground-truth
flow is ever read.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .config import FlowPyramidConfig
from .lightfield import FlowField
from .nn import ConvLayer, ConvNet
from .tensor import Tensor, bilinear_sample, grid_2d, upsample_bilinear
from .warp import sample_image_np


def gaussian_kernel2d(size: int, sigma: float) -> np.ndarray:
    xs = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    k /= k.sum()
    return np.outer(k, k)


def _blur_np(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    kh, kw = kernel.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(img, ((0, 0), (ph, kh - 1 - ph), (pw, kw - 1 - pw)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
    return np.einsum("chwij,ij->chw", win, kernel, optimize=True)


def gaussian_pyramid(image: np.ndarray, cfg: FlowPyramidConfig) -> list[np.ndarray]:
    """Blur-then-decimate pyramid, returned coarse to fine.

    Level dims halve by floor division; raises if the coarsest level would
    fall below the configured minimum.
    """
    image = np.asarray(image)
    if image.ndim != 3:
        raise ValueError(f"expected [C,H,W], got {image.shape}")
    cfg.validate_size(image.shape[1], image.shape[2])
    kernel = gaussian_kernel2d(cfg.blur_size, cfg.blur_sigma)
    levels = [image]
    for _ in range(cfg.levels - 1):
        levels.append(_blur_np(levels[-1], kernel)[:, ::2, ::2])
    levels.reverse()
    return levels


def make_flow_level_net(name: str) -> ConvNet:
    # input: warped I_a (3) + I_b (3) + upsampled flow (2); sized up from the
    # smallest workable stack: 32/32/16 channels measurably underfit sub-pixel
    # matching on desk-scale scenes
    return ConvNet(name, [
        ConvLayer(8, 64, 7),
        ConvLayer(64, 64, 5),
        ConvLayer(64, 32, 3),
        ConvLayer(32, 2, 3, activation="none"),
    ])


def contrast_normalize(img: np.ndarray, window: int = 7, floor: float = 0.04) -> np.ndarray:
    """Remove local mean and divide by local contrast (shared across RGB).

    Conditioning for the level networks only: a sub-pixel matcher must be
    contrast invariant, and a 4-layer ReLU net is bad at learning division.
    The photometric loss always sees the raw images.
    """
    img = np.asarray(img, dtype=np.float64)
    k = np.ones((window, window)) / (window * window)
    kh = window // 2
    pad = np.pad(img, ((0, 0), (kh, kh), (kh, kh)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(pad, (window, window), axis=(1, 2))
    mean = np.einsum("chwij,ij->chw", win, k, optimize=True)
    centered = img - mean
    var = np.einsum("chwij,ij->chw", np.lib.stride_tricks.sliding_window_view(
        np.pad(centered * centered, ((0, 0), (kh, kh), (kh, kh)), mode="edge"),
        (window, window), axis=(1, 2)), k, optimize=True)
    std = np.sqrt(np.maximum(var.mean(axis=0, keepdims=True), 0.0))
    return centered / (std + floor)


class FlowEstimator:
    """Per-level residual networks (index 0 = coarsest) plus pyramid config.

    ``refine_steps`` runs each level's warp-and-refine cycle more than once
    (same weights), which removes most of the systematic undershoot of a
    single residual pass.
    """

    def __init__(self, cfg: FlowPyramidConfig, search_range: float = 16.0,
                 refine_steps: int = 1):
        self.cfg = cfg
        self.search_range = float(search_range)
        self.refine_steps = int(refine_steps)
        self.nets = [make_flow_level_net(f"flow.level{i}") for i in range(cfg.levels)]

    def init(self, seed: int) -> "FlowEstimator":
        for i, net in enumerate(self.nets):
            net.init(seed + 1000 * (i + 1))
        return self

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for net in self.nets:
            params.update(net.parameters())
        return params

    def estimate_levels(self, frame_a: np.ndarray, frame_b: np.ndarray
                        ) -> list[tuple[Tensor, np.ndarray, np.ndarray]]:
        """Run the hierarchy, returning (flow, frame_a, frame_b) per level,
        coarse to fine. The finest entry is the final estimate (clamped)."""
        frame_a = np.asarray(frame_a, dtype=np.float64)
        frame_b = np.asarray(frame_b, dtype=np.float64)
        if frame_a.shape != frame_b.shape:
            raise ValueError(f"frame shape mismatch {frame_a.shape} vs {frame_b.shape}")
        pyr_a = gaussian_pyramid(frame_a, self.cfg)
        pyr_b = gaussian_pyramid(frame_b, self.cfg)
        out: list[tuple[Tensor, np.ndarray, np.ndarray]] = []
        flow: Tensor | None = None
        for level, (a_l, b_l) in enumerate(zip(pyr_a, pyr_b)):
            _, h, w = a_l.shape
            na_l = contrast_normalize(a_l)
            nb_l = contrast_normalize(b_l)
            if flow is None:
                flow = Tensor(np.zeros((2, h, w)))
            else:
                # bilinear upsample, then double: pixels are twice as large
                flow = upsample_bilinear(flow, (h, w)) * 2.0
            gx, gy = grid_2d(h, w)
            for _ in range(max(1, self.refine_steps)):
                fx = T.reshape(T.narrow(flow, 0, 0, 1), (h, w))
                fy = T.reshape(T.narrow(flow, 0, 1, 1), (h, w))
                warped_a = bilinear_sample(Tensor(na_l), Tensor(gx) + fx, Tensor(gy) + fy)
                net_in = T.concat([warped_a, Tensor(nb_l), flow * (1.0 / self.search_range)], axis=0)
                flow = flow + self.nets[level](net_in)
            if level == len(pyr_a) - 1:
                flow = T.clamp(flow, -self.search_range, self.search_range)
            out.append((flow, a_l, b_l))
        return out

    def estimate(self, frame_a: np.ndarray, frame_b: np.ndarray) -> Tensor:
        """Graph-building flow estimate f with frame_b(x) = frame_a(x + f(x))."""
        return self.estimate_levels(frame_a, frame_b)[-1][0]


def estimate_flow(frame_a: np.ndarray, frame_b: np.ndarray, estimator: FlowEstimator) -> FlowField:
    """Inference entry point: detached flow field on frame_b's grid."""
    return FlowField(estimator.estimate(frame_a, frame_b).data,
                     max_magnitude=estimator.search_range)


def flow_loss(frame_a, frame_b, flow) -> Tensor:
    """Photometric warp error: mean over pixels of the squared RGB distance
    between frame_b and frame_a warped by the flow. Differentiable in flow."""
    from .warp import warp_with_flow

    warped = warp_with_flow(np.asarray(frame_a, dtype=np.float64), flow)
    target = Tensor(np.asarray(frame_b, dtype=np.float64))
    return T.tmean(T.tsum(T.square(warped - target), axis=0))


def virtual_translation_pair(frame: np.ndarray, dx: float, dy: float
                             ) -> tuple[np.ndarray, np.ndarray]:
    """A self-supervised training pair: the frame and a bilinearly shifted
    copy. Teaches the estimator the near-aligned regime (sub-pixel shifts with
    interpolation asymmetry) that refinement and cascading rely on."""
    frame = np.asarray(frame, dtype=np.float64)
    _, h, w = frame.shape
    gy, gx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    shifted = sample_image_np(frame, gx + dx, gy + dy)
    # shifted(x) = frame(x + d): warping "frame" onto "shifted" needs flow d
    return frame, shifted


def keyframe_flows(frames: list[np.ndarray], estimator: FlowEstimator
                   ) -> tuple[list[FlowField], list[FlowField]]:
    """Flows from both keyframes of a segment to every frame.

    ``frames`` is the 2D video segment I^0..I^T. Neighbor flows are estimated
    for each adjacent pair (both directions) and composed by cascading.
    Returns (from_first, from_last): from_first[t] warps I^0 onto frame t,
    from_last[t] warps I^T onto frame t; the self-flows are zero.
    """
    if len(frames) < 1:
        raise ValueError("empty segment")
    n = len(frames)
    h, w = np.asarray(frames[0]).shape[1:]
    zero = FlowField.zero(h, w)

    from .warp import cascade_flow

    from_first: list[FlowField] = [zero]
    for t in range(1, n):
        step = estimate_flow(frames[t - 1], frames[t], estimator)  # (t-1)->t
        from_first.append(cascade_flow(from_first[t - 1], step) if t > 1 else step)

    from_last: list[FlowField | None] = [None] * n
    from_last[n - 1] = zero
    for t in range(n - 2, -1, -1):
        step = estimate_flow(frames[t + 1], frames[t], estimator)  # (t+1)->t
        from_last[t] = cascade_flow(from_last[t + 1], step) if t < n - 2 else step
    return from_first, from_last
