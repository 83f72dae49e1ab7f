"""Plane-sweep features and the keyframe disparity network.

For every disparity hypothesis, all views are shifted toward the central view;
per-pixel mean and variance of the shifted luminances form the network input
(2 channels per hypothesis). The network is trained purely by reconstruction:
a good disparity makes every view warp onto the central view.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .config import PlaneSweepConfig
from .lightfield import AngularCoord, DisparityMap, LightFieldFrame
from .metrics import luminance
from .nn import ConvLayer, ConvNet
from .tensor import Tensor, bilinear_sample
from .warp import sample_image_np

ViewSet = list[tuple[AngularCoord, np.ndarray]]


def _as_view_set(lf, views=None) -> ViewSet:
    if isinstance(lf, LightFieldFrame):
        if views is None:
            return [(u, lf.view(u)) for u in lf.angular_coords()]
        return [(u, lf.view(u)) for u in views]
    return list(lf)


def _window_grid(h, w, window):
    if window is None:
        ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                             np.arange(w, dtype=np.float64), indexing="ij")
        return xs, ys
    x0, y0, ww, wh = window
    ys, xs = np.meshgrid(np.arange(y0, y0 + wh, dtype=np.float64),
                         np.arange(x0, x0 + ww, dtype=np.float64), indexing="ij")
    return xs, ys


def plane_sweep_features(lf, cfg: PlaneSweepConfig, views=None, window=None) -> np.ndarray:
    """Sweep feature stack [2n, H, W]: (mean_1, var_1, ..., mean_n, var_n).

    Mean/variance are taken across views of the shifted luminances; variance
    uses population normalization (divide by the view count). ``views``
    optionally restricts to a subset (training samples a few); ``window``
    computes features on a crop while sampling the full views.
    """
    view_set = _as_view_set(lf, views)
    if not view_set:
        raise ValueError("plane sweep needs at least one view")
    lums = [(u, luminance(img)) for u, img in view_set]
    h_full, w_full = lums[0][1].shape
    xs, ys = _window_grid(h_full, w_full, window)
    n_views = len(lums)
    out = np.empty((2 * cfg.levels,) + xs.shape)
    for k, d in enumerate(cfg.hypotheses()):
        acc = np.zeros(xs.shape)
        acc_sq = np.zeros(xs.shape)
        for u, lum in lums:
            if u.u == 0 and u.v == 0 and window is None:
                shifted = lum
            else:
                shifted = sample_image_np(lum, xs + u.u * d, ys + u.v * d)
            acc += shifted
            acc_sq += shifted * shifted
        mean = acc / n_views
        var = np.maximum(acc_sq / n_views - mean * mean, 0.0)
        out[2 * k] = mean
        out[2 * k + 1] = var
    return out


class DisparityNetwork:
    """4-layer fully convolutional net from sweep features to disparity.

    Kernels 7/5/3/1 with 64/64/32/1 channels; the final activation is a tanh
    scaled onto [d_min, d_max] so warps stay bounded.
    """

    def __init__(self, sweep: PlaneSweepConfig):
        self.sweep = sweep
        self.net = ConvNet("disparity", [
            ConvLayer(2 * sweep.levels, 64, 7),
            ConvLayer(64, 64, 5),
            ConvLayer(64, 32, 3),
            ConvLayer(32, 1, 1, activation="none"),
        ])

    def init(self, seed: int) -> "DisparityNetwork":
        self.net.init(seed)
        return self

    def parameters(self) -> dict[str, Tensor]:
        return self.net.parameters()

    def __call__(self, features) -> Tensor:
        feats = features if isinstance(features, Tensor) else Tensor(np.asarray(features))
        if feats.data.shape[0] != 2 * self.sweep.levels:
            raise ValueError(
                f"expected {2 * self.sweep.levels} feature channels, got {feats.data.shape[0]}"
            )
        raw = self.net(feats)
        mid = 0.5 * (self.sweep.d_min + self.sweep.d_max)
        half = 0.5 * (self.sweep.d_max - self.sweep.d_min)
        out = mid + half * T.tanh(raw)
        _, h, w = out.data.shape
        return T.reshape(out, (h, w))


def estimate_disparity(lf, net: DisparityNetwork, views=None) -> DisparityMap:
    """Central-view disparity of a keyframe (all views unless a subset is given)."""
    feats = plane_sweep_features(lf, net.sweep, views=views)
    d = net(Tensor(feats.astype(np.float32) if _infer_dtype(net) else feats))
    return DisparityMap(d.data, d_max=net.sweep.d_max + 1e-6)


def _infer_dtype(net: DisparityNetwork) -> bool:
    return net.net.layers[0].kernel.data.dtype == np.float32


def disparity_loss(lf, d, views=None, window=None) -> Tensor:
    """Reconstruction cost of a disparity map: how far each view, shifted by
    u*d, lands from the central view. Summed over views, squared error summed
    over RGB, averaged over pixels. Differentiable in ``d``."""
    view_set = _as_view_set(lf, views)
    dt = d if isinstance(d, Tensor) else Tensor(np.asarray(d, dtype=np.float64))
    if isinstance(dt.data, np.ndarray) and dt.data.ndim != 2:
        raise ValueError(f"disparity must be [H,W], got {dt.dims}")
    central = None
    for u, img in view_set:
        if u.u == 0 and u.v == 0:
            central = img
    if central is None:
        raise ValueError("view set must include the central view")
    h_full, w_full = central.shape[1:]
    xs, ys = _window_grid(h_full, w_full, window)
    if window is None:
        target = Tensor(np.asarray(central, dtype=np.float64))
    else:
        x0, y0, ww, wh = window
        target = Tensor(np.asarray(central[:, y0:y0 + wh, x0:x0 + ww], dtype=np.float64))
        if dt.data.shape == (h_full, w_full):
            # crop a full-frame disparity onto the window grid
            dt = T.narrow(T.narrow(dt, 0, y0, wh), 1, x0, ww)
    if dt.data.shape != xs.shape:
        raise ValueError(f"disparity {dt.dims} does not match the loss grid {xs.shape}")

    total = None
    for u, img in view_set:
        if u.u == 0 and u.v == 0:
            continue
        gx = Tensor(xs) + float(u.u) * dt
        gy = Tensor(ys) + float(u.v) * dt
        shifted = bilinear_sample(Tensor(np.asarray(img, dtype=np.float64)), gx, gy)
        term = T.tmean(T.tsum(T.square(shifted - target), axis=0))
        total = term if total is None else total + term
    if total is None:
        # single-view light field: the non-central set is empty
        return Tensor(np.zeros(()))
    return total


def variance_argmin_disparity(lf, cfg: PlaneSweepConfig, views=None) -> DisparityMap:
    """Network-free baseline: per pixel, the hypothesis with minimal variance."""
    feats = plane_sweep_features(lf, cfg, views=views)
    variances = feats[1::2]
    idx = np.argmin(variances, axis=0)
    return DisparityMap(cfg.hypotheses()[idx])
