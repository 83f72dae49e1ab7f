"""Disparity propagation to in-between frames and target-view synthesis.

The keyframe disparities are "borrowed" along the temporal flows, fused by the
warp-flow network (conditioned on the temporal position) into the frame's
disparity, and the five warped candidate images plus all guidance channels are
fused by the appearance network into the final view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import PipelineConfig
from .disparity import DisparityNetwork
from .flow import FlowEstimator
from .lightfield import AngularCoord, DisparityMap, TemporalPosition
from .nn import ConvLayer, ConvNet, load_checkpoint, save_checkpoint
from .tensor import Tensor, bilinear_sample, grid_2d
from .warp import warp_five


def _field(x) -> Tensor:
    if isinstance(x, DisparityMap):
        x = x.values
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if t.data.ndim != 2:
        raise ValueError(f"expected [H,W] field, got {t.dims}")
    return t


def _flow(x) -> Tensor:
    from .lightfield import FlowField

    if isinstance(x, FlowField):
        x = x.values
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if t.data.ndim != 3 or t.data.shape[0] != 2:
        raise ValueError(f"expected [2,H,W] flow, got {t.dims}")
    return t


def borrow_disparity(d_key, f_key_to_t) -> Tensor:
    """Transport a keyframe disparity to frame t: d_t(x) = d_key(x + f(x))."""
    d = _field(d_key)
    f = _flow(f_key_to_t)
    h, w = d.data.shape
    if f.data.shape[1:] != (h, w):
        raise ValueError(f"flow grid {f.dims} does not match disparity {d.dims}")
    gx, gy = grid_2d(h, w)
    fx = T.reshape(T.narrow(f, 0, 0, 1), (h, w))
    fy = T.reshape(T.narrow(f, 0, 1, 1), (h, w))
    out = bilinear_sample(T.reshape(d, (1, h, w)), Tensor(gx) + fx, Tensor(gy) + fy)
    return T.reshape(out, (h, w))


class WarpFlowNetwork:
    """Fuses the two borrowed disparities (+ temporal position) into the
    frame's disparity; output tanh-bounded to [d_min, d_max]."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        in_ch = 9 if cfg.warp_net_uses_view else 7
        self.net = ConvNet("warpflow", [
            ConvLayer(in_ch, 64, 5),
            ConvLayer(64, 64, 3),
            ConvLayer(64, 32, 3),
            ConvLayer(32, 1, 1, activation="none"),
        ])

    def init(self, seed: int) -> "WarpFlowNetwork":
        self.net.init(seed)
        return self

    def parameters(self) -> dict[str, Tensor]:
        return self.net.parameters()


def estimate_target_disparity(d0_borrowed, dT_borrowed, f_0t, f_Tt,
                              lam: TemporalPosition | float, net: WarpFlowNetwork,
                              u: AngularCoord | None = None) -> Tensor:
    """The in-between frame's disparity from borrowed keyframe disparities.

    One map per frame, reused for every target view, unless the network was
    configured to take the view planes as input (then ``u`` is required).
    """
    cfg = net.cfg
    d0 = _field(d0_borrowed)
    dT = _field(dT_borrowed)
    f0 = _flow(f_0t)
    fT = _flow(f_Tt)
    lam_value = lam.value if isinstance(lam, TemporalPosition) else float(lam)
    if not 0.0 <= lam_value <= 1.0:
        raise ValueError(f"temporal position {lam_value} outside [0,1]")
    h, w = d0.data.shape
    d_scale = 1.0 / max(abs(cfg.d_min), abs(cfg.d_max))
    f_scale = 1.0 / cfg.flow_search_range
    lam_plane = Tensor(np.full((1, h, w), lam_value))
    channels = [
        T.reshape(d0, (1, h, w)) * d_scale,
        T.reshape(dT, (1, h, w)) * d_scale,
        f0 * f_scale,
        fT * f_scale,
        lam_plane,
    ]
    if cfg.warp_net_uses_view:
        if u is None:
            raise ValueError("this warp-flow network needs the target view u")
        norm = cfg.max_angular_offset or 1
        channels.append(Tensor(np.full((1, h, w), u.u / norm)))
        channels.append(Tensor(np.full((1, h, w), u.v / norm)))
    raw = net.net(T.concat(channels, axis=0))
    mid = 0.5 * (cfg.d_min + cfg.d_max)
    half = 0.5 * (cfg.d_max - cfg.d_min)
    return T.reshape(mid + half * T.tanh(raw), (h, w))


class AppearanceNetwork:
    """Fuses the five warped images (+ guidance channels) into the final view.

    The conv stack's output is added to the warped current frame, so the
    network learns a correction on top of the strongest single candidate.
    """

    IN_CHANNELS = 25

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.net = ConvNet("appearance", [
            ConvLayer(self.IN_CHANNELS, 64, 5),
            ConvLayer(64, 64, 3),
            ConvLayer(64, 32, 3),
            ConvLayer(32, 3, 1, activation="none"),
        ])

    def init(self, seed: int) -> "AppearanceNetwork":
        self.net.init(seed)
        return self

    def parameters(self) -> dict[str, Tensor]:
        return self.net.parameters()


@dataclass
class FrameContext:
    """Everything needed to synthesize any view of one in-between frame.

    Images are full-frame [3,H,W]; fields live on the frame grid except the
    keyframe disparities d0/dT, which live on their keyframe grids (the same
    grid, different content). All of it is shared across target views.
    """

    I_t: np.ndarray
    I_0: np.ndarray
    I_T: np.ndarray
    d0: object  # [H,W] keyframe disparity (array or Tensor)
    dT: object
    d0_borrowed: object  # [H,W] on frame t's grid
    dT_borrowed: object
    f_0t: object  # [2,H,W]
    f_Tt: object
    lam: float
    d_t: object | None = None  # [H,W], filled by estimate once per frame


def appearance_inputs(ctx: FrameContext, L0_u, LT_u, u: AngularCoord,
                      cfg: PipelineConfig, window=None) -> tuple[Tensor, Tensor]:
    """Build the 25-channel appearance input; returns (stack, warped I_t)."""
    if ctx.d_t is None:
        raise ValueError("frame context is missing the target disparity d_t")
    warped = warp_five(ctx.I_t, ctx.I_0, ctx.I_T, L0_u, LT_u,
                       ctx.d_t, ctx.f_0t, ctx.f_Tt, ctx.d0, ctx.dT, u, window=window)
    w_It, w_I0, w_IT, w_L0, w_LT = warped
    h, w = w_It.data.shape[1:]

    def crop_field(x) -> Tensor:
        t = _field(x)
        if window is not None:
            x0, y0, ww, wh = window
            t = T.reshape(T.narrow(T.narrow(T.reshape(t, (1,) + t.data.shape), 1, y0, wh), 2, x0, ww), (wh, ww))
        return T.reshape(t, (1,) + t.data.shape[-2:])

    def crop_flow(x) -> Tensor:
        t = _flow(x)
        if window is not None:
            x0, y0, ww, wh = window
            t = T.narrow(T.narrow(t, 1, y0, wh), 2, x0, ww)
        return t

    d_scale = 1.0 / max(abs(cfg.d_min), abs(cfg.d_max))
    f_scale = 1.0 / cfg.flow_search_range
    norm = cfg.max_angular_offset or 1
    dt_chw = (T.reshape(ctx.d_t, (1,) + ctx.d_t.data.shape) if isinstance(ctx.d_t, Tensor)
              else Tensor(np.asarray(ctx.d_t)[None]))
    channels = [
        w_It, w_I0, w_IT, w_L0, w_LT,
        dt_chw * d_scale,
        crop_field(ctx.d0_borrowed) * d_scale,
        crop_field(ctx.dT_borrowed) * d_scale,
        crop_flow(ctx.f_0t) * f_scale,
        crop_flow(ctx.f_Tt) * f_scale,
        Tensor(np.full((1, h, w), u.u / norm)),
        Tensor(np.full((1, h, w), u.v / norm)),
        Tensor(np.full((1, h, w), ctx.lam)),
    ]
    return T.concat(channels, axis=0), w_It


def synthesize_view(ctx: FrameContext, L0_u, LT_u, u: AngularCoord,
                    appearance: AppearanceNetwork, window=None,
                    clamp_output: bool = True) -> Tensor:
    """Warp the five inputs to view u and fuse them into the synthesized view."""
    stack, w_It = appearance_inputs(ctx, L0_u, LT_u, u, appearance.cfg, window=window)
    out = w_It + appearance.net(stack)
    if clamp_output:
        out = T.clamp(out, 0.0, 1.0)
    return out


# -- the four networks as one unit ------------------------------------------------


class PipelineNets:
    """Disparity, temporal-flow, warp-flow, and appearance networks."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.disparity = DisparityNetwork(cfg.plane_sweep())
        self.flow = FlowEstimator(cfg.flow_pyramid(), cfg.flow_search_range)
        self.warp = WarpFlowNetwork(cfg)
        self.appearance = AppearanceNetwork(cfg)

    def init(self, seed: int) -> "PipelineNets":
        self.disparity.init(seed + 1)
        self.flow.init(seed + 2)
        self.warp.init(seed + 3)
        self.appearance.init(seed + 4)
        return self

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        params.update(self.disparity.parameters())
        params.update(self.flow.parameters())
        params.update(self.warp.parameters())
        params.update(self.appearance.parameters())
        return params

    def stage_parameters(self, stage: str) -> dict[str, Tensor]:
        return {
            "disparity": self.disparity.parameters,
            "flow": self.flow.parameters,
            "warp": self.warp.parameters,
            "appearance": self.appearance.parameters,
            "joint": self.parameters,
        }[stage]()

    def save(self, path, extra: dict[str, np.ndarray] | None = None) -> None:
        tensors = {name: p.data for name, p in self.parameters().items()}
        if extra:
            tensors.update(extra)
        save_checkpoint(path, tensors)

    def load(self, path, dtype=np.float64) -> dict[str, np.ndarray]:
        """Load parameters in place; returns any non-parameter tensors."""
        blob = load_checkpoint(path)
        params = self.parameters()
        missing = set(params) - set(blob)
        if missing:
            from .nn import CheckpointError

            raise CheckpointError(f"checkpoint missing parameters: {sorted(missing)[:4]}...")
        for name, p in params.items():
            arr = blob.pop(name)
            if arr.shape != p.data.shape:
                from .nn import CheckpointError

                raise CheckpointError(f"{name}: shape {arr.shape} != {p.data.shape}")
            p.data = arr.astype(dtype)
        return blob

    def astype(self, dtype) -> "PipelineNets":
        for p in self.parameters().values():
            p.data = p.data.astype(dtype)
        return self
