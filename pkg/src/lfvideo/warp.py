"""Non-learned geometric machinery: view shifting, flow warping, cascading,
and the five concatenated warps that move every input image onto a target
view in one composed sampling step.

All functions run on the autodiff tape when any input is a gradient-tracked
tensor, so losses differentiate through every warp into disparities and
flows. Inputs may equally be plain numpy arrays for inference-style use.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .lightfield import AngularCoord, DisparityMap, FlowField, LightFieldFrame
from .tensor import Tensor, bilinear_sample, grid_2d


def _field2d(x) -> Tensor:
    """Coerce a scalar field (DisparityMap, ndarray, Tensor) to a [H,W] tensor."""
    if isinstance(x, DisparityMap):
        x = x.values
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
    if t.data.ndim == 3 and t.data.shape[0] == 1:
        t = T.reshape(t, t.data.shape[1:])
    if t.data.ndim != 2:
        raise ValueError(f"expected a scalar [H,W] field, got {t.dims}")
    return t


def _flow2d(f) -> Tensor:
    """Coerce a flow (FlowField, ndarray, Tensor) to a [2,H,W] tensor."""
    if isinstance(f, FlowField):
        f = f.values
    t = f if isinstance(f, Tensor) else Tensor(np.asarray(f))
    if t.data.ndim != 3 or t.data.shape[0] != 2:
        raise ValueError(f"expected a [2,H,W] flow, got {t.dims}")
    return t


def _image(x) -> Tensor:
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
    if t.data.ndim != 3:
        raise ValueError(f"expected a [C,H,W] image, got {t.dims}")
    return t


def sample_image_np(img: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Pure-numpy bilinear sampling with border clamping.

    Mirrors the autodiff op exactly; used on gradient-free hot paths
    (plane sweep, rendering, evaluation).
    """
    img = np.asarray(img)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[None]
    c, h, w = img.shape
    cx = np.clip(gx, 0.0, w - 1.0)
    cy = np.clip(gy, 0.0, h - 1.0)
    x0 = np.floor(cx).astype(np.intp)
    y0 = np.floor(cy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = cx - x0
    fy = cy - y0
    v00 = img[:, y0, x0]
    v01 = img[:, y0, x1]
    v10 = img[:, y1, x0]
    v11 = img[:, y1, x1]
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    out = top + fy * (bot - top)
    return out[0] if squeeze else out


def shift_view(lf: LightFieldFrame, u: AngularCoord | tuple[int, int], d) -> Tensor:
    """Resample view u so that, at the correct disparity, it aligns with the
    central view: output(x) = view_u(x + u * d(x))."""
    if isinstance(u, tuple):
        u = AngularCoord(*u)
    view = lf.view(u)  # raises on out-of-range u
    h, w = lf.spatial_dims
    gx, gy = grid_2d(h, w)
    if np.isscalar(d):
        return bilinear_sample(Tensor(view), gx + u.u * float(d), gy + u.v * float(d))
    dt = _field2d(d)
    return bilinear_sample(Tensor(view), Tensor(gx) + float(u.u) * dt, Tensor(gy) + float(u.v) * dt)


def warp_with_flow(source, flow) -> Tensor:
    """Backward warp: output(x) = source(x + f(x)) on the flow's grid."""
    src = _image(source)
    f = _flow2d(flow)
    _, h, w = f.data.shape
    if src.data.shape[1:] != (h, w):
        raise ValueError(f"source {src.dims} does not match flow grid {(h, w)}")
    gx, gy = grid_2d(h, w)
    fx = T.reshape(T.narrow(f, 0, 0, 1), (h, w))
    fy = T.reshape(T.narrow(f, 0, 1, 1), (h, w))
    return bilinear_sample(src, Tensor(gx) + fx, Tensor(gy) + fy)


def cascade_flow(f_ab, f_bc) -> FlowField:
    """Compose flows: given a->b and b->c (each on its target grid), return
    a->c on c's grid: f_ac(x) = f_bc(x) + f_ab(x + f_bc(x))."""
    fab = _flow2d(f_ab)
    fbc = _flow2d(f_bc)
    if fab.data.shape != fbc.data.shape:
        raise ValueError(f"flow shape mismatch: {fab.dims} vs {fbc.dims}")
    _, h, w = fbc.data.shape
    gx, gy = grid_2d(h, w)
    bx = gx + fbc.data[0]
    by = gy + fbc.data[1]
    fab_at = sample_image_np(fab.data, bx, by)
    return FlowField(fbc.data + fab_at)


def warp_five(I_t, I_0, I_T, L0_u, LT_u, d_t, f_0t, f_Tt, d0, dT,
              u: AngularCoord | tuple[int, int],
              window: tuple[int, int, int, int] | None = None):
    """Warp the five source images onto target view u at frame t.

    Each output is produced by one composed sampling (coordinate maps are
    built by sampling the flow/disparity fields, then each source image is
    sampled exactly once):

      warped current frame   (x) = I_t(y),             y = x - u*d_t(x)
      warped first keyframe  (x) = I_0(z0),            z0 = y + f_0t(y)
      warped last keyframe   (x) = I_T(zT),            zT = y + f_Tt(y)
      warped first view      (x) = L0_u(z0 + u*d0(z0))
      warped last view       (x) = LT_u(zT + u*dT(zT))

    ``window`` optionally restricts the output to a crop (x0, y0, w, h) whose
    coordinates still index the full source images.
    """
    if isinstance(u, tuple):
        u = AngularCoord(*u)
    I_t, I_0, I_T = _image(I_t), _image(I_0), _image(I_T)
    L0_u, LT_u = _image(L0_u), _image(LT_u)
    dt = _field2d(d_t)
    f0 = _flow2d(f_0t)
    fT = _flow2d(f_Tt)
    d0 = _field2d(d0)
    dT = _field2d(dT)
    full_h, full_w = I_t.data.shape[1:]
    for name, t in (("I_0", I_0), ("I_T", I_T), ("L0_u", L0_u), ("LT_u", LT_u)):
        if t.data.shape[1:] != (full_h, full_w):
            raise ValueError(f"{name} shape {t.dims} does not match frame grid {(full_h, full_w)}")
    for name, t in (("f_0t", f0), ("f_Tt", fT)):
        if t.data.shape[1:] != (full_h, full_w):
            raise ValueError(f"{name} shape {t.dims} does not match frame grid {(full_h, full_w)}")
    for name, t in (("d0", d0), ("dT", dT)):
        if t.data.shape != (full_h, full_w):
            raise ValueError(f"{name} shape {t.dims} does not match frame grid {(full_h, full_w)}")
    if dt.data.shape != (full_h, full_w) and window is None:
        raise ValueError(f"d_t shape {dt.dims} does not match frame grid {(full_h, full_w)}")

    if window is None:
        gx, gy = grid_2d(full_h, full_w)
    else:
        x0, y0, ww, wh = window
        gy, gx = np.meshgrid(np.arange(y0, y0 + wh, dtype=np.float64),
                             np.arange(x0, x0 + ww, dtype=np.float64), indexing="ij")
        if dt.data.shape != (wh, ww):
            raise ValueError(f"d_t must be on the window grid {(wh, ww)}, got {dt.dims}")

    def as_chw(field: Tensor) -> Tensor:
        h, w = field.data.shape
        return T.reshape(field, (1, h, w))

    def split_xy(two: Tensor) -> tuple[Tensor, Tensor]:
        _, h, w = two.data.shape
        return (T.reshape(T.narrow(two, 0, 0, 1), (h, w)),
                T.reshape(T.narrow(two, 0, 1, 1), (h, w)))

    yx = Tensor(gx) - float(u.u) * dt
    yy = Tensor(gy) - float(u.v) * dt
    warped_It = bilinear_sample(I_t, yx, yy)

    f0_at_y = bilinear_sample(f0, yx, yy)
    f0x, f0y = split_xy(f0_at_y)
    z0x = yx + f0x
    z0y = yy + f0y
    warped_I0 = bilinear_sample(I_0, z0x, z0y)

    d0_at_z = T.reshape(bilinear_sample(as_chw(d0), z0x, z0y), z0x.data.shape)
    warped_L0 = bilinear_sample(L0_u, z0x + float(u.u) * d0_at_z, z0y + float(u.v) * d0_at_z)

    fT_at_y = bilinear_sample(fT, yx, yy)
    fTx, fTy = split_xy(fT_at_y)
    zTx = yx + fTx
    zTy = yy + fTy
    warped_IT = bilinear_sample(I_T, zTx, zTy)

    dT_at_z = T.reshape(bilinear_sample(as_chw(dT), zTx, zTy), zTx.data.shape)
    warped_LT = bilinear_sample(LT_u, zTx + float(u.u) * dT_at_z, zTy + float(u.v) * dT_at_z)

    return warped_It, warped_I0, warped_IT, warped_L0, warped_LT
