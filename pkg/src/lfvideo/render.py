"""Light-field rendering applications: refocus, synthetic aperture,
click-to-focus, and a simplified patch tracker for focus tracking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lightfield import AngularCoord, DisparityMap, LightFieldFrame
from .metrics import luminance
from .warp import sample_image_np


@dataclass
class RefocusParams:
    """Shift-and-add parameters: focus plane (disparity) and aperture radius
    in angular units (views with max(|u|,|v|) <= radius are averaged)."""

    focus_disparity: float
    aperture_radius: float = 0.0
    frame: int = 0

    def validate(self, angular_resolution: int, d_min: float, d_max: float) -> None:
        r_max = (angular_resolution - 1) // 2
        if not 0.0 <= self.aperture_radius <= r_max:
            raise ValueError(f"aperture radius {self.aperture_radius} outside [0, {r_max}]")
        if not d_min <= self.focus_disparity <= d_max:
            raise ValueError(f"focus disparity {self.focus_disparity} outside [{d_min}, {d_max}]")


def refocus(lf: LightFieldFrame, params: RefocusParams) -> np.ndarray:
    """Average the views inside the aperture, each shifted to the focus plane:
    views whose content sits at the focus disparity align and stay sharp."""
    a = lf.angular_resolution
    c = (a - 1) // 2
    if params.aperture_radius < 0 or params.aperture_radius > c:
        raise ValueError(f"aperture radius {params.aperture_radius} outside [0, {c}]")
    h, w = lf.spatial_dims
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    s = params.focus_disparity
    acc = np.zeros((3, h, w))
    count = 0
    for u in lf.angular_coords():
        if max(abs(u.u), abs(u.v)) > params.aperture_radius:
            continue
        view = np.asarray(lf.view(u), dtype=np.float64)
        if u.u == 0 and u.v == 0:
            acc += view
        else:
            acc += sample_image_np(view, xs + u.u * s, ys + u.v * s)
        count += 1
    return acc / count


def click_to_focus(x: int, y: int, disparity: DisparityMap | np.ndarray) -> float:
    """Focus disparity for a clicked point: a 3x3 median around the click."""
    values = disparity.values if isinstance(disparity, DisparityMap) else np.asarray(disparity)
    h, w = values.shape
    xi, yi = int(round(x)), int(round(y))
    if not (0 <= xi < w and 0 <= yi < h):
        raise ValueError(f"click ({x}, {y}) outside image {w}x{h}")
    x0, x1 = max(0, xi - 1), min(w, xi + 2)
    y0, y1 = max(0, yi - 1), min(h, yi + 2)
    return float(np.median(values[y0:y1, x0:x1]))


@dataclass
class TrackState:
    """A tracked anchor: position, patch size, and match confidence."""

    x: float
    y: float
    frame: int = 0
    patch: int = 9
    confidence: float = 1.0
    lost: bool = False


def _extract_patch(img: np.ndarray, cx: float, cy: float, size: int) -> np.ndarray:
    half = size / 2.0
    ys = np.linspace(cy - half + 0.5, cy + half - 0.5, size)
    xs = np.linspace(cx - half + 0.5, cx + half - 0.5, size)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return sample_image_np(img, gx, gy)


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom < 1e-12:
        return 0.0
    return float((a * b).sum() / denom)


def track_point(frames: list[np.ndarray], start: TrackState,
                search_radius: int = 6, min_confidence: float = 0.5) -> list[TrackState]:
    """Translation-only patch tracking between consecutive frames.

    Motion comes from an integer-grid NCC search against the previous frame
    plus a quadratic sub-pixel fit of the SSD surface; confidence compares
    the matched patch against the original anchor template, so drifting onto
    an occluder is flagged. A lost track holds its last position.
    """
    if not frames:
        raise ValueError("no frames to track")
    h, w = frames[0].shape[-2:]
    if not (0 <= start.x < w and 0 <= start.y < h):
        raise ValueError(f"track start ({start.x}, {start.y}) outside image {w}x{h}")
    states = [TrackState(start.x, start.y, 0, start.patch, 1.0, False)]
    lums = [luminance(np.asarray(f, dtype=np.float64)) for f in frames]
    template = _extract_patch(lums[0][None], start.x, start.y, start.patch)[0]
    for t in range(1, len(frames)):
        prev = states[-1]
        if prev.lost:
            states.append(TrackState(prev.x, prev.y, t, prev.patch, prev.confidence, True))
            continue
        ref = _extract_patch(lums[t - 1][None], prev.x, prev.y, prev.patch)[0]
        best = (-2.0, 0, 0, None)
        ssd = np.full((2 * search_radius + 1, 2 * search_radius + 1), np.inf)
        for dy in range(-search_radius, search_radius + 1):
            for dx in range(-search_radius, search_radius + 1):
                cand = _extract_patch(lums[t][None], prev.x + dx, prev.y + dy, prev.patch)[0]
                ssd[dy + search_radius, dx + search_radius] = ((cand - ref) ** 2).sum()
                score = _ncc(cand, ref)
                if score > best[0]:
                    best = (score, dx, dy, cand)
        _, dx, dy, matched = best
        conf = _ncc(matched, template)

        def subpixel(axis_vals):
            denom = axis_vals[0] - 2 * axis_vals[1] + axis_vals[2]
            if denom <= 1e-12:
                return 0.0
            return float(np.clip(0.5 * (axis_vals[0] - axis_vals[2]) / denom, -0.5, 0.5))

        iy, ix = dy + search_radius, dx + search_radius
        off_x = off_y = 0.0
        if 0 < ix < 2 * search_radius:
            off_x = subpixel(ssd[iy, ix - 1:ix + 2])
        if 0 < iy < 2 * search_radius:
            off_y = subpixel(ssd[iy - 1:iy + 2, ix])
        nx = float(np.clip(prev.x + dx + off_x, 0, w - 1))
        ny = float(np.clip(prev.y + dy + off_y, 0, h - 1))
        lost = conf < min_confidence
        if lost:
            nx, ny = prev.x, prev.y
        states.append(TrackState(nx, ny, t, prev.patch, conf, lost))
    return states


def variance_of_laplacian(img: np.ndarray) -> float:
    """Sharpness score: variance of the 4-neighbor Laplacian of the luma."""
    lum = luminance(np.asarray(img, dtype=np.float64))
    lap = (-4.0 * lum[1:-1, 1:-1] + lum[:-2, 1:-1] + lum[2:, 1:-1]
           + lum[1:-1, :-2] + lum[1:-1, 2:])
    return float(lap.var())
