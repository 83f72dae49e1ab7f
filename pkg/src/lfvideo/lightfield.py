"""Light-field and video domain types.

Coordinate conventions used throughout the package:
  * spatial x = (column, row), origin top-left
  * angular u = (u, v), integer offsets from the central view; u increases
    rightward, v downward; the central view is (0, 0)
  * images are float arrays [3, H, W] in [0, 1]
  * disparity is in pixels per unit angular offset; a view aligns with the
    central view when sampled at x + u * d(x)
  * flow fields are [2, H, W] (dx, dy) in pixels on the target frame's grid:
    target(x) = source(x + f(x))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AngularCoord:
    u: int
    v: int

    def bounded(self, angular_resolution: int) -> bool:
        r = (angular_resolution - 1) // 2
        return abs(self.u) <= r and abs(self.v) <= r


class LightFieldFrame:
    """An A x A grid of sub-aperture views sharing spatial dimensions."""

    def __init__(self, views: np.ndarray, frame_index: int = 0):
        views = np.asarray(views)
        if views.ndim != 5 or views.shape[0] != views.shape[1] or views.shape[2] != 3:
            raise ValueError(f"views must be [A,A,3,H,W], got {views.shape}")
        if views.shape[0] % 2 != 1:
            raise ValueError("angular resolution must be odd (a central view must exist)")
        self.views = views
        self.frame_index = frame_index

    @property
    def angular_resolution(self) -> int:
        return self.views.shape[0]

    @property
    def spatial_dims(self) -> tuple[int, int]:
        return self.views.shape[3], self.views.shape[4]

    @property
    def center_offset(self) -> int:
        return (self.angular_resolution - 1) // 2

    def view(self, u: "AngularCoord | tuple[int, int]") -> np.ndarray:
        if isinstance(u, tuple):
            u = AngularCoord(*u)
        if not u.bounded(self.angular_resolution):
            raise ValueError(f"angular coordinate {u} outside {self.angular_resolution}x"
                             f"{self.angular_resolution} grid")
        c = self.center_offset
        return self.views[u.v + c, u.u + c]

    @property
    def central_view(self) -> np.ndarray:
        return self.view(AngularCoord(0, 0))

    def angular_coords(self) -> list[AngularCoord]:
        c = self.center_offset
        return [AngularCoord(u, v) for v in range(-c, c + 1) for u in range(-c, c + 1)]


@dataclass
class VideoFrame:
    image: np.ndarray  # [3, H, W]
    frame_index: int = 0

    def __post_init__(self):
        self.image = np.asarray(self.image)
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise ValueError(f"video frame must be [3,H,W], got {self.image.shape}")


class DisparityMap:
    """Per-pixel scalar disparity, pixels per unit angular offset."""

    def __init__(self, values: np.ndarray, d_max: float | None = None):
        values = np.asarray(values)
        if values.ndim != 2:
            raise ValueError(f"disparity map must be [H,W], got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("non-finite disparity values")
        if d_max is not None and np.abs(values).max(initial=0.0) > d_max + 1e-6:
            raise ValueError(f"disparity exceeds configured bound {d_max}")
        self.values = values

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


class FlowField:
    """Per-pixel (dx, dy) displacement on the target frame's grid."""

    def __init__(self, values: np.ndarray, max_magnitude: float | None = None):
        values = np.asarray(values)
        if values.ndim != 3 or values.shape[0] != 2:
            raise ValueError(f"flow field must be [2,H,W], got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("non-finite flow values")
        if max_magnitude is not None and np.abs(values).max(initial=0.0) > max_magnitude + 1e-6:
            raise ValueError(f"flow exceeds configured search range {max_magnitude}")
        self.values = values

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    @property
    def dx(self) -> np.ndarray:
        return self.values[0]

    @property
    def dy(self) -> np.ndarray:
        return self.values[1]

    @classmethod
    def zero(cls, h: int, w: int, dtype=np.float64) -> "FlowField":
        return cls(np.zeros((2, h, w), dtype=dtype))


@dataclass(frozen=True)
class TemporalPosition:
    """Normalized position t/T of a frame within its keyframe segment."""

    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"temporal position {self.value} outside [0, 1]")

    @classmethod
    def from_indices(cls, t: int, segment_length: int) -> "TemporalPosition":
        if not 0 <= t <= segment_length:
            raise ValueError(f"frame index {t} outside segment [0, {segment_length}]")
        return cls(t / segment_length)
