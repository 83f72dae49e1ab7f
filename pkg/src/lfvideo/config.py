"""Pipeline-wide configuration shared by data generation, training, and apps."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class PlaneSweepConfig:
    """Disparity hypothesis grid for the sweep features."""

    levels: int = 16
    d_min: float = -2.0
    d_max: float = 2.0

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("plane sweep needs at least 2 hypothesis levels")
        if not self.d_max > self.d_min:
            raise ValueError("empty disparity range")

    def hypotheses(self):
        import numpy as np

        return np.linspace(self.d_min, self.d_max, self.levels)


@dataclass
class FlowPyramidConfig:
    """Coarse-to-fine pyramid shape for temporal flow estimation."""

    levels: int = 4
    blur_size: int = 5
    blur_sigma: float = 1.0
    min_coarse: int = 16

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("pyramid needs at least one level")

    def coarsest_dims(self, h: int, w: int) -> tuple[int, int]:
        for _ in range(self.levels - 1):
            h, w = h // 2, w // 2
        return h, w

    def validate_size(self, h: int, w: int) -> None:
        ch, cw = self.coarsest_dims(h, w)
        if ch < self.min_coarse or cw < self.min_coarse:
            raise ValueError(
                f"image {h}x{w} too small for {self.levels} pyramid levels "
                f"(coarsest would be {ch}x{cw}, minimum {self.min_coarse})"
            )


@dataclass
class PipelineConfig:
    """End-to-end configuration for the synthesis pipeline.

    Defaults are desk scale: 5x5 views, 64px frames, keyframes every 10
    frames (the 3 fps light field inside a 30 fps video).
    """

    angular_resolution: int = 5
    d_min: float = -2.0
    d_max: float = 2.0
    sweep_levels: int = 16
    flow_levels: int = 3
    flow_search_range: float = 16.0
    keyframe_stride: int = 10
    seed: int = 0
    # alternative wiring for the warp-flow network: also feed the target-view
    # planes, making its disparity output view-dependent (off by default)
    warp_net_uses_view: bool = False

    def __post_init__(self):
        if self.angular_resolution % 2 != 1 or self.angular_resolution < 1:
            raise ValueError("angular resolution must be odd so an exact central view exists")

    @property
    def max_angular_offset(self) -> int:
        return (self.angular_resolution - 1) // 2

    def plane_sweep(self) -> PlaneSweepConfig:
        return PlaneSweepConfig(self.sweep_levels, self.d_min, self.d_max)

    def flow_pyramid(self) -> FlowPyramidConfig:
        return FlowPyramidConfig(levels=self.flow_levels)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        return cls(**json.loads(text))
