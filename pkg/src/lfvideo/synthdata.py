"""Synthetic light-field-video generator and the on-disk sequence container.

Scenes are stacks of fronto-parallel textured layers, each with a constant
disparity and a per-frame translation path. Rendering evaluates every layer's
texture lattice continuously (bilinear, with a margin so views never sample
past the lattice), which yields exact ground-truth disparity, flow, and
occlusion masks alongside the images.

The container is a directory: ``manifest.json`` plus one binary file per
tensor (magic ``LFV1``, u8 ndim, ndim u32 LE dims, f32 LE row-major payload).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lightfield import LightFieldFrame, VideoFrame

TENSOR_MAGIC = b"LFV1"
MANIFEST_VERSION = 1


class ContainerFormatError(ValueError):
    """Malformed sequence container (bad magic, truncation, dim mismatch)."""


# -- scene specification --------------------------------------------------------


@dataclass
class LayerSpec:
    """One fronto-parallel layer: texture + disparity + motion (+ mask)."""

    texture: dict = field(default_factory=lambda: {"kind": "noise"})
    disparity: float = 0.0
    velocity: tuple[float, float] = (0.0, 0.0)
    path: list[tuple[float, float]] | None = None  # explicit per-frame offsets
    mask: dict | None = None  # None = full coverage (background)

    def offset(self, t: int) -> np.ndarray:
        if self.path is not None:
            return np.asarray(self.path[t], dtype=np.float64)
        return np.asarray([self.velocity[0] * t, self.velocity[1] * t], dtype=np.float64)


@dataclass
class SceneSpec:
    """Layered scene description; layers are ordered back to front."""

    layers: list[LayerSpec]
    angular_resolution: int = 5
    height: int = 64
    width: int = 64
    frames: int = 12
    keyframe_stride: int = 10
    seed: int = 0
    d_max: float = 2.0

    def __post_init__(self):
        if not self.layers:
            raise ValueError("scene needs at least one layer")
        if self.angular_resolution % 2 != 1:
            raise ValueError("angular resolution must be odd")
        for layer in self.layers:
            if abs(layer.disparity) > self.d_max:
                raise ValueError(f"layer disparity {layer.disparity} exceeds bound {self.d_max}")

    def to_json(self) -> str:
        def layer_dict(l: LayerSpec) -> dict:
            out = {"texture": l.texture, "disparity": l.disparity,
                   "velocity": list(l.velocity)}
            if l.path is not None:
                out["path"] = [list(p) for p in l.path]
            if l.mask is not None:
                out["mask"] = l.mask
            return out

        return json.dumps({
            "layers": [layer_dict(l) for l in self.layers],
            "angular_resolution": self.angular_resolution,
            "height": self.height,
            "width": self.width,
            "frames": self.frames,
            "keyframe_stride": self.keyframe_stride,
            "seed": self.seed,
            "d_max": self.d_max,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        raw = json.loads(text)
        layers = []
        for l in raw["layers"]:
            layers.append(LayerSpec(
                texture=l.get("texture", {"kind": "noise"}),
                disparity=float(l.get("disparity", 0.0)),
                velocity=tuple(l.get("velocity", (0.0, 0.0))),
                path=[tuple(p) for p in l["path"]] if "path" in l else None,
                mask=l.get("mask"),
            ))
        return cls(
            layers=layers,
            angular_resolution=int(raw.get("angular_resolution", 5)),
            height=int(raw.get("height", 64)),
            width=int(raw.get("width", 64)),
            frames=int(raw.get("frames", 12)),
            keyframe_stride=int(raw.get("keyframe_stride", 10)),
            seed=int(raw.get("seed", 0)),
            d_max=float(raw.get("d_max", 2.0)),
        )


# -- textures --------------------------------------------------------------------


def _gaussian_blur_np(arr: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return arr
    radius = max(1, int(np.ceil(3 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    k /= k.sum()
    padded = np.pad(arr, radius, mode="wrap")
    out = np.apply_along_axis(lambda r: np.convolve(r, k, mode="valid"), 1, padded)
    out = np.apply_along_axis(lambda c: np.convolve(c, k, mode="valid"), 0, out)
    return out


def make_texture(kind_spec: dict, shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Build a [3,Hl,Wl] texture lattice in [0,1]."""
    kind = kind_spec.get("kind", "noise")
    h, w = shape
    if kind == "noise":
        # random-phase cosine mixture: band-limited by construction, so
        # bilinear resampling error stays far below the reconstruction
        # tolerances the ground truth must satisfy
        max_freq = float(kind_spec.get("max_freq", 0.05))
        min_freq = float(kind_spec.get("min_freq", 0.015))
        components = int(kind_spec.get("components", 22))
        contrast = float(kind_spec.get("contrast", 0.32))
        ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                             np.arange(w, dtype=np.float64), indexing="ij")

        def cosine_field(n: int) -> np.ndarray:
            out = np.zeros((h, w))
            for _ in range(n):
                f = rng.uniform(min_freq, max_freq)
                theta = rng.uniform(0, 2 * np.pi)
                phase = rng.uniform(0, 2 * np.pi)
                out += rng.uniform(0.5, 1.0) * np.cos(
                    2 * np.pi * f * (np.cos(theta) * xs + np.sin(theta) * ys) + phase
                )
            return out

        shared = cosine_field(components)
        chans = []
        for _ in range(3):
            mix = shared + 0.5 * cosine_field(max(2, components // 4))
            mix = (mix - mix.mean()) / (mix.std() + 1e-9)
            chans.append(np.clip(0.5 + contrast * mix, 0.02, 0.98))
        return np.stack(chans)
    if kind == "checker":
        period = float(kind_spec.get("period", 8.0))
        ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        patt = ((np.floor(xs / period) + np.floor(ys / period)) % 2).astype(np.float64)
        patt = _gaussian_blur_np(patt, 0.7)
        lo, hi = 0.15, 0.85
        tex = lo + (hi - lo) * patt
        tint = rng.uniform(0.85, 1.0, size=3)
        return np.stack([tex * t for t in tint])
    if kind == "image":
        arr = np.asarray(kind_spec["data"], dtype=np.float64)
        if arr.shape != (3, h, w):
            raise ValueError(f"image texture must be [3,{h},{w}], got {arr.shape}")
        return arr
    if kind == "flat":
        raise ValueError(
            "flat textures are rejected: constant layers are degenerate for every "
            "reconstruction loss (use 'noise' or 'checker')"
        )
    raise ValueError(f"unknown texture kind {kind!r}")


def _make_mask(mask_spec: dict | None, shape: tuple[int, int],
               margin: int = 0) -> np.ndarray | None:
    """Mask lattice for a layer; ``center`` is in frame coordinates (the
    lattice extends ``margin`` pixels beyond the frame on every side)."""
    if mask_spec is None:
        return None
    h, w = shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    cx, cy = mask_spec["center"]
    cx, cy = cx + margin, cy + margin
    sx, sy = mask_spec["size"]
    kind = mask_spec.get("shape", "rect")
    if kind == "rect":
        inside = (np.abs(xs - cx) <= sx / 2) & (np.abs(ys - cy) <= sy / 2)
        mask = inside.astype(np.float64)
    elif kind == "ellipse":
        mask = ((((xs - cx) / (sx / 2)) ** 2 + ((ys - cy) / (sy / 2)) ** 2) <= 1.0).astype(np.float64)
    else:
        raise ValueError(f"unknown mask shape {kind!r}")
    feather = float(mask_spec.get("feather", 1.0))
    return np.clip(_gaussian_blur_np(mask, feather), 0.0, 1.0)


# -- sequence bundle ----------------------------------------------------------------


class SequenceBundle:
    """A light-field video segment plus its 2D video and optional ground truth.

    ``light_fields[t]`` is None where no light field exists (non-keyframes of
    an inference input). The 2D video frame at a keyframe equals the central
    view exactly.
    """

    def __init__(self, light_fields, video, keyframe_stride: int,
                 gt_disparity=None, gt_flow=None,
                 occl_angular=None, occl_temporal=None,
                 extras: dict[str, np.ndarray] | None = None,
                 d_range: tuple[float, float] | None = None,
                 scene_spec_json: str | None = None):
        self.light_fields: list[LightFieldFrame | None] = list(light_fields)
        self.video: list[VideoFrame] = list(video)
        self.keyframe_stride = int(keyframe_stride)
        self.gt_disparity = gt_disparity
        self.gt_flow = gt_flow
        self.occl_angular = occl_angular
        self.occl_temporal = occl_temporal
        self.extras = dict(extras or {})
        self.d_range = d_range
        self.scene_spec_json = scene_spec_json
        if not self.video:
            raise ValueError("bundle needs at least one video frame")
        if len(self.light_fields) != len(self.video):
            raise ValueError("light_fields and video must align per frame index")

    @property
    def frames(self) -> int:
        return len(self.video)

    @property
    def spatial_dims(self) -> tuple[int, int]:
        img = self.video[0].image
        return img.shape[1], img.shape[2]

    @property
    def angular_resolution(self) -> int:
        for lf in self.light_fields:
            if lf is not None:
                return lf.angular_resolution
        raise ValueError("bundle has no light fields")

    def keyframe_indices(self) -> list[int]:
        """Stride-based keyframe positions (ground-truth bundles carry light
        fields at every frame; only these are keyframes)."""
        stride = max(1, self.keyframe_stride)
        return [t for t in range(0, self.frames, stride) if self.light_fields[t] is not None]

    def frames_with_light_fields(self) -> list[int]:
        return [t for t, lf in enumerate(self.light_fields) if lf is not None]

    def validate(self) -> None:
        h, w = self.spatial_dims
        for t, lf in enumerate(self.light_fields):
            if lf is None:
                continue
            if lf.spatial_dims != (h, w):
                raise ValueError(f"frame {t}: light field dims {lf.spatial_dims} != video {(h, w)}")
            if not np.array_equal(lf.central_view, self.video[t].image):
                raise ValueError(f"frame {t}: video frame is not the central view")


# -- rendering -----------------------------------------------------------------------


def render_scene(spec: SceneSpec) -> SequenceBundle:
    """Render a scene to a full ground-truth bundle (f32 images in [0,1])."""
    a = spec.angular_resolution
    c = (a - 1) // 2
    h, w = spec.height, spec.width

    max_motion = max(
        (float(np.abs(l.offset(t)).max()) for l in spec.layers for t in range(spec.frames)),
        default=0.0,
    )
    margin = int(np.ceil(c * spec.d_max + max_motion)) + 4
    lat_shape = (h + 2 * margin, w + 2 * margin)

    seedseq = np.random.SeedSequence(spec.seed)
    layer_rngs = [np.random.default_rng(s) for s in seedseq.spawn(len(spec.layers))]
    textures = [make_texture(l.texture, lat_shape, r) for l, r in zip(spec.layers, layer_rngs)]
    masks = [_make_mask(l.mask, lat_shape, margin) for l in spec.layers]

    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")

    def sample_lattice(lat: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
        from .warp import sample_image_np

        return sample_image_np(lat, gx + margin, gy + margin)

    def render_view(t: int, u: int, v: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Composite all layers back-to-front.

        Returns (image [3,H,W], visible layer ids, purity). Purity is False
        where a feathered mask blends two layers: those pixels mix two
        disparities and are treated as occluded by the ground-truth masks.
        """
        out = np.zeros((3, h, w))
        vis = np.zeros((h, w), dtype=np.int32)
        pure = np.ones((h, w), dtype=bool)
        for i, layer in enumerate(spec.layers):
            off = layer.offset(t)
            gx = xs - u * layer.disparity - off[0]
            gy = ys - v * layer.disparity - off[1]
            color = sample_lattice(textures[i], gx, gy)
            if masks[i] is None:
                out = color
                vis[:] = i
            else:
                alpha = sample_lattice(masks[i], gx, gy)
                out = alpha * color + (1.0 - alpha) * out
                vis = np.where(alpha >= 0.5, i, vis)
                pure &= (alpha <= 0.02) | (alpha >= 0.98)
        return out, vis, pure

    light_fields: list[LightFieldFrame | None] = []
    video: list[VideoFrame] = []
    gt_disparity: list[np.ndarray] = []
    gt_flow: list[np.ndarray | None] = [None]
    occl_angular: list[np.ndarray] = []
    occl_temporal: list[np.ndarray | None] = [None]
    vis_central_prev: np.ndarray | None = None
    layer_d = np.asarray([l.disparity for l in spec.layers])

    from .warp import sample_image_np

    pure_central_prev: np.ndarray | None = None
    for t in range(spec.frames):
        views = np.zeros((a, a, 3, h, w), dtype=np.float32)
        vis_views = np.zeros((a, a, h, w), dtype=np.int32)
        pure_views = np.zeros((a, a, h, w), dtype=bool)
        for vi in range(a):
            for ui in range(a):
                img, vis, pure = render_view(t, ui - c, vi - c)
                views[vi, ui] = img.astype(np.float32)
                vis_views[vi, ui] = vis
                pure_views[vi, ui] = pure
        lf = LightFieldFrame(views, frame_index=t)
        light_fields.append(lf)
        video.append(VideoFrame(views[c, c].copy(), frame_index=t))

        vis_central = vis_views[c, c]
        pure_central = pure_views[c, c]
        d_map = layer_d[vis_central]
        gt_disparity.append(d_map.astype(np.float32))

        # angular occlusion: the centrally visible layer is hidden (or blended)
        # in some view at its disparity-predicted position
        occ_a = ~pure_central
        for vi in range(a):
            for ui in range(a):
                u, v = ui - c, vi - c
                if u == 0 and v == 0:
                    continue
                sx = xs + u * d_map
                sy = ys + v * d_map
                vis_at = sample_image_np(vis_views[vi, ui].astype(np.float64), sx, sy)
                pure_at = sample_image_np(pure_views[vi, ui].astype(np.float64), sx, sy)
                occ_a |= (np.abs(vis_at - vis_central) > 0.01) | (pure_at < 0.99)
        occl_angular.append(occ_a.astype(np.float32))

        if t > 0:
            # backward flow (t-1 -> t, on frame t's grid) of the visible layer
            f = np.zeros((2, h, w))
            for i, layer in enumerate(spec.layers):
                delta = layer.offset(t - 1) - layer.offset(t)
                sel = vis_central == i
                f[0][sel] = delta[0]
                f[1][sel] = delta[1]
            gt_flow.append(f.astype(np.float32))
            vis_at_prev = sample_image_np(vis_central_prev.astype(np.float64),
                                          xs + f[0], ys + f[1])
            pure_at_prev = sample_image_np(pure_central_prev.astype(np.float64),
                                           xs + f[0], ys + f[1])
            occ_t = (np.abs(vis_at_prev - vis_central) > 0.01) | (pure_at_prev < 0.99)
            occ_t |= ~pure_central
            occl_temporal.append(occ_t.astype(np.float32))
        vis_central_prev = vis_central
        pure_central_prev = pure_central

    return SequenceBundle(
        light_fields, video, spec.keyframe_stride,
        gt_disparity=gt_disparity, gt_flow=gt_flow,
        occl_angular=occl_angular, occl_temporal=occl_temporal,
        d_range=(-spec.d_max, spec.d_max),
        scene_spec_json=spec.to_json(),
    )


def pan_scene_spec(seed: int, angular_resolution: int = 5, size: int = 64,
                   frames: int = 12, keyframe_stride: int = 10) -> SceneSpec:
    """A camera-pan scene: one or two layers sharing a fast global motion."""
    rng = np.random.default_rng(seed)
    speed = rng.uniform(0.15, 1.1)
    angle = rng.uniform(0, 2 * np.pi)
    v = (float(speed * np.cos(angle)), float(speed * np.sin(angle)))
    layers = [LayerSpec(
        texture={"kind": "noise", "max_freq": float(rng.uniform(0.04, 0.05))},
        disparity=float(rng.uniform(-1.0, 0.3)),
        velocity=v,
    )]
    if rng.random() < 0.5:
        layers.append(LayerSpec(
            texture={"kind": "noise", "max_freq": float(rng.uniform(0.04, 0.05))},
            disparity=float(rng.uniform(0.6, 1.4)),
            velocity=v,
            mask={"shape": "ellipse",
                  "center": [float(rng.uniform(0.35, 0.65) * size),
                             float(rng.uniform(0.35, 0.65) * size)],
                  "size": [float(rng.uniform(0.25, 0.4) * size),
                           float(rng.uniform(0.25, 0.4) * size)],
                  "feather": 1.0},
        ))
    return SceneSpec(layers=layers, angular_resolution=angular_resolution,
                     height=size, width=size, frames=frames,
                     keyframe_stride=keyframe_stride, seed=seed)


def random_scene_spec(seed: int, angular_resolution: int = 5, size: int = 64,
                      frames: int = 12, keyframe_stride: int = 10,
                      max_speed: float = 0.45) -> SceneSpec:
    """A randomized layered scene: moving foreground over a background that
    may also pan (slow camera motion), so flow training sees both local and
    global displacements. Speeds mirror the slow-motion capture regime the
    pipeline is built for (a few percent of the frame per segment)."""
    rng = np.random.default_rng(seed)
    # a third of the scenes pan globally, like a moving camera
    pan = np.zeros(2)
    if rng.random() < 0.35:
        pan_speed = rng.uniform(0.15, 0.35)
        pan_angle = rng.uniform(0, 2 * np.pi)
        pan = pan_speed * np.array([np.cos(pan_angle), np.sin(pan_angle)])
    layers = [LayerSpec(
        texture={"kind": "noise", "max_freq": float(rng.uniform(0.04, 0.05))},
        disparity=float(rng.uniform(-1.2, 0.2)),
        velocity=(float(pan[0] + rng.uniform(-0.1, 0.1)),
                  float(pan[1] + rng.uniform(-0.1, 0.1))),
    )]
    n_fg = int(rng.integers(1, 3))
    for _ in range(n_fg):
        speed = rng.uniform(0.2, max_speed)
        angle = rng.uniform(0, 2 * np.pi)
        layers.append(LayerSpec(
            texture={"kind": "noise", "max_freq": float(rng.uniform(0.04, 0.05))},
            disparity=float(rng.uniform(0.5, 1.5)),
            velocity=(float(pan[0] + speed * np.cos(angle)),
                      float(pan[1] + speed * np.sin(angle))),
            mask={"shape": rng.choice(["rect", "ellipse"]),
                  "center": [float(rng.uniform(0.3, 0.7) * size),
                             float(rng.uniform(0.3, 0.7) * size)],
                  "size": [float(rng.uniform(0.3, 0.5) * size),
                           float(rng.uniform(0.3, 0.5) * size)],
                  "feather": 1.0},
        ))
    return SceneSpec(layers=layers, angular_resolution=angular_resolution,
                     height=size, width=size, frames=frames,
                     keyframe_stride=keyframe_stride, seed=seed)


def dataset_scene_specs(seed: int, count: int, **kwargs) -> list[SceneSpec]:
    """A deterministic scene mix: every fourth scene is a camera pan, the
    rest are layered scenes with independently moving foregrounds."""
    specs = []
    for i in range(count):
        s = seed * 10_000 + i
        if i % 4 == 3:
            specs.append(pan_scene_spec(s, **kwargs))
        else:
            specs.append(random_scene_spec(s, **kwargs))
    return specs


# -- container I/O --------------------------------------------------------------------


def _write_tensor(path: Path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(np.asarray(arr), dtype="<f4")
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(bytes([arr.ndim]))
        f.write(np.asarray(arr.shape, dtype="<u4").tobytes())
        f.write(arr.tobytes(order="C"))


def _read_tensor(path: Path) -> np.ndarray:
    blob = path.read_bytes()
    if blob[:4] != TENSOR_MAGIC:
        raise ContainerFormatError(f"{path.name}: bad magic {blob[:4]!r}")
    if len(blob) < 5:
        raise ContainerFormatError(f"{path.name}: truncated header")
    ndim = blob[4]
    head = 5 + 4 * ndim
    if len(blob) < head:
        raise ContainerFormatError(f"{path.name}: truncated dims")
    dims = np.frombuffer(blob, dtype="<u4", count=ndim, offset=5)
    n = int(np.prod(dims)) if ndim else 1
    if len(blob) != head + 4 * n:
        raise ContainerFormatError(
            f"{path.name}: payload size {len(blob) - head} does not match dims {tuple(dims)}"
        )
    return np.frombuffer(blob, dtype="<f4", count=n, offset=head).reshape(dims).copy()


def _fname(name: str) -> str:
    return name.replace("/", "_") + ".bin"


def write_sequence(bundle: SequenceBundle, path) -> None:
    """Write a bundle to an LFV1 container directory (lossless f32)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    h, w = bundle.spatial_dims
    tensors: dict[str, np.ndarray] = {}
    lf_frames = []
    for t, lf in enumerate(bundle.light_fields):
        if lf is not None:
            tensors[f"lf/{t:05d}"] = lf.views
            lf_frames.append(t)
    for t, vf in enumerate(bundle.video):
        tensors[f"video/{t:05d}"] = vf.image
    if bundle.gt_disparity is not None:
        for t, d in enumerate(bundle.gt_disparity):
            tensors[f"gt_disparity/{t:05d}"] = d
    if bundle.gt_flow is not None:
        for t, f in enumerate(bundle.gt_flow):
            if f is not None:
                tensors[f"gt_flow/{t:05d}"] = f
    if bundle.occl_angular is not None:
        for t, m in enumerate(bundle.occl_angular):
            tensors[f"occl_angular/{t:05d}"] = m
    if bundle.occl_temporal is not None:
        for t, m in enumerate(bundle.occl_temporal):
            if m is not None:
                tensors[f"occl_temporal/{t:05d}"] = m
    tensors.update(bundle.extras)

    manifest = {
        "version": MANIFEST_VERSION,
        "A": bundle.angular_resolution if lf_frames else 0,
        "H": h,
        "W": w,
        "frames": bundle.frames,
        "keyframe_stride": bundle.keyframe_stride,
        "lf_frames": lf_frames,
        "tensors": {name: _fname(name) for name in sorted(tensors)},
    }
    if bundle.d_range is not None:
        manifest["d_min"], manifest["d_max"] = bundle.d_range
    if bundle.scene_spec_json is not None:
        (root / "scene.json").write_text(bundle.scene_spec_json)
        manifest["scene_spec"] = "scene.json"
    for name, arr in tensors.items():
        _write_tensor(root / _fname(name), arr)
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_sequence(path) -> SequenceBundle:
    """Read an LFV1 container; raises ContainerFormatError on any corruption."""
    root = Path(path)
    mf_path = root / "manifest.json"
    if not mf_path.exists():
        raise ContainerFormatError(f"{root}: no manifest.json")
    manifest = json.loads(mf_path.read_text())
    version = manifest.get("version")
    if version != MANIFEST_VERSION:
        raise ContainerFormatError(f"unsupported container version {version}")
    h, w = int(manifest["H"]), int(manifest["W"])
    frames = int(manifest["frames"])
    a = int(manifest.get("A", 0))

    tensors: dict[str, np.ndarray] = {}
    for name, fname in manifest["tensors"].items():
        tensors[name] = _read_tensor(root / fname)

    def expect(name: str, shape: tuple[int, ...]) -> np.ndarray:
        arr = tensors.pop(name)
        if arr.shape != shape:
            raise ContainerFormatError(
                f"{name}: manifest declares {shape}, file has {arr.shape}"
            )
        return arr

    video = [VideoFrame(expect(f"video/{t:05d}", (3, h, w)), t) for t in range(frames)]
    light_fields: list[LightFieldFrame | None] = [None] * frames
    for t in manifest.get("lf_frames", []):
        light_fields[t] = LightFieldFrame(expect(f"lf/{t:05d}", (a, a, 3, h, w)), t)

    def grab_series(prefix: str, shape, optional_indices=False):
        keys = sorted(k for k in tensors if k.startswith(prefix + "/"))
        if not keys:
            return None
        series: list[np.ndarray | None] = [None] * frames
        for k in keys:
            t = int(k.rsplit("/", 1)[1])
            series[t] = expect(k, shape)
        return series

    gt_disparity = grab_series("gt_disparity", (h, w))
    gt_flow = grab_series("gt_flow", (2, h, w))
    occl_angular = grab_series("occl_angular", (h, w))
    occl_temporal = grab_series("occl_temporal", (h, w))

    d_range = None
    if "d_min" in manifest and "d_max" in manifest:
        d_range = (float(manifest["d_min"]), float(manifest["d_max"]))
    scene_json = None
    if "scene_spec" in manifest:
        scene_json = (root / manifest["scene_spec"]).read_text()

    return SequenceBundle(
        light_fields, video, int(manifest["keyframe_stride"]),
        gt_disparity=gt_disparity, gt_flow=gt_flow,
        occl_angular=occl_angular, occl_temporal=occl_temporal,
        extras=tensors, d_range=d_range, scene_spec_json=scene_json,
    )
