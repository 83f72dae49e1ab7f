"""Convolution layers, initialization, the ADAM optimizer, and checkpoints.

Everything here is sized for the small 4-layer networks this package trains;
layers are stride-1 / zero-padded "same" by construction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .tensor import TRAIN_DTYPE, Tensor, conv2d, relu

CHECKPOINT_MAGIC = b"LFNN"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Malformed or incompatible parameter checkpoint file."""


class ConvLayer:
    """Stride-1, zero-padded "same" convolution with optional ReLU."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 activation: str = "relu", dtype=TRAIN_DTYPE):
        if in_channels <= 0 or out_channels <= 0 or kernel_size <= 0:
            raise ValueError("ConvLayer dims must be positive")
        if activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {activation!r}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.activation = activation
        self.kernel = Tensor(
            np.zeros((out_channels, in_channels, kernel_size, kernel_size), dtype=dtype),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)

    @property
    def fan_in(self) -> int:
        return self.in_channels * self.kernel_size * self.kernel_size

    def __call__(self, x: Tensor) -> Tensor:
        out = conv2d(x, self.kernel, self.bias)
        if self.activation == "relu":
            out = relu(out)
        return out


def msra_init(layer: ConvLayer, rng_seed: int | np.random.Generator) -> ConvLayer:
    """He/MSRA initialization: kernel ~ N(0, 2/fan_in), bias zero.

    Reproducible: the same seed yields bit-identical weights.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    std = float(np.sqrt(2.0 / layer.fan_in))
    layer.kernel.data[...] = rng.normal(0.0, std, size=layer.kernel.dims)
    layer.bias.data[...] = 0.0
    return layer


class ConvNet:
    """A named sequence of ConvLayers applied in order."""

    def __init__(self, name: str, layers: Iterable[ConvLayer]):
        self.name = name
        self.layers = list(layers)

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def init(self, seed: int) -> "ConvNet":
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            msra_init(layer, rng)
        return self

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            params[f"{self.name}.conv{i}.kernel"] = layer.kernel
            params[f"{self.name}.conv{i}.bias"] = layer.bias
        return params

    def astype(self, dtype) -> "ConvNet":
        for layer in self.layers:
            layer.kernel.data = layer.kernel.data.astype(dtype)
            layer.bias.data = layer.bias.data.astype(dtype)
        return self


# -- ADAM ---------------------------------------------------------------------


@dataclass
class AdamState:
    """Bias-corrected ADAM state for a named parameter set."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray],
              state: AdamState) -> Mapping[str, Tensor]:
    """One deterministic ADAM update in place; returns ``params``."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ValueError(f"adam_step shape mismatch for {name}: {g.shape} vs {p.data.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params


# -- LFNN checkpoint format ----------------------------------------------------
# magic "LFNN", u16 version, u32 tensor count, then per tensor:
#   u16 name length, UTF-8 name, u8 ndim, ndim * u32 dims, f32 LE row-major data.
# All integers little-endian. Data is stored in single precision.


def save_checkpoint(path, tensors: Mapping[str, np.ndarray], version: int = CHECKPOINT_VERSION) -> None:
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<H", version))
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(np.asarray(arr), dtype="<f4")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(arr.tobytes(order="C"))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic {blob[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    off = 4
    try:
        (version,) = struct.unpack_from("<H", blob, off)
        off += 2
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (count,) = struct.unpack_from("<I", blob, off)
        off += 4
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off : off + name_len].decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<B", blob, off)
            off += 1
            dims = struct.unpack_from(f"<{ndim}I", blob, off)
            off += 4 * ndim
            n = int(np.prod(dims)) if ndim else 1
            if off + 4 * n > len(blob):
                raise CheckpointError("truncated checkpoint: tensor data cut short")
            arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(dims)
            off += 4 * n
            out[name] = arr.copy()
        if off != len(blob):
            raise CheckpointError(f"trailing bytes in checkpoint ({len(blob) - off})")
        return out
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from exc
