"""Dense tensors with reverse-mode automatic differentiation.

A deliberately small engine on top of numpy buffers: enough operations for
4-layer convolutional networks, differentiable bilinear warping, and the
image-reconstruction losses used throughout this package. The graph is a
dynamic tape: every forward op whose inputs require gradients records its
parents and a backward closure; ``Tensor.backward`` walks the tape once and
then consumes it.

Conventions:
  * images and feature maps are ``[C, H, W]``, scalar fields ``[H, W]``
  * training math runs in float64, inference in float32
  * every op output (and every gradient) is checked for NaN/Inf while
    ``finite_checks`` is enabled (the default)
"""

from __future__ import annotations

import contextlib
from typing import Iterable, Sequence

import numpy as np

TRAIN_DTYPE = np.float64
INFER_DTYPE = np.float32

_FINITE_CHECKS = True


def set_finite_checks(enabled: bool) -> bool:
    """Globally enable/disable NaN/Inf checking. Returns the previous value."""
    global _FINITE_CHECKS
    prev = _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)
    return prev


@contextlib.contextmanager
def finite_checks(enabled: bool):
    """Context manager toggling NaN/Inf checking (used around hot loops)."""
    prev = set_finite_checks(enabled)
    try:
        yield
    finally:
        set_finite_checks(prev)


def _assert_finite(arr: np.ndarray, what: str) -> None:
    if _FINITE_CHECKS and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {what}")


class Tensor:
    """A dense n-d array with an optional gradient buffer and tape node.

    ``dims`` mirrors ``data.shape``; ``grad`` is allocated lazily during
    backward and always matches ``dims``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(TRAIN_DTYPE)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None
        _assert_finite(arr, "tensor data")

    # -- basic introspection -------------------------------------------------

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.dims}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.dims}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return tmean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    # -- backward ------------------------------------------------------------

    def backward(self) -> None:
        """Reverse-mode pass from a scalar loss.

        Populates ``grad`` on every reachable tensor with ``requires_grad``.
        The tape is consumed: a second backward without a new forward raises.
        """
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.dims}")
        if self._backward_fn is None:
            if not self._parents:
                raise RuntimeError(
                    "backward() on a detached tensor: loss was not produced by recorded operations"
                )
            raise RuntimeError("graph already consumed; run a new forward pass before backward()")

        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            g = node.grad
            if g is None or node._backward_fn is None:
                continue
            _assert_finite(g, "gradient")
            parent_grads = node._backward_fn(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += pg
        # consume the tape so intermediates can be freed and reuse is an error
        for node in order:
            node._backward_fn = None
            node._parents = ()
            if node is not self and not node.requires_grad:
                node.grad = None


def _toposort(root: Tensor) -> list[Tensor]:
    """Reverse topological order of the tape reachable from ``root``."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p._backward_fn is not None:
                stack.append((p, False))
    order.reverse()
    return order


def _as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else TRAIN_DTYPE))


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    """Wrap an op result, recording a tape node iff a parent needs gradients."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._parents = ()
    out._backward_fn = None
    out.requires_grad = any(p.requires_grad for p in parents)
    _assert_finite(data, "op output")
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise arithmetic --------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def bwd(g):
        ga = _unbroadcast(g * b.data, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), bwd)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data / b.data

    def bwd(g):
        ga = _unbroadcast(g / b.data, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape) if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), bwd)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def square(a) -> Tensor:
    a = _as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = np.maximum(a.data, 0.0)
    # subgradient at 0 is 0
    return _make(out, (a,), lambda g: (g * (a.data > 0.0),))


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def clamp(a, lo: float, hi: float) -> Tensor:
    a = _as_tensor(a)
    out = np.clip(a.data, lo, hi)

    def bwd(g):
        return (g * ((a.data > lo) & (a.data < hi)),)

    return _make(out, (a,), bwd)


# -- reductions & shape ops --------------------------------------------------


def tsum(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    out = np.asarray(a.data.sum(axis=axis))

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy(),)

    return _make(out, (a,), bwd)


def tmean(a, axis=None) -> Tensor:
    a = _as_tensor(a)
    out = np.asarray(a.data.mean(axis=axis))
    n = a.data.size if axis is None else a.data.shape[axis]

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g / n, a.data.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape) / n,)

    return _make(out, (a,), bwd)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = a.data.reshape(shape)
    return _make(out, (a,), lambda g: (g.reshape(a.data.shape),))


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    parts = [_as_tensor(t) for t in tensors]
    if not parts:
        raise ValueError("concat of zero tensors")
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, splits, axis=axis))

    return _make(out, parts, bwd)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice [start, start+length) along one axis."""
    a = _as_tensor(a)
    if start < 0 or start + length > a.data.shape[axis]:
        raise ValueError(
            f"narrow out of range: axis {axis} start {start} length {length} of shape {a.dims}"
        )
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out = np.ascontiguousarray(a.data[index])

    def bwd(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _make(out, (a,), bwd)


# -- convolution -------------------------------------------------------------


def conv2d(x, kernel, bias=None) -> Tensor:
    """2D cross-correlation, stride 1, zero "same" padding.

    ``x``: [C, H, W]; ``kernel``: [O, C, kh, kw]; ``bias``: [O] or None.
    Output: [O, H, W].
    """
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if x.data.ndim != 3:
        raise ValueError(f"conv2d input must be [C,H,W], got {x.dims}")
    if kernel.data.ndim != 4:
        raise ValueError(f"conv2d kernel must be [O,C,kh,kw], got {kernel.dims}")
    c, h, w = x.data.shape
    oc, kc, kh, kw = kernel.data.shape
    if kc != c:
        raise ValueError(f"conv2d channel mismatch: input has {c}, kernel expects {kc}")
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.data.shape != (oc,):
            raise ValueError(f"conv2d bias must be [{oc}], got {bias.dims}")

    ph, pw = kh // 2, kw // 2

    def im2col(arr: np.ndarray) -> np.ndarray:
        # channel-outer layout (C*kh*kw, H*W) built offset by offset: every
        # copy is a contiguous-row 2D block, which is what numpy copies fast
        padded = np.pad(arr, ((0, 0), (ph, kh - 1 - ph), (pw, kw - 1 - pw)))
        cols = np.empty((c, kh, kw, h, w), dtype=arr.dtype)
        for i in range(kh):
            for j in range(kw):
                cols[:, i, j] = padded[:, i : i + h, j : j + w]
        return cols.reshape(c * kh * kw, h * w)

    cols = im2col(x.data)
    wmat = kernel.data.reshape(oc, c * kh * kw)
    out = (wmat @ cols).reshape(oc, h, w)
    if bias is not None:
        out += bias.data[:, None, None]

    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def bwd(g):
        g_mat = g.reshape(oc, h * w)
        g_kernel = None
        if kernel.requires_grad:
            g_kernel = (g_mat @ im2col(x.data).T).reshape(oc, c, kh, kw)
        g_x = None
        if x.requires_grad:
            g_cols = (wmat.T @ g_mat).reshape(c, kh, kw, h, w)
            g_pad = np.zeros((c, h + kh - 1, w + kw - 1), dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    g_pad[:, i : i + h, j : j + w] += g_cols[:, i, j]
            g_x = np.ascontiguousarray(g_pad[:, ph : ph + h, pw : pw + w])
        if bias is None:
            return g_x, g_kernel
        g_bias = g_mat.sum(axis=1) if bias.requires_grad else None
        return g_x, g_kernel, g_bias

    return _make(out, parents, bwd)


def blur2d(x, kernel2d: np.ndarray) -> Tensor:
    """Per-channel correlation with a fixed (non-trainable) 2D kernel.

    Zero "same" padding; used for Gaussian pyramids. ``kernel2d`` is a plain
    numpy array and receives no gradient.
    """
    x = _as_tensor(x)
    if x.data.ndim != 3:
        raise ValueError(f"blur2d input must be [C,H,W], got {x.dims}")
    k = np.asarray(kernel2d, dtype=x.data.dtype)
    kh, kw = k.shape
    ph, pw = kh // 2, kw // 2
    c, h, w = x.data.shape

    def corr(arr: np.ndarray, kk: np.ndarray) -> np.ndarray:
        padded = np.pad(arr, ((0, 0), (ph, kh - 1 - ph), (pw, kw - 1 - pw)))
        win = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
        return np.einsum("chwij,ij->chw", win, kk, optimize=True)

    out = corr(x.data, k)

    def bwd(g):
        # adjoint of same-padded correlation is correlation with the flipped kernel
        return (corr(g, k[::-1, ::-1]),)

    return _make(out, (x,), bwd)


# -- resampling --------------------------------------------------------------


def bilinear_sample(img, gx, gy) -> Tensor:
    """Sample ``img`` [C,H,W] at per-pixel positions, clamping to the border.

    ``gx``/``gy`` give the x (column) and y (row) source coordinate for every
    output pixel; both are [Hs,Ws]. Differentiable w.r.t. the image and both
    coordinate maps (coordinate gradients vanish where clamping is active).
    """
    img = _as_tensor(img)
    gx, gy = _as_tensor(gx), _as_tensor(gy)
    if img.data.ndim != 3:
        raise ValueError(f"bilinear_sample image must be [C,H,W], got {img.dims}")
    if gx.data.shape != gy.data.shape or gx.data.ndim != 2:
        raise ValueError(f"coordinate maps must be matching [H,W], got {gx.dims} / {gy.dims}")
    _assert_finite(gx.data, "sample x coordinates")
    _assert_finite(gy.data, "sample y coordinates")
    c, h, w = img.data.shape

    cx = np.clip(gx.data, 0.0, w - 1.0)
    cy = np.clip(gy.data, 0.0, h - 1.0)
    x0 = np.floor(cx).astype(np.intp)
    y0 = np.floor(cy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    # fx/fy in [0, 1); integer coordinates reproduce grid values exactly
    fx = cx - x0
    fy = cy - y0

    v00 = img.data[:, y0, x0]
    v01 = img.data[:, y0, x1]
    v10 = img.data[:, y1, x0]
    v11 = img.data[:, y1, x1]
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    out = top + fy * (bot - top)

    def bwd(g):
        g_img = None
        if img.requires_grad:
            w00 = (1.0 - fx) * (1.0 - fy)
            w01 = fx * (1.0 - fy)
            w10 = (1.0 - fx) * fy
            w11 = fx * fy
            flat = np.zeros((c, h * w), dtype=g.dtype)
            idx00 = (y0 * w + x0).ravel()
            idx01 = (y0 * w + x1).ravel()
            idx10 = (y1 * w + x0).ravel()
            idx11 = (y1 * w + x1).ravel()
            for ch in range(c):
                gc = g[ch]
                flat[ch] += np.bincount(idx00, weights=(w00 * gc).ravel(), minlength=h * w)
                flat[ch] += np.bincount(idx01, weights=(w01 * gc).ravel(), minlength=h * w)
                flat[ch] += np.bincount(idx10, weights=(w10 * gc).ravel(), minlength=h * w)
                flat[ch] += np.bincount(idx11, weights=(w11 * gc).ravel(), minlength=h * w)
            g_img = flat.reshape(c, h, w)
        g_gx = g_gy = None
        if gx.requires_grad or gy.requires_grad:
            dx = (1.0 - fy) * (v01 - v00) + fy * (v11 - v10)  # d out / d cx, per channel
            dy = (1.0 - fx) * (v10 - v00) + fx * (v11 - v01)
            inside_x = (gx.data > 0.0) & (gx.data < w - 1.0)
            inside_y = (gy.data > 0.0) & (gy.data < h - 1.0)
            if gx.requires_grad:
                g_gx = (g * dx).sum(axis=0) * inside_x
            if gy.requires_grad:
                g_gy = (g * dy).sum(axis=0) * inside_y
        return g_img, g_gx, g_gy

    return _make(out, (img, gx, gy), bwd)


def downsample2(x) -> Tensor:
    """Decimate [C,H,W] by taking every second row/column (top-left phase)."""
    x = _as_tensor(x)
    out = np.ascontiguousarray(x.data[:, ::2, ::2])

    def bwd(g):
        full = np.zeros_like(x.data)
        full[:, ::2, ::2] = g
        return (full,)

    return _make(out, (x,), bwd)


def upsample_bilinear(x, size: tuple[int, int]) -> Tensor:
    """Resize [C,h,w] to [C,H,W] by bilinear interpolation (half-pixel grid)."""
    x = _as_tensor(x)
    _, h, w = x.data.shape
    ht, wt = size
    ys = (np.arange(ht, dtype=x.data.dtype) + 0.5) * (h / ht) - 0.5
    xs = (np.arange(wt, dtype=x.data.dtype) + 0.5) * (w / wt) - 0.5
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return bilinear_sample(x, gx, gy)


def grid_2d(h: int, w: int, dtype=TRAIN_DTYPE) -> tuple[np.ndarray, np.ndarray]:
    """Integer pixel-center coordinate maps (gx, gy), each [h, w]."""
    gy, gx = np.meshgrid(np.arange(h, dtype=dtype), np.arange(w, dtype=dtype), indexing="ij")
    return gx, gy
