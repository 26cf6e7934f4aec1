"""Network building blocks with explicit forward/backward passes.

Everything operates on (batch, channels, height, width) float arrays and
runs in whatever dtype the weights were created with; float64 weights
give the precision needed for finite-difference gradient checks.

Convolutions are stride 1 with odd kernels and "same" padding: vertical
padding is zero-filled, horizontal padding wraps around, because the
image is a 360-degree cylinder whose left and right edges are neighbors.
"""

from __future__ import annotations

import numpy as np



class Parameter:
    """A learnable array plus its accumulated gradient."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    def zero_grad(self):
        self.grad[...] = 0


class Conv2d:
    """2-D convolution (cross-correlation), cylindrical in the width axis."""

    def __init__(self, in_channels: int, out_channels: int, kh: int, kw: int,
                 dtype=np.float32, name: str = "conv"):
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError("kernel dims must be odd to preserve spatial size")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kh, self.kw = kh, kw
        self.kernel = Parameter(f"{name}.kernel", np.zeros((out_channels, in_channels, kh, kw), dtype=dtype))
        self.bias = Parameter(f"{name}.bias", np.zeros(out_channels, dtype=dtype))
        self._x = None
        self._cols = None
        # Reused scratch for the large per-call intermediates; repeated
        # fresh allocations of tens of MB dominate runtime otherwise.
        # One layer instance is therefore not safe for concurrent calls.
        self._scratch_bufs = {}

    @property
    def fan_in(self) -> int:
        return self.in_channels * self.kh * self.kw

    def parameters(self) -> list[Parameter]:
        return [self.kernel, self.bias]

    def _scratch(self, key: str, shape, dtype) -> np.ndarray:
        buf = self._scratch_bufs.get(key)
        if buf is None or buf.shape != shape or buf.dtype != dtype:
            buf = np.empty(shape, dtype)
            self._scratch_bufs[key] = buf
        return buf

    def _pad(self, x: np.ndarray) -> np.ndarray:
        b, ci, h, w = x.shape
        ph, pw = self.kh // 2, self.kw // 2
        if pw > w:
            raise ValueError(f"width {w} too small for cylindrical padding {pw}")
        xp = self._scratch("pad", (b, ci, h + 2 * ph, w + 2 * pw), x.dtype)
        if ph:
            xp[:, :, :ph] = 0
            xp[:, :, h + ph:] = 0
        xp[:, :, ph:ph + h, pw:pw + w] = x
        if pw:
            xp[:, :, ph:ph + h, :pw] = x[..., -pw:]
            xp[:, :, ph:ph + h, w + pw:] = x[..., :pw]
        return xp

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        """(b, ci*kh*kw, h*w) patch matrix, gathered by whole-slice copies."""
        b, ci, h, w = x.shape
        if self.kh == self.kw == 1:
            return x.reshape(b, ci, h * w)
        xp = self._pad(x)
        cols = self._scratch("cols", (b, ci, self.kh * self.kw, h, w), x.dtype)
        for k in range(self.kh):
            for l in range(self.kw):
                cols[:, :, k * self.kw + l] = xp[:, :, k:k + h, l:l + w]
        return cols.reshape(b, ci * self.kh * self.kw, h * w)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(f"expected (b, {self.in_channels}, h, w) input, got {x.shape}")
        b, _, h, w = x.shape
        self._x = x
        self._cols = self._im2col(x)  # kept for the matching backward pass
        kmat = self.kernel.value.reshape(self.out_channels, -1)
        out = np.matmul(kmat, self._cols)  # (b, out, h*w) batched GEMM
        out += self.bias.value[:, None]
        return out.reshape(b, self.out_channels, h, w)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x = self._x
        b, ci, h, w = x.shape
        if grad_out.shape != (b, self.out_channels, h, w):
            raise ValueError(f"gradient shape {grad_out.shape} does not match forward output")
        kh, kw = self.kh, self.kw
        ph, pw = kh // 2, kw // 2
        g3 = np.ascontiguousarray(grad_out).reshape(b, self.out_channels, h * w)
        cols = self._cols
        self.kernel.grad += np.matmul(g3, cols.transpose(0, 2, 1)).sum(axis=0).reshape(
            self.kernel.value.shape)
        self.bias.grad += g3.sum(axis=(0, 2))

        kmat = self.kernel.value.reshape(self.out_channels, -1)
        if kh == kw == 1:
            return np.matmul(kmat.T, g3).reshape(b, ci, h, w)
        gcols = self._scratch("gcols", (b, ci * kh * kw, h * w), x.dtype)
        np.matmul(kmat.T, g3, out=gcols)
        gcols = gcols.reshape(b, ci, kh * kw, h, w)
        grad_xp = self._scratch("gpad", (b, ci, h + 2 * ph, w + 2 * pw), x.dtype)
        grad_xp[...] = 0
        for k in range(kh):
            for l in range(kw):
                grad_xp[:, :, k:k + h, l:l + w] += gcols[:, :, k * kw + l]
        grad_x = grad_xp[:, :, ph:ph + h, pw:pw + w].copy()
        if pw:
            grad_x[..., w - pw:] += grad_xp[:, :, ph:ph + h, :pw]
            grad_x[..., :pw] += grad_xp[:, :, ph:ph + h, w + pw:]
        return grad_x


class ReLU:
    def __init__(self):
        self._mask = None

    @property
    def mask(self) -> np.ndarray:
        """Activation pattern of the last forward pass (True = passing)."""
        return self._mask

    def parameters(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, x.dtype.type(0))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return np.where(self._mask, grad_out, grad_out.dtype.type(0))


def concat_channels(*xs: np.ndarray) -> np.ndarray:
    """Concatenate feature maps along the channel axis, order preserved."""
    base = xs[0].shape
    for x in xs[1:]:
        if x.shape[0] != base[0] or x.shape[2:] != base[2:]:
            raise ValueError("concat inputs must share batch and spatial dims")
    return np.concatenate(xs, axis=1)


def split_channels(grad: np.ndarray, widths: list[int]) -> list[np.ndarray]:
    """Split a gradient back along the boundaries used by concat_channels."""
    if sum(widths) != grad.shape[1]:
        raise ValueError("split widths must sum to the channel count")
    return list(np.split(grad, np.cumsum(widths)[:-1], axis=1))


def softmax_cross_entropy(logits: np.ndarray, target: np.ndarray, ignore: int = 255):
    """Mean per-pixel cross-entropy with an ignored label id.

    Args:
        logits: (b, C, h, w) scores.
        target: (b, h, w) integer class ids; `ignore` pixels contribute
            neither loss nor gradient.

    Returns:
        (loss, grad_logits); loss is 0 with a zero gradient when every
        pixel is ignored.
    """
    b, c, h, w = logits.shape
    if target.shape != (b, h, w):
        raise ValueError(f"target shape {target.shape} does not match logits {logits.shape}")
    valid = target != ignore
    n = int(valid.sum())
    if n == 0:
        return logits.dtype.type(0.0), np.zeros_like(logits)

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(denom)

    safe_target = np.where(valid, target, 0).astype(np.int64)
    picked = np.take_along_axis(log_probs, safe_target[:, None], axis=1)[:, 0]
    loss = -(picked[valid].sum()) / n

    grad = exp / denom
    bi = np.arange(b)[:, None, None]
    hi = np.arange(h)[None, :, None]
    wi = np.arange(w)[None, None, :]
    grad[bi, safe_target, hi, wi] -= 1.0
    grad *= valid[:, None] / n
    return float(loss), grad


def softmax(logits: np.ndarray) -> np.ndarray:
    """Channel-axis softmax of (b, C, h, w) logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)
