"""Dense plane primitives: 3x3 "same" convolution and ReLU.

Arrays are channel-planar and row-major. A plane is a 2-D array ``(H, W)``,
a feature map is ``(C, H, W)`` and a batch of feature maps is ``(N, C, H, W)``.

Two convolution paths exist. The default lowers the convolution to a single
GEMM over im2col columns. The deterministic path accumulates taps in a fixed
order with plain element-wise multiply/add, so every output sample is computed
by the same floating point sequence regardless of image size, position, BLAS
build or thread count.
"""

import contextlib
from dataclasses import dataclass

import numpy as np

# im2col buffers above this many elements are built in row bands
_MAX_COL_ELEMENTS = 1 << 24

# OpenBLAS picks different micro-kernels for the ragged last columns of a
# product and a separate small-matrix routine below roughly 1M multiply-adds;
# both change the summation order of an output column. Padding the column
# count to a multiple of _COL_QUANTUM and at least _MIN_GEMM_WORK / (o * k)
# keeps every column on the same kernel whatever the image size.
_COL_QUANTUM = 64
_MIN_GEMM_WORK = 1 << 22


def _matmul_cols(wmat, cols):
    o, k = wmat.shape
    n = cols.shape[1]
    target = max(n, -(-_MIN_GEMM_WORK // (o * k)))
    target += -target % _COL_QUANTUM
    if target > n:
        cols = np.concatenate([cols, np.zeros((k, target - n), dtype=cols.dtype)], axis=1)
        return (wmat @ cols)[:, :n]
    return wmat @ cols

_deterministic = False


def set_deterministic(flag):
    global _deterministic
    _deterministic = bool(flag)


def is_deterministic():
    return _deterministic


@contextlib.contextmanager
def deterministic(flag=True):
    """Temporarily switch the convolution path."""
    prev = _deterministic
    set_deterministic(flag)
    try:
        yield
    finally:
        set_deterministic(prev)


class ContractError(ValueError):
    """An operand violates a shape or channel contract."""


@dataclass(frozen=True, eq=False)
class ConvKernel3x3:
    """Weights of one 3x3 convolution layer.

    ``taps`` has shape ``(out_channels, in_channels, 3, 3)``; ``bias`` is
    ``(out_channels,)`` or ``None``.
    """

    taps: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        taps = np.asarray(self.taps)
        if taps.ndim != 4 or taps.shape[2:] != (3, 3):
            raise ContractError(f"taps must be (out, in, 3, 3), got {taps.shape}")
        object.__setattr__(self, "taps", taps)
        if self.bias is not None:
            bias = np.asarray(self.bias)
            if bias.shape != (taps.shape[0],):
                raise ContractError(
                    f"bias length {bias.shape} does not match {taps.shape[0]} output channels"
                )
            object.__setattr__(self, "bias", bias)

    @property
    def out_channels(self):
        return self.taps.shape[0]

    @property
    def in_channels(self):
        return self.taps.shape[1]

    @property
    def size(self):
        n = self.taps.size
        return n + (0 if self.bias is None else self.bias.size)

    def astype(self, dtype):
        bias = None if self.bias is None else self.bias.astype(dtype)
        return ConvKernel3x3(self.taps.astype(dtype), bias)


def identity_kernel(channels=1):
    taps = np.zeros((channels, channels, 3, 3))
    for c in range(channels):
        taps[c, c, 1, 1] = 1.0
    return ConvKernel3x3(taps)


def _as_batch(x):
    x = np.asarray(x)
    if x.ndim == 2:
        return x[None, None], 2
    if x.ndim == 3:
        return x[None], 3
    if x.ndim == 4:
        return x, 4
    raise ContractError(f"expected (H, W), (C, H, W) or (N, C, H, W), got {x.shape}")


def _restore(y, ndim):
    if ndim == 4:
        return y
    return y[0]


def im2col(x):
    """Columns of 3x3 zero-padded neighbourhoods.

    ``x`` is ``(N, C, H, W)``; the result is ``(C * 9, N * H * W)`` with rows
    ordered ``(c, dy, dx)`` to match ``taps.reshape(out, C * 9)``.
    """
    n, c, h, w = x.shape
    p = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((c, 9, n, h, w), dtype=x.dtype)
    for dy in range(3):
        for dx in range(3):
            cols[:, dy * 3 + dx] = p[:, :, dy:dy + h, dx:dx + w].transpose(1, 0, 2, 3)
    return cols.reshape(c * 9, n * h * w)


def col2im(cols, shape):
    """Adjoint of :func:`im2col`: scatter-add columns back onto ``shape``."""
    n, c, h, w = shape
    cols = cols.reshape(c, 9, n, h, w)
    p = np.zeros((n, c, h + 2, w + 2), dtype=cols.dtype)
    for dy in range(3):
        for dx in range(3):
            p[:, :, dy:dy + h, dx:dx + w] += cols[:, dy * 3 + dx].transpose(1, 0, 2, 3)
    return p[:, :, 1:-1, 1:-1]


def _conv_gemm(x, kernel):
    n, c, h, w = x.shape
    o = kernel.out_channels
    wmat = kernel.taps.reshape(o, c * 9).astype(x.dtype, copy=False)
    band = max(1, _MAX_COL_ELEMENTS // max(1, c * 9 * n * w))
    if band >= h:
        out = _matmul_cols(wmat, im2col(x)).reshape(o, n, h, w).transpose(1, 0, 2, 3)
    else:
        out = np.empty((n, o, h, w), dtype=x.dtype)
        p = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        for r0 in range(0, h, band):
            r1 = min(h, r0 + band)
            # a band of padded rows is a valid-mode conv of rows r0..r1
            sub = p[:, :, r0:r1 + 2, :]
            rows = r1 - r0
            cols = np.empty((c, 9, n, rows, w), dtype=x.dtype)
            for dy in range(3):
                for dx in range(3):
                    cols[:, dy * 3 + dx] = sub[:, :, dy:dy + rows, dx:dx + w].transpose(1, 0, 2, 3)
            res = _matmul_cols(wmat, cols.reshape(c * 9, n * rows * w))
            out[:, :, r0:r1] = res.reshape(o, n, rows, w).transpose(1, 0, 2, 3)
    return np.ascontiguousarray(out)


def _conv_direct(x, kernel):
    n, c, h, w = x.shape
    o = kernel.out_channels
    taps = kernel.taps.astype(x.dtype, copy=False)
    p = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, o, h, w), dtype=x.dtype)
    for i in range(c):
        for dy in range(3):
            for dx in range(3):
                out += taps[None, :, i, dy, dx, None, None] * p[:, None, i, dy:dy + h, dx:dx + w]
    return out


def conv3x3(x, kernel, deterministic=None):
    """Zero-padded 3x3 convolution with "same" output size.

    ``out[o, y, x] = bias[o] + sum_{i, dy, dx} taps[o, i, dy, dx] * in[i, y+dy-1, x+dx-1]``
    with out-of-bounds reads contributing zero. Accepts ``(C, H, W)`` or
    ``(N, C, H, W)``; a bare ``(H, W)`` plane is treated as one channel.
    """
    xb, ndim = _as_batch(x)
    if xb.shape[1] != kernel.in_channels:
        raise ContractError(
            f"input has {xb.shape[1]} channels, kernel expects {kernel.in_channels}"
        )
    if not np.issubdtype(xb.dtype, np.floating):
        xb = xb.astype(np.float64)
    use_direct = _deterministic if deterministic is None else deterministic
    out = _conv_direct(xb, kernel) if use_direct else _conv_gemm(xb, kernel)
    if kernel.bias is not None:
        out += kernel.bias.astype(out.dtype, copy=False)[None, :, None, None]
    if ndim == 2:
        return out[0]
    return _restore(out, ndim)


def conv3x3_backward(x, kernel, grad_out, need_input_grad=True):
    """Gradients of :func:`conv3x3` with respect to input, taps and bias.

    Returns ``(grad_x, grad_taps, grad_bias)``; ``grad_x`` is ``None`` when
    ``need_input_grad`` is false and ``grad_bias`` is ``None`` for bias-free
    kernels.
    """
    xb, ndim = _as_batch(x)
    gb, _ = _as_batch(grad_out)
    n, c, h, w = xb.shape
    o = kernel.out_channels
    cols = im2col(xb)
    g = gb.transpose(1, 0, 2, 3).reshape(o, n * h * w)
    grad_taps = (g @ cols.T).reshape(kernel.taps.shape)
    grad_bias = None if kernel.bias is None else g.sum(axis=1)
    grad_x = None
    if need_input_grad:
        wmat = kernel.taps.reshape(o, c * 9)
        grad_x = col2im(wmat.T @ g, xb.shape)
        grad_x = _restore(grad_x, ndim) if ndim != 2 else grad_x[0, 0]
    return grad_x, grad_taps, grad_bias


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(pre, grad_out):
    # derivative at exactly zero is taken as 0
    return np.where(pre > 0, grad_out, 0.0)
