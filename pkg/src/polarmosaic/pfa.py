"""Polarizer filter array handling.

A polarization stack is a ``(4, H, W)`` array whose channels are the 0, 45,
90 and 135 degree intensity planes, in that order. Batched stacks are
``(N, 4, H, W)``.
"""

from dataclasses import dataclass

import numpy as np

from .tensorcore import ConvKernel3x3

ANGLES = (0, 45, 90, 135)
CHANNEL = {a: i for i, a in enumerate(ANGLES)}

BILINEAR_TAPS = np.array([[0.25, 0.5, 0.25],
                          [0.5, 1.0, 0.5],
                          [0.25, 0.5, 0.25]])


class DimensionError(ValueError):
    """Image dimensions are incompatible with the 2x2 filter period."""


@dataclass(frozen=True)
class PFAPattern:
    """2x2 orientation layout, indexed by ``(row % 2, col % 2)``."""

    angles: tuple = ((90, 45), (135, 0))

    def __post_init__(self):
        grid = tuple(tuple(int(a) for a in row) for row in self.angles)
        if len(grid) != 2 or any(len(row) != 2 for row in grid):
            raise ValueError(f"pattern must be 2x2, got {self.angles!r}")
        flat = [a for row in grid for a in row]
        if sorted(flat) != list(ANGLES):
            raise ValueError(f"pattern must use each of {ANGLES} exactly once, got {flat}")
        object.__setattr__(self, "angles", grid)

    @classmethod
    def parse(cls, text):
        """Parse the ``"90,45;135,0"`` form."""
        try:
            rows = [[int(v) for v in row.split(",")] for row in text.strip().split(";")]
        except ValueError as exc:
            raise ValueError(f"bad pattern string {text!r}") from exc
        return cls(tuple(tuple(r) for r in rows))

    def __str__(self):
        return ";".join(",".join(str(a) for a in row) for row in self.angles)

    def channel_map(self):
        """2x2 array of channel indices for each phase."""
        return np.array([[CHANNEL[a] for a in row] for row in self.angles])

    def label_grid(self, height, width):
        """Channel index of every pixel of an ``height x width`` sensor."""
        cmap = self.channel_map()
        yy = np.arange(height)[:, None] % 2
        xx = np.arange(width)[None, :] % 2
        return cmap[yy, xx]


DEFAULT_PATTERN = PFAPattern()


@dataclass(frozen=True, eq=False)
class MosaicImage:
    plane: np.ndarray
    pattern: PFAPattern = DEFAULT_PATTERN

    def __post_init__(self):
        plane = np.asarray(self.plane)
        if plane.ndim != 2:
            raise DimensionError(f"mosaic plane must be 2-D, got shape {plane.shape}")
        check_even(plane.shape)
        object.__setattr__(self, "plane", plane)

    @property
    def shape(self):
        return self.plane.shape


def check_even(shape):
    h, w = shape[-2:]
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise DimensionError(f"dimensions {h}x{w} must both be even (whole 2x2 filter periods)")


def as_stack(stack):
    stack = np.asarray(stack)
    if not np.issubdtype(stack.dtype, np.floating):
        stack = stack.astype(np.float64)
    if stack.ndim not in (3, 4) or stack.shape[-3] != 4:
        raise DimensionError(f"stack must be (4, H, W) or (N, 4, H, W), got {stack.shape}")
    return stack


def mosaic_array(stack, pattern=DEFAULT_PATTERN):
    """Sample a stack (or batch of stacks) through the filter array."""
    stack = as_stack(stack)
    check_even(stack.shape)
    h, w = stack.shape[-2:]
    out = np.empty(stack.shape[:-3] + (h, w), dtype=stack.dtype)
    for (r, c), a in np.ndenumerate(np.array(pattern.angles)):
        out[..., r::2, c::2] = stack[..., CHANNEL[int(a)], r::2, c::2]
    return out


def mosaic(stack, pattern=DEFAULT_PATTERN):
    return MosaicImage(mosaic_array(stack, pattern), pattern)


def sparse_expand_array(plane, pattern=DEFAULT_PATTERN):
    """Scatter mosaic samples into four zero-filled channels.

    ``plane`` may be ``(H, W)`` or ``(N, H, W)``; the channel axis is inserted
    before the spatial axes.
    """
    plane = np.asarray(plane)
    h, w = plane.shape[-2:]
    out = np.zeros(plane.shape[:-2] + (4, h, w), dtype=plane.dtype)
    for (r, c), a in np.ndenumerate(np.array(pattern.angles)):
        out[..., CHANNEL[int(a)], r::2, c::2] = plane[..., r::2, c::2]
    return out


def sparse_expand(m):
    return sparse_expand_array(m.plane, m.pattern)


def bilinear_kernel(dtype=np.float64):
    taps = np.zeros((4, 4, 3, 3), dtype=dtype)
    for c in range(4):
        taps[c, c] = BILINEAR_TAPS
    return ConvKernel3x3(taps)


def bilinear_array(plane, pattern=DEFAULT_PATTERN):
    """Bilinear demosaic of ``(H, W)`` or ``(N, H, W)`` mosaic data.

    Equivalent to ``conv3x3(sparse_expand(plane), bilinear_kernel())``; the
    kernel is diagonal across channels so it is applied depthwise, with taps
    accumulated in a fixed order.
    """
    sparse = sparse_expand_array(plane, pattern)
    if not np.issubdtype(sparse.dtype, np.floating):
        sparse = sparse.astype(np.float64)
    h, w = sparse.shape[-2:]
    pad = [(0, 0)] * (sparse.ndim - 2) + [(1, 1), (1, 1)]
    p = np.pad(sparse, pad)
    out = np.zeros_like(sparse)
    for dy in range(3):
        for dx in range(3):
            out += float(BILINEAR_TAPS[dy, dx]) * p[..., dy:dy + h, dx:dx + w]
    return out


def bilinear_demosaic(m):
    """Fixed-kernel bilinear interpolation of every channel; returns a stack."""
    return bilinear_array(m.plane, m.pattern)
