"""Stokes parameters, DoLP/AoLP and the HSV rendering of AoLP."""

import warnings
from typing import NamedTuple

import numpy as np

from .pfa import as_stack

EVAL_EPS = 1e-12
TRAIN_EPS = 1e-8


class StokesMaps(NamedTuple):
    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    dolp: np.ndarray
    aolp: np.ndarray  # angle / 180 degrees, in [0, 1)


def normalized_aolp(s1, s2):
    """``atan2`` angle halved and wrapped to [0, 1), where 1.0 is 180 degrees.

    Pixels with ``s1 == s2 == 0`` get angle 0.
    """
    a = 0.5 * np.arctan2(s2, s1) / np.pi
    a = np.where(a < 0, a + 1.0, a)
    # -tiny + 1 rounds to 1.0, which is the same direction as 0
    a = np.where(a >= 1.0, 0.0, a)
    return np.where((s1 == 0) & (s2 == 0), 0.0, a)


def stokes_from_stack(stack, eps=EVAL_EPS):
    """Stokes maps of a ``(4, H, W)`` stack or ``(N, 4, H, W)`` batch."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    stack = as_stack(stack)
    i0, i45, i90, i135 = (stack[..., c, :, :] for c in range(4))
    s0 = 0.5 * (i0 + i45 + i90 + i135)
    s1 = i0 - i90
    s2 = i45 - i135
    dolp = np.sqrt(s1 * s1 + s2 * s2) / (s0 + eps)
    return StokesMaps(s0, s1, s2, dolp, normalized_aolp(s1, s2))


def wrap_unit(a):
    """Reduce angles (in units of 180 degrees) into [0, 1)."""
    a = np.mod(a, 1.0)
    return np.where(a >= 1.0, 0.0, a)


def aolp_to_rgb(aolp):
    """Map normalized AoLP to 8-bit RGB via hue = aolp * 360, S = V = 1.

    Values outside [0, 1) (and NaN) are clamped and reported with a
    ``RuntimeWarning``. Quantization rounds half away from zero.
    """
    a = np.asarray(aolp, dtype=np.float64)
    bad = ~((a >= 0) & (a < 1))
    n_bad = int(bad.sum())
    if n_bad:
        warnings.warn(f"{n_bad} AoLP values outside [0, 1) clamped", RuntimeWarning, stacklevel=2)
        a = np.where(np.isnan(a), 0.0, np.clip(a, 0.0, np.nextafter(1.0, 0.0)))
    h6 = a * 6.0
    sector = np.floor(h6)
    f = h6 - sector
    sector = sector.astype(np.int64) % 6
    one = np.ones_like(a)
    zero = np.zeros_like(a)
    q = 1.0 - f
    r = np.choose(sector, [one, q, zero, zero, f, one])
    g = np.choose(sector, [f, one, one, q, zero, zero])
    b = np.choose(sector, [zero, zero, f, one, one, q])
    rgb = np.stack([r, g, b], axis=-1)
    return quantize_u8(rgb)


def quantize_u8(x):
    """Scale [0, 1] to 0..255 with round-half-away-from-zero, clipping outside."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(x + 0.5).astype(np.uint8)
