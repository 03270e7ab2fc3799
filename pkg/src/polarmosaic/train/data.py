"""Patch sampling and flip/rotation augmentation of ground-truth stacks."""

import numpy as np

from ..pfa import DEFAULT_PATTERN, DimensionError, as_stack, mosaic

TRANSFORMS = ("identity", "hflip", "vflip", "rot90", "rot180", "rot270")

# Channel sources after the geometric transform. Mirroring maps an angle
# theta to -theta (45 <-> 135); a quarter turn maps theta to theta + 90
# (0 <-> 90, 45 <-> 135); a half turn leaves every angle unchanged.
_PHYSICAL_PERM = {
    "identity": (0, 1, 2, 3),
    "hflip": (0, 3, 2, 1),
    "vflip": (0, 3, 2, 1),
    "rot90": (2, 3, 0, 1),
    "rot180": (0, 1, 2, 3),
    "rot270": (2, 3, 0, 1),
}


def _geometric(a, transform):
    if transform == "identity":
        return a
    if transform == "hflip":
        return a[..., :, ::-1]
    if transform == "vflip":
        return a[..., ::-1, :]
    k = {"rot90": 1, "rot180": 2, "rot270": 3}[transform]
    return np.rot90(a, k, axes=(-2, -1))


def augment(truth, transform, physical=True):
    """Flip or rotate every plane of a stack.

    With ``physical`` the channels are also permuted so each plane still holds
    the intensity behind its nominal polarizer angle; without it only the
    geometry changes.
    """
    if transform not in TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}")
    out = _geometric(as_stack(truth), transform)
    if physical:
        out = out[..., list(_PHYSICAL_PERM[transform]), :, :]
    return np.ascontiguousarray(out)


def transform_plane(plane, transform):
    """Geometric part of :func:`augment` applied to a single map."""
    return np.ascontiguousarray(_geometric(np.asarray(plane), transform))


def random_offset(shape, size, rng):
    h, w = shape[-2:]
    if size > h or size > w:
        raise DimensionError(f"patch {size} exceeds image {h}x{w}")
    if size % 2:
        raise DimensionError(f"patch size {size} must be even")
    oy = 2 * int(rng.integers(0, (h - size) // 2 + 1))
    ox = 2 * int(rng.integers(0, (w - size) // 2 + 1))
    return oy, ox


def crop(stack, offset, size):
    oy, ox = offset
    return stack[..., oy:oy + size, ox:ox + size]


def sample_patch(stack, size, rng, pattern=DEFAULT_PATTERN):
    """Crop a random even-aligned square from ``stack`` and mosaic it.

    Returns ``(MosaicImage, truth patch)``.
    """
    stack = as_stack(stack)
    patch = np.ascontiguousarray(crop(stack, random_offset(stack.shape, size, rng), size))
    return mosaic(patch, pattern), patch
