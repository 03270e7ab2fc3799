"""Synthetic ground-truth polarization scenes built from Malus's law."""

import numpy as np

from .pfa import ANGLES


def malus_intensities(s0, dolp, theta_deg):
    """Four-angle intensities of partially linearly polarized light.

    ``I_a = 0.5 * s0 * (1 + dolp * cos(2 (theta - a)))``; with ``s0 = 1`` and
    ``dolp = 1`` this is ``cos^2(theta - a)``.
    """
    s0 = np.asarray(s0, dtype=np.float64)
    dolp = np.asarray(dolp, dtype=np.float64)
    theta = np.deg2rad(np.asarray(theta_deg, dtype=np.float64))
    planes = [0.5 * s0 * (1.0 + dolp * np.cos(2.0 * (theta - np.deg2rad(a)))) for a in ANGLES]
    return np.stack(np.broadcast_arrays(*planes), axis=-3)


def malus_stack(theta_deg, shape=(8, 8), amplitude=1.0):
    """Uniform scene of fully polarized light at ``theta_deg``: ``I_a = A cos^2(theta - a)``."""
    theta = np.deg2rad(theta_deg)
    planes = [np.full(shape, amplitude * np.cos(theta - np.deg2rad(a)) ** 2) for a in ANGLES]
    return np.stack(planes)


def _smooth_field(rng, h, w, n_waves, max_freq):
    yy, xx = np.mgrid[0:h, 0:w]
    field = np.zeros((h, w))
    for _ in range(n_waves):
        fy, fx = rng.uniform(-max_freq, max_freq, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        field += rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * (fy * yy + fx * xx) + phase)
    field -= field.min()
    span = field.max()
    return field / span if span > 0 else field


def _region_masks(rng, h, w, n_regions):
    yy, xx = np.mgrid[0:h, 0:w]
    masks = []
    for _ in range(n_regions):
        kind = rng.integers(3)
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        if kind == 0:
            r = rng.uniform(0.1, 0.35) * min(h, w)
            m = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        elif kind == 1:
            hh, ww = rng.uniform(0.15, 0.5, size=2) * (h, w)
            m = (np.abs(yy - cy) < hh / 2) & (np.abs(xx - cx) < ww / 2)
        else:
            # oblique band
            ang = rng.uniform(0, np.pi)
            d = (yy - cy) * np.cos(ang) - (xx - cx) * np.sin(ang)
            m = np.abs(d) < rng.uniform(0.05, 0.2) * min(h, w)
        masks.append(m)
    return masks


def textured_scene(height, width, rng, n_regions=8):
    """Random piecewise-smooth scene with sharp material edges.

    Each region gets its own intensity, DoLP and angle of polarization; fine
    sinusoidal texture is added to the intensity. Angles cover the whole
    [0, 180) range, including the wrap-around at 0/180 degrees. Returns a
    ``(4, height, width)`` stack with values in [0, 1].
    """
    h, w = height, width
    s0 = 0.2 + 0.5 * _smooth_field(rng, h, w, 3, 0.03)
    dolp = 0.1 + 0.3 * _smooth_field(rng, h, w, 2, 0.02)
    theta = rng.uniform(0, 180) + 40.0 * (_smooth_field(rng, h, w, 2, 0.02) - 0.5)
    for m in _region_masks(rng, h, w, n_regions):
        s0 = np.where(m, rng.uniform(0.1, 0.8) + 0.1 * _smooth_field(rng, h, w, 2, 0.05), s0)
        dolp = np.where(m, rng.uniform(0.1, 0.8), dolp)
        theta = np.where(m, rng.uniform(0, 180) + 20.0 * (_smooth_field(rng, h, w, 1, 0.03) - 0.5), theta)
    s0 = s0 + 0.08 * (_smooth_field(rng, h, w, 4, 0.25) - 0.5)
    s0 = np.clip(s0, 0.02, 1.0)
    dolp = np.clip(dolp, 0.0, 1.0)
    theta = np.mod(theta, 180.0)
    return np.clip(malus_intensities(s0, dolp, theta), 0.0, 1.0)
