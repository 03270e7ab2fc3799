"""Slow reference implementations used as independent oracles in tests.

Nothing here imports the package's numeric code; everything is written with
explicit loops straight from the defining formulas.
"""

import math

import numpy as np

ANGLE_INDEX = {0: 0, 45: 1, 90: 2, 135: 3}


def conv3x3_loops(x, taps, bias=None):
    """out[o, y, x] = bias[o] + sum taps[o, i, dy, dx] * in[i, y+dy-1, x+dx-1]."""
    c, h, w = x.shape
    o_ch = taps.shape[0]
    out = np.zeros((o_ch, h, w))
    for o in range(o_ch):
        for yy in range(h):
            for xx in range(w):
                acc = 0.0 if bias is None else float(bias[o])
                for i in range(c):
                    for dy in range(3):
                        for dx in range(3):
                            sy, sx = yy + dy - 1, xx + dx - 1
                            if 0 <= sy < h and 0 <= sx < w:
                                acc += taps[o, i, dy, dx] * x[i, sy, sx]
                out[o, yy, xx] = acc
    return out


def mosaic_loops(stack, angles):
    _, h, w = stack.shape
    out = np.zeros((h, w))
    for yy in range(h):
        for xx in range(w):
            out[yy, xx] = stack[ANGLE_INDEX[angles[yy % 2][xx % 2]], yy, xx]
    return out


def bilinear_phase_oracle(m, angles):
    """Interior bilinear interpolation by explicit neighbour averaging.

    For channel ``a`` at pixel (y, x): a native sample is kept; if the samples
    of ``a`` lie left/right (or above/below), average those two; otherwise the
    four diagonal neighbours carry ``a`` and are averaged.
    """
    h, w = m.shape
    out = np.full((4, h, w), np.nan)
    for a, c in ANGLE_INDEX.items():
        for yy in range(1, h - 1):
            for xx in range(1, w - 1):
                if angles[yy % 2][xx % 2] == a:
                    out[c, yy, xx] = m[yy, xx]
                elif angles[yy % 2][(xx + 1) % 2] == a:
                    out[c, yy, xx] = 0.5 * (m[yy, xx - 1] + m[yy, xx + 1])
                elif angles[(yy + 1) % 2][xx % 2] == a:
                    out[c, yy, xx] = 0.5 * (m[yy - 1, xx] + m[yy + 1, xx])
                else:
                    out[c, yy, xx] = 0.25 * (m[yy - 1, xx - 1] + m[yy - 1, xx + 1]
                                             + m[yy + 1, xx - 1] + m[yy + 1, xx + 1])
    return out


def stokes_pixel(i0, i45, i90, i135, eps):
    s0 = 0.5 * (i0 + i45 + i90 + i135)
    s1 = i0 - i90
    s2 = i45 - i135
    dolp = math.sqrt(s1 * s1 + s2 * s2) / (s0 + eps)
    if s1 == 0 and s2 == 0:
        aolp = 0.0
    else:
        deg = math.degrees(0.5 * math.atan2(s2, s1))
        if deg < 0:
            deg += 180.0
        aolp = deg / 180.0
        if aolp >= 1.0:
            aolp = 0.0
    return s0, s1, s2, dolp, aolp


def stokes_loops(stack, eps):
    _, h, w = stack.shape
    maps = np.zeros((5, h, w))
    for yy in range(h):
        for xx in range(w):
            maps[:, yy, xx] = stokes_pixel(*(float(stack[c, yy, xx]) for c in range(4)), eps)
    return maps


def mean_abs(a, b):
    a = np.ravel(a)
    b = np.ravel(b)
    return sum(abs(float(p) - float(q)) for p, q in zip(a, b)) / len(a)


def mean_circ(ref, est):
    total = 0.0
    for r, e in zip(np.ravel(ref), np.ravel(est)):
        d = abs(float(r) - float(e))
        total += min(d, 1.0 - d)
    return total / np.size(ref)


def loss_terms_oracle(x_cr, x_rr, truth, w, eps, refine=True):
    """Weighted term sum written out one term at a time."""
    t = stokes_loops(truth, eps)
    c = stokes_loops(x_cr, eps)
    w1, w2, w3, w4 = w
    if refine:
        r = stokes_loops(x_rr, eps)
        return (w1 * (mean_abs(x_cr, truth) + mean_abs(c[0], t[0]))
                + w2 * (mean_abs(x_rr, truth) + mean_abs(r[0], t[0]))
                + w3 * (mean_abs(r[1], t[1]) + mean_abs(r[2], t[2]) + mean_abs(r[3], t[3]))
                + w4 * mean_circ(t[4], r[4]))
    return (w2 * (mean_abs(x_cr, truth) + mean_abs(c[0], t[0]))
            + w3 * (mean_abs(c[1], t[1]) + mean_abs(c[2], t[2]) + mean_abs(c[3], t[3]))
            + w4 * mean_circ(t[4], c[4]))


def network_oracle(plane, layers, m, n, refine=True):
    """Layer-by-layer forward pass built on :func:`conv3x3_loops`."""
    relu = lambda a: np.maximum(a, 0.0)  # noqa: E731
    angles = ((90, 45), (135, 0))
    h, w = plane.shape
    sparse = np.zeros((4, h, w))
    for yy in range(h):
        for xx in range(w):
            sparse[ANGLE_INDEX[angles[yy % 2][xx % 2]], yy, xx] = plane[yy, xx]
    k_bil = np.array([[0.25, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 0.25]])
    taps = np.zeros((4, 4, 3, 3))
    for ch in range(4):
        taps[ch, ch] = k_bil
    x_bi = conv3x3_loops(sparse, taps)
    f = relu(conv3x3_loops(plane[None], *layers[0]))
    for j in range(m):
        f = relu(conv3x3_loops(f, *layers[1 + j]))
    x_cr = x_bi + conv3x3_loops(f, *layers[1 + m])
    if not refine:
        return x_cr, x_cr
    g = relu(conv3x3_loops(x_cr, *layers[2 + m]))
    for j in range(n):
        g = relu(conv3x3_loops(g, *layers[3 + m + j]))
    return x_cr, x_cr + conv3x3_loops(g, *layers[3 + m + n])


def adam_scalar(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """The published ADAM recurrence for one scalar parameter."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
    return theta
