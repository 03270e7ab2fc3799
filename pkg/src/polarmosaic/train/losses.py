"""Joint reconstruction loss and its gradient with respect to the stacks.

Every ``_grad`` helper returns the derivative of its scalar loss with respect
to the estimate. Kinks use fixed conventions: ``d|x|/dx = 0`` at 0, and a tie
in the circular distance (``|d| == 0.5``) takes the direct branch.
"""

from dataclasses import astuple, dataclass

import numpy as np

from ..stokes import TRAIN_EPS, stokes_from_stack

_HALF_OVER_PI = 0.5 / np.pi


@dataclass(frozen=True)
class LossWeights:
    w1: float = 0.25
    w2: float = 0.5
    w3: float = 1.0
    w4: float = 0.1

    def __post_init__(self):
        if min(astuple(self)) < 0:
            raise ValueError(f"loss weights must be non-negative: {self}")


def _check(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def mae(a, b):
    _check(a, b)
    return float(np.mean(np.abs(np.asarray(a) - np.asarray(b))))


def mae_grad(est, ref):
    return np.sign(est - ref) / est.size


def mae_aolp(ref, est):
    """Mean wrap-around distance between normalized angles in [0, 1)."""
    _check(ref, est)
    d = np.abs(np.asarray(ref) - np.asarray(est))
    return float(np.mean(np.minimum(d, 1.0 - d)))


def mae_aolp_grad(est, ref):
    diff = est - ref
    d = np.abs(diff)
    s = np.sign(diff)
    return np.where(d <= 1.0 - d, s, -s) / est.size


def stokes_vjp(stack, eps, g_s0=0.0, g_s1=0.0, g_s2=0.0, g_dolp=0.0, g_aolp=0.0):
    """Pull gradients on (S0, S1, S2, DoLP, AoLP) back onto the four channels.

    DoLP and AoLP contribute nothing at pixels with ``S1 = S2 = 0``.
    """
    i0, i45, i90, i135 = (stack[..., c, :, :] for c in range(4))
    s0 = 0.5 * (i0 + i45 + i90 + i135)
    s1 = i0 - i90
    s2 = i45 - i135
    r2 = s1 * s1 + s2 * s2
    nz = r2 > 0
    r = np.sqrt(r2)
    r_safe = np.where(nz, r, 1.0)
    r2_safe = np.where(nz, r2, 1.0)
    den = s0 + eps

    g_s0 = g_s0 - g_dolp * r / (den * den)
    g_s1 = g_s1 + np.where(nz, g_dolp * s1 / (r_safe * den) - g_aolp * _HALF_OVER_PI * s2 / r2_safe, 0.0)
    g_s2 = g_s2 + np.where(nz, g_dolp * s2 / (r_safe * den) + g_aolp * _HALF_OVER_PI * s1 / r2_safe, 0.0)

    g = np.empty(stack.shape, dtype=np.float64)
    half = 0.5 * np.broadcast_to(g_s0, s0.shape)
    g[..., 0, :, :] = half + g_s1
    g[..., 1, :, :] = half + g_s2
    g[..., 2, :, :] = half - g_s1
    g[..., 3, :, :] = half - g_s2
    return g


def _term_weights(lw, refine):
    if refine:
        return {"cr_x": lw.w1, "cr_s0": lw.w1, "rr_x": lw.w2, "rr_s0": lw.w2,
                "rr_s1": lw.w3, "rr_s2": lw.w3, "rr_dolp": lw.w3, "rr_aolp": lw.w4}
    return {"cr_x": lw.w2, "cr_s0": lw.w2, "cr_s1": lw.w3, "cr_s2": lw.w3,
            "cr_dolp": lw.w3, "cr_aolp": lw.w4}


def _stack_terms(prefix, x, truth, ts, eps, weights, aolp_loss):
    """Raw loss terms comparing stack ``x`` with the truth, and the gradient
    of their weighted sum with respect to ``x``."""
    xs = stokes_from_stack(x, eps)
    w = {k[len(prefix) + 1:]: v for k, v in weights.items() if k.startswith(prefix)}
    terms = {"x": mae(x, truth), "s0": mae(xs.s0, ts.s0)}
    up = {"g_s0": w["s0"] * mae_grad(xs.s0, ts.s0)}
    if "dolp" in w:
        terms["s1"] = mae(xs.s1, ts.s1)
        terms["s2"] = mae(xs.s2, ts.s2)
        terms["dolp"] = mae(xs.dolp, ts.dolp)
        up["g_s1"] = w["s1"] * mae_grad(xs.s1, ts.s1)
        up["g_s2"] = w["s2"] * mae_grad(xs.s2, ts.s2)
        up["g_dolp"] = w["dolp"] * mae_grad(xs.dolp, ts.dolp)
        if aolp_loss == "circular":
            terms["aolp"] = mae_aolp(ts.aolp, xs.aolp)
            up["g_aolp"] = w["aolp"] * mae_aolp_grad(xs.aolp, ts.aolp)
        elif aolp_loss == "mae":
            terms["aolp"] = mae(xs.aolp, ts.aolp)
            up["g_aolp"] = w["aolp"] * mae_grad(xs.aolp, ts.aolp)
        else:
            raise ValueError(f"unknown AoLP loss {aolp_loss!r}")
    grad = w["x"] * mae_grad(x, truth) + stokes_vjp(x, eps, **up)
    return {f"{prefix}_{k}": v for k, v in terms.items()}, grad


def objective(x_cr, x_rr, truth, lw, eps=TRAIN_EPS, refine=True, aolp_loss="circular"):
    """Weighted loss, raw terms, and gradients with respect to ``x_cr`` and ``x_rr``.

    With ``refine`` the two-stage loss is used; without it the coarse-only
    variant, in which the coarse result carries all polarization terms and
    ``x_rr`` is ignored.
    """
    _check(x_cr, truth)
    _check(x_rr, truth)
    ts = stokes_from_stack(truth, eps)
    weights = _term_weights(lw, refine)
    terms, g_cr = _stack_terms("cr", x_cr, truth, ts, eps, weights, aolp_loss)
    if refine:
        t2, g_rr = _stack_terms("rr", x_rr, truth, ts, eps, weights, aolp_loss)
        terms.update(t2)
    else:
        g_rr = np.zeros_like(x_rr, dtype=np.float64)
    total = float(sum(weights[k] * terms[k] for k in weights))
    return total, terms, g_cr, g_rr


def loss_total(result, truth, lw=LossWeights(), eps=TRAIN_EPS, aolp_loss="circular"):
    """Two-stage loss of an inference result; returns ``(value, raw terms)``."""
    total, terms, _, _ = objective(result.x_cr, result.x_rr, truth, lw, eps, True, aolp_loss)
    return total, terms


def loss_no_refine(x_cr, truth, lw=LossWeights(), eps=TRAIN_EPS, aolp_loss="circular"):
    """Coarse-only loss (no refining stage, the w1 group dropped)."""
    total, terms, _, _ = objective(x_cr, x_cr, truth, lw, eps, False, aolp_loss)
    return total, terms
