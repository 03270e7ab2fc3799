"""Reverse-mode gradients of the training loss through the network."""

import numpy as np

from ..ppdn import PPDNWeights, forward_batch, split_layers
from ..stokes import TRAIN_EPS
from ..tensorcore import ConvKernel3x3, conv3x3_backward, relu_backward
from .losses import LossWeights, objective


def _backprop(cache, weights, cfg, g_cr, g_rr):
    g = split_layers(weights, cfg)
    grads = {}

    def conv_back(x, name, layer, grad_out, need_input=True):
        gx, gw, gb = conv3x3_backward(x, layer, grad_out, need_input)
        grads[name] = ConvKernel3x3(gw, gb)
        return gx

    g_cr = g_cr.copy()
    if cfg.refine:
        racts, rpre = cache["racts"], cache["rpre"]
        gh = conv_back(racts[-1], ("refine_out",), g["refine_out"], g_rr)
        for j in reversed(range(cfg.n)):
            gp = relu_backward(rpre[j + 1], gh)
            gh = conv_back(racts[j], ("refine", j), g["refine"][j], gp)
        gp = relu_backward(rpre[0], gh)
        g_cr += g_rr + conv_back(cache["x_cr"], ("refine_in",), g["refine_in"], gp)

    acts, pre = cache["acts"], cache["pre"]
    gh = conv_back(acts[-1], ("recon_out",), g["recon_out"], g_cr)
    for j in reversed(range(cfg.m)):
        gp = relu_backward(pre[j + 1], gh)
        gh = conv_back(acts[j], ("blocks", j), g["blocks"][j], gp)
    gp = relu_backward(pre[0], gh)
    conv_back(cache["y"], ("head",), g["head"], gp, need_input=False)

    order = [("head",)] + [("blocks", j) for j in range(cfg.m)] + [("recon_out",)]
    if cfg.refine:
        order += [("refine_in",)] + [("refine", j) for j in range(cfg.n)] + [("refine_out",)]
    return PPDNWeights([grads[key] for key in order])


def loss_and_grad(planes, pattern, truth, weights, cfg, lw=LossWeights(), eps=TRAIN_EPS,
                  aolp_loss="circular"):
    """Loss of a batch and its gradient with respect to every weight and bias.

    ``planes`` is ``(N, H, W)`` mosaic data and ``truth`` the ``(N, 4, H, W)``
    ground truth. The two-stage loss is used when ``cfg.refine`` is set and
    the coarse-only loss otherwise. Returns ``(loss, terms, grads, (x_cr, x_rr))``.
    """
    x_cr, x_rr, cache = forward_batch(planes, pattern, weights, cfg, keep_cache=True)
    loss, terms, g_cr, g_rr = objective(x_cr, x_rr, truth, lw, eps, cfg.refine, aolp_loss)
    grads = _backprop(cache, weights, cfg, g_cr, g_rr)
    return loss, terms, grads, (x_cr, x_rr)


def backward(m, weights, cfg, truth, lw=LossWeights(), eps=TRAIN_EPS, aolp_loss="circular"):
    """Gradient of the training loss for one mosaic image and its ``(4, H, W)`` truth."""
    planes = np.asarray(m.plane, dtype=np.float64)[None]
    _, _, grads, _ = loss_and_grad(planes, m.pattern, np.asarray(truth, dtype=np.float64)[None],
                                   weights, cfg, lw, eps, aolp_loss)
    return grads
