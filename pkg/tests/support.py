"""Shared drivers for the gradient check and the desk-scale training runs."""

import numpy as np

from polarmosaic.metrics import evaluate
from polarmosaic.pfa import DEFAULT_PATTERN, bilinear_demosaic, mosaic, mosaic_array
from polarmosaic.ppdn import PPDNConfig, PPDNWeights, forward, forward_batch, init_weights
from polarmosaic.synthetic import textured_scene
from polarmosaic.tensorcore import ConvKernel3x3
from polarmosaic.train import LossWeights, TrainConfig, loss_and_grad, objective, train_loop
from polarmosaic.train.optim import from_params, params


def gradient_check(cfg=PPDNConfig(1, 1, 4), size=8, seed=1, h=1e-5, aolp_loss="circular"):
    """Largest relative error between analytic and central-difference gradients.

    Every weight and bias is probed. Relative error is
    ``|a - fd| / max(|a|, |fd|, 1e-8)`` so entries whose true gradient is
    numerically zero are compared absolutely.
    """
    rng = np.random.default_rng(seed)
    w = init_weights(cfg, rng, output_scale=1.0)
    w = PPDNWeights([ConvKernel3x3(l.taps, 0.05 * rng.standard_normal(l.out_channels))
                     for l in w.layers])
    truth = textured_scene(size, size, rng)[None]
    planes = mosaic_array(truth)
    lw = LossWeights()
    _, _, grads, _ = loss_and_grad(planes, DEFAULT_PATTERN, truth, w, cfg, lw, aolp_loss=aolp_loss)

    def loss(ps):
        x_cr, x_rr, _ = forward_batch(planes, DEFAULT_PATTERN, from_params(ps), cfg)
        return objective(x_cr, x_rr, truth, lw, refine=cfg.refine, aolp_loss=aolp_loss)[0]

    ps, gs = params(w), params(grads)
    worst, count = 0.0, 0
    for li, p in enumerate(ps):
        for idx in np.ndindex(p.shape):
            probe = [q.copy() for q in ps]
            probe[li][idx] += h
            up = loss(probe)
            probe[li][idx] -= 2 * h
            down = loss(probe)
            fd = (up - down) / (2 * h)
            a = gs[li][idx]
            worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-8))
            count += 1
    return worst, count


def desk_scenes(seed=123, count=8, size=96):
    rng = np.random.default_rng(seed)
    scenes = [textured_scene(size, size, rng) for _ in range(count)]
    return scenes[:6], scenes[6:]


def mean_psnr(test, reconstruct):
    reports = [evaluate(t, reconstruct(mosaic(t))).psnr for t in test]
    return {k: float(np.mean([r[k] for r in reports])) for k in ("s0", "dolp", "aolp")}


def bilinear_scores(test):
    return mean_psnr(test, bilinear_demosaic)


def desk_train(train, test, net_cfg, aolp_loss="circular", iters=2000, seed=7):
    """2,000 ADAM steps, batch 4, 32x32 patches, one 10x rate drop halfway."""
    cfg = TrainConfig(patch=32, batch=4, total_iters=iters, decay_every=iters // 2,
                      log_every=0, seed=seed, aolp_loss=aolp_loss)
    res = train_loop(train, net_cfg, cfg)
    return mean_psnr(test, lambda m: forward(m, res.weights, net_cfg).x_rr), res
