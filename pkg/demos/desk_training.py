"""Train the small network for a few hundred steps on synthetic scenes and
compare it with bilinear reconstruction on held-out scenes.

    python demos/desk_training.py [iters]

Takes a few minutes for the default 600 steps on one core.
"""

import sys

import numpy as np

from polarmosaic.metrics import evaluate
from polarmosaic.pfa import bilinear_demosaic, mosaic
from polarmosaic.ppdn import forward, preset
from polarmosaic.synthetic import textured_scene
from polarmosaic.train import TrainConfig, smoothed, train_loop

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 600
rng = np.random.default_rng(123)
scenes = [textured_scene(96, 96, rng) for _ in range(8)]
train, test = scenes[:6], scenes[6:]

net = preset("ppdn")
cfg = TrainConfig(patch=32, batch=4, total_iters=iters, decay_every=max(1, iters // 2), log_every=0, seed=7)
res = train_loop(train, net, cfg, progress=None)
curve = smoothed(res.losses, window=50)
print(f"loss {curve[0]:.4f} -> {curve[-1]:.4f} over {iters} steps")


def mean_table(fn):
    rows = [evaluate(t, fn(mosaic(t))).psnr for t in test]
    return {k: np.mean([r[k] for r in rows]) for k in rows[0]}


bil = mean_table(bilinear_demosaic)
ours = mean_table(lambda m: forward(m, res.weights, net).x_rr)
print(f"{'':6s}{'bilinear':>10s}{'network':>10s}")
for k in bil:
    print(f"{k:6s}{bil[k]:10.2f}{ours[k]:10.2f}")
