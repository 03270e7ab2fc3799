"""Sample a synthetic polarization scene through the filter array and
reconstruct it with the fixed bilinear kernel.

    python demos/mosaic_and_bilinear.py
"""

import numpy as np

from polarmosaic.metrics import evaluate
from polarmosaic.pfa import DEFAULT_PATTERN, bilinear_demosaic, mosaic
from polarmosaic.synthetic import textured_scene

rng = np.random.default_rng(0)
truth = textured_scene(128, 128, rng)
print("filter pattern:", DEFAULT_PATTERN)

m = mosaic(truth)
print("mosaic", m.plane.shape, "from a stack of", truth.shape)

# every mosaic sample is one of the four truth planes at the same pixel
print("top-left 2x2 samples:", m.plane[:2, :2].round(3).tolist())

recon = bilinear_demosaic(m)
print(evaluate(truth, recon).format_table())
