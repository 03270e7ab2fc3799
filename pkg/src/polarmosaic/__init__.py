"""Division-of-focal-plane polarization demosaicing.

Mosaic simulation, bilinear and progressive-network demosaicing, Stokes
reconstruction, circular-aware metrics and a throughput benchmark, in numpy.
"""

from .metrics import EvalReport, evaluate, psnr, psnr_aolp
from .pfa import (ANGLES, DEFAULT_PATTERN, DimensionError, MosaicImage, PFAPattern,
                  bilinear_demosaic, mosaic, sparse_expand)
from .ppdn import (PRESETS, InferenceResult, PPDNConfig, PPDNWeights, count_macs, count_params,
                   forward, init_weights, preset, receptive_radius, tiled_forward, zero_weights)
from .stokes import StokesMaps, aolp_to_rgb, stokes_from_stack
from .weightfile import load_weights, save_weights

__version__ = "0.1.0"
