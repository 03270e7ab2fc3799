"""Progressive polarization demosaicing network.

Layer order of a configured network (all 3x3 convolutions with bias)::

    head            1 -> k      followed by ReLU
    block x m       k -> k      each followed by ReLU
    recon_out       k -> 4      no activation, added to the bilinear branch
    refine_in       4 -> k      followed by ReLU
    refine x n      k -> k      each followed by ReLU
    refine_out      k -> 4      no activation, added to the coarse result

The bilinear branch is a fixed kernel and holds no parameters. Setting
``refine=False`` drops the last ``n + 2`` layers (coarse result only).
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .pfa import DimensionError, bilinear_array
from .tensorcore import ConvKernel3x3, conv3x3, relu


class ConfigError(ValueError):
    """Weights and configuration disagree."""


@dataclass(frozen=True)
class PPDNConfig:
    m: int = 1
    n: int = 1
    k: int = 32
    refine: bool = True

    def __post_init__(self):
        if self.m < 1 or self.n < 0 or self.k < 1:
            raise ConfigError(f"invalid network size m={self.m} n={self.n} k={self.k}")


PRESETS = {
    "ppdn": PPDNConfig(m=1, n=1, k=32),
    "ppdn-l": PPDNConfig(m=9, n=3, k=64),
}


def preset(name):
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(eq=False)
class PPDNWeights:
    layers: list

    def astype(self, dtype):
        return PPDNWeights([layer.astype(dtype) for layer in self.layers])

    def copy(self):
        return PPDNWeights([ConvKernel3x3(l.taps.copy(), None if l.bias is None else l.bias.copy())
                            for l in self.layers])

    @property
    def size(self):
        return sum(layer.size for layer in self.layers)


class InferenceResult(NamedTuple):
    x_cr: np.ndarray
    x_rr: np.ndarray


def layer_shapes(cfg):
    """``(out, in)`` channel counts of every layer, in file/weight order."""
    k = cfg.k
    shapes = [(k, 1)] + [(k, k)] * cfg.m + [(4, k)]
    if cfg.refine:
        shapes += [(k, 4)] + [(k, k)] * cfg.n + [(4, k)]
    return shapes


def count_params(cfg):
    return sum(o * i * 9 + o for o, i in layer_shapes(cfg))


def macs_per_pixel(cfg):
    return sum(o * i * 9 for o, i in layer_shapes(cfg))


def count_macs(cfg, height, width):
    """Multiply-accumulates of all trainable convolutions (bias adds excluded)."""
    return height * width * macs_per_pixel(cfg)


def receptive_radius(cfg):
    """Pixels of context on each side that influence one output pixel."""
    coarse = cfg.m + 2
    return coarse + (cfg.n + 2 if cfg.refine else 0)


def init_weights(cfg, rng, dtype=np.float64, output_scale=0.0):
    """Fan-in scaled uniform taps in [-s, s], s = sqrt(6 / (9 in)); zero biases.

    The two 4-channel output convolutions are multiplied by ``output_scale``.
    With the default of zero both residuals start at nothing, so an untrained
    network reproduces bilinear interpolation and the DoLP term, which blows
    up as S0 approaches zero, cannot run away early in training.
    """
    layers = []
    for o, i in layer_shapes(cfg):
        s = np.sqrt(6.0 / (9 * i))
        taps = rng.uniform(-s, s, size=(o, i, 3, 3))
        if o == 4:
            taps = taps * output_scale
        taps = taps.astype(dtype)
        layers.append(ConvKernel3x3(taps, np.zeros(o, dtype=dtype)))
    return PPDNWeights(layers)


def zero_weights(cfg, dtype=np.float64):
    return PPDNWeights([ConvKernel3x3(np.zeros((o, i, 3, 3), dtype), np.zeros(o, dtype))
                        for o, i in layer_shapes(cfg)])


def check_weights(weights, cfg):
    expected = layer_shapes(cfg)
    if len(weights.layers) != len(expected):
        raise ConfigError(f"expected {len(expected)} layers for {cfg}, got {len(weights.layers)}")
    for idx, (layer, (o, i)) in enumerate(zip(weights.layers, expected)):
        if layer.taps.shape != (o, i, 3, 3):
            raise ConfigError(f"layer {idx}: taps {layer.taps.shape}, expected {(o, i, 3, 3)}")
        if layer.bias is None:
            raise ConfigError(f"layer {idx}: missing bias")


def split_layers(weights, cfg):
    """Group layers into ``head, blocks, recon_out, refine_in, refine, refine_out``."""
    L = weights.layers
    m, n = cfg.m, cfg.n
    groups = {"head": L[0], "blocks": L[1:1 + m], "recon_out": L[1 + m]}
    if cfg.refine:
        groups["refine_in"] = L[2 + m]
        groups["refine"] = L[3 + m:3 + m + n]
        groups["refine_out"] = L[3 + m + n]
    return groups


def forward_batch(planes, pattern, weights, cfg, keep_cache=False):
    """Run the network on ``(N, H, W)`` mosaics.

    Returns ``(x_cr, x_rr, cache)`` with stacks shaped ``(N, 4, H, W)``. The
    cache (inputs and pre-activations of every layer) is only filled when
    ``keep_cache`` is set, for use by the backward pass.
    """
    g = split_layers(weights, cfg)
    y = planes[:, None]
    cache = {"y": y} if keep_cache else None

    pre = [conv3x3(y, g["head"])]
    h = relu(pre[0])
    acts = [h]
    for layer in g["blocks"]:
        pre.append(conv3x3(h, layer))
        h = relu(pre[-1])
        acts.append(h)
    x_bi = bilinear_array(planes, pattern)
    x_cr = x_bi + conv3x3(h, g["recon_out"])
    if keep_cache:
        cache.update(pre=pre, acts=acts)

    if not cfg.refine:
        return x_cr, x_cr, cache

    rpre = [conv3x3(x_cr, g["refine_in"])]
    h = relu(rpre[0])
    racts = [h]
    for layer in g["refine"]:
        rpre.append(conv3x3(h, layer))
        h = relu(rpre[-1])
        racts.append(h)
    x_rr = x_cr + conv3x3(h, g["refine_out"])
    if keep_cache:
        cache.update(x_cr=x_cr, rpre=rpre, racts=racts)
    return x_cr, x_rr, cache


def forward(m, weights, cfg, dtype=np.float64):
    """Coarse and refined reconstructions of one mosaic image."""
    check_weights(weights, cfg)
    if weights.layers[0].taps.dtype != dtype:
        weights = weights.astype(dtype)
    x_cr, x_rr, _ = forward_batch(np.asarray(m.plane, dtype=dtype)[None], m.pattern, weights, cfg)
    return InferenceResult(x_cr[0], x_rr[0])


def _even_edges(length, parts):
    if parts < 1 or 2 * parts > length:
        raise DimensionError(f"cannot split {length} pixels into {parts} even tiles")
    return [2 * round(length * i / (2 * parts)) for i in range(parts + 1)]


def tile_edges(shape, tiles):
    """Resolve a grid spec into row and column boundaries.

    ``tiles`` is either ``(rows, cols)`` for an even split, or a pair of
    explicit boundary sequences starting at 0 and ending at the image size.
    """
    h, w = shape
    spec_r, spec_c = tiles
    edges = []
    for spec, length in ((spec_r, h), (spec_c, w)):
        e = _even_edges(length, spec) if np.isscalar(spec) else [int(v) for v in spec]
        if e[0] != 0 or e[-1] != length or any(b <= a for a, b in zip(e, e[1:])):
            raise DimensionError(f"tile boundaries {e} do not partition 0..{length}")
        if any(v % 2 for v in e):
            raise DimensionError(f"tile boundaries {e} break the 2x2 pattern phase")
        edges.append(e)
    return edges


def tiled_forward(m, weights, cfg, tiles=(2, 2), halo=0, dtype=np.float64):
    """Forward pass over a grid of tiles, stitched back into one frame.

    Each tile is grown by ``halo`` pixels on interior edges, processed on its
    own and centre-cropped. With ``halo >= receptive_radius(cfg)`` the result
    equals the untiled forward pass exactly; ``halo=0`` is the plain split.
    """
    if halo < 0 or halo % 2:
        raise DimensionError(f"halo must be even and non-negative, got {halo}")
    check_weights(weights, cfg)
    if weights.layers[0].taps.dtype != dtype:
        weights = weights.astype(dtype)
    plane = np.asarray(m.plane, dtype=dtype)
    h, w = plane.shape
    rows, cols = tile_edges((h, w), tiles)
    x_cr = np.empty((4, h, w), dtype=dtype)
    x_rr = np.empty((4, h, w), dtype=dtype)
    for r0, r1 in zip(rows, rows[1:]):
        for c0, c1 in zip(cols, cols[1:]):
            er0, er1 = max(0, r0 - halo), min(h, r1 + halo)
            ec0, ec1 = max(0, c0 - halo), min(w, c1 + halo)
            tile = plane[er0:er1, ec0:ec1]
            cr, rr, _ = forward_batch(tile[None], m.pattern, weights, cfg)
            sl = (slice(None), slice(r0 - er0, r0 - er0 + r1 - r0), slice(c0 - ec0, c0 - ec0 + c1 - c0))
            x_cr[:, r0:r1, c0:c1] = cr[0][sl]
            x_rr[:, r0:r1, c0:c1] = rr[0][sl]
    return InferenceResult(x_cr, x_rr)


def estimate_forward_bytes(cfg, height, width, dtype=np.float64):
    """Rough peak working memory of one untiled forward pass."""
    item = np.dtype(dtype).itemsize
    px = height * width
    # two live feature maps, the stacks, and one im2col band (capped internally)
    band = min(9 * cfg.k * px, 1 << 24)
    return item * (2 * cfg.k * px + 4 * 4 * px + band)

