"""Binary weight file.

Little-endian layout::

    b"PPDN" | u32 version (=1) | u32 m | u32 n | u32 k
    | u32 pattern length | UTF-8 pattern
    | u32 layer count
    | per layer: u32 out | u32 in | f32 taps[out*in*9] (out, in, ky, kx)
                 | u8 bias present | f32 bias[out] if present

A file holding ``m + 2`` layers is a coarse-only network (``refine=False``).
"""

import io
import struct
from typing import NamedTuple

import numpy as np

from ._atomic import atomic_write_bytes
from .pfa import DEFAULT_PATTERN, PFAPattern
from .ppdn import ConfigError, PPDNConfig, PPDNWeights, check_weights
from .tensorcore import ConvKernel3x3

MAGIC = b"PPDN"
VERSION = 1


class WeightFileError(ValueError):
    pass


class BadMagicError(WeightFileError):
    pass


class VersionError(WeightFileError):
    pass


class TruncatedFileError(WeightFileError):
    pass


class ConfigInconsistencyError(WeightFileError, ConfigError):
    pass


class WeightFile(NamedTuple):
    weights: PPDNWeights
    cfg: PPDNConfig
    pattern: PFAPattern


def encode_weights(weights, cfg, pattern=DEFAULT_PATTERN):
    check_weights(weights, cfg)
    buf = io.BytesIO()
    pat = str(pattern).encode("utf-8")
    buf.write(MAGIC)
    buf.write(struct.pack("<5I", VERSION, cfg.m, cfg.n, cfg.k, len(pat)))
    buf.write(pat)
    buf.write(struct.pack("<I", len(weights.layers)))
    for layer in weights.layers:
        o, i = layer.taps.shape[:2]
        buf.write(struct.pack("<2I", o, i))
        buf.write(np.ascontiguousarray(layer.taps, dtype="<f4").tobytes())
        if layer.bias is None:
            buf.write(b"\x00")
        else:
            buf.write(b"\x01")
            buf.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    return buf.getvalue()


def save_weights(weights, cfg, path, pattern=DEFAULT_PATTERN):
    atomic_write_bytes(path, encode_weights(weights, cfg, pattern))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"file ends inside {what} (offset {self.pos}, need {n} bytes)")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]


def decode_weights(data):
    r = _Reader(data)
    if len(data) >= 4 and data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    r.take(4, "magic")
    version = r.u32("version")
    if version != VERSION:
        raise VersionError(f"unsupported weight file version {version}")
    m, n, k = r.u32("m"), r.u32("n"), r.u32("k")
    pat_len = r.u32("pattern length")
    raw = r.take(pat_len, "pattern")
    try:
        pattern = PFAPattern.parse(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise WeightFileError(f"invalid pattern string: {exc}") from exc
    count = r.u32("layer count")
    try:
        cfg = PPDNConfig(m=m, n=n, k=k, refine=(count != m + 2))
    except ConfigError as exc:
        raise ConfigInconsistencyError(str(exc)) from exc
    layers = []
    for idx in range(count):
        o, i = r.u32(f"layer {idx} header"), r.u32(f"layer {idx} header")
        taps = np.frombuffer(r.take(4 * o * i * 9, f"layer {idx} taps"), dtype="<f4")
        taps = taps.reshape(o, i, 3, 3).astype(np.float32)
        flag = r.take(1, f"layer {idx} bias flag")[0]
        if flag not in (0, 1):
            raise WeightFileError(f"layer {idx}: bias flag {flag} is not 0 or 1")
        bias = None
        if flag:
            bias = np.frombuffer(r.take(4 * o, f"layer {idx} bias"), dtype="<f4").astype(np.float32)
        layers.append(ConvKernel3x3(taps, bias))
    if r.pos != len(data):
        raise WeightFileError(f"{len(data) - r.pos} trailing bytes after last layer")
    weights = PPDNWeights(layers)
    try:
        check_weights(weights, cfg)
    except ConfigError as exc:
        raise ConfigInconsistencyError(f"layers do not match m={m} n={n} k={k}: {exc}") from exc
    return WeightFile(weights, cfg, pattern)


def load_weights(path):
    """Read a weight file; returns ``(weights, cfg, pattern)`` with float32 weights."""
    with open(path, "rb") as fh:
        return decode_weights(fh.read())
