"""Single-frame inference latency and throughput."""

import json
import os
import statistics
import time
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .pfa import MosaicImage
from .ppdn import (PPDNConfig, check_weights, count_macs, estimate_forward_bytes, forward,
                   preset, tile_edges, tiled_forward)
from .tensorcore import is_deterministic

# published figures for the presets on the authors' embedded board; reported
# next to measurements for context, never asserted
REFERENCE = {
    "ppdn": {"gflops": 112, "params_k": 22.4, "fps": 380},
    "ppdn-l": {"gflops": 2260, "params_k": 450.8, "fps": 34},
}


class InsufficientMemoryError(MemoryError):
    def __init__(self, needed, budget, suggestion):
        super().__init__(
            f"forward pass needs ~{needed / 2**20:.0f} MiB, budget is {budget / 2**20:.0f} MiB; "
            f"retry with tiling, e.g. tiles={suggestion}")
        self.needed = needed
        self.budget = budget
        self.suggestion = suggestion


@dataclass
class BenchReport:
    preset: str
    height: int
    width: int
    tiles: tuple | None
    halo: int
    warmup: int
    iters: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    fps: float
    threads: int
    deterministic: bool
    dtype: str
    macs: int

    def to_dict(self):
        d = asdict(self)
        d["reference"] = REFERENCE.get(self.preset)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def format_text(self):
        tiles = "untiled" if not self.tiles else f"{self.tiles[0]}x{self.tiles[1]} tiles, halo {self.halo}"
        lines = [
            f"{self.preset} {self.height}x{self.width} ({tiles}, {self.dtype}, {self.threads} thread(s))",
            f"  latency mean {self.mean_ms:.2f} ms  median {self.median_ms:.2f} ms  p95 {self.p95_ms:.2f} ms",
            f"  {self.fps:.2f} FPS  {self.macs / 1e9:.2f} GMACs/frame",
        ]
        ref = REFERENCE.get(self.preset)
        if ref:
            lines.append(f"  published reference: {ref['fps']} FPS, {ref['gflops']} Gflops")
        return "\n".join(lines)


def blas_threads():
    try:
        from threadpoolctl import threadpool_info
    except ImportError:  # pragma: no cover
        return 1
    counts = [p["num_threads"] for p in threadpool_info() if p.get("user_api") == "blas"]
    return max(counts) if counts else 1


def default_memory_budget():
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES") // 2
    except (ValueError, OSError, AttributeError):  # pragma: no cover
        return 4 * 2**30


def _suggest_tiles(cfg, h, w, dtype, budget):
    r = c = 1
    while estimate_forward_bytes(cfg, -(-h // r), -(-w // c), dtype) > budget and r * c < 4096:
        if h / r >= w / c:
            r *= 2
        else:
            c *= 2
    return (r, c)


def measure(preset_name, weights, dims, tiles=None, halo=0, warmup=2, iters=10, seed=0,
            cfg=None, dtype=np.float32, mosaic=None, memory_budget=None, hook=None):
    """Time ``iters`` forward passes after ``warmup`` untimed ones.

    Input is seeded uniform noise unless a ``mosaic`` is given. Only the
    forward calls are inside the timed region; ``hook`` (if given) is called
    with ``"warmup_start"``, ``"timed_start"`` and ``"timed_end"``.
    """
    if iters < 10:
        raise ValueError("at least 10 measured iterations are required")
    cfg = cfg or preset(preset_name)
    check_weights(weights, cfg)
    h, w = dims
    budget = memory_budget or default_memory_budget()
    if tiles:
        rows, cols = tile_edges((h, w), tiles)
        th = max(b - a for a, b in zip(rows, rows[1:])) + 2 * halo
        tw = max(b - a for a, b in zip(cols, cols[1:])) + 2 * halo
        need = estimate_forward_bytes(cfg, th, tw, dtype)
    else:
        need = estimate_forward_bytes(cfg, h, w, dtype)
    if need > budget:
        raise InsufficientMemoryError(need, budget, _suggest_tiles(cfg, h, w, dtype, budget))

    if mosaic is None:
        rng = np.random.default_rng(seed)
        mosaic = MosaicImage(rng.uniform(0.0, 1.0, size=(h, w)).astype(dtype))
    elif mosaic.shape != (h, w):
        raise ValueError(f"input mosaic is {mosaic.shape}, expected {(h, w)}")
    weights = weights.astype(dtype)

    def run():
        if tiles:
            return tiled_forward(mosaic, weights, cfg, tiles, halo, dtype=dtype)
        return forward(mosaic, weights, cfg, dtype=dtype)

    if hook:
        hook("warmup_start")
    for _ in range(warmup):
        run()
    times = []
    if hook:
        hook("timed_start")
    for _ in range(iters):
        t0 = time.perf_counter()
        run()
        times.append((time.perf_counter() - t0) * 1e3)
    if hook:
        hook("timed_end")

    mean = statistics.fmean(times)
    return BenchReport(
        preset=preset_name, height=h, width=w, tiles=tuple(tiles) if tiles else None, halo=halo,
        warmup=warmup, iters=iters, mean_ms=mean, median_ms=statistics.median(times),
        p95_ms=float(np.percentile(times, 95)), fps=1000.0 / mean, threads=blas_threads(),
        deterministic=is_deterministic(), dtype=np.dtype(dtype).name, macs=count_macs(cfg, h, w),
    )


def check_monotone(reports, tolerance=0.05):
    """Compare latency ordering with MAC ordering across reports.

    An inversion (more MACs but lower latency) within ``tolerance`` is only
    warned about; larger inversions are returned as failures.
    """
    failures = []
    for a in reports:
        for b in reports:
            if a.macs > b.macs and a.mean_ms < b.mean_ms:
                gap = (b.mean_ms - a.mean_ms) / b.mean_ms
                msg = (f"{a.preset} {a.height}x{a.width} ({a.macs} MACs) ran in {a.mean_ms:.2f} ms, "
                       f"faster than {b.preset} {b.height}x{b.width} ({b.macs} MACs, {b.mean_ms:.2f} ms)")
                if gap < tolerance:
                    warnings.warn(msg, RuntimeWarning, stacklevel=2)
                else:
                    failures.append(msg)
    return failures


def config_for(preset_name=None, m=None, n=None, k=None):
    if preset_name:
        return preset(preset_name)
    return PPDNConfig(m=m, n=n, k=k)
