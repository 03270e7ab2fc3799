"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import contextlib
import io
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from ._atomic import atomic_write_bytes, atomic_write_text
from .dataio import (DatasetManifest, ImageFormatError, ManifestError, SceneEntry, load_manifest,
                     read_plane, read_stack_dir, save_manifest, write_plane, write_stack_dir)
from .metrics import evaluate
from .pfa import DEFAULT_PATTERN, DimensionError, MosaicImage, PFAPattern, bilinear_demosaic, mosaic
from .ppdn import (ConfigError, PPDNConfig, count_macs, count_params, forward, preset,
                   tiled_forward)
from .stokes import aolp_to_rgb, quantize_u8, stokes_from_stack
from .synthetic import textured_scene
from .tensorcore import set_deterministic
from .train import LossWeights, NumericError, TrainConfig, train_from_manifest, write_checkpoint
from .weightfile import WeightFileError, load_weights

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

STOKES_NAMES = ("s0", "s1", "s2", "dolp", "aolp")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _grid(text):
    try:
        r, c = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC, got {text!r}") from None
    return r, c


def _pattern(text):
    try:
        return PFAPattern.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _sidecar(path):
    return Path(str(path) + ".json")


def _write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_mosaic(path, pattern=None):
    plane = read_plane(path)
    side = _sidecar(path)
    if pattern is None:
        if side.is_file():
            pattern = PFAPattern.parse(json.loads(side.read_text())["pattern"])
        else:
            pattern = DEFAULT_PATTERN
    return MosaicImage(plane, pattern)


def _png_bytes(array):
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


# --- subcommands --------------------------------------------------------------

def cmd_mosaic(args):
    stack = read_stack_dir(args.input)
    m = mosaic(stack, args.pattern)
    out = Path(args.output)
    write_plane(m.plane, out)
    _write_json(_sidecar(out), {"pattern": str(m.pattern),
                                "provenance": {"operation": "mosaic", "source": str(args.input)}})
    print(f"wrote {out} ({m.shape[0]}x{m.shape[1]}, pattern {m.pattern})")


def cmd_demosaic(args):
    m = _read_mosaic(args.input, args.pattern)
    if args.method == "bilinear":
        stack = bilinear_demosaic(m)
    else:
        if not args.weights:
            raise UsageError("--method ppdn requires --weights")
        weights, cfg, wpattern = load_weights(args.weights)
        if wpattern != m.pattern:
            raise DataError(f"weights were trained for pattern {wpattern}, mosaic uses {m.pattern}")
        dtype = np.float32 if args.float32 else np.float64
        if args.tile:
            res = tiled_forward(m, weights, cfg, args.tile, args.halo, dtype=dtype)
        else:
            res = forward(m, weights, cfg, dtype=dtype)
        stack = res.x_rr if args.stage == "rr" else res.x_cr
    paths = write_stack_dir(stack, args.output, prefix=args.prefix)
    print(f"wrote {len(paths)} planes to {args.output}")


def cmd_stokes(args):
    maps = stokes_from_stack(read_stack_dir(args.input))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for name in STOKES_NAMES:
        write_plane(getattr(maps, name), out / f"{name}.pfm")
    print(f"wrote {', '.join(STOKES_NAMES)} to {out}")


def cmd_render(args):
    src = Path(args.input)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    s0 = read_plane(src / "s0.pfm")
    dolp = read_plane(src / "dolp.pfm")
    aolp = read_plane(src / "aolp.pfm")
    atomic_write_bytes(out / "s0.png", _png_bytes(quantize_u8(s0 / 2.0)))
    atomic_write_bytes(out / "dolp.png", _png_bytes(quantize_u8(dolp)))
    atomic_write_bytes(out / "aolp.png", _png_bytes(aolp_to_rgb(aolp)))
    print(f"wrote s0.png, dolp.png, aolp.png to {out}")


def _net_config(args):
    if args.preset and any(v is not None for v in (args.m, args.n, args.k)):
        raise UsageError("use either --preset or --m/--n/--k")
    if args.preset:
        cfg = preset(args.preset)
    else:
        cfg = PPDNConfig(m=args.m if args.m is not None else 1,
                         n=args.n if args.n is not None else 1,
                         k=args.k if args.k is not None else 32)
    if getattr(args, "no_refine", False):
        cfg = PPDNConfig(cfg.m, cfg.n, cfg.k, refine=False)
    return cfg


def cmd_train(args):
    manifest = load_manifest(args.manifest)
    net_cfg = _net_config(args)
    cfg = TrainConfig(patch=args.patch, batch=args.batch, lr0=args.lr, decay_every=args.decay_every,
                      decay_factor=args.decay_factor, total_iters=args.iters, beta1=args.beta1,
                      beta2=args.beta2, adam_eps=args.adam_eps, seed=args.seed,
                      log_every=args.log_every, physical_augment=not args.naive_augment,
                      aolp_loss=args.aolp_loss)
    lw = LossWeights(*args.loss_weights)

    def progress(rec):
        if not args.quiet:
            print(f"step {rec['step']:7d}  lr {rec['lr']:.2e}  loss {rec['loss']:.5f}", flush=True)

    result = train_from_manifest(manifest, net_cfg, cfg, lw, log_path=args.log,
                                 checkpoint_dir=args.checkpoint_dir,
                                 checkpoint_every=args.checkpoint_every, progress=progress)
    pattern = PFAPattern.parse(manifest.by_role("train")[0].pattern)
    write_checkpoint(args.output, result.weights, net_cfg, cfg, result.state.step, pattern)
    print(f"wrote {args.output} after {result.state.step} steps")


def cmd_eval(args):
    truth = read_stack_dir(args.truth)
    recon = read_stack_dir(args.recon)
    if truth.shape != recon.shape:
        raise DataError(f"truth {truth.shape} and reconstruction {recon.shape} differ in size")
    report = evaluate(truth, recon, border=args.border)
    print(report.format_table())
    if args.json:
        atomic_write_text(args.json, report.to_json() + "\n")


def cmd_count(args):
    cfg = _net_config(args)
    params = count_params(cfg)
    print(f"params {params}, {params / 1000:.1f}K")
    macs = count_macs(cfg, args.height, args.width)
    line = f"GMACs {macs / 1e9:.1f} at {args.height}x{args.width}"
    ref = bench_mod.REFERENCE.get(args.preset or "")
    if ref:
        line += f" (published reference {ref['gflops']} Gflops, {ref['params_k']}K params)"
    print(line)


def cmd_bench(args):
    cfg = _net_config(args)
    name = args.preset or f"m{cfg.m}n{cfg.n}k{cfg.k}"
    if args.weights:
        weights, wcfg, _ = load_weights(args.weights)
        if wcfg != cfg:
            raise DataError(f"weights are for {wcfg}, benchmark requested {cfg}")
    else:
        from .ppdn import init_weights
        weights = init_weights(cfg, np.random.default_rng(args.seed), output_scale=1.0)
    m = None
    if args.from_file:
        m = _read_mosaic(args.from_file)
        args.size = m.shape
    report = bench_mod.measure(name, weights, args.size, tiles=args.tile, halo=args.halo,
                               warmup=args.warmup, iters=args.iters, seed=args.seed, cfg=cfg,
                               dtype=np.float64 if args.float64 else np.float32, mosaic=m)
    print(report.format_text())
    if args.json:
        atomic_write_text(args.json, report.to_json() + "\n")


def cmd_synth(args):
    rng = np.random.default_rng(args.seed)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    h, w = args.size
    scenes = []
    for i in range(args.scenes + args.test):
        sid = f"scene{i:03d}"
        paths = write_stack_dir(textured_scene(h, w, rng), out / sid, prefix=sid)
        scenes.append(SceneEntry(id=sid, role="train" if i < args.scenes else "test",
                                 files={a: str(p.relative_to(out)) for a, p in paths.items()},
                                 pattern=str(args.pattern), notes="synthetic Malus-law scene"))
    save_manifest(DatasetManifest(scenes, out), out / "manifest.json")
    print(f"wrote {len(scenes)} scenes and {out / 'manifest.json'}")


# --- parser -------------------------------------------------------------------

def _size(text):
    return _grid(text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--deterministic", action="store_true",
                        help="fixed-order convolution and single-threaded BLAS")

    net = argparse.ArgumentParser(add_help=False)
    net.add_argument("--preset", choices=["ppdn", "ppdn-l"])
    net.add_argument("--m", type=int)
    net.add_argument("--n", type=int)
    net.add_argument("--k", type=int)

    p = _Parser(prog="polarmosaic", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("mosaic", parents=[common], help="sample a stack through the filter array")
    s.add_argument("input", help="directory with *_000/_045/_090/_135 planes")
    s.add_argument("output", help="output mosaic (.pfm or .pgm)")
    s.add_argument("--pattern", type=_pattern, default=DEFAULT_PATTERN)
    s.set_defaults(func=cmd_mosaic)

    s = sub.add_parser("demosaic", parents=[common], help="reconstruct a stack from a mosaic")
    s.add_argument("input")
    s.add_argument("output", help="output directory")
    s.add_argument("--method", choices=["bilinear", "ppdn"], default="bilinear")
    s.add_argument("--weights")
    s.add_argument("--pattern", type=_pattern, help="override the mosaic sidecar pattern")
    s.add_argument("--tile", type=_grid, help="RxC tile grid")
    s.add_argument("--halo", type=int, default=0)
    s.add_argument("--stage", choices=["rr", "cr"], default="rr", help="refined or coarse output")
    s.add_argument("--float32", action="store_true", help="single precision inference")
    s.add_argument("--prefix", default="stack")
    s.set_defaults(func=cmd_demosaic)

    s = sub.add_parser("stokes", parents=[common], help="Stokes maps of a stack")
    s.add_argument("input")
    s.add_argument("output")
    s.set_defaults(func=cmd_stokes)

    s = sub.add_parser("render", parents=[common], help="PNG views of Stokes maps")
    s.add_argument("input")
    s.add_argument("output")
    s.set_defaults(func=cmd_render)

    d = TrainConfig()
    s = sub.add_parser("train", parents=[common, net], help="train a network from a manifest")
    s.add_argument("manifest")
    s.add_argument("output", help="output weight file")
    s.add_argument("--patch", type=int, default=d.patch)
    s.add_argument("--batch", type=int, default=d.batch)
    s.add_argument("--lr", type=float, default=d.lr0)
    s.add_argument("--decay-every", type=int, default=d.decay_every)
    s.add_argument("--decay-factor", type=float, default=d.decay_factor)
    s.add_argument("--iters", type=int, default=d.total_iters)
    s.add_argument("--beta1", type=float, default=d.beta1)
    s.add_argument("--beta2", type=float, default=d.beta2)
    s.add_argument("--adam-eps", type=float, default=d.adam_eps)
    s.add_argument("--seed", type=int, default=d.seed)
    s.add_argument("--log-every", type=int, default=d.log_every)
    s.add_argument("--log", help="JSON-lines metrics log")
    s.add_argument("--checkpoint-dir")
    s.add_argument("--checkpoint-every", type=int, default=0)
    s.add_argument("--naive-augment", action="store_true",
                   help="flip/rotate planes without permuting polarizer channels")
    s.add_argument("--aolp-loss", choices=["circular", "mae"], default=d.aolp_loss)
    s.add_argument("--loss-weights", type=float, nargs=4, default=list(asdict(LossWeights()).values()),
                   metavar=("W1", "W2", "W3", "W4"))
    s.add_argument("--no-refine", action="store_true", help="coarse stage only")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="PSNR table of a reconstruction")
    s.add_argument("truth")
    s.add_argument("recon")
    s.add_argument("--border", type=int, default=2)
    s.add_argument("--json")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("count", parents=[common, net], help="parameter and MAC counts")
    s.add_argument("--height", type=int, default=2048)
    s.add_argument("--width", type=int, default=2448)
    s.set_defaults(func=cmd_count)

    s = sub.add_parser("bench", parents=[common, net], help="inference latency benchmark")
    s.add_argument("--weights")
    s.add_argument("--size", type=_size, default=(512, 512), help="HxW")
    s.add_argument("--tile", type=_grid)
    s.add_argument("--halo", type=int, default=0)
    s.add_argument("--warmup", type=int, default=2)
    s.add_argument("--iters", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json")
    s.add_argument("--from-file", help="time a real mosaic instead of noise")
    s.add_argument("--float64", action="store_true")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("synth", parents=[common], help="write synthetic scenes and a manifest")
    s.add_argument("output")
    s.add_argument("--scenes", type=int, default=6)
    s.add_argument("--test", type=int, default=2)
    s.add_argument("--size", type=_size, default=(96, 96))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--pattern", type=_pattern, default=DEFAULT_PATTERN)
    s.set_defaults(func=cmd_synth)
    return p


def _thread_limit(args):
    threads = os.environ.get("POLARMOSAIC_THREADS")
    limit = 1 if args.deterministic else (int(threads) if threads else None)
    if limit is None:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()
    return threadpool_limits(limits=limit)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and args.tile is None and args.halo:
        parser.error("--halo needs --tile")
    set_deterministic(args.deterministic)
    try:
        with _thread_limit(args):
            args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, DimensionError, ImageFormatError, ManifestError, WeightFileError,
            ConfigError, OSError, ValueError, MemoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        set_deterministic(False)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
