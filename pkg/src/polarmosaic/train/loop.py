"""Training loop: sample, augment, forward, loss, backward, ADAM."""

import contextlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .._atomic import atomic_write_text
from ..metrics import psnr, psnr_aolp
from ..pfa import DEFAULT_PATTERN, PFAPattern, mosaic_array
from ..ppdn import PPDNConfig, init_weights
from ..stokes import EVAL_EPS, TRAIN_EPS, stokes_from_stack
from ..tensorcore import is_deterministic
from ..weightfile import save_weights
from .backward import loss_and_grad
from .data import TRANSFORMS, augment, crop, random_offset
from .losses import LossWeights
from .optim import TrainConfig, TrainState, adam_step, learning_rate


class NumericError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class TrainResult:
    weights: object
    state: TrainState
    losses: list = field(default_factory=list)
    log: list = field(default_factory=list)


def _single_thread():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()
    return threadpool_limits(limits=1)


def draw_batch(stacks, cfg, rng, pattern):
    """Random patches with random transforms, mosaicked; returns ``(planes, truth)``."""
    truth = np.empty((cfg.batch, 4, cfg.patch, cfg.patch))
    for b in range(cfg.batch):
        stack = stacks[int(rng.integers(len(stacks)))]
        patch = crop(stack, random_offset(stack.shape, cfg.patch, rng), cfg.patch)
        transform = TRANSFORMS[int(rng.integers(len(TRANSFORMS)))]
        truth[b] = augment(patch, transform, physical=cfg.physical_augment)
    return mosaic_array(truth, pattern), truth


def batch_psnr(x_rr, truth):
    st = stokes_from_stack(truth, EVAL_EPS)
    sr = stokes_from_stack(x_rr, EVAL_EPS)
    return {"psnr_s0": psnr(st.s0, sr.s0, 2.0, 0),
            "psnr_dolp": psnr(st.dolp, sr.dolp, 1.0, 0),
            "psnr_aolp": psnr_aolp(st.aolp, sr.aolp, 0)}


def _json_safe(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def train_loop(stacks, net_cfg=PPDNConfig(), cfg=TrainConfig(), lw=LossWeights(),
               pattern=DEFAULT_PATTERN, weights=None, log_path=None, checkpoint_dir=None,
               checkpoint_every=0, eps=TRAIN_EPS, progress=None):
    """Train a network on in-memory ``(4, H, W)`` ground-truth stacks.

    Every iteration draws ``cfg.batch`` patches (even-aligned crops, random
    flip/rotation), mosaics them with ``pattern`` and takes one ADAM step.
    Every ``cfg.log_every`` steps a JSON line with the loss, its terms and
    batch PSNRs is appended to ``log_path``. Checkpoints are written as weight
    files plus a JSON sidecar. In deterministic mode BLAS runs single-threaded.
    """
    stacks = [np.asarray(s, dtype=np.float64) for s in stacks]
    if not stacks:
        raise ValueError("no training scenes")
    rng = np.random.default_rng(cfg.seed)
    if weights is None:
        weights = init_weights(net_cfg, rng)
    else:
        weights = weights.astype(np.float64)
    state = TrainState.zeros(weights, rng)
    result = TrainResult(weights, state)
    log_fh = open(log_path, "w") if log_path else None
    if checkpoint_dir:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
    guard = _single_thread() if is_deterministic() else contextlib.nullcontext()
    try:
        with guard:
            for _ in range(cfg.total_iters):
                planes, truth = draw_batch(stacks, cfg, rng, pattern)
                loss, terms, grads, (_, x_rr) = loss_and_grad(
                    planes, pattern, truth, weights, net_cfg, lw, eps, cfg.aolp_loss)
                step = state.step + 1
                if not math.isfinite(loss):
                    raise NumericError(f"non-finite loss {loss} at step {step}; terms {terms}")
                lr = learning_rate(step, cfg)
                weights, state = adam_step(weights, grads, state, cfg)
                result.losses.append(loss)
                if cfg.log_every and (step % cfg.log_every == 0 or step == cfg.total_iters):
                    record = {"step": step, "lr": lr, "loss": loss, "terms": terms}
                    record.update({k: _json_safe(v) for k, v in batch_psnr(x_rr, truth).items()})
                    result.log.append(record)
                    if log_fh:
                        log_fh.write(json.dumps(record) + "\n")
                        log_fh.flush()
                    if progress:
                        progress(record)
                if checkpoint_dir and checkpoint_every and step % checkpoint_every == 0:
                    write_checkpoint(Path(checkpoint_dir) / f"step{step:07d}.ppdn",
                                     weights, net_cfg, cfg, step, pattern)
    finally:
        if log_fh:
            log_fh.close()
    result.weights = weights
    result.state = state
    return result


def write_checkpoint(path, weights, net_cfg, cfg, step, pattern=DEFAULT_PATTERN):
    """Weight file plus ``<path>.json`` holding the training settings and step."""
    save_weights(weights, net_cfg, path, pattern)
    sidecar = {"pattern": str(pattern), "step": step, "network": asdict(net_cfg),
               "train_config": asdict(cfg)}
    atomic_write_text(str(path) + ".json", json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def train_from_manifest(manifest, net_cfg=PPDNConfig(), cfg=TrainConfig(), lw=LossWeights(), **kwargs):
    """Train on the manifest's ``train`` scenes, which must share one pattern."""
    scenes = manifest.by_role("train")
    if not scenes:
        raise ValueError("manifest has no training scenes")
    patterns = {s.pattern for s in scenes}
    if len(patterns) != 1:
        raise ValueError(f"training scenes mix filter patterns: {sorted(patterns)}")
    stacks = [manifest.load_stack(s) for s in scenes]
    return train_loop(stacks, net_cfg, cfg, lw, pattern=PFAPattern.parse(patterns.pop()), **kwargs)


def smoothed(values, window=50):
    """Trailing moving average."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < window:
        return v.copy()
    c = np.cumsum(np.insert(v, 0, 0.0))
    return (c[window:] - c[:-window]) / window
