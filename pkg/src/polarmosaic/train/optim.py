"""ADAM with a step-decay learning rate."""

from dataclasses import dataclass, field

import numpy as np

from ..ppdn import PPDNWeights
from ..tensorcore import ConvKernel3x3


@dataclass(frozen=True)
class TrainConfig:
    patch: int = 64
    batch: int = 16
    lr0: float = 3e-4
    decay_every: int = 48_000
    decay_factor: float = 0.1
    total_iters: int = 96_000
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    log_every: int = 100
    physical_augment: bool = True
    aolp_loss: str = "circular"

    def __post_init__(self):
        if self.patch < 4 or self.patch % 2:
            raise ValueError(f"patch must be even and >= 4, got {self.patch}")
        if self.batch < 1 or self.total_iters < 0 or self.decay_every < 1:
            raise ValueError("batch, total_iters and decay_every must be positive")
        if self.lr0 < 0 or self.decay_factor <= 0:
            raise ValueError("learning rate settings must be positive")
        if self.aolp_loss not in ("circular", "mae"):
            raise ValueError(f"unknown AoLP loss {self.aolp_loss!r}")


def learning_rate(step, cfg):
    """Rate used by update number ``step`` (1-based): ``lr0 * factor ** (step // decay_every)``."""
    return cfg.lr0 * cfg.decay_factor ** (step // cfg.decay_every)


def params(weights):
    out = []
    for layer in weights.layers:
        out.append(layer.taps)
        out.append(layer.bias)
    return out


def from_params(arrays):
    return PPDNWeights([ConvKernel3x3(arrays[i], arrays[i + 1]) for i in range(0, len(arrays), 2)])


@dataclass
class TrainState:
    step: int
    m: list
    v: list
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    @classmethod
    def zeros(cls, weights, rng=None):
        ps = params(weights)
        return cls(0, [np.zeros_like(p) for p in ps], [np.zeros_like(p) for p in ps],
                   rng if rng is not None else np.random.default_rng(0))


def adam_step(weights, grads, state, cfg):
    """One bias-corrected ADAM update; returns ``(weights, state)``.

    ``theta -= lr(t) * m_hat / (sqrt(v_hat) + eps)`` with ``t = state.step + 1``.
    """
    ps, gs = params(weights), params(grads)
    if len(ps) != len(gs) or any(p.shape != g.shape for p, g in zip(ps, gs)):
        raise ValueError("gradient shapes do not match weights")
    if len(state.m) != len(ps) or any(p.shape != m.shape for p, m in zip(ps, state.m)):
        raise ValueError("optimizer moments do not match weights")
    t = state.step + 1
    lr = learning_rate(t, cfg)
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(ps, gs, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps))
        new_m.append(m)
        new_v.append(v)
    return from_params(new_p), TrainState(t, new_m, new_v, state.rng)
