"""Optimizers and parameter averaging operating on ``Parameter.grad`` arrays in place."""
from __future__ import annotations

import numpy as np


class SGD:
    """Plain gradient descent with a per-epoch exponential learning-rate decay.

    Epochs are counted from 1, so the first epoch runs at ``lr0``.
    """

    def __init__(self, params, lr0: float, decay: float = 0.95):
        self.params = list(params)
        self.lr0, self.decay = float(lr0), float(decay)
        self.lr = self.lr0

    def set_epoch(self, epoch: int) -> float:
        self.lr = self.lr0 * self.decay ** (epoch - 1)
        return self.lr

    def step(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.data = p.data - self.lr * p.grad

    def state(self) -> dict[str, np.ndarray]:
        return {}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        pass


def sgd_step(params, grads, lr: float) -> None:
    for p, g in zip(params, grads):
        p.data = p.data - lr * np.asarray(g)


def warmup_lr(lr0: float, step: int, warmup: int) -> float:
    """``lr0 * min(step / w, sqrt(w / step))``: linear ramp, then inverse-square-root decay."""
    if warmup <= 0:
        return lr0
    return lr0 * min(step / warmup, np.sqrt(warmup / step))


class Adam:
    def __init__(self, params, lr0: float = 1e-3, warmup: int = 0, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr0, self.warmup = float(lr0), int(warmup)
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    @property
    def lr(self) -> float:
        return warmup_lr(self.lr0, max(self.t, 1), self.warmup)

    def step(self) -> None:
        self.t += 1
        lr = warmup_lr(self.lr0, self.t, self.warmup)
        c1, c2 = 1.0 - self.b1 ** self.t, 1.0 - self.b2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g * g
            p.data = p.data - lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)

    def state(self) -> dict[str, np.ndarray]:
        out = {"t": np.array([float(self.t)])}
        for i in range(len(self.params)):
            out[f"m.{i}"], out[f"v.{i}"] = self.m[i], self.v[i]
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["t"][0])
        self.m = [np.array(state[f"m.{i}"]) for i in range(len(self.params))]
        self.v = [np.array(state[f"v.{i}"]) for i in range(len(self.params))]


def ema_update(shadow: dict[str, np.ndarray], params: dict[str, np.ndarray], decay: float = 0.9999) -> None:
    for k, p in params.items():
        shadow[k] = decay * shadow[k] + (1.0 - decay) * p


class EMA:
    """Shadow copy of a module's parameters, updated after every optimizer step."""

    def __init__(self, module, decay: float = 0.9999):
        self.module, self.decay = module, float(decay)
        self.shadow = module.state_dict()

    def update(self) -> None:
        ema_update(self.shadow, {k: p.data for k, p in self.module.named_parameters().items()}, self.decay)
