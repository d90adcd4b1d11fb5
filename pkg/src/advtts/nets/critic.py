"""Speaker-conditioned feed-forward critic over mel frames.

Each frame is scored independently, with the speaker code concatenated to
the input of every layer; the utterance score is the mean of frame scores.
WGAN-GP mode returns that raw score, GAN mode passes it through a sigmoid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd import Tensor, as_tensor, broadcast_to, concat, leaky_relu, sigmoid, tanh
from ..dsp.corpus import SPEAKER_CODE_DIM
from ..dsp.features import N_MELS
from .module import Linear, Module

MODES = ("wgan-gp", "gan")


@dataclass
class CriticConfig:
    width: int = 32  # 128 at full scale
    layers: int = 3
    activation: str = "leaky_relu"
    mode: str = "wgan-gp"
    n_features: int = N_MELS


class Critic(Module):
    def __init__(self, rng: np.random.Generator, config: CriticConfig | None = None):
        cfg = config or CriticConfig()
        if cfg.mode not in MODES:
            raise ValueError(f"critic mode must be one of {MODES}, got {cfg.mode!r}")
        if cfg.activation not in ("leaky_relu", "tanh"):
            raise ValueError(f"unsupported critic activation {cfg.activation!r}")
        self.config = cfg
        widths = [cfg.n_features] + [cfg.width] * (cfg.layers - 1)
        outs = [cfg.width] * (cfg.layers - 1) + [1]
        self.layers = [Linear(rng, w + SPEAKER_CODE_DIM, o) for w, o in zip(widths, outs)]

    def _act(self, x: Tensor) -> Tensor:
        return leaky_relu(x, 0.2) if self.config.activation == "leaky_relu" else tanh(x)

    def frame_scores(self, features, code) -> Tensor:
        """Raw per-frame scores, shape ``(T, 1)``."""
        features = as_tensor(features)
        T = features.shape[0]
        c = broadcast_to(Tensor(np.asarray(code, dtype=np.float64).reshape(1, -1)),
                         (T, SPEAKER_CODE_DIM))
        h = features
        for i, layer in enumerate(self.layers):
            h = layer(concat([h, c], axis=1))
            if i < len(self.layers) - 1:
                h = self._act(h)
        return h

    def __call__(self, features, code) -> Tensor:
        score = self.frame_scores(features, code).mean()
        return sigmoid(score) if self.config.mode == "gan" else score


def critic_forward(features, speaker_code, params: Critic) -> Tensor:
    return params(features, speaker_code)
