"""Acoustic model: linguistic features + speaker code -> normalized mel frames."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd import Tensor, broadcast_to, concat
from ..dsp.corpus import N_LINGUISTIC, SPEAKER_CODE_DIM, ConditioningBundle
from ..dsp.features import N_MELS
from .module import Linear, Module
from .sru import BiSru


@dataclass
class GeneratorConfig:
    hidden: int = 64  # per direction; 512 at full scale
    layers: int = 6
    n_in: int = N_LINGUISTIC + SPEAKER_CODE_DIM
    n_out: int = N_MELS


def frame_inputs(bundle: ConditioningBundle) -> Tensor:
    """``[linguistic | speaker code]`` per frame, shape ``(T, 388)``."""
    T = bundle.n_frames
    code = broadcast_to(Tensor(bundle.speaker_code.reshape(1, -1)), (T, SPEAKER_CODE_DIM))
    return concat([Tensor(bundle.linguistic), code], axis=1)


class Generator(Module):
    def __init__(self, rng: np.random.Generator, config: GeneratorConfig | None = None):
        cfg = config or GeneratorConfig()
        self.config = cfg
        width = 2 * cfg.hidden
        self.input_proj = Linear(rng, cfg.n_in, width)
        self.layers = [BiSru(rng, width, cfg.hidden) for _ in range(cfg.layers)]
        self.output = Linear(rng, width, cfg.n_out)

    def __call__(self, bundle: ConditioningBundle) -> Tensor:
        h = self.input_proj(frame_inputs(bundle))
        for layer in self.layers:
            h = layer(h)
        return self.output(h)


def generator_forward(bundle: ConditioningBundle, params: Generator) -> Tensor:
    return params(bundle)
