"""WaveNet vocoder: gated dilated causal blocks with mel and speaker conditioning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autograd import (
    Tensor,
    as_tensor,
    clip,
    conv1d_causal,
    conv_transpose1d,
    receptive_field,
    relu,
    sigmoid,
    tanh,
    transpose,
)
from ..autograd.tensor import DimensionError
from ..dsp.corpus import SPEAKER_CODE_DIM
from ..dsp.features import HOP, N_MELS, ConfigurationError
from ..nets.module import Module, Parameter, glorot
from .dml import DmlParams, class_to_value, dml_log_prob_tensor, dml_loss


@dataclass
class WaveNetConfig:
    blocks: int = 12  # 24 at full scale
    dilation_cycle: int = 6
    residual_channels: int = 64  # 512 at full scale
    skip_channels: int = 64  # 256 at full scale
    mixtures: int = 10
    bits: int = 8  # 16 at full scale
    speaker_embedding: int = 16
    upsample_strides: tuple = (4, 4, 5)
    upsample_kernel_factor: int = 2
    log_scale_floor: float = -7.0
    n_mels: int = N_MELS

    def __post_init__(self):
        self.upsample_strides = tuple(int(s) for s in self.upsample_strides)
        if int(np.prod(self.upsample_strides)) != HOP:
            raise ConfigurationError(
                f"upsampler strides {self.upsample_strides} multiply to "
                f"{int(np.prod(self.upsample_strides))}, need the hop length {HOP}")
        if self.bits not in (8, 16):
            raise ConfigurationError(f"bit depth must be 8 or 16, got {self.bits}")

    @property
    def n_classes(self) -> int:
        return 2 ** self.bits

    @property
    def dilations(self) -> list[int]:
        return [2 ** (k % self.dilation_cycle) for k in range(self.blocks)]

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.dilations, kernel_width=2)


class Upsampler(Module):
    """Transposed convolutions taking ``(80, T)`` to ``(80, T * hop)``."""

    def __init__(self, rng: np.random.Generator, channels: int, strides, kernel_factor: int = 2):
        self.strides = tuple(strides)
        self.weights = []
        for s in self.strides:
            k = kernel_factor * s
            # start near nearest-neighbour repetition: each output sees ``kernel_factor`` taps
            w = np.repeat(np.eye(channels)[:, :, None], k, axis=2) / kernel_factor
            w += rng.normal(scale=0.01, size=w.shape)
            self.weights.append(Parameter(w))

    def __call__(self, cond: Tensor) -> Tensor:
        for w, s in zip(self.weights, self.strides):
            cond = conv_transpose1d(cond, w, stride=s)
        return cond


class WaveNetBlock(Module):
    def __init__(self, rng: np.random.Generator, cfg: WaveNetConfig, dilation: int):
        R, S = cfg.residual_channels, cfg.skip_channels
        self.dilation = dilation
        self.conv = glorot(rng, 2 * R, 2 * R, (2 * R, R, 2))  # rows: filter then gate
        self.conv_bias = Parameter(np.zeros((2 * R, 1)))
        self.local = glorot(rng, cfg.n_mels, 2 * R, (2 * R, cfg.n_mels))
        self.glob = glorot(rng, cfg.speaker_embedding, 2 * R, (2 * R, cfg.speaker_embedding))
        self.res = glorot(rng, R, R, (R, R))
        self.res_bias = Parameter(np.zeros((R, 1)))
        self.skip = glorot(rng, R, S, (S, R))
        self.skip_bias = Parameter(np.zeros((S, 1)))


def gated_block(state: Tensor, cond_local: Tensor, cond_global: Tensor,
                block: WaveNetBlock) -> tuple[Tensor, Tensor]:
    """``h = sigmoid(gate) * tanh(filter)``; returns ``(state + res(h), skip(h))``.

    The local condition enters through a 1x1 convolution at every timestep,
    the global condition through a matrix product broadcast over time.
    """
    if cond_local.shape[1] != state.shape[1]:
        raise DimensionError(
            f"local condition length {cond_local.shape[1]} does not match state length {state.shape[1]}")
    R = state.shape[0]
    z = conv1d_causal(state, block.conv, block.dilation) + block.conv_bias
    z = z + block.local @ cond_local
    z = z + block.glob @ cond_global
    h = sigmoid(z[R:]) * tanh(z[:R])
    return state + (block.res @ h + block.res_bias), block.skip @ h + block.skip_bias


@dataclass
class DmlOutput:
    """Differentiable mixture parameters, each ``(T, K)``."""

    logits: Tensor
    means: Tensor
    log_scales: Tensor

    def params(self) -> DmlParams:
        return DmlParams(self.logits.data, self.means.data, self.log_scales.data)

    def log_prob(self, classes, n_classes: int) -> Tensor:
        return dml_log_prob_tensor(self.logits, self.means, self.log_scales, classes, n_classes)


class WaveNet(Module):
    def __init__(self, rng: np.random.Generator, config: WaveNetConfig | None = None):
        cfg = config or WaveNetConfig()
        self.config = cfg
        R, S, K = cfg.residual_channels, cfg.skip_channels, cfg.mixtures
        self.input_w = glorot(rng, 1, R, (R, 1))
        self.input_b = Parameter(np.zeros((R, 1)))
        self.embedding = glorot(rng, SPEAKER_CODE_DIM, cfg.speaker_embedding,
                                (SPEAKER_CODE_DIM, cfg.speaker_embedding))
        self.upsampler = Upsampler(rng, cfg.n_mels, cfg.upsample_strides, cfg.upsample_kernel_factor)
        self.blocks = [WaveNetBlock(rng, cfg, d) for d in cfg.dilations]
        self.out_w = glorot(rng, S, 3 * K, (3 * K, S))
        self.out_b = Parameter(np.zeros((3 * K, 1)))

    # -- conditioning --------------------------------------------------------
    def upsample(self, mel) -> Tensor:
        """``(T, 80)`` frames -> ``(80, T * hop)`` conditioning."""
        return self.upsampler(transpose(as_tensor(mel)))

    def speaker_vector(self, code) -> Tensor:
        code = Tensor(np.asarray(code, dtype=np.float64).reshape(1, -1))
        return transpose(code @ self.embedding)

    # -- teacher forcing -----------------------------------------------------
    def input_signal(self, classes) -> np.ndarray:
        """Sample values scaled to (-1, 1), shifted right by one step."""
        n_classes = self.config.n_classes
        x = class_to_value(np.asarray(classes), n_classes) / n_classes
        return np.concatenate([[0.0], x[:-1]]).reshape(1, -1)

    def stack(self, x_in: Tensor, cond: Tensor, emb: Tensor) -> Tensor:
        state = self.input_w @ x_in + self.input_b
        skips = None
        for block in self.blocks:
            state, skip = gated_block(state, cond, emb, block)
            skips = skip if skips is None else skips + skip
        return self.out_w @ relu(skips) + self.out_b

    def head(self, raw: Tensor) -> DmlOutput:
        K, n_classes = self.config.mixtures, self.config.n_classes
        out = transpose(raw)
        return DmlOutput(out[:, :K], out[:, K:2 * K] * float(n_classes),
                         clip(out[:, 2 * K:], self.config.log_scale_floor, np.inf))

    def teacher_forced(self, classes, mel, code) -> DmlOutput:
        classes = np.asarray(classes)
        cond = self.upsample(mel)
        if cond.shape[1] != len(classes):
            raise DimensionError(
                f"waveform has {len(classes)} samples but mel frames give {cond.shape[1]}; "
                f"trim or pad to frames * {HOP}")
        raw = self.stack(Tensor(self.input_signal(classes)), cond, self.speaker_vector(code))
        return self.head(raw)

    def nll(self, classes, mel, code, positions=None) -> Tensor:
        out = self.teacher_forced(classes, mel, code)
        return dml_loss(out.log_prob(classes, self.config.n_classes), positions)


def wavenet_teacher_forced(classes, mel, code, params: WaveNet) -> DmlOutput:
    return params.teacher_forced(classes, mel, code)
