"""Run configuration: a flat ``key = value`` text file with an explicit version key.

Lines starting with ``#`` are comments.  Command-line ``--set key=value``
overrides are applied on top of the file, and the effective configuration is
written back into the run directory.
"""
from __future__ import annotations

import dataclasses
import os
import time
from dataclasses import dataclass, fields
from pathlib import Path

from .dsp.features import ConfigurationError
from .training.acoustic import AcousticTrainConfig
from .training.vocoder import VocoderTrainConfig
from .wavenet.model import WaveNetConfig

CONFIG_VERSION = 1
RUN_ROOT_ENV = "ADVTTS_RUN_ROOT"


@dataclass
class RunConfig:
    version: int = CONFIG_VERSION
    seed: int = 0
    # corpus
    corpus: str = "synthetic"  # "synthetic", "tone", or a directory of WAV files
    n_speakers: int = 2
    n_utterances: int = 10
    duration: float = 0.5
    tone_hz: float = 400.0
    heldout: int = 1  # utterances per speaker kept out of vocoder training
    prepared: str = ""
    # acoustic model and its training
    mode: str = "wgan-gp"
    n1: int = 50
    n2: int = 60
    n3: int = 70
    batch_size: int = 4
    max_frames: int = 40
    lr_g: float = 0.01
    lr_d: float = 0.001
    lr_decay: float = 0.95
    penalty_weight: float = 10.0
    gamma_w: float = 1e-4
    non_saturating: bool = False
    n_critic: int = 1
    dml_fraction: float = 0.5
    hidden: int = 64
    layers: int = 6
    critic_width: int = 32
    critic_layers: int = 3
    critic_activation: str = "leaky_relu"
    # vocoder
    bits: int = 8
    mixtures: int = 10
    blocks: int = 12
    dilation_cycle: int = 6
    residual_channels: int = 64
    skip_channels: int = 64
    speaker_embedding: int = 16
    voc_steps: int = 300
    voc_batch: int = 2
    voc_max_frames: int = 8
    voc_lr: float = 1e-3
    voc_warmup: int = 0
    ema_decay: float = 0.9999
    # checkpoints
    vocoder_checkpoint: str = ""
    acoustic_checkpoint: str = ""

    def __post_init__(self):
        if self.version != CONFIG_VERSION:
            raise ConfigurationError(f"config version {self.version} is not supported (expected {CONFIG_VERSION})")
        self.acoustic()
        self.wavenet()

    # -- typed views -----------------------------------------------------------
    def acoustic(self) -> AcousticTrainConfig:
        names = {f.name for f in fields(AcousticTrainConfig)}
        return AcousticTrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def wavenet(self) -> WaveNetConfig:
        return WaveNetConfig(blocks=self.blocks, dilation_cycle=self.dilation_cycle,
                             residual_channels=self.residual_channels, skip_channels=self.skip_channels,
                             mixtures=self.mixtures, bits=self.bits, speaker_embedding=self.speaker_embedding)

    def vocoder_training(self) -> VocoderTrainConfig:
        return VocoderTrainConfig(steps=self.voc_steps, batch_size=self.voc_batch,
                                  max_frames=self.voc_max_frames, lr=self.voc_lr, warmup=self.voc_warmup,
                                  ema_decay=self.ema_decay, seed=self.seed)

    # -- text form -------------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"version = {self.version}"]
        for f in fields(self):
            if f.name != "version":
                value = getattr(self, f.name)
                lines.append(f"{f.name} = {str(value).lower() if isinstance(value, bool) else value}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "bool":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"config key {key!r}: cannot read {raw!r} as {kind}") from None
    return raw


def parse_pairs(lines, source: str = "config") -> dict:
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{n}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigurationError(f"{source}:{n}: unknown config key {key!r}")
        out[key] = _convert(key, raw)
    return out


def load_config(path=None, overrides=()) -> RunConfig:
    """File values (if any), then ``key=value`` overrides."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        values = parse_pairs(path.read_text().splitlines(), str(path))
        if "version" not in values:
            raise ConfigurationError(f"{path}: missing the version key")
    values.update(parse_pairs(overrides, "--set"))
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def make_run_dir(config: RunConfig, command: str, explicit=None) -> Path:
    """``$ADVTTS_RUN_ROOT/<timestamp>_seed<seed>_<command>`` unless a directory is given."""
    if explicit:
        run = Path(explicit)
    else:
        root = Path(os.environ.get(RUN_ROOT_ENV, "runs"))
        run = root / f"{time.strftime('%Y%m%d-%H%M%S')}_seed{config.seed}_{command}"
    run.mkdir(parents=True, exist_ok=True)
    config.save(run / "config.txt")
    return run
