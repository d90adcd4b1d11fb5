"""Teacher-forced WaveNet training on natural mel frames with Adam and an EMA shadow."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autograd import NonFiniteError, backward, no_grad
from ..wavenet.model import WaveNet, WaveNetConfig
from .checkpoint import load_checkpoint, save_checkpoint
from .data import TrainingItem, random_crop
from .optim import EMA, Adam


class NumericFailure(RuntimeError):
    pass


@dataclass
class VocoderTrainConfig:
    steps: int = 300
    batch_size: int = 2
    max_frames: int = 8
    lr: float = 2e-3
    warmup: int = 0
    ema_decay: float = 0.9999
    seed: int = 0


def _streams(seed: int) -> dict[str, np.random.Generator]:
    init, data = np.random.SeedSequence([seed, 1]).spawn(2)
    return {"init": np.random.default_rng(init), "data": np.random.default_rng(data)}


def mean_nll(model: WaveNet, items: list[TrainingItem], weights: dict | None = None) -> float:
    """Teacher-forced negative log-likelihood per sample, averaged over whole utterances."""
    saved = model.state_dict()
    try:
        if weights is not None:
            model.load_state_dict(weights)
        with no_grad():
            total = sum(model.nll(it.classes(model.config.bits), it.mel, it.code).item() * len(it.samples)
                        for it in items)
    finally:
        model.load_state_dict(saved)
    return total / sum(len(it.samples) for it in items)


class VocoderTrainer:
    def __init__(self, model_config: WaveNetConfig, train_config: VocoderTrainConfig):
        self.model_config, self.config = model_config, train_config
        self.rngs = _streams(train_config.seed)
        self.model = WaveNet(self.rngs["init"], model_config)
        self.opt = Adam(self.model.parameters(), train_config.lr, train_config.warmup)
        self.ema = EMA(self.model, train_config.ema_decay)
        self.step_count = 0
        self.losses: list[float] = []

    def train_step(self, items: list[TrainingItem]) -> float:
        cfg, bits = self.config, self.model_config.bits
        data = self.rngs["data"]
        batch = [items[int(i)] for i in data.integers(0, len(items), cfg.batch_size)]
        self.model.zero_grad()
        total = 0.0
        try:
            for it in batch:
                it = random_crop(it, cfg.max_frames, data)
                loss = self.model.nll(it.classes(bits), it.mel, it.code)
                backward(loss * (1.0 / len(batch)))
                total += loss.item() / len(batch)
        except NonFiniteError as exc:
            raise NumericFailure(f"vocoder training step {self.step_count + 1}: {exc}") from None
        self.opt.step()
        self.ema.update()
        self.step_count += 1
        self.losses.append(total)
        return total

    def train(self, items: list[TrainingItem], steps: int | None = None) -> list[float]:
        target = self.config.steps if steps is None else self.step_count + steps
        while self.step_count < target:
            self.train_step(items)
        return self.losses

    # -- persistence -----------------------------------------------------------
    def save(self, path) -> Path:
        meta = {
            "kind": "vocoder",
            "step": self.step_count,
            "losses": self.losses,
            "model_config": dataclasses.asdict(self.model_config),
            "train_config": dataclasses.asdict(self.config),
            "rng": {k: r.bit_generator.state for k, r in self.rngs.items()},
        }
        groups = {"wavenet": self.model.state_dict(), "ema": self.ema.shadow, "adam": self.opt.state()}
        return save_checkpoint(path, meta, groups)

    @classmethod
    def load(cls, path) -> "VocoderTrainer":
        meta, groups = load_checkpoint(path)
        mcfg = dict(meta["model_config"])
        mcfg["upsample_strides"] = tuple(mcfg["upsample_strides"])
        self = cls(WaveNetConfig(**mcfg), VocoderTrainConfig(**meta["train_config"]))
        self.model.load_state_dict(groups["wavenet"])
        self.ema.shadow = {k: v.copy() for k, v in groups["ema"].items()}
        self.opt.load_state(groups["adam"])
        for k, state in meta["rng"].items():
            self.rngs[k].bit_generator.state = state
        self.step_count = meta["step"]
        self.losses = list(meta["losses"])
        return self


def load_vocoder(path, use_ema: bool = True) -> WaveNet:
    """Frozen WaveNet from a vocoder checkpoint, with averaged weights by default."""
    trainer = VocoderTrainer.load(path)
    model = trainer.model
    if use_ema:
        model.load_state_dict(trainer.ema.shadow)
    return model.requires_grad_(False)
