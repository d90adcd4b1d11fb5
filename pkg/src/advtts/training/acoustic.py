"""Three-stage acoustic-model training.

Epochs are numbered from 1.  Epochs ``1..n1`` warm the generator up on MSE
alone; epochs ``n1+1..n2`` alternate a critic update with a generator update
on MSE plus the weighted adversarial term; epochs ``n2+1..n3`` keep the
critic updates and add the frozen vocoder's likelihood term.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autograd import NonFiniteError, backward, no_grad, parameters_checksum
from ..dsp.features import HOP, ConfigurationError
from ..nets.critic import Critic, CriticConfig
from ..nets.generator import Generator, GeneratorConfig
from ..wavenet.dml import select_positions
from .checkpoint import load_checkpoint, save_checkpoint
from .data import TrainingItem, random_crop
from .losses import (
    LossWeights,
    adv_loss_generator,
    critic_input_grad,
    critic_loss_gan,
    critic_loss_wgan_gp,
    dml_term,
    generator_total_loss,
    gradient_norm,
    interpolate_samples,
    loss_mse,
)
from .optim import SGD
from .vocoder import NumericFailure

MODES = ("wgan-gp", "gan", "mse-baseline")
METRIC_COLUMNS = ["epoch", "stage", "L_MSE", "L_ADV", "L_DML", "L_D", "grad_penalty",
                  "gamma_D", "lr_G", "lr_D", "wall_seconds"]


@dataclass
class AcousticTrainConfig:
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
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.n1 <= self.n2 <= self.n3:
            raise ConfigurationError(f"stage epochs must satisfy 0 <= n1 <= n2 <= n3, got "
                                     f"{self.n1}, {self.n2}, {self.n3}")
        if self.batch_size < 1 or self.n_critic < 1:
            raise ConfigurationError("batch_size and n_critic must be positive")
        if self.mode == "mse-baseline":
            self.gamma_w = 0.0

    @property
    def adversarial(self) -> bool:
        return self.mode != "mse-baseline"

    def stage(self, epoch: int) -> str:
        if epoch <= self.n1:
            return "warmup"
        if epoch <= self.n2:
            return "adversarial"
        return "finetune"


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _mean(xs):
    return float(np.mean(xs)) if xs else None


class AcousticTrainer:
    def __init__(self, config: AcousticTrainConfig, items: list[TrainingItem], wavenet=None,
                 run_dir=None):
        if not items:
            raise ConfigurationError("no training utterances")
        if config.n3 > config.n2 and config.gamma_w > 0 and wavenet is None:
            raise ConfigurationError("the finetune stage needs a trained vocoder checkpoint")
        self.config, self.items, self.wavenet = config, items, wavenet
        self.run_dir = Path(run_dir) if run_dir is not None else None
        seeds = np.random.SeedSequence([config.seed, 2]).spawn(4)
        self.rngs = {k: np.random.default_rng(s) for k, s in zip(("init", "data", "eps", "dml"), seeds)}
        init = self.rngs["init"]
        self.generator = Generator(init, GeneratorConfig(hidden=config.hidden, layers=config.layers))
        self.critic = None
        if config.adversarial:
            self.critic = Critic(init, CriticConfig(
                width=config.critic_width, layers=config.critic_layers,
                activation=config.critic_activation, mode=config.mode))
        self.opt_g = SGD(self.generator.parameters(), config.lr_g, config.lr_decay)
        self.opt_d = SGD(self.critic.parameters(), config.lr_d, config.lr_decay) if self.critic else None
        self.weights = LossWeights(gamma_d=0.0, gamma_w=config.gamma_w, penalty_weight=config.penalty_weight,
                                   mode=config.mode if config.adversarial else "wgan-gp",
                                   non_saturating=config.non_saturating)
        self.epoch = 0
        self.gamma_d: float | None = None
        self.metrics: list[dict] = []
        if wavenet is not None:
            wavenet.requires_grad_(False)
        self.vocoder_checksum = parameters_checksum(wavenet.parameters()) if wavenet is not None else None

    # -- adversarial weight ----------------------------------------------------
    def measure_gamma(self) -> float:
        """``E[L_MSE] / E[|L_ADV|]`` over every utterance with the current models, no updates."""
        mse, adv = [], []
        with no_grad():
            for it in self.items:
                y_hat = self.generator(it.bundle)
                mse.append(loss_mse(it.mel, y_hat).item())
                adv.append(abs(adv_loss_generator(y_hat, it.code, self.critic, self.weights.mode,
                                                  self.weights.non_saturating).item()))
        return _ratio(np.mean(mse), np.mean(adv))

    # -- one epoch ---------------------------------------------------------------
    def _critic_step(self, batch, preds, log) -> None:
        cfg = self.config
        self.critic.zero_grad()
        for it, y_hat in zip(batch, preds):
            if cfg.mode == "wgan-gp":
                cl = critic_loss_wgan_gp(it.mel, y_hat.data, it.code, self.critic, cfg.penalty_weight, self.rngs["eps"])
                log["grad_penalty"].append(cl.penalty)
            else:
                cl = critic_loss_gan(it.mel, y_hat.data, it.code, self.critic)
            backward(cl.total * (1.0 / len(batch)))
            log["L_D"].append(cl.total.item())
        self.opt_d.step()

    def _generator_step(self, batch, preds, stage, log) -> None:
        cfg = self.config
        self.generator.zero_grad()
        if self.critic is not None:
            self.critic.requires_grad_(False)
        try:
            for it, y_hat in zip(batch, preds):
                positions = classes = None
                if stage == "finetune" and self.weights.gamma_w > 0:
                    classes = it.classes(self.wavenet.config.bits)
                    positions = select_positions(it.n_frames, HOP, self.rngs["dml"], cfg.dml_fraction)
                gl = generator_total_loss(it.mel, y_hat, it.code, self.weights, stage, self.critic,
                                          self.wavenet, classes, positions)
                backward(gl.total * (1.0 / len(batch)))
                log["L_MSE"].append(gl.mse)
                if gl.adv is not None:
                    log["L_ADV"].append(gl.adv)
                if gl.dml is not None:
                    log["L_DML"].append(gl.dml)
        finally:
            if self.critic is not None:
                self.critic.requires_grad_(True)
        self.opt_g.step()

    def run_epoch(self) -> dict:
        cfg = self.config
        start = time.perf_counter()
        self.epoch += 1
        stage = cfg.stage(self.epoch)
        lr_g = self.opt_g.set_epoch(self.epoch)
        lr_d = self.opt_d.set_epoch(self.epoch) if self.opt_d else None
        adversarial = stage != "warmup" and cfg.adversarial
        if adversarial and self.gamma_d is None:
            self.gamma_d = self.measure_gamma()
        self.weights.gamma_d = self.gamma_d if adversarial else 0.0
        log = {k: [] for k in ("L_MSE", "L_ADV", "L_DML", "L_D", "grad_penalty")}
        data = self.rngs["data"]
        order = data.permutation(len(self.items))
        try:
            for b in range(0, len(order), cfg.batch_size):
                batch = [random_crop(self.items[i], cfg.max_frames, data) for i in order[b:b + cfg.batch_size]]
                preds = [self.generator(it.bundle) for it in batch]
                if adversarial:
                    for _ in range(cfg.n_critic):
                        self._critic_step(batch, preds, log)
                self._generator_step(batch, preds, stage, log)
        except NonFiniteError as exc:
            raise NumericFailure(f"epoch {self.epoch} ({stage}): {exc}") from None
        if self.vocoder_checksum is not None and \
                parameters_checksum(self.wavenet.parameters()) != self.vocoder_checksum:
            raise RuntimeError("vocoder parameters changed during acoustic training")
        row = {
            "epoch": self.epoch, "stage": stage,
            "L_MSE": _mean(log["L_MSE"]), "L_ADV": _mean(log["L_ADV"]), "L_DML": _mean(log["L_DML"]),
            "L_D": _mean(log["L_D"]), "grad_penalty": _mean(log["grad_penalty"]),
            "gamma_D": self.weights.gamma_d if adversarial else None,
            "lr_G": lr_g, "lr_D": lr_d if adversarial else None,
        }
        if adversarial and log["L_ADV"]:
            # next epoch's weight comes from this epoch's running means
            self.gamma_d = _ratio(np.mean(log["L_MSE"]), np.mean(np.abs(log["L_ADV"])))
        row["wall_seconds"] = time.perf_counter() - start
        self.metrics.append(row)
        if self.run_dir is not None:
            self.write_metrics(self.run_dir / "metrics.csv")
            self.save(self.run_dir / "checkpoints" / "latest.zip")
            if self.epoch in (cfg.n1, cfg.n2, cfg.n3):
                self.save(self.run_dir / "checkpoints" / f"{stage}_epoch{self.epoch:04d}.zip")
        return row

    def train(self, until: int | None = None) -> list[dict]:
        until = self.config.n3 if until is None else min(until, self.config.n3)
        while self.epoch < until:
            self.run_epoch()
        return self.metrics

    # -- output ------------------------------------------------------------------
    def metrics_csv(self, include_wall: bool = True) -> str:
        cols = METRIC_COLUMNS if include_wall else METRIC_COLUMNS[:-1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.metrics:
            w.writerow([row[c] if c in ("epoch", "stage") else _fmt(row[c]) for c in cols])
        return buf.getvalue()

    def write_metrics(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.metrics_csv())

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = {
            "kind": "acoustic",
            "epoch": self.epoch,
            "stage": self.config.stage(self.epoch) if self.epoch else "warmup",
            "config": dataclasses.asdict(self.config),
            "gamma_d": self.gamma_d,
            "rng": {k: r.bit_generator.state for k, r in self.rngs.items()},
            "metrics": self.metrics,
            "vocoder_checksum": self.vocoder_checksum,
        }
        groups = {"generator": self.generator.state_dict()}
        if self.critic is not None:
            groups["critic"] = self.critic.state_dict()
        return save_checkpoint(path, meta, groups)

    @classmethod
    def load(cls, path, items: list[TrainingItem], wavenet=None, run_dir=None,
             overrides: dict | None = None) -> "AcousticTrainer":
        meta, groups = load_checkpoint(path)
        if meta.get("kind") != "acoustic":
            raise ConfigurationError(f"{path} is not an acoustic-model checkpoint")
        config = AcousticTrainConfig(**{**meta["config"], **(overrides or {})})
        self = cls(config, items, wavenet, run_dir)
        self.generator.load_state_dict(groups["generator"])
        if self.critic is not None:
            self.critic.load_state_dict(groups["critic"])
        for k, state in meta["rng"].items():
            self.rngs[k].bit_generator.state = state
        self.epoch, self.gamma_d, self.metrics = meta["epoch"], meta["gamma_d"], list(meta["metrics"])
        return self


def _ratio(mse: float, adv: float) -> float:
    return float(mse / adv) if adv > 0 else 0.0


# -- post-hoc evaluation ---------------------------------------------------------

def evaluate_mse(generator: Generator, items: list[TrainingItem]) -> float:
    with no_grad():
        return float(np.mean([loss_mse(it.mel, generator(it.bundle)).item() for it in items]))


def evaluate_dml(generator: Generator, items: list[TrainingItem], wavenet) -> float:
    """Vocoder negative log-likelihood at every sample, given generated mel frames."""
    with no_grad():
        return float(np.mean([
            dml_term(generator(it.bundle), it.code, wavenet, it.classes(wavenet.config.bits)).item()
            for it in items]))


def critic_grad_norm_mean(generator: Generator, critic: Critic, items: list[TrainingItem],
                          rng: np.random.Generator, max_frames: int | None = None) -> float:
    """Mean ``||grad D||`` at real/generated interpolates, one draw per utterance.

    Pass the training ``max_frames`` to probe windows of the length the critic saw:
    mean pooling makes the norm shrink like one over the square root of the length.
    """
    norms = []
    for it in items:
        it = random_crop(it, max_frames, rng)
        with no_grad():
            y_hat = generator(it.bundle).data
        y_tilde = interpolate_samples(it.mel, y_hat, rng)
        norms.append(gradient_norm(critic_input_grad(critic, y_tilde, it.code)).item())
    return float(np.mean(norms))
