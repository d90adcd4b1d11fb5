"""Acoustic-model objectives: MSE, adversarial terms, gradient penalty and the vocoder term."""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from ..autograd import DimensionError, NonFiniteError, Tensor, as_tensor, clip, grad, log, sqrt
from ..dsp.features import ConfigurationError
from ..nets.critic import Critic

GAN_CLAMP = 1e-7
# added under the square root so an all-zero critic gradient stays differentiable;
# small enough that 1 + NORM_FLOOR == 1 in float64
NORM_FLOOR = 1e-30

STAGES = ("warmup", "adversarial", "finetune")


@dataclass
class LossWeights:
    gamma_d: float = 0.0
    gamma_w: float = 1e-4
    penalty_weight: float = 10.0
    mode: str = "wgan-gp"  # or "gan"
    non_saturating: bool = False

    def __post_init__(self):
        if self.gamma_w < 0 or self.penalty_weight < 0:
            raise ConfigurationError("gamma_w and penalty_weight must be nonnegative")
        if self.mode not in ("wgan-gp", "gan"):
            raise ConfigurationError(f"adversarial mode must be 'wgan-gp' or 'gan', got {self.mode!r}")


def _check_shapes(y, y_hat, name: str) -> None:
    if y.shape != y_hat.shape:
        raise DimensionError(f"{name}: target {y.shape} and prediction {y_hat.shape} differ")


def loss_mse(y, y_hat) -> Tensor:
    y, y_hat = as_tensor(y), as_tensor(y_hat)
    _check_shapes(y, y_hat, "loss_mse")
    d = y_hat - y
    return (d * d).mean()


def interpolate_samples(y, y_hat, rng: np.random.Generator | None = None,
                        eps: float | None = None) -> Tensor:
    """``eps * y + (1 - eps) * y_hat`` with one ``eps ~ U[0, 1]`` for the whole utterance."""
    y, y_hat = np.asarray(getattr(y, "data", y)), np.asarray(getattr(y_hat, "data", y_hat))
    _check_shapes(y, y_hat, "interpolate_samples")
    if eps is None:
        eps = float(rng.random())
    return Tensor(eps * y + (1.0 - eps) * y_hat, requires_grad=True)


def critic_input_grad(critic: Critic, y_tilde: Tensor, code) -> Tensor:
    """``dD/dy~`` recorded so it can itself be differentiated."""
    return grad(critic(y_tilde, code), [y_tilde], create_graph=True)[0]


def gradient_norm(g: Tensor) -> Tensor:
    return sqrt((g * g).sum() + NORM_FLOOR)


def gradient_penalty(critic: Critic, y_tilde: Tensor, code, penalty_weight: float) -> tuple[Tensor, float]:
    """``penalty_weight * (||grad D(y~)||_2 - 1)^2`` over the whole ``T x 80`` matrix, and the norm."""
    norm = gradient_norm(critic_input_grad(critic, y_tilde, code))
    gap = norm - 1.0
    return gap * gap * penalty_weight, norm.item()


@dataclass
class CriticLoss:
    total: Tensor
    wasserstein: float = 0.0  # E[D(real)] - E[D(fake)]
    penalty: float = 0.0
    grad_norm: float = float("nan")


def critic_loss_wgan_gp(y, y_hat, code, critic: Critic, penalty_weight: float,
                        rng: np.random.Generator | None = None, eps: float | None = None) -> CriticLoss:
    """``D(y_hat) - D(y) + penalty``, the quantity the critic minimizes."""
    if critic.config.mode != "wgan-gp":
        raise ConfigurationError("the gradient-penalty loss needs a critic without output sigmoid")
    y = as_tensor(getattr(y, "data", y))
    y_hat = Tensor(np.asarray(getattr(y_hat, "data", y_hat)))
    _check_shapes(y, y_hat, "critic_loss_wgan_gp")
    d_real, d_fake = critic(y, code), critic(y_hat, code)
    y_tilde = interpolate_samples(y, y_hat, rng, eps)
    penalty, norm = gradient_penalty(critic, y_tilde, code, penalty_weight)
    total = d_fake - d_real + penalty
    return CriticLoss(total, d_real.item() - d_fake.item(), penalty.item(), norm)


def critic_loss_gan(y, y_hat, code, critic: Critic) -> CriticLoss:
    """Binary cross-entropy: ``-log D(y) - log(1 - D(y_hat))``."""
    if critic.config.mode != "gan":
        raise ConfigurationError("the cross-entropy critic loss needs a sigmoid-output critic")
    y = as_tensor(getattr(y, "data", y))
    y_hat = Tensor(np.asarray(getattr(y_hat, "data", y_hat)))
    d_real = clip(critic(y, code), GAN_CLAMP, 1.0 - GAN_CLAMP)
    d_fake = clip(critic(y_hat, code), GAN_CLAMP, 1.0 - GAN_CLAMP)
    total = -log(d_real) - log(1.0 - d_fake)
    return CriticLoss(total, d_real.item() - d_fake.item())


def adv_loss_generator(y_hat, code, critic: Critic, mode: str = "wgan-gp",
                       non_saturating: bool = False) -> Tensor:
    """WGAN-GP: ``-D(y_hat)``.  GAN: ``log(1 - D(y_hat))``, or ``-log D(y_hat)`` if non-saturating."""
    if mode != critic.config.mode:
        raise ConfigurationError(f"adversarial mode {mode!r} does not match the critic ({critic.config.mode!r})")
    score = critic(y_hat, code)
    if mode == "wgan-gp":
        return -score
    score = clip(score, GAN_CLAMP, 1.0 - GAN_CLAMP)
    return -log(score) if non_saturating else log(1.0 - score)


def dml_term(y_hat, code, wavenet, classes, positions=None) -> Tensor:
    """Vocoder negative log-likelihood of the natural waveform given predicted mel frames."""
    if wavenet is None:
        raise ConfigurationError("the vocoder term needs a trained WaveNet checkpoint")
    return wavenet.nll(classes, y_hat, code, positions)


class LossTermError(NonFiniteError):
    def __init__(self, term: str, detail: str):
        super().__init__(f"{term} became non-finite: {detail}")
        self.term = term


@contextmanager
def _term(name: str):
    try:
        yield
    except LossTermError:
        raise
    except NonFiniteError as exc:
        raise LossTermError(name, str(exc)) from None


@dataclass
class GeneratorLoss:
    total: Tensor
    mse: float
    adv: float | None = None
    dml: float | None = None


def generator_total_loss(y, y_hat: Tensor, code, weights: LossWeights, stage: str = "finetune",
                         critic: Critic | None = None, wavenet=None, classes=None,
                         positions=None) -> GeneratorLoss:
    """MSE, plus the adversarial term from the adversarial stage on, plus the vocoder term
    in the finetune stage.  Terms with zero weight are skipped entirely."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    with _term("L_MSE"):
        mse = loss_mse(y, y_hat)
    total, out = mse, GeneratorLoss(mse, mse.item())
    if stage != "warmup" and weights.gamma_d != 0.0:
        if critic is None:
            raise ConfigurationError("adversarial stage needs a critic")
        with _term("L_ADV"):
            adv = adv_loss_generator(y_hat, code, critic, weights.mode, weights.non_saturating)
        total = total + adv * weights.gamma_d
        out.adv = adv.item()
    if stage == "finetune" and weights.gamma_w != 0.0:
        with _term("L_DML"):
            dml = dml_term(y_hat, code, wavenet, classes, positions)
        total = total + dml * weights.gamma_w
        out.dml = dml.item()
    out.total = total
    return out
