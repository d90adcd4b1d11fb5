"""Desk-scale experiments shared by the acceptance suite and ``scripts/``.

Each function trains from a :class:`RunConfig` and returns plain numbers, so
callers decide what to assert or print.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .cache import corpus_from_config, split_heldout
from .config import RunConfig
from .dsp.features import N_FFT, SAMPLE_RATE, stft_magnitude
from .training.acoustic import AcousticTrainer, critic_grad_norm_mean, evaluate_dml, evaluate_mse
from .training.data import build_items
from .training.vocoder import VocoderTrainer, mean_nll
from .wavenet.dml import classes_to_int16
from .wavenet.generate import generate


@dataclass
class VocoderResult:
    nll_initial: float
    nll_final: float
    nll_final_ema: float
    n_train: int
    n_heldout: int
    seconds: float


@dataclass
class AcousticResult:
    mse_first_epoch: float
    mse_end_warmup: float
    grad_norm_end_adversarial: float
    dml_end_adversarial: float
    dml_end_finetune: float
    dml_last_epoch_logged: float | None
    mse_end_adversarial: float
    mse_end_finetune: float
    seconds: float


@dataclass
class ToneResult:
    stft_peak_bin: int
    stft_target_bin: float
    fft_peak_hz: float
    fft_bin_hz: float
    n_samples: int
    seconds: float


def train_vocoder(config: RunConfig) -> tuple[VocoderTrainer, VocoderResult]:
    """Teacher-forced training; NLL is measured on held-out utterances (all if none held out)."""
    start = time.perf_counter()
    items = build_items(corpus_from_config(config)[0])
    train, held = split_heldout(items, config.heldout)
    eval_set = held or train
    trainer = VocoderTrainer(config.wavenet(), config.vocoder_training())
    initial = mean_nll(trainer.model, eval_set)
    trainer.train(train)
    result = VocoderResult(initial, mean_nll(trainer.model, eval_set),
                           mean_nll(trainer.model, eval_set, trainer.ema.shadow),
                           len(train), len(held), time.perf_counter() - start)
    return trainer, result


def train_acoustic(config: RunConfig, trainer: VocoderTrainer) -> tuple[AcousticTrainer, AcousticResult]:
    """All three stages on every utterance, with probes at the stage boundaries.

    The vocoder term is evaluated with the averaged vocoder weights, which is
    also what the finetune stage trains against.
    """
    start = time.perf_counter()
    acfg = config.acoustic()
    items = build_items(corpus_from_config(config)[0])
    wavenet = trainer.model
    wavenet.load_state_dict(trainer.ema.shadow)
    wavenet.requires_grad_(False)
    ac = AcousticTrainer(acfg, items, wavenet)
    ac.train(acfg.n2)
    probe = np.random.default_rng([config.seed, 4])
    grad_norm = critic_grad_norm_mean(ac.generator, ac.critic, items, probe, acfg.max_frames) \
        if ac.critic is not None else float("nan")
    dml2, mse2 = evaluate_dml(ac.generator, items, wavenet), evaluate_mse(ac.generator, items)
    ac.train()
    rows = ac.metrics
    result = AcousticResult(
        mse_first_epoch=rows[0]["L_MSE"],
        mse_end_warmup=rows[acfg.n1 - 1]["L_MSE"],
        grad_norm_end_adversarial=grad_norm,
        dml_end_adversarial=dml2,
        dml_end_finetune=evaluate_dml(ac.generator, items, wavenet),
        dml_last_epoch_logged=rows[-1]["L_DML"],
        mse_end_adversarial=mse2,
        mse_end_finetune=evaluate_mse(ac.generator, items),
        seconds=time.perf_counter() - start,
    )
    return ac, result


def tone_abs(config: RunConfig, utterance: int = 0) -> ToneResult:
    """Overfit the vocoder on a single tone, then vocode natural frames of one utterance."""
    start = time.perf_counter()
    trainer, _ = train_vocoder(config)
    model = trainer.model
    model.load_state_dict(trainer.ema.shadow)
    items = build_items(corpus_from_config(config)[0])
    it = items[utterance]
    classes = generate(model, it.mel, it.code, np.random.default_rng([config.seed, 3, utterance]))
    x = classes_to_int16(classes, config.bits).astype(np.float64) / 32768.0
    mean_spectrum = stft_magnitude(x).mean(axis=0)
    full = np.abs(np.fft.rfft(x))
    return ToneResult(
        stft_peak_bin=int(mean_spectrum.argmax()),
        stft_target_bin=config.tone_hz * N_FFT / SAMPLE_RATE,
        fft_peak_hz=float(full.argmax() * SAMPLE_RATE / len(x)),
        fft_bin_hz=SAMPLE_RATE / len(x),
        n_samples=len(x),
        seconds=time.perf_counter() - start,
    )


def as_dict(result) -> dict:
    return asdict(result)
