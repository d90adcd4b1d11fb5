"""Sample-by-sample autoregressive generation with cached per-block history.

Each block keeps the last ``dilation`` inputs it saw, so one step costs a
fixed number of small matrix-vector products no matter how long the output
already is.  Conditioning is upsampled once up front.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..autograd import no_grad
from .dml import DmlParams, class_to_value, dml_sample
from .model import WaveNet


def _arrays(model: WaveNet, state: dict | None) -> dict[str, np.ndarray]:
    if state is None:
        return {k: p.data for k, p in model.named_parameters().items()}
    missing = set(model.named_parameters()) - set(state)
    if missing:
        raise KeyError(f"averaged weights are missing: {sorted(missing)}")
    return state


class IncrementalWaveNet:
    """Stateful single-step evaluator that mirrors :meth:`WaveNet.teacher_forced`."""

    def __init__(self, model: WaveNet, mel, code, weights: dict | None = None):
        cfg = model.config
        self.cfg = cfg
        self.w = w = _arrays(model, weights)
        saved = model.state_dict()
        with no_grad():
            if weights is not None:
                model.load_state_dict(weights)
            try:
                cond = model.upsample(mel).data
                emb = model.speaker_vector(code).data
            finally:
                model.load_state_dict(saved)
        self.n_samples = cond.shape[1]
        # per-block (2R, T) precomputed conditioning: local 1x1 + global + conv bias
        self.cond = [
            w[f"blocks.{i}.local"] @ cond + w[f"blocks.{i}.glob"] @ emb + w[f"blocks.{i}.conv_bias"]
            for i in range(cfg.blocks)
        ]
        R = cfg.residual_channels
        self.history = [np.zeros((d, R)) for d in cfg.dilations]
        self.t = 0

    def step(self, x_prev: float) -> DmlParams:
        """Mixture parameters for the current sample given the previous (scaled) value."""
        w, cfg, t = self.w, self.cfg, self.t
        if t >= self.n_samples:
            raise IndexError("conditioning exhausted")
        R, K = cfg.residual_channels, cfg.mixtures
        state = w["input_w"][:, 0] * x_prev + w["input_b"][:, 0]
        skips = 0.0
        for i, d in enumerate(cfg.dilations):
            conv = w[f"blocks.{i}.conv"]
            hist = self.history[i]
            slot = t % d
            past = hist[slot]
            z = conv[:, :, 0] @ past + conv[:, :, 1] @ state + self.cond[i][:, t]
            hist[slot] = state
            h = expit(z[R:]) * np.tanh(z[:R])
            skips = skips + w[f"blocks.{i}.skip"] @ h + w[f"blocks.{i}.skip_bias"][:, 0]
            state = state + w[f"blocks.{i}.res"] @ h + w[f"blocks.{i}.res_bias"][:, 0]
        out = w["out_w"] @ np.maximum(skips, 0.0) + w["out_b"][:, 0]
        self.t += 1
        return DmlParams(out[:K], out[K:2 * K] * cfg.n_classes,
                         np.maximum(out[2 * K:], cfg.log_scale_floor))


def generate(model: WaveNet, mel, code, rng: np.random.Generator, weights: dict | None = None,
             n_samples: int | None = None) -> np.ndarray:
    """Sample classes for every conditioning step (or the first ``n_samples``).

    ``weights`` may hold an averaged copy of the parameters; the live model is
    left untouched either way.
    """
    inc = IncrementalWaveNet(model, mel, code, weights)
    n = inc.n_samples if n_samples is None else min(n_samples, inc.n_samples)
    n_classes = model.config.n_classes
    out = np.empty(n, dtype=np.int64)
    x_prev = 0.0
    for t in range(n):
        k = int(dml_sample(inc.step(x_prev), n_classes, rng))
        out[t] = k
        x_prev = float(class_to_value(k, n_classes)) / n_classes
    return out


def forced_params(model: WaveNet, classes, mel, code, weights: dict | None = None) -> DmlParams:
    """Incremental evaluation on a fixed class sequence, for checking against teacher forcing."""
    inc = IncrementalWaveNet(model, mel, code, weights)
    n_classes = model.config.n_classes
    rows = []
    x_prev = 0.0
    for k in np.asarray(classes):
        p = inc.step(x_prev)
        rows.append((p.logits, p.means, p.log_scales))
        x_prev = float(class_to_value(k, n_classes)) / n_classes
    logits, means, log_scales = (np.stack(c) for c in zip(*rows))
    return DmlParams(logits, means, log_scales)
