"""Discretized mixture of logistics over quantized sample classes.

Class ``k`` in ``[0, n_classes)`` sits at value ``v_k = 2k - (n_classes - 1)``, so
neighbouring classes are two units apart and the interval ``[v_k - 1, v_k + 1]``
belongs to class ``k`` alone.  With that grid the bin probability

    P(k) = sum_i pi_i [sigmoid((v_k + 1 - mu_i) / (phi_i n_classes))
                       - sigmoid((v_k - 1 - mu_i) / (phi_i n_classes))]

telescopes to one over all classes; the lowest class takes ``-inf`` as its
lower edge and the highest ``+inf`` as its upper edge.  Means are expressed
in value units, scales are stored as ``log phi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, log_softmax, softmax

from ..autograd import DimensionError, Function, Tensor


def class_values(n_classes: int) -> np.ndarray:
    return 2.0 * np.arange(n_classes) - (n_classes - 1)


def class_to_value(k, n_classes: int):
    return 2.0 * np.asarray(k) - (n_classes - 1)


def value_to_class(v, n_classes: int):
    """Class whose bin ``[v_k - 1, v_k + 1)`` holds ``v`` (clamped to the valid range)."""
    return np.clip(np.floor((np.asarray(v, dtype=np.float64) + n_classes) / 2.0), 0, n_classes - 1).astype(np.int64)


def int16_to_classes(samples: np.ndarray, bits: int) -> np.ndarray:
    return (np.asarray(samples, dtype=np.int64) + 32768) >> (16 - bits)


def classes_to_int16(classes: np.ndarray, bits: int) -> np.ndarray:
    """Inverse of :func:`int16_to_classes`; 8-bit classes are scaled by 256."""
    return ((np.asarray(classes, dtype=np.int64) << (16 - bits)) - 32768).astype(np.int16)


@dataclass
class DmlParams:
    """Mixture parameters with a trailing component axis ``K``."""

    logits: np.ndarray
    means: np.ndarray
    log_scales: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.log_scales = np.asarray(self.log_scales, dtype=np.float64)
        if not (self.logits.shape == self.means.shape == self.log_scales.shape):
            raise DimensionError(
                f"DML parameter shapes disagree: {self.logits.shape}, {self.means.shape}, "
                f"{self.log_scales.shape}")

    @classmethod
    def from_weights(cls, weights, means, scales) -> "DmlParams":
        weights = np.asarray(weights, dtype=np.float64)
        scales = np.asarray(scales, dtype=np.float64)
        if np.any(scales <= 0):
            raise ValueError("mixture scales must be strictly positive")
        if np.any(weights < 0) or not np.allclose(weights.sum(axis=-1), 1.0, atol=1e-12):
            raise ValueError("mixture weights must be nonnegative and sum to one")
        with np.errstate(divide="ignore"):
            logits = np.where(weights > 0, np.log(np.maximum(weights, 1e-300)), -1e30)
        return cls(logits, means, np.log(scales))

    @property
    def n_components(self) -> int:
        return self.logits.shape[-1]

    @property
    def weights(self) -> np.ndarray:
        return softmax(self.logits, axis=-1)

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    def __getitem__(self, index) -> "DmlParams":
        return DmlParams(self.logits[index], self.means[index], self.log_scales[index])


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _bin_terms(classes, means, log_scales, n_classes):
    """Scaled bin edges and per-component log bin mass, broadcast over ``K``."""
    classes = np.asarray(classes)
    if np.any(classes < 0) or np.any(classes > n_classes - 1):
        raise ValueError(f"sample class out of range [0, {n_classes - 1}]")
    v = class_to_value(classes, n_classes)[..., None]
    inv = np.exp(-log_scales) / n_classes
    hi = (v + 1.0 - means) * inv
    lo = (v - 1.0 - means) * inv
    bottom = np.broadcast_to((classes == 0)[..., None], hi.shape)
    top = np.broadcast_to((classes == n_classes - 1)[..., None], hi.shape)
    # log(sigmoid(hi) - sigmoid(lo)) evaluated on whichever tail keeps precision
    upper = hi + lo > 0
    a = np.where(upper, -lo, hi)
    b = np.where(upper, -hi, lo)
    log_a = _log_sigmoid(a)
    with np.errstate(divide="ignore"):
        log_mass = log_a + np.log(-np.expm1(_log_sigmoid(b) - log_a))
    log_mass = np.where(bottom, _log_sigmoid(hi), log_mass)
    log_mass = np.where(top, _log_sigmoid(-lo), log_mass)
    log_mass = np.where(bottom & top, 0.0, log_mass)
    return hi, lo, bottom, top, inv, log_mass


def component_log_probs(classes, params: DmlParams, n_classes: int) -> np.ndarray:
    return _bin_terms(classes, params.means, params.log_scales, n_classes)[-1]


def dml_log_prob(classes, params: DmlParams, n_classes: int) -> np.ndarray:
    """``log P(class)``; ``classes`` broadcasts against the leading axes of ``params``."""
    comp = component_log_probs(classes, params, n_classes)
    return logsumexp(log_softmax(params.logits, axis=-1) + comp, axis=-1)


def dml_pmf(params: DmlParams, n_classes: int) -> np.ndarray:
    """Full probability table over classes for one timestep's parameters."""
    ks = np.arange(n_classes)
    single = DmlParams(params.logits[None, :], params.means[None, :], params.log_scales[None, :])
    return np.exp(dml_log_prob(ks, single, n_classes))


class DmlLogProb(Function):
    """Log-likelihood of target classes; inputs are ``(N, K)`` logits, means, log-scales."""

    name = "dml_log_prob"
    double_differentiable = False

    def forward(self, logits, means, log_scales, classes=None, n_classes=256):
        if logits.ndim != 2 or not (logits.shape == means.shape == log_scales.shape):
            raise DimensionError("dml_log_prob: parameters must share an (N, K) shape")
        classes = np.asarray(classes)
        if classes.shape != logits.shape[:1]:
            raise DimensionError(
                f"dml_log_prob: {classes.shape[0] if classes.ndim else 0} targets for {logits.shape[0]} steps")
        hi, lo, bottom, top, inv, log_mass = _bin_terms(classes, means, log_scales, n_classes)
        log_pi = log_softmax(logits, axis=-1)
        joint = log_pi + log_mass
        out = logsumexp(joint, axis=-1)
        self.cache = (hi, lo, bottom, top, inv, log_mass, np.exp(log_pi), np.exp(joint - out[:, None]))
        return out

    def backward(self, grad):
        hi, lo, bottom, top, inv, log_mass, pi, resp = self.cache
        g = grad.data[:, None]
        # d log_mass / d edge, zero where the edge sits at +-inf
        hi_s = np.where(top, 0.0, hi)
        lo_s = np.where(bottom, 0.0, lo)
        d_hi = np.where(top, 0.0, np.exp(_log_sigmoid(hi_s) + _log_sigmoid(-hi_s) - log_mass))
        d_lo = np.where(bottom, 0.0, -np.exp(_log_sigmoid(lo_s) + _log_sigmoid(-lo_s) - log_mass))
        g_mass = g * resp
        g_logits = g * (resp - pi)
        g_means = -g_mass * (d_hi + d_lo) * inv
        g_log_scales = -g_mass * (d_hi * hi_s + d_lo * lo_s)
        return Tensor(g_logits), Tensor(g_means), Tensor(g_log_scales)


def dml_log_prob_tensor(logits: Tensor, means: Tensor, log_scales: Tensor, classes,
                        n_classes: int) -> Tensor:
    return DmlLogProb.apply(logits, means, log_scales, classes=np.asarray(classes), n_classes=n_classes)


def select_positions(n_frames: int, hop: int, rng: np.random.Generator,
                     fraction: float = 0.5) -> np.ndarray:
    """Sorted sample indices: ``ceil(hop * fraction)`` distinct positions per frame."""
    per_frame = int(np.ceil(hop * fraction))
    if n_frames < 1 or per_frame < 1:
        raise ValueError("position selection needs at least one frame and one position")
    order = np.argsort(rng.random((n_frames, hop)), axis=1)[:, :per_frame]
    return np.sort((order + hop * np.arange(n_frames)[:, None]).reshape(-1))


def dml_loss(log_probs: Tensor, positions=None) -> Tensor:
    """Negative mean log-likelihood over ``positions`` (all positions when None).

    Minimizing this maximizes the average log-likelihood.
    """
    if positions is not None:
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size == 0:
            raise ValueError("DML loss needs at least one selected position")
        if positions.min() < 0 or positions.max() >= log_probs.shape[0]:
            raise IndexError("selected position outside the sequence")
        log_probs = log_probs[positions]
    return -log_probs.mean()


def dml_sample(params: DmlParams, n_classes: int, rng: np.random.Generator) -> np.ndarray:
    """Draw classes: pick a component by its weight, invert the logistic CDF, bin the value.

    Works on a single timestep (``K`` parameters) or a batch ``(N, K)``.
    """
    pi = params.weights
    flat_pi = pi.reshape(-1, pi.shape[-1])
    cum = np.cumsum(flat_pi, axis=1)
    u_comp = rng.random(flat_pi.shape[0])
    comp = np.minimum((u_comp[:, None] > cum).sum(axis=1), flat_pi.shape[1] - 1)
    rows = np.arange(flat_pi.shape[0])
    mu = params.means.reshape(flat_pi.shape)[rows, comp]
    scale = np.exp(params.log_scales.reshape(flat_pi.shape)[rows, comp]) * n_classes
    u = rng.uniform(1e-12, 1.0 - 1e-12, size=flat_pi.shape[0])
    v = mu + scale * (np.log(u) - np.log1p(-u))
    return value_to_class(v, n_classes).reshape(pi.shape[:-1])
