"""Mel-spectrogram analysis: 15 ms Hann frames, 5 ms hop, 80 mel bands 125-7600 Hz."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .io import SAMPLE_RATE, Waveform, read_array, write_array

FRAME_SIZE = 240  # 15 ms
HOP = 80  # 5 ms
N_FFT = 512
N_BINS = N_FFT // 2 + 1
N_MELS = 80
FMIN = 125.0
FMAX = 7600.0
CLIP_FLOOR = 0.01
LOG_FLOOR = float(np.log(CLIP_FLOOR))
VAR_FLOOR = 1e-12


class InputLengthError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


def frame_count(n_samples: int) -> int:
    if n_samples < FRAME_SIZE:
        raise InputLengthError(f"need at least {FRAME_SIZE} samples, got {n_samples}")
    return (n_samples - FRAME_SIZE) // HOP + 1


def hann_window(n: int = FRAME_SIZE) -> np.ndarray:
    # periodic form, the usual choice for STFT analysis
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def _as_float(w) -> np.ndarray:
    if isinstance(w, Waveform):
        return w.as_float()
    return np.asarray(w, dtype=np.float64)


def stft_magnitude(w) -> np.ndarray:
    """Magnitude STFT, shape ``(frames, 257)``.  Int16 waveforms are scaled to [-1, 1)."""
    x = _as_float(w)
    T = frame_count(len(x))
    idx = np.arange(FRAME_SIZE)[None, :] + HOP * np.arange(T)[:, None]
    frames = x[idx] * hann_window()[None, :]
    return np.abs(np.fft.rfft(frames, n=N_FFT, axis=1))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=None)
def _filterbank() -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(FMIN), hz_to_mel(FMAX), N_MELS + 2))
    freqs = np.arange(N_BINS) * SAMPLE_RATE / N_FFT
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def mel_filterbank() -> np.ndarray:
    """Peak-one triangular filters on the HTK mel scale, shape ``(80, 257)``."""
    return _filterbank().copy()


def mel_project(spec: np.ndarray) -> np.ndarray:
    spec = np.asarray(spec, dtype=np.float64)
    if spec.ndim != 2 or spec.shape[1] != N_BINS:
        raise ValueError(f"expected (frames, {N_BINS}) magnitudes, got {spec.shape}")
    return spec @ _filterbank().T


def log_compress(mel: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(mel, CLIP_FLOOR))


@dataclass
class MelStats:
    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def fit(cls, log_mels) -> "MelStats":
        stacked = np.concatenate([np.asarray(m) for m in log_mels], axis=0)
        return cls(stacked.mean(axis=0), stacked.var(axis=0))

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.var, VAR_FLOOR))

    def save(self, path) -> None:
        write_array(path, np.stack([self.mean, self.var]))

    @classmethod
    def load(cls, path) -> "MelStats":
        arr = read_array(Path(path))
        return cls(arr[0].copy(), arr[1].copy())


@dataclass
class MelSpectrogram:
    frames: np.ndarray  # (T, 80), normalized
    stats: MelStats

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[1] != N_MELS:
            raise ValueError(f"mel-spectrogram must be (T, {N_MELS}), got {self.frames.shape}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def denormalized(self) -> np.ndarray:
        return denormalize(self.frames, self.stats)


def normalize(log_mel: np.ndarray, stats: MelStats) -> np.ndarray:
    return (log_mel - stats.mean) / stats.std


def denormalize(frames: np.ndarray, stats: MelStats) -> np.ndarray:
    return frames * stats.std + stats.mean


def log_compress_normalize(mel: np.ndarray, stats: MelStats | None) -> MelSpectrogram:
    """Clip at 0.01, take the natural log, z-normalize with ``stats``.

    Stats come from :meth:`MelStats.fit` over the training corpus; passing
    ``None`` outside of fitting is a configuration error.
    """
    if stats is None:
        raise ConfigurationError("normalization statistics are required; fit them on the training set")
    return MelSpectrogram(normalize(log_compress(mel), stats), stats)


def log_mel(w) -> np.ndarray:
    """Pre-normalization log-mel features, shape ``(T, 80)``."""
    return log_compress(mel_project(stft_magnitude(w)))


def mel_spectrogram(w, stats: MelStats) -> MelSpectrogram:
    return log_compress_normalize(mel_project(stft_magnitude(w)), stats)


def align_waveform(samples: np.ndarray, n_frames: int) -> np.ndarray:
    """Samples matched to frames: frame ``t`` owns ``[80t + 80, 80t + 160)``.

    That span is centered on the analysis window of frame ``t``.  The result
    has exactly ``n_frames * 80`` samples (zero padded if the input is short).
    """
    out = np.asarray(samples)[HOP:HOP + n_frames * HOP]
    if len(out) < n_frames * HOP:
        out = np.pad(out, (0, n_frames * HOP - len(out)))
    return out
