"""Synthetic multi-speaker corpus and conditioning features.

Each speaker is a parametric voice: a harmonic source whose F0 wanders inside
a speaker-specific range, shaped by phone-dependent formants scaled by a
speaker-specific vocal-tract factor, plus band-limited noise for fricatives.
Linguistic features are frame-aligned phone indicators plus duration values.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .features import FRAME_SIZE, HOP, ConfigurationError, frame_count
from .io import SAMPLE_RATE, Waveform

N_BINARY = 376
N_DURATION = 5
N_LINGUISTIC = N_BINARY + N_DURATION
MAX_SPEAKERS = 6
SPEAKER_CODE_DIM = MAX_SPEAKERS + 1

# (name, voiced, F1, F2, F3, noise band low/high Hz, relative level)
PHONES = [
    ("sil", False, 0, 0, 0, (0, 0), 0.0),
    ("aa", True, 730, 1090, 2440, (0, 0), 1.0),
    ("iy", True, 270, 2290, 3010, (0, 0), 0.8),
    ("uw", True, 300, 870, 2240, (0, 0), 0.8),
    ("eh", True, 530, 1840, 2480, (0, 0), 0.9),
    ("ao", True, 570, 840, 2410, (0, 0), 0.9),
    ("ah", True, 640, 1190, 2390, (0, 0), 0.9),
    ("er", True, 490, 1350, 1690, (0, 0), 0.8),
    ("m", True, 280, 1000, 2200, (0, 0), 0.4),
    ("n", True, 280, 1700, 2600, (0, 0), 0.4),
    ("l", True, 360, 1300, 2700, (0, 0), 0.6),
    ("s", False, 0, 0, 0, (4000, 7000), 0.25),
    ("sh", False, 0, 0, 0, (2000, 4500), 0.3),
    ("f", False, 0, 0, 0, (1200, 6500), 0.12),
    ("z", True, 280, 1600, 2500, (4000, 7000), 0.35),
    ("v", True, 300, 1100, 2300, (1200, 6500), 0.3),
]
N_PHONES = len(PHONES)
VOWELS = {"aa", "iy", "uw", "eh", "ao", "ah", "er"}
NASALS = {"m", "n"}
FRICATIVES = {"s", "sh", "f", "z", "v"}

# per speaker: F0 range (Hz), formant scale, gender bit (1 = female)
SPEAKERS = [
    ((110.0, 130.0), 1.00, 0),
    ((200.0, 220.0), 1.15, 1),
    ((95.0, 115.0), 0.95, 0),
    ((180.0, 200.0), 1.12, 1),
    ((125.0, 145.0), 1.03, 0),
    ((220.0, 240.0), 1.18, 1),
]


@dataclass
class Utterance:
    utt_id: str
    speaker: int
    gender: int
    waveform: Waveform
    linguistic: np.ndarray  # (T, 381), raw (not min-max normalized)
    phones: list = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        return self.linguistic.shape[0]

    @property
    def speaker_code(self) -> np.ndarray:
        return speaker_code(self.speaker, self.gender)


@dataclass
class ConditioningBundle:
    linguistic: np.ndarray  # (T, 381), min-max normalized
    speaker_code: np.ndarray  # (7,)

    def __post_init__(self):
        self.linguistic = np.asarray(self.linguistic, dtype=np.float64)
        self.speaker_code = np.asarray(self.speaker_code, dtype=np.float64)
        if self.linguistic.ndim != 2 or self.linguistic.shape[1] != N_LINGUISTIC:
            raise ValueError(f"linguistic features must be (T, {N_LINGUISTIC}), got {self.linguistic.shape}")
        check_speaker_code(self.speaker_code)

    @property
    def n_frames(self) -> int:
        return self.linguistic.shape[0]


def speaker_code(speaker: int, gender: int) -> np.ndarray:
    if not 0 <= speaker < MAX_SPEAKERS:
        raise ConfigurationError(f"speaker index must be in [0, {MAX_SPEAKERS}), got {speaker}")
    code = np.zeros(SPEAKER_CODE_DIM)
    code[speaker] = 1.0
    code[MAX_SPEAKERS] = float(gender)
    return code


def check_speaker_code(code: np.ndarray) -> None:
    if code.shape != (SPEAKER_CODE_DIM,):
        raise ValueError(f"speaker code must have {SPEAKER_CODE_DIM} entries, got {code.shape}")
    one_hot = code[:MAX_SPEAKERS]
    if not (np.all((one_hot == 0) | (one_hot == 1)) and one_hot.sum() == 1):
        raise ValueError("speaker identity block must be one-hot")
    if code[MAX_SPEAKERS] not in (0.0, 1.0):
        raise ValueError("gender bit must be 0 or 1")


# -- linguistic features ---------------------------------------------------------

def linguistic_features(phone_ids: np.ndarray, starts: np.ndarray, ends: np.ndarray,
                        n_frames: int) -> np.ndarray:
    """Frame-level features for a phone segmentation given in samples.

    Binary block: current/previous/next phone one-hot (3 x 16), four phone
    class bits, and zero padding to 376.  Duration block: phone length in
    frames, frames since phone start, frames to phone end, relative position
    in phone, relative position in utterance.
    """
    feats = np.zeros((n_frames, N_LINGUISTIC))
    centers = HOP * np.arange(n_frames) + FRAME_SIZE // 2
    seg = np.clip(np.searchsorted(ends, centers, side="right"), 0, len(phone_ids) - 1)
    rows = np.arange(n_frames)
    cur = phone_ids[seg]
    prev = phone_ids[np.maximum(seg - 1, 0)]
    nxt = phone_ids[np.minimum(seg + 1, len(phone_ids) - 1)]
    feats[rows, cur] = 1.0
    feats[rows, N_PHONES + prev] = 1.0
    feats[rows, 2 * N_PHONES + nxt] = 1.0
    base = 3 * N_PHONES
    names = [PHONES[i][0] for i in cur]
    feats[:, base] = [PHONES[i][1] for i in cur]
    feats[:, base + 1] = [n in VOWELS for n in names]
    feats[:, base + 2] = [n in NASALS for n in names]
    feats[:, base + 3] = [n in FRICATIVES for n in names]
    length = (ends[seg] - starts[seg]) / HOP
    since = (centers - starts[seg]) / HOP
    feats[:, N_BINARY] = length
    feats[:, N_BINARY + 1] = since
    feats[:, N_BINARY + 2] = length - since
    feats[:, N_BINARY + 3] = since / np.maximum(length, 1e-9)
    feats[:, N_BINARY + 4] = rows / max(n_frames - 1, 1)
    return feats


@dataclass
class MinMaxScaler:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, mats) -> "MinMaxScaler":
        stacked = np.concatenate(list(mats), axis=0)
        return cls(stacked.min(axis=0), stacked.max(axis=0))

    def transform(self, x: np.ndarray) -> np.ndarray:
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        out = np.where(span > 0, (x - self.lo) / safe, 0.0)
        return np.clip(out, 0.0, 1.0)

    def to_array(self) -> np.ndarray:
        return np.stack([self.lo, self.hi])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "MinMaxScaler":
        return cls(arr[0].copy(), arr[1].copy())


# -- waveform synthesis ------------------------------------------------------------

def _smooth(track: np.ndarray, width: int) -> np.ndarray:
    kernel = np.hanning(width)
    kernel /= kernel.sum()
    padded = np.pad(track, (width // 2, width - width // 2 - 1), mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def _segment(rng: np.random.Generator, n_samples: int):
    """Random phone sequence with silence at both ends; boundaries in samples."""
    ids, bounds = [0], [0, int(rng.integers(800, 1600))]
    while bounds[-1] < n_samples - 1600:
        ids.append(int(rng.integers(1, N_PHONES)))
        bounds.append(min(bounds[-1] + int(rng.integers(800, 2400)), n_samples - 800))
    ids.append(0)
    bounds.append(n_samples)
    b = np.asarray(bounds)
    return np.asarray(ids), b[:-1], b[1:]


def synthesize_voice(rng: np.random.Generator, speaker: int, phone_ids, starts, ends,
                     n_samples: int) -> np.ndarray:
    (f0_lo, f0_hi), scale, _ = SPEAKERS[speaker]
    t = np.arange(n_samples) / SAMPLE_RATE
    seg = np.searchsorted(ends, np.arange(n_samples), side="right").clip(0, len(phone_ids) - 1)
    props = [PHONES[i] for i in phone_ids]
    per = lambda k: np.array([p[k] for p in props], dtype=np.float64)[seg]  # noqa: E731
    width = 160
    voiced = _smooth(per(1) * per(6), width)
    formants = [_smooth(per(k), width) * scale for k in (2, 3, 4)]
    noise_lvl = _smooth(np.array([p[6] * (p[5][1] > 0) for p in props])[seg], width)

    rate, phase0 = rng.uniform(1.0, 3.0), rng.uniform(0, 2 * np.pi)
    f0 = f0_lo + (f0_hi - f0_lo) * (0.5 + 0.5 * np.sin(2 * np.pi * rate * t + phase0))
    phase = 2 * np.pi * np.cumsum(f0) / SAMPLE_RATE
    n_harm = int(7600 // f0_lo)
    out = np.zeros(n_samples)
    for k in range(1, n_harm + 1):
        fk = k * f0
        env = sum(np.exp(-0.5 * ((fk - F) / (60.0 + 0.1 * F)) ** 2) for F in formants)
        amp = (0.5 + env) / k ** 2 * (fk < 7600)
        out += amp * np.sin(k * phase)
    out *= voiced

    noise = np.zeros(n_samples)
    for lo, hi in {p[5] for p in props if p[5][1] > 0}:
        sos = signal.butter(4, [lo, hi], btype="bandpass", fs=SAMPLE_RATE, output="sos")
        band = signal.sosfilt(sos, rng.normal(size=n_samples))
        mask = _smooth(np.array([p[5] == (lo, hi) for p in props], dtype=np.float64)[seg], width)
        noise += band * mask
    out += noise * noise_lvl
    return out


def _to_int16(x: np.ndarray, peak: float) -> np.ndarray:
    m = np.max(np.abs(x))
    if m > 0:
        x = x * (peak / m)
    return np.clip(np.round(x * 32767), -32768, 32767).astype(np.int16)


def make_synthetic_corpus(n_speakers: int, n_utterances: int, duration_s: float,
                          seed: int) -> list[Utterance]:
    """``n_utterances`` per speaker, deterministic in ``seed``."""
    if n_speakers > MAX_SPEAKERS or n_speakers < 1:
        raise ConfigurationError(f"n_speakers must be in [1, {MAX_SPEAKERS}], got {n_speakers}")
    n_samples = int(round(duration_s * SAMPLE_RATE))
    frame_count(n_samples)
    root = np.random.SeedSequence(seed)
    corpus = []
    children = root.spawn(n_speakers * n_utterances)
    for spk in range(n_speakers):
        for u in range(n_utterances):
            rng = np.random.default_rng(children[spk * n_utterances + u])
            ids, starts, ends = _segment(rng, n_samples)
            audio = synthesize_voice(rng, spk, ids, starts, ends, n_samples)
            wav = Waveform(_to_int16(audio, rng.uniform(0.4, 0.6)))
            T = frame_count(n_samples)
            corpus.append(Utterance(
                utt_id=f"spk{spk}_{u:04d}", speaker=spk, gender=SPEAKERS[spk][2], waveform=wav,
                linguistic=linguistic_features(ids, starts, ends, T),
                phones=[PHONES[i][0] for i in ids]))
    return corpus


def make_tone_corpus(n_utterances: int, duration_s: float, seed: int,
                     freq_hz: float = 400.0) -> list[Utterance]:
    """Single speaker whose every utterance is a pure tone (random phase and level)."""
    n_samples = int(round(duration_s * SAMPLE_RATE))
    T = frame_count(n_samples)
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples) / SAMPLE_RATE
    corpus = []
    for u in range(n_utterances):
        x = np.sin(2 * np.pi * freq_hz * t + rng.uniform(0, 2 * np.pi))
        wav = Waveform(_to_int16(x, rng.uniform(0.45, 0.55)))
        ids, starts, ends = np.array([1]), np.array([0]), np.array([n_samples])
        corpus.append(Utterance(
            utt_id=f"tone_{u:04d}", speaker=0, gender=0, waveform=wav,
            linguistic=linguistic_features(ids, starts, ends, T), phones=["aa"]))
    return corpus
