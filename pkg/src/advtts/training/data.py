"""Training items: aligned linguistic inputs, normalized mel targets and waveform classes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dsp.corpus import ConditioningBundle, MinMaxScaler, Utterance
from ..dsp.features import HOP, MelStats, align_waveform, log_mel, normalize
from ..wavenet.dml import int16_to_classes


@dataclass
class TrainingItem:
    utt_id: str
    bundle: ConditioningBundle
    mel: np.ndarray  # (T, 80), normalized
    samples: np.ndarray  # (T * 80,) int16, aligned to frames

    @property
    def n_frames(self) -> int:
        return self.mel.shape[0]

    @property
    def code(self) -> np.ndarray:
        return self.bundle.speaker_code

    def classes(self, bits: int) -> np.ndarray:
        return int16_to_classes(self.samples, bits)

    def crop(self, start: int, n_frames: int) -> "TrainingItem":
        stop = start + n_frames
        return TrainingItem(
            self.utt_id,
            ConditioningBundle(self.bundle.linguistic[start:stop], self.bundle.speaker_code),
            self.mel[start:stop],
            self.samples[start * HOP:stop * HOP],
        )


def random_crop(item: TrainingItem, max_frames: int | None, rng: np.random.Generator) -> TrainingItem:
    """Window of at most ``max_frames`` frames; the start is drawn even when no crop is needed
    so the stream advances the same way for every item."""
    start = int(rng.integers(0, max(1, item.n_frames - (max_frames or item.n_frames) + 1)))
    if not max_frames or item.n_frames <= max_frames:
        return item
    return item.crop(start, max_frames)


def fit_normalizers(corpus: list[Utterance]) -> tuple[MelStats, MinMaxScaler]:
    stats = MelStats.fit([log_mel(u.waveform) for u in corpus])
    scaler = MinMaxScaler.fit([u.linguistic for u in corpus])
    return stats, scaler


def build_item(utt: Utterance, stats: MelStats, scaler: MinMaxScaler) -> TrainingItem:
    mel = normalize(log_mel(utt.waveform), stats)
    T = min(mel.shape[0], utt.n_frames)
    return TrainingItem(
        utt.utt_id,
        ConditioningBundle(scaler.transform(utt.linguistic[:T]), utt.speaker_code),
        mel[:T],
        align_waveform(utt.waveform.samples, T),
    )


def build_items(corpus: list[Utterance], stats: MelStats | None = None,
                scaler: MinMaxScaler | None = None) -> list[TrainingItem]:
    if stats is None or scaler is None:
        fitted = fit_normalizers(corpus)
        stats = stats or fitted[0]
        scaler = scaler or fitted[1]
    return [build_item(u, stats, scaler) for u in corpus]
