"""Prepared-corpus directory: features, raw linguistic inputs, waveforms and statistics.

Layout::

    manifest.tsv            utt_id, speaker, gender, n_frames
    stats.bin               mel mean and variance (2 x 80)
    ling_minmax.bin         linguistic min and max (2 x 381)
    features/<utt>.mel      normalized log-mel frames (T x 80)
    linguistic/<utt>.ling   raw linguistic features (T x 381)
    wav/<utt>.wav           16-bit PCM source audio

Arrays use the little-endian blob format of :mod:`advtts.dsp.io`.
"""
from __future__ import annotations

import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp.corpus import (
    ConditioningBundle,
    MinMaxScaler,
    Utterance,
    make_synthetic_corpus,
    make_tone_corpus,
    speaker_code,
)
from .dsp.features import MelStats, align_waveform, log_mel, normalize
from .dsp.io import WavFormatError, read_array, read_wav, write_array, write_wav
from .training.data import TrainingItem, fit_normalizers

MANIFEST_FIELDS = ["utt_id", "speaker", "gender", "n_frames"]


class DataError(ValueError):
    pass


@dataclass
class PrepareResult:
    out_dir: Path
    n_utterances: int
    cache_hit: bool
    errors: list


def corpus_from_config(config) -> tuple[list[Utterance], list[str]]:
    """Synthetic, tone, or WAV-directory corpus; returns utterances and per-file errors."""
    if config.corpus == "synthetic":
        return make_synthetic_corpus(config.n_speakers, config.n_utterances, config.duration, config.seed), []
    if config.corpus == "tone":
        return make_tone_corpus(config.n_utterances, config.duration, config.seed, config.tone_hz), []
    return read_wav_corpus(Path(config.corpus))


def read_wav_corpus(root: Path) -> tuple[list[Utterance], list[str]]:
    """``manifest.tsv`` (utt_id, speaker, gender) plus ``<utt>.wav`` and ``<utt>.ling`` files."""
    manifest = root / "manifest.tsv"
    if not manifest.exists():
        raise DataError(f"{root}: no manifest.tsv listing utt_id, speaker, gender")
    corpus, errors = [], []
    with manifest.open() as f:
        for row in csv.DictReader(f, delimiter="\t"):
            utt = row["utt_id"]
            try:
                wav = read_wav(root / f"{utt}.wav")
                ling = read_array(root / f"{utt}.ling")
            except (OSError, WavFormatError, ValueError) as exc:
                errors.append(f"{utt}: {exc}")
                continue
            corpus.append(Utterance(utt, int(row["speaker"]), int(row["gender"]), wav, ling))
    return corpus, errors


def _paths(out: Path, utt: str) -> dict[str, Path]:
    return {"mel": out / "features" / f"{utt}.mel", "ling": out / "linguistic" / f"{utt}.ling",
            "wav": out / "wav" / f"{utt}.wav"}


def read_manifest(out: Path) -> list[dict]:
    path = Path(out) / "manifest.tsv"
    if not path.exists():
        raise DataError(f"{out}: not a prepared corpus (no manifest.tsv); run prepare first")
    with path.open() as f:
        return list(csv.DictReader(f, delimiter="\t"))


def is_complete(out: Path) -> bool:
    out = Path(out)
    if not (out / "manifest.tsv").exists() or not (out / "stats.bin").exists() \
            or not (out / "ling_minmax.bin").exists():
        return False
    return all(p.exists() for row in read_manifest(out) for p in _paths(out, row["utt_id"]).values())


def prepare(config, out_dir, force: bool = False) -> PrepareResult:
    out = Path(out_dir)
    if not force and is_complete(out):
        return PrepareResult(out, len(read_manifest(out)), True, [])
    corpus, errors = corpus_from_config(config)
    for e in errors:
        print(f"skipping {e}", file=sys.stderr)
    if not corpus:
        raise DataError("no readable utterances in the corpus")
    stats, scaler = fit_normalizers(corpus)
    for sub in ("features", "linguistic", "wav"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    stats.save(out / "stats.bin")
    write_array(out / "ling_minmax.bin", scaler.to_array())
    rows = []
    for utt in corpus:
        mel = normalize(log_mel(utt.waveform), stats)
        T = min(mel.shape[0], utt.n_frames)
        p = _paths(out, utt.utt_id)
        write_array(p["mel"], mel[:T])
        write_array(p["ling"], utt.linguistic[:T])
        write_wav(p["wav"], utt.waveform)
        rows.append({"utt_id": utt.utt_id, "speaker": utt.speaker, "gender": utt.gender, "n_frames": T})
    with (out / "manifest.tsv").open("w", newline="") as f:
        w = csv.DictWriter(f, MANIFEST_FIELDS, delimiter="\t", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return PrepareResult(out, len(rows), False, errors)


def load_stats(out) -> MelStats:
    return MelStats.load(Path(out) / "stats.bin")


def load_items(out) -> list[TrainingItem]:
    out = Path(out)
    rows = read_manifest(out)
    try:
        scaler = MinMaxScaler.from_array(read_array(out / "ling_minmax.bin"))
    except OSError as exc:
        raise DataError(f"{out}: incomplete prepared corpus ({exc}); rerun prepare --force") from None
    items = []
    for row in rows:
        p = _paths(out, row["utt_id"])
        try:
            mel = read_array(p["mel"])
            wav = read_wav(p["wav"])
        except OSError as exc:
            raise DataError(f"{out}: incomplete prepared corpus ({exc}); rerun prepare --force") from None
        code = speaker_code(int(row["speaker"]), int(row["gender"]))
        items.append(TrainingItem(
            row["utt_id"], ConditioningBundle(scaler.transform(read_array(p["ling"])), code),
            mel, align_waveform(wav.samples, mel.shape[0])))
    return items


def split_heldout(items: list[TrainingItem], per_speaker: int) -> tuple[list, list]:
    """Last ``per_speaker`` utterances of each speaker go to the held-out set."""
    by_speaker: dict[tuple, list] = {}
    for it in items:
        by_speaker.setdefault(tuple(np.asarray(it.code)), []).append(it)
    train, held = [], []
    for group in by_speaker.values():
        cut = len(group) - per_speaker if per_speaker and len(group) > per_speaker else len(group)
        train += group[:cut]
        held += group[cut:]
    return train, held
