"""WAV and binary array file formats.

Array files: ``int32 ndim``, then ``ndim`` x ``int32`` extents, then the values
as row-major float64, all little-endian.  Mel statistics, feature caches and
checkpoint parameter blobs all share this layout.
"""
from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SAMPLE_RATE = 16000


class WavFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {s.shape}")
        if s.dtype != np.int16:
            if np.any(s < -32768) or np.any(s > 32767):
                raise ValueError("waveform samples must lie in [-32768, 32767]")
            s = s.astype(np.int16)
        object.__setattr__(self, "samples", s)
        if self.sample_rate != SAMPLE_RATE:
            raise ValueError(f"sample_rate must be {SAMPLE_RATE}, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)

    def as_float(self) -> np.ndarray:
        return self.samples.astype(np.float64) / 32768.0


def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as f:
        if f.getcomptype() != "NONE":
            raise WavFormatError(f"{path}: compression {f.getcomptype()!r} is not PCM")
        if f.getnchannels() != 1:
            raise WavFormatError(f"{path}: channels={f.getnchannels()}, expected mono")
        if f.getsampwidth() != 2:
            raise WavFormatError(f"{path}: sample width={8 * f.getsampwidth()} bits, expected 16")
        if f.getframerate() != SAMPLE_RATE:
            raise WavFormatError(f"{path}: sample rate={f.getframerate()}, expected {SAMPLE_RATE}")
        raw = f.readframes(f.getnframes())
    return Waveform(np.frombuffer(raw, dtype="<i2").astype(np.int16))


def write_wav(path, waveform: Waveform) -> None:
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(waveform.sample_rate)
        f.writeframes(waveform.samples.astype("<i2").tobytes())


def array_to_bytes(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    header = np.array([arr.ndim, *arr.shape], dtype="<i4")
    return header.tobytes() + arr.tobytes()


def array_from_bytes(buf: bytes) -> np.ndarray:
    ndim = int(np.frombuffer(buf, dtype="<i4", count=1)[0])
    shape = tuple(int(n) for n in np.frombuffer(buf, dtype="<i4", count=ndim, offset=4))
    offset = 4 * (1 + ndim)
    count = int(np.prod(shape)) if shape else 1
    if len(buf) != offset + 8 * count:
        raise ValueError(f"array blob size {len(buf)} does not match header shape {shape}")
    return np.frombuffer(buf, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)


def write_array(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(array_to_bytes(arr))


def read_array(path) -> np.ndarray:
    return array_from_bytes(Path(path).read_bytes())

