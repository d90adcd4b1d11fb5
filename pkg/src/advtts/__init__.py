"""Adversarial and waveform-loss acoustic model training with a WaveNet vocoder."""

__version__ = "0.1.0"
