from .io import SAMPLE_RATE, Waveform, WavFormatError, read_array, read_wav, write_array, write_wav
from .features import (
    FRAME_SIZE,
    HOP,
    N_MELS,
    ConfigurationError,
    InputLengthError,
    MelSpectrogram,
    MelStats,
    align_waveform,
    denormalize,
    frame_count,
    log_compress,
    log_compress_normalize,
    log_mel,
    mel_filterbank,
    mel_project,
    mel_spectrogram,
    normalize,
    stft_magnitude,
)
from .corpus import (
    N_LINGUISTIC,
    SPEAKER_CODE_DIM,
    ConditioningBundle,
    MinMaxScaler,
    Utterance,
    make_synthetic_corpus,
    make_tone_corpus,
    speaker_code,
)
