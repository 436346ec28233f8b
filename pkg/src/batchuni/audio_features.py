"""WAV input, STFT magnitude, mel filterbank and context-stacked log-mel
feature vectors."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import get_window


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    stft_len: int = 512
    hop: int = 256
    mel_bands: int = 40
    context: int = 5
    window: str = "hann"
    fmin: float = 0.0
    fmax: float | None = None  # None means Nyquist
    log_floor: float = 1e-10

    def __post_init__(self):
        if not self.stft_len > self.hop > 0:
            raise ValueError("need stft_len > hop > 0")
        if self.mel_bands < 1:
            raise ValueError("mel_bands must be positive")
        if self.context < 0:
            raise ValueError("context must be non-negative")

    @property
    def n_bins(self) -> int:
        return self.stft_len // 2 + 1

    @property
    def dim(self) -> int:
        return self.mel_bands * (2 * self.context + 1)


FCN40 = FeatureConfig(mel_bands=40, context=5)
FCN64 = FeatureConfig(mel_bands=64, context=10)


@dataclass
class FeatureSequence:
    """Feature vectors, one row per frame.

    Row ``i`` is centred on STFT frame ``first_frame + i``, which starts at
    sample ``(first_frame + i) * hop``.
    """

    frames: np.ndarray
    first_frame: int
    hop: int
    stft_len: int

    def sample_span(self, i: int, context: int) -> tuple[int, int]:
        """Half-open sample range covered by the context window of row ``i``."""
        centre = self.first_frame + i
        return (centre - context) * self.hop, (centre + context) * self.hop + self.stft_len


class WavFormatError(ValueError):
    pass


def read_wav(path, expected_rate: int = 16000) -> np.ndarray:
    """16-bit PCM mono WAV as float64 in [-1, 1)."""
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise WavFormatError(f"{path}: expected mono, got {fh.getnchannels()} channels")
        if fh.getsampwidth() != 2:
            raise WavFormatError(f"{path}: expected 16-bit PCM, got {8 * fh.getsampwidth()}-bit")
        if fh.getframerate() != expected_rate:
            raise WavFormatError(f"{path}: expected {expected_rate} Hz, got {fh.getframerate()} Hz")
        raw = fh.readframes(fh.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0


def write_wav(path, samples: np.ndarray, sample_rate: int = 16000) -> None:
    pcm = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(sample_rate)
        fh.writeframes(pcm.tobytes())


def frame_count(n_samples: int, cfg: FeatureConfig) -> int:
    return (n_samples - cfg.stft_len) // cfg.hop + 1


def stft_mag(wave_: np.ndarray, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Magnitude spectrogram, shape (stft_len // 2 + 1, frames). No padding."""
    x = np.asarray(wave_, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a mono waveform")
    if len(x) < cfg.stft_len:
        raise ValueError(f"waveform of {len(x)} samples is shorter than one STFT frame")
    n = frame_count(len(x), cfg)
    idx = np.arange(cfg.stft_len)[None, :] + cfg.hop * np.arange(n)[:, None]
    win = get_window(cfg.window, cfg.stft_len)
    return np.abs(np.fft.rfft(x[idx] * win, axis=1)).T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_centers(cfg: FeatureConfig) -> np.ndarray:
    fmax = cfg.fmax if cfg.fmax is not None else cfg.sample_rate / 2
    return mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(fmax), cfg.mel_bands + 2))


def mel_matrix(cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """Unnormalized triangular HTK-mel filterbank, shape (mel_bands, n_bins)."""
    if cfg.mel_bands > cfg.n_bins:
        raise ValueError(f"{cfg.mel_bands} mel bands exceed {cfg.n_bins} frequency bins")
    edges = mel_centers(cfg)
    freqs = np.arange(cfg.n_bins) * cfg.sample_rate / cfg.stft_len
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    mat = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(mat.sum(axis=1) == 0)
    if len(empty):
        raise ValueError(f"mel bands {empty.tolist()} cover no frequency bin; reduce mel_bands")
    return mat


def logmel_context(spec: np.ndarray, cfg: FeatureConfig = FeatureConfig(), mel: np.ndarray | None = None) -> FeatureSequence:
    """Stack log-mel vectors of frames t-C .. t+C into one row per frame t."""
    spec = np.asarray(spec, dtype=np.float64)
    n_frames = spec.shape[1]
    c = cfg.context
    if n_frames < 2 * c + 1:
        raise ValueError(f"{n_frames} frames cannot fill a context window of {2 * c + 1}")
    mel = mel_matrix(cfg) if mel is None else mel
    psi = np.log(np.maximum(mel @ spec, cfg.log_floor)).T  # (frames, M)
    n_out = n_frames - 2 * c
    stacked = np.concatenate([psi[k : k + n_out] for k in range(2 * c + 1)], axis=1)
    return FeatureSequence(stacked, c, cfg.hop, cfg.stft_len)


def extract(wave_: np.ndarray, cfg: FeatureConfig = FeatureConfig(), mel: np.ndarray | None = None) -> FeatureSequence:
    return logmel_context(stft_mag(wave_, cfg), cfg, mel)


def extract_file(path, cfg: FeatureConfig = FeatureConfig()) -> FeatureSequence:
    return extract(read_wav(path, cfg.sample_rate), cfg)
