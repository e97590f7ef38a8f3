"""STFT magnitude spectrograms.

Defaults give a 32 ms Hamming window with a 4 ms hop at 16 kHz, so an
8000-sample (500 ms) segment maps to a 257 x 126 matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .matrixio import AudioClip, FeatureMatrix, Kind


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 512
    hop: int = 64
    window: str = "hamming"
    center_pad: bool = True
    # Expected input rate; None accepts any rate.
    sample_rate: int | None = 16000

    def __post_init__(self):
        if self.window_len < 2:
            raise ArgumentError(f"window_len must be >= 2, got {self.window_len}")
        if not 0 < self.hop <= self.window_len:
            raise ArgumentError(f"hop must satisfy 0 < hop <= window_len, got {self.hop}")
        if self.window != "hamming":
            raise ArgumentError(f"unsupported window {self.window!r}")

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if self.center_pad:
            return n_samples // self.hop + 1
        if n_samples < self.window_len:
            return 0
        return (n_samples - self.window_len) // self.hop + 1


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window, ``0.54 - 0.46 cos(2 pi k / (n - 1))``."""
    if n < 2:
        raise ArgumentError(f"window length must be >= 2, got {n}")
    k = np.arange(n)
    w = 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))
    # enforce exact symmetry against cos rounding
    return 0.5 * (w + w[::-1])


def frame_signal(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Return the (n_frames, window_len) matrix of (padded) analysis frames."""
    x = np.asarray(x, dtype=np.float64)
    w = cfg.window_len
    if cfg.center_pad:
        left = w // 2
        x = np.concatenate([np.zeros(left), x, np.zeros(w - left)])
    n_frames = cfg.n_frames(len(x) - (w if cfg.center_pad else 0))
    if n_frames <= 0:
        return np.zeros((0, w))
    starts = np.arange(n_frames) * cfg.hop
    return x[starts[:, None] + np.arange(w)[None, :]]


def stft(clip: AudioClip, cfg: StftConfig = StftConfig()) -> FeatureMatrix:
    """Magnitude spectrogram of ``clip``: rows are one-sided frequency bins."""
    if len(clip) == 0:
        raise ArgumentError("cannot transform an empty clip")
    if cfg.sample_rate is not None and clip.sample_rate != cfg.sample_rate:
        raise ArgumentError(
            f"clip sample rate {clip.sample_rate} Hz does not match the configured "
            f"{cfg.sample_rate} Hz (resample first)"
        )
    frames = frame_signal(clip.samples, cfg)
    if frames.shape[0] == 0:
        raise ArgumentError(
            f"clip of {len(clip)} samples is shorter than the {cfg.window_len}-sample window"
        )
    spec = np.abs(np.fft.rfft(frames * hamming_window(cfg.window_len), axis=1))
    return FeatureMatrix(spec.T, Kind.SPECTROGRAM)


def log_magnitude(m: FeatureMatrix) -> FeatureMatrix:
    """``log10(1 + |X|)``, for display export only."""
    return FeatureMatrix(np.log10(1.0 + m.data), m.kind, m.source_id)
