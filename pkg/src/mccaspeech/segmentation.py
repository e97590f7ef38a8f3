"""Fixed-length overlapping segmentation and chunking of segments into views."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dsp import StftConfig, stft
from .errors import ArgumentError
from .matrixio import AudioClip, FeatureMatrix, as_array


@dataclass(frozen=True)
class SegmentSpec:
    """Segment length and overlap, in samples (audio) or frames (matrices)."""

    segment_len: int = 8000
    overlap_fraction: float = 0.5

    def __post_init__(self):
        if self.segment_len <= 0:
            raise ArgumentError(f"segment_len must be positive, got {self.segment_len}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ArgumentError(f"overlap_fraction must be in [0, 1), got {self.overlap_fraction}")

    @classmethod
    def from_ms(cls, len_ms: float, overlap: float = 0.5, rate: float = 16000) -> SegmentSpec:
        return cls(int(round(len_ms * rate / 1000.0)), overlap)

    @property
    def hop(self) -> int:
        # at least one step, so very short segments still advance
        return max(1, int(round(self.segment_len * (1.0 - self.overlap_fraction))))

    def offsets(self, length: int) -> list[int]:
        if length < self.segment_len:
            return []
        return list(range(0, length - self.segment_len + 1, self.hop))


def segment_utterance(item, spec: SegmentSpec = SegmentSpec()):
    """Cut an AudioClip (in samples) or FeatureMatrix (in columns) into segments.

    A trailing remainder shorter than ``spec.segment_len`` is dropped. Inputs
    shorter than one segment give an empty list and a warning.
    """
    if isinstance(item, AudioClip):
        length = len(item)
        cut = lambda o: AudioClip(item.samples[o:o + spec.segment_len], item.sample_rate)
    else:
        m = item if isinstance(item, FeatureMatrix) else FeatureMatrix(item)
        length = m.cols
        cut = lambda o: FeatureMatrix(
            m.data[:, o:o + spec.segment_len], m.kind, f"{m.source_id}@{o}" if m.source_id else ""
        )
    offsets = spec.offsets(length)
    if not offsets:
        warnings.warn(
            f"input of length {length} is shorter than one segment ({spec.segment_len}); "
            "no segments produced",
            stacklevel=2,
        )
    return [cut(o) for o in offsets]


def spectrogram_segments(
    clip: AudioClip, spec: SegmentSpec = SegmentSpec(), cfg: StftConfig = StftConfig()
) -> list[FeatureMatrix]:
    """Segment raw audio, then take the STFT of each segment."""
    return [stft(seg, cfg) for seg in segment_utterance(clip, spec)]


@dataclass(frozen=True, eq=False)
class ViewSet:
    views: list[FeatureMatrix]
    m_chunks: int
    discarded_frames: int

    @property
    def width(self) -> int:
        return self.views[0].cols

    @property
    def n_features(self) -> int:
        return self.views[0].rows

    def arrays(self) -> list[np.ndarray]:
        return [v.data for v in self.views]


def chunk_views(segment, m: int) -> ViewSet:
    """Split the columns of ``segment`` into ``m`` equal-width views.

    View ``i`` holds columns ``[i*c, (i+1)*c)`` with ``c = T // m``; the last
    ``T - m*c`` columns are discarded.
    """
    x = as_array(segment)
    if x.ndim != 2:
        raise ArgumentError(f"segment must be 2-D, got shape {x.shape}")
    n_cols = x.shape[1]
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= n_cols:
        raise ArgumentError(f"number of chunks must be in [1, {n_cols}], got {m}")
    c = n_cols // m
    kind = segment.kind if isinstance(segment, FeatureMatrix) else FeatureMatrix(x).kind
    views = [FeatureMatrix(x[:, i * c:(i + 1) * c], kind) for i in range(m)]
    return ViewSet(views, int(m), n_cols - m * c)
