"""Synthetic two-class segment datasets with a planted time-stable cue.

Each F x T segment is the sum of

* a class cue: the speaker's unit spectral template, present in the first
  ``burst`` frames (``signal_duty`` of the span) of every
  ``signal_span``-wide block and zero elsewhere, scaled by ``signal_gain``
  and a per-speaker jitter in [0.8, 1.2]. The cue therefore recurs once per
  block: chunking into ``T / signal_span`` views puts exactly one burst in
  each view;
* a nuisance: in every ``signal_span``-wide block an independent rank-1
  pattern ``a_b w_b^T`` (Gaussian ``a_b``, ``w_b``) scaled by
  ``nuisance_gain``, so it is strong but uncorrelated across blocks;
* white Gaussian noise with standard deviation ``noise_std``.

Class templates share a decaying low-frequency envelope and differ along
one direction supported on the same rows, at Euclidean distance
``template_distance``. Speaker templates deviate from their class template
by ``speaker_spread`` along a further random envelope-weighted direction.

Randomness comes from Philox (counter-based) generators keyed by
``SeedSequence(seed, spawn_key=(stream, ...))``, one named substream per
template set, speaker, segment and block, so every piece can be generated
independently and in any order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .matrixio import FeatureMatrix, Kind, Label, Manifest, ManifestEntry, write_fmx, write_manifest

_TEMPLATES, _SPEAKER, _NUISANCE, _NOISE = 1, 2, 3, 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the named substream ``key``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class SynthConfig:
    n_speakers_per_class: int = 50
    segments_per_speaker: int = 20
    F: int = 64
    T: int = 96
    signal_span: int = 12
    signal_gain: float = 1.0
    nuisance_gain: float = 2.0
    noise_std: float = 0.5
    signal_duty: float = 1 / 3
    template_distance: float = 0.2
    speaker_spread: float = 0.15
    jitter: tuple[float, float] = (0.8, 1.2)
    seed: int = 0

    def __post_init__(self):
        for name in ("n_speakers_per_class", "segments_per_speaker", "F", "T", "signal_span"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1")
        if not 0 < self.signal_duty <= 1:
            raise ArgumentError("signal_duty must be in (0, 1]")
        for name in ("signal_gain", "nuisance_gain", "noise_std", "template_distance", "speaker_spread"):
            if getattr(self, name) < 0:
                raise ArgumentError(f"{name} must be >= 0")
        if self.T % self.signal_span:
            raise ArgumentError(f"signal_span {self.signal_span} does not divide T={self.T}")
        if self.template_distance > 2:
            raise ArgumentError("template_distance cannot exceed 2 for unit templates")
        object.__setattr__(self, "jitter", tuple(float(j) for j in self.jitter))

    @property
    def n_blocks(self) -> int:
        return self.T // self.signal_span

    @property
    def burst(self) -> int:
        """Frames at the start of each block that carry the cue."""
        return max(1, int(round(self.signal_duty * self.signal_span)))

    def cue_profile(self) -> np.ndarray:
        """0/1 mask over the T frames marking where the cue is present."""
        prof = np.zeros(self.T)
        for b in range(self.n_blocks):
            prof[b * self.signal_span:b * self.signal_span + self.burst] = 1.0
        return prof

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ArgumentError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["jitter"] = list(self.jitter)
        return out


@dataclass(eq=False)
class SynthDataset:
    config: SynthConfig
    segments: np.ndarray  # n x F x T
    labels: np.ndarray  # n
    speaker_ids: list[str]
    templates: np.ndarray  # 2 x F, row c is the class-c template
    speaker_templates: dict[str, np.ndarray]

    def matrices(self) -> list[FeatureMatrix]:
        return [FeatureMatrix(s, Kind.SPECTROGRAM, f"{spk}#{i}")
                for i, (s, spk) in enumerate(zip(self.segments, self.speaker_ids))]


def _unit(v):
    return v / np.linalg.norm(v)


def envelope(n_rows: int) -> np.ndarray:
    """Decaying low-frequency profile, unit norm."""
    return _unit(np.exp(-np.arange(n_rows) / (n_rows / 8.0)) + 0.05)


def class_templates(cfg: SynthConfig) -> np.ndarray:
    rng = substream(cfg.seed, _TEMPLATES)
    base = envelope(cfg.F)
    diff = rng.standard_normal(cfg.F) * base
    diff = _unit(diff - (diff @ base) * base)
    half = np.arcsin(min(cfg.template_distance / 2.0, 1.0))
    return np.stack([np.cos(half) * base - np.sin(half) * diff,
                     np.cos(half) * base + np.sin(half) * diff])


def speaker_names(cfg: SynthConfig) -> list[tuple[str, int]]:
    """``(speaker_id, label)`` pairs: nt000.. then pd000.."""
    out = []
    for label, prefix in ((0, "nt"), (1, "pd")):
        out.extend((f"{prefix}{i:03d}", label) for i in range(cfg.n_speakers_per_class))
    return out


def _speaker_params(cfg: SynthConfig, index: int, template: np.ndarray):
    rng = substream(cfg.seed, _SPEAKER, index)
    jitter = rng.uniform(*cfg.jitter)
    dev = rng.standard_normal(cfg.F) * envelope(cfg.F)
    spk = _unit(template + cfg.speaker_spread * _unit(dev))
    return jitter, spk


def make_segment(cfg: SynthConfig, speaker_index: int, segment_index: int,
                 template: np.ndarray, jitter: float) -> np.ndarray:
    x = cfg.signal_gain * jitter * np.outer(template, cfg.cue_profile())
    span = cfg.signal_span
    for b in range(cfg.n_blocks):
        rng = substream(cfg.seed, _NUISANCE, speaker_index, segment_index, b)
        a = rng.standard_normal(cfg.F)
        w = rng.standard_normal(span)
        x[:, b * span:(b + 1) * span] += cfg.nuisance_gain * np.outer(a, w)
    noise = substream(cfg.seed, _NOISE, speaker_index, segment_index)
    x += cfg.noise_std * noise.standard_normal((cfg.F, cfg.T))
    return x


def generate(cfg: SynthConfig = SynthConfig()) -> SynthDataset:
    """Build the dataset in memory."""
    templates = class_templates(cfg)
    segments, labels, speakers, spk_templates = [], [], [], {}
    for index, (name, label) in enumerate(speaker_names(cfg)):
        jitter, spk = _speaker_params(cfg, index, templates[label])
        spk_templates[name] = spk
        for k in range(cfg.segments_per_speaker):
            segments.append(make_segment(cfg, index, k, spk, jitter))
            labels.append(label)
            speakers.append(name)
    return SynthDataset(cfg, np.stack(segments), np.array(labels), speakers, templates, spk_templates)


def generate_dataset(cfg: SynthConfig, out_dir) -> Manifest:
    """Write every segment as FMX1 under ``out_dir`` plus ``manifest.csv``.

    Also writes ``templates.fmx`` (F x 2, one class template per column).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = generate(cfg)
    entries = []
    per_speaker: dict[str, int] = {}
    for seg, label, spk in zip(data.segments, data.labels, data.speaker_ids):
        k = per_speaker.get(spk, 0)
        per_speaker[spk] = k + 1
        path = out_dir / f"{spk}_{k:03d}.fmx"
        write_fmx(FeatureMatrix(seg, Kind.SPECTROGRAM, f"{spk}#{k}"), path)
        entries.append(ManifestEntry(spk, Label(int(label)), path))
    write_fmx(FeatureMatrix(data.templates.T, Kind.EMBEDDING, "templates"), out_dir / "templates.fmx")
    manifest = Manifest(entries)
    write_manifest(manifest, out_dir / "manifest.csv")
    return manifest
