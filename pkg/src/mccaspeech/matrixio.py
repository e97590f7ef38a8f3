"""Persistence for feature matrices, dataset manifests and PCM audio.

FMX1 layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"FMX1"
    4       4     version (u32) = 1
    8       8     rows (u64)
    16      8     cols (u64)
    24      1     kind (u8): 0 spectrogram, 1 embedding, 2 reduced
    25      2     source_id length n (u16)
    27      n     source_id, UTF-8
    27+n    8*r*c data, float64 LE, row-major
"""

from __future__ import annotations

import csv
import enum
import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    ParseError,
    PersistenceError,
    UnsupportedFormatError,
    ValidationError,
)

MAGIC = b"FMX1"
VERSION = 1
_HEADER = struct.Struct("<4sIQQBH")
_MAX_SOURCE_ID = 0xFFFF


class Kind(enum.IntEnum):
    SPECTROGRAM = 0
    EMBEDDING = 1
    REDUCED = 2


class Label(enum.IntEnum):
    NEUROTYPICAL = 0
    PATHOLOGICAL = 1


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """An F x T real matrix: rows are features/frequency bins, columns are frames."""

    data: np.ndarray
    kind: Kind = Kind.SPECTROGRAM
    source_id: str = ""

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValidationError(f"feature matrix must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(f"feature matrix must be non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("feature matrix contains NaN or Inf entries")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.source_id == other.source_id
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    __hash__ = None


def as_array(m) -> np.ndarray:
    """Return the float64 matrix behind a FeatureMatrix or array-like."""
    if isinstance(m, FeatureMatrix):
        return m.data
    return np.asarray(m, dtype=np.float64)


def encode_fmx(m: FeatureMatrix) -> bytes:
    source = m.source_id.encode("utf-8")
    if len(source) > _MAX_SOURCE_ID:
        raise ValidationError(f"source_id too long ({len(source)} bytes, max {_MAX_SOURCE_ID})")
    header = _HEADER.pack(MAGIC, VERSION, m.rows, m.cols, int(m.kind), len(source))
    return header + source + m.data.astype("<f8", copy=False).tobytes(order="C")


def decode_fmx(buf: bytes, name: str = "<bytes>") -> FeatureMatrix:
    if len(buf) < _HEADER.size:
        raise FormatError(f"{name}: truncated header ({len(buf)} bytes)")
    magic, version, rows, cols, kind, n_source = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"{name}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{name}: unsupported version {version}")
    try:
        kind = Kind(kind)
    except ValueError:
        raise FormatError(f"{name}: unknown kind code {kind}") from None
    offset = _HEADER.size
    if len(buf) < offset + n_source:
        raise FormatError(f"{name}: truncated source_id")
    try:
        source_id = buf[offset:offset + n_source].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{name}: source_id is not valid UTF-8") from exc
    offset += n_source
    expected = rows * cols * 8
    payload = len(buf) - offset
    if payload != expected:
        raise FormatError(
            f"{name}: declared {rows}x{cols} needs {expected} data bytes, found {payload}"
        )
    data = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=offset)
    data = data.astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(data)):
        raise ValidationError(f"{name}: non-finite entries in payload")
    return FeatureMatrix(data, kind, source_id)


def write_fmx(m: FeatureMatrix, path) -> None:
    """Write ``m`` to ``path`` in FMX1 layout."""
    blob = encode_fmx(m)
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc


def read_fmx(path) -> FeatureMatrix:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    return decode_fmx(buf, str(path))


# --- manifests -------------------------------------------------------------

MANIFEST_HEADER = ("speaker_id", "label", "path")

_LABEL_TOKENS = {
    "neurotypical": Label.NEUROTYPICAL,
    "0": Label.NEUROTYPICAL,
    "pathological": Label.PATHOLOGICAL,
    "1": Label.PATHOLOGICAL,
}


@dataclass(frozen=True)
class ManifestEntry:
    speaker_id: str
    label: Label
    path: Path


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def speakers(self) -> dict[str, Label]:
        """Speaker -> label, in first-appearance order."""
        out: dict[str, Label] = {}
        for e in self.entries:
            prev = out.setdefault(e.speaker_id, e.label)
            if prev != e.label:
                raise ValidationError(f"speaker {e.speaker_id!r} carries both labels")
        return out

    def class_counts(self) -> tuple[int, int]:
        """Number of distinct speakers per label (neurotypical, pathological)."""
        labels = list(self.speakers().values())
        return labels.count(Label.NEUROTYPICAL), labels.count(Label.PATHOLOGICAL)


def parse_label(token: str) -> Label:
    try:
        return _LABEL_TOKENS[token.strip().lower()]
    except KeyError:
        raise ParseError(f"unknown label {token!r}") from None


def read_manifest(path, check_paths: bool = True) -> Manifest:
    """Parse a ``speaker_id,label,path`` CSV.

    Relative paths are resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{path}: empty manifest") from None
    if tuple(h.strip() for h in header) != MANIFEST_HEADER:
        raise ParseError(f"{path}: line 1: header must be {','.join(MANIFEST_HEADER)}")

    entries = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
        speaker, token, rel = (c.strip() for c in row)
        if not speaker:
            raise ParseError(f"{path}: line {lineno}: empty speaker_id")
        try:
            label = parse_label(token)
        except ParseError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from None
        key = (speaker, rel)
        if key in seen:
            raise ParseError(f"{path}: line {lineno}: duplicate row for ({speaker}, {rel})")
        seen.add(key)
        p = Path(rel)
        if not p.is_absolute():
            p = base / p
        if check_paths and not p.exists():
            raise ParseError(f"{path}: line {lineno}: path {rel!r} does not exist")
        entries.append(ManifestEntry(speaker, label, p))
    return Manifest(entries)


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    base = path.parent.resolve()
    rows = [",".join(MANIFEST_HEADER)]
    for e in manifest:
        p = Path(e.path)
        try:
            p = p.resolve().relative_to(base)
        except ValueError:
            pass
        rows.append(f"{e.speaker_id},{e.label.name.lower()},{p.as_posix()}")
    try:
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc


# --- audio -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("audio contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]


def read_wav(path) -> AudioClip:
    """Read a mono 16-bit PCM RIFF/WAVE file, scaling samples by 1/32768."""
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            comp = w.getcomptype()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise UnsupportedFormatError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise UnsupportedFormatError(f"{path}: not a RIFF/WAVE file") from exc
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    if comp != "NONE":
        raise UnsupportedFormatError(f"{path}: compressed audio ({comp}) not supported")
    if channels != 1:
        raise UnsupportedFormatError(f"{path}: {channels} channels, only mono is supported")
    if width != 2:
        raise UnsupportedFormatError(f"{path}: {8 * width}-bit samples, only 16-bit is supported")
    ints = np.frombuffer(raw, dtype="<i2")
    return AudioClip(ints.astype(np.float64) / 32768.0, rate)


def write_wav(clip: AudioClip, path) -> None:
    """Write ``clip`` as mono 16-bit PCM (values clipped to the int16 range)."""
    ints = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    try:
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(int(clip.sample_rate))
            w.writeframes(ints.tobytes())
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc


# --- plain CSV matrices (conversion only) -----------------------------------

def read_csv_matrix(path, kind: Kind = Kind.SPECTROGRAM) -> FeatureMatrix:
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return FeatureMatrix(data, kind, Path(path).stem)


def write_csv_matrix(m: FeatureMatrix, path) -> None:
    try:
        np.savetxt(path, m.data, delimiter=",", fmt="%.17g")
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc
