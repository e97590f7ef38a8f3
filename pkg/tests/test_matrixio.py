import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mccaspeech.errors import FormatError, ParseError, UnsupportedFormatError, ValidationError
from mccaspeech.matrixio import (
    AudioClip,
    FeatureMatrix,
    Kind,
    Label,
    Manifest,
    ManifestEntry,
    decode_fmx,
    encode_fmx,
    read_fmx,
    read_manifest,
    read_wav,
    write_fmx,
    write_manifest,
    write_wav,
)


def test_single_entry_file_is_35_bytes(tmp_path):
    path = tmp_path / "one.fmx"
    write_fmx(FeatureMatrix([[42.0]]), path)
    assert path.stat().st_size == 4 + 4 + 8 + 8 + 1 + 2 + 0 + 8 == 35


def test_golden_bytes():
    m = FeatureMatrix([[1.0, -2.5]], Kind.EMBEDDING, "ab")
    expected = (
        b"FMX1"
        + (1).to_bytes(4, "little")
        + (1).to_bytes(8, "little")
        + (2).to_bytes(8, "little")
        + bytes([1])
        + (2).to_bytes(2, "little")
        + b"ab"
        + bytes.fromhex("000000000000f03f")
        + bytes.fromhex("00000000000004c0")
    )
    assert encode_fmx(m) == expected


def test_spectrogram_payload_size(tmp_path):
    path = tmp_path / "spec.fmx"
    m = FeatureMatrix(np.zeros((257, 126)), Kind.SPECTROGRAM, "")
    write_fmx(m, path)
    assert path.stat().st_size - 27 == 257 * 126 * 8 == 259_056


def test_roundtrip_random_bitwise(tmp_path):
    rng = np.random.default_rng(5)
    m = FeatureMatrix(rng.standard_normal((5, 7)), Kind.REDUCED, "spk01#3")
    path = tmp_path / "r.fmx"
    write_fmx(m, path)
    back = read_fmx(path)
    assert back == m
    assert back.data.tobytes() == m.data.tobytes()


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
           elements=st.floats(allow_nan=False, allow_infinity=False)),
    st.sampled_from(list(Kind)),
    st.text(max_size=20),
)
def test_roundtrip_property(data, kind, source):
    m = FeatureMatrix(data, kind, source)
    assert decode_fmx(encode_fmx(m)) == m
    # and the other direction: bytes -> matrix -> bytes
    blob = encode_fmx(m)
    assert encode_fmx(decode_fmx(blob)) == blob


def test_wrong_magic(tmp_path):
    blob = bytearray(encode_fmx(FeatureMatrix(np.ones((2, 2)))))
    blob[:4] = b"FMX2"
    path = tmp_path / "bad.fmx"
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        read_fmx(path)


def test_truncated_payload(tmp_path):
    blob = encode_fmx(FeatureMatrix(np.ones((3, 3))))
    path = tmp_path / "short.fmx"
    path.write_bytes(blob[:-8])  # 8 of 9 values
    with pytest.raises(FormatError):
        read_fmx(path)


def test_nan_payload_rejected():
    blob = bytearray(encode_fmx(FeatureMatrix(np.ones((1, 2)))))
    blob[-8:] = struct.pack("<d", float("nan"))
    with pytest.raises(ValidationError):
        decode_fmx(bytes(blob))


def test_feature_matrix_invariants():
    with pytest.raises(ValidationError):
        FeatureMatrix(np.array([[np.inf]]))
    with pytest.raises(ValidationError):
        FeatureMatrix(np.zeros((0, 3)))
    m = FeatureMatrix(np.ones((3, 4)))
    assert (m.rows, m.cols) == (3, 4)


# --- manifests ---------------------------------------------------------------


def _touch(tmp_path, *names):
    for n in names:
        (tmp_path / n).write_bytes(b"")


def test_manifest_numeric_labels(tmp_path):
    _touch(tmp_path, "a.fmx", "b.fmx")
    (tmp_path / "m.csv").write_text("speaker_id,label,path\ns1,0,a.fmx\ns2,1,b.fmx\n")
    man = read_manifest(tmp_path / "m.csv")
    assert len(man) == 2
    assert [e.label for e in man] == [Label.NEUROTYPICAL, Label.PATHOLOGICAL]
    assert man.class_counts() == (1, 1)
    assert man.entries[0].path == tmp_path / "a.fmx"


def test_manifest_case_insensitive_labels(tmp_path):
    _touch(tmp_path, "a.fmx", "b.fmx")
    (tmp_path / "m.csv").write_text(
        "speaker_id,label,path\ns1,Neurotypical,a.fmx\ns2,PATHOLOGICAL,b.fmx\n"
    )
    assert read_manifest(tmp_path / "m.csv").class_counts() == (1, 1)


def test_manifest_unknown_label_names_line(tmp_path):
    _touch(tmp_path, "a.fmx")
    (tmp_path / "m.csv").write_text("speaker_id,label,path\ns1,PD,a.fmx\n")
    with pytest.raises(ParseError, match="line 2"):
        read_manifest(tmp_path / "m.csv")


def test_manifest_duplicate_row(tmp_path):
    _touch(tmp_path, "a.fmx")
    (tmp_path / "m.csv").write_text("speaker_id,label,path\ns1,0,a.fmx\ns1,0,a.fmx\n")
    with pytest.raises(ParseError, match="line 3"):
        read_manifest(tmp_path / "m.csv")


def test_manifest_bad_header(tmp_path):
    (tmp_path / "m.csv").write_text("speaker,label,path\n")
    with pytest.raises(ParseError):
        read_manifest(tmp_path / "m.csv")


def test_manifest_missing_path(tmp_path):
    (tmp_path / "m.csv").write_text("speaker_id,label,path\ns1,0,nope.fmx\n")
    with pytest.raises(ParseError, match="does not exist"):
        read_manifest(tmp_path / "m.csv")


def test_manifest_hundred_speakers(tmp_path):
    entries = []
    for i in range(100):
        p = tmp_path / f"s{i}.fmx"
        p.write_bytes(b"")
        entries.append(ManifestEntry(f"s{i:03d}", Label(i % 2), p))
    write_manifest(Manifest(entries), tmp_path / "m.csv")
    man = read_manifest(tmp_path / "m.csv")
    assert man.class_counts() == (50, 50)
    assert [e.path for e in man] == [e.path for e in entries]


# --- audio ---------------------------------------------------------------------


def test_wav_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    ints = rng.integers(-32768, 32767, size=8000)
    path = tmp_path / "x.wav"
    write_wav(AudioClip(ints / 32768.0, 16000), path)
    clip = read_wav(path)
    assert len(clip) == 8000
    assert clip.sample_rate == 16000
    np.testing.assert_array_equal(clip.samples, ints / 32768.0)
    assert clip.samples.min() >= -1.0 and clip.samples.max() < 1.0


def test_wav_scaling(tmp_path):
    import wave

    path = tmp_path / "half.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(16000)
        w.writeframes(np.array([16384, -32768], dtype="<i2").tobytes())
    assert read_wav(path).samples.tolist() == [0.5, -1.0]


def test_wav_stereo_rejected(tmp_path):
    import wave

    path = tmp_path / "stereo.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(2)
        w.setframerate(44100)
        w.writeframes(np.zeros(200, dtype="<i2").tobytes())
    with pytest.raises(UnsupportedFormatError):
        read_wav(path)


def test_wav_8bit_rejected(tmp_path):
    import wave

    path = tmp_path / "u8.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(1)
        w.setframerate(16000)
        w.writeframes(bytes(100))
    with pytest.raises(UnsupportedFormatError):
        read_wav(path)


def test_wav_non_pcm_rejected(tmp_path):
    # IEEE float WAVE (format tag 3)
    data = np.zeros(10, dtype="<f4").tobytes()
    fmt = struct.pack("<HHIIHH", 3, 1, 16000, 64000, 4, 32)
    blob = (b"RIFF" + struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(data)) + b"WAVE"
            + b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(data)) + data)
    path = tmp_path / "float.wav"
    path.write_bytes(blob)
    with pytest.raises(UnsupportedFormatError):
        read_wav(path)
