import numpy as np
import pytest

from mccaspeech.dsp import StftConfig, frame_signal, hamming_window, log_magnitude, stft
from mccaspeech.errors import ArgumentError
from mccaspeech.matrixio import AudioClip


def naive_dft_magnitude(frame, window):
    """|sum_k x[k] w[k] exp(-2 pi i f k / N)| for f = 0..N/2, by explicit sums."""
    n = len(frame)
    k = np.arange(n)
    out = []
    for f in range(n // 2 + 1):
        re = sum(frame[j] * window[j] * np.cos(2 * np.pi * f * j / n) for j in k)
        im = sum(-frame[j] * window[j] * np.sin(2 * np.pi * f * j / n) for j in k)
        out.append(np.hypot(re, im))
    return np.array(out)


def test_hamming_three():
    np.testing.assert_allclose(hamming_window(3), [0.08, 1.0, 0.08], atol=1e-15)


def test_hamming_512_endpoint_and_symmetry():
    w = hamming_window(512)
    assert w[0] == pytest.approx(0.08, abs=1e-15)
    np.testing.assert_array_equal(w, w[::-1])
    for n in (2, 7, 100):
        v = hamming_window(n)
        np.testing.assert_array_equal(v, v[::-1])


def test_hamming_rejects_short():
    with pytest.raises(ArgumentError):
        hamming_window(1)


def test_default_shape_is_257_by_126():
    clip = AudioClip(np.random.default_rng(0).uniform(-0.5, 0.5, 8000), 16000)
    assert stft(clip).shape == (257, 126)


def test_without_padding_gives_118_frames():
    clip = AudioClip(np.zeros(8000), 16000)
    assert stft(clip, StftConfig(center_pad=False)).shape == (257, 118)


def test_zero_clip():
    out = stft(AudioClip(np.zeros(8000), 16000))
    assert np.all(out.data == 0.0)


def test_tone_peaks_at_bin_32():
    t = np.arange(8000) / 16000
    clip = AudioClip(0.5 * np.sin(2 * np.pi * 1000 * t), 16000)
    spec = stft(clip).data
    # frames fully inside the signal (window does not touch the padding)
    interior = range(4, spec.shape[1] - 4)
    assert all(np.argmax(spec[:, j]) == 32 for j in interior)


def test_matches_naive_dft_oracle():
    rng = np.random.default_rng(3)
    cfg = StftConfig(window_len=64, hop=16, sample_rate=None)
    clip = AudioClip(rng.standard_normal(300), 8000)
    spec = stft(clip, cfg).data
    frames = frame_signal(clip.samples, cfg)
    w = hamming_window(64)
    for j in (0, 5, frames.shape[0] - 1):
        ref = naive_dft_magnitude(frames[j], w)
        np.testing.assert_allclose(spec[:, j], ref, rtol=1e-9, atol=1e-12 * ref.max())


def test_odd_window_length():
    rng = np.random.default_rng(4)
    cfg = StftConfig(window_len=45, hop=10, sample_rate=None)
    clip = AudioClip(rng.standard_normal(200), 8000)
    spec = stft(clip, cfg).data
    assert spec.shape == (23, 200 // 10 + 1)
    frames = frame_signal(clip.samples, cfg)
    ref = naive_dft_magnitude(frames[7], hamming_window(45))
    np.testing.assert_allclose(spec[:, 7], ref, rtol=1e-9)


def test_parseval_per_frame():
    rng = np.random.default_rng(11)
    cfg = StftConfig()
    clip = AudioClip(rng.uniform(-1, 1, 8000), 16000)
    spec = stft(clip, cfg).data
    frames = frame_signal(clip.samples, cfg) * hamming_window(512)
    weight = np.full(257, 2.0)
    weight[0] = weight[-1] = 1.0
    lhs = weight @ spec**2
    rhs = 512 * np.sum(frames**2, axis=1)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9)


def test_scaling_linearity():
    rng = np.random.default_rng(12)
    x = rng.uniform(-0.4, 0.4, 4000)
    a = stft(AudioClip(x, 16000)).data
    b = stft(AudioClip(2 * x, 16000)).data
    np.testing.assert_allclose(b, 2 * a, rtol=1e-12, atol=1e-12)
    assert np.all(a >= 0)


def test_rate_mismatch_and_empty():
    with pytest.raises(ArgumentError):
        stft(AudioClip(np.zeros(100), 44100))
    with pytest.raises(ArgumentError):
        stft(AudioClip(np.zeros(0), 16000))


def test_config_validation():
    with pytest.raises(ArgumentError):
        StftConfig(hop=0)
    with pytest.raises(ArgumentError):
        StftConfig(window_len=64, hop=65)


def test_log_magnitude():
    out = log_magnitude(stft(AudioClip(np.zeros(800), 16000)))
    assert np.all(out.data == 0.0)
