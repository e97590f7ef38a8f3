"""From waveform to MCCA views.

A half-second 16 kHz clip becomes a 257 x 126 magnitude spectrogram
(512-sample Hamming window, hop 64, centred padding). Cutting its 126
frames into M equal chunks gives the "views" that MCCA correlates.
"""

import numpy as np

from mccaspeech.dsp import stft
from mccaspeech.matrixio import AudioClip
from mccaspeech.segmentation import SegmentSpec, chunk_views, segment_utterance

rate = 16000
t = np.arange(int(1.25 * rate)) / rate
# a gliding tone plus a little noise: 1.25 s of "speech"
wave = 0.4 * np.sin(2 * np.pi * (300 + 400 * t) * t) + 0.01 * np.random.default_rng(0).standard_normal(t.size)
clip = AudioClip(wave, rate)

segments = segment_utterance(clip, SegmentSpec.from_ms(500, 0.5, rate))
print(f"{len(clip)} samples -> {len(segments)} segments of {len(segments[0])} samples (50% overlap)")

spec = stft(segments[0])
print("spectrogram of the first segment:", spec.shape)

peak_bins = spec.data.argmax(axis=0)
print("dominant bin every 20 frames:", peak_bins[::20].tolist(),
      "(bin spacing 31.25 Hz, so the glide is visible)")

for m in (4, 8, 12, 24):
    views = chunk_views(spec, m)
    print(f"M={m:2d}: {m} views of width {views.width:2d}, {views.discarded_frames} trailing frames dropped")
