import numpy as np
import pytest

from enhancer.utils.audio_io import AudioClip
from enhancer.utils.dsp import (
    Spectrogram,
    downsample,
    hamming_window,
    magnitude_spectrum,
    mfcc,
    next_power_of_two,
    resample,
    stft,
    third_octave_bands,
    third_octave_centers,
    upsample_poly,
)
from enhancer.utils.errors import (
    BandAboveNyquist,
    InvalidLength,
    NotDownsampling,
    NotPowerOfTwo,
    NotUpsampling,
    TooShort,
)

from conftest import sine, white_noise


def dominant_hz(clip, fft_size):
    spectrum = magnitude_spectrum(clip, fft_size, "hann")
    return spectrum.frequencies[int(np.argmax(spectrum.magnitudes))]


def test_hamming_window_formula():
    w = hamming_window(5)
    np.testing.assert_allclose(w, [0.08, 0.54, 1.0, 0.54, 0.08])
    with pytest.raises(InvalidLength):
        hamming_window(1)


def test_next_power_of_two():
    assert next_power_of_two(1) == 1
    assert next_power_of_two(256) == 256
    assert next_power_of_two(257) == 512


def test_spectrum_peak_on_tone_bin():
    clip = sine(1000.0, 8192, 2.0)
    spectrum = magnitude_spectrum(clip, 8192)
    assert spectrum.magnitudes.shape == (4097,)
    assert spectrum.bin_hz == pytest.approx(1.0)
    assert int(np.argmax(spectrum.magnitudes)) == 1000


def test_spectrum_energy_scaling_single_rect_frame():
    clip = white_noise(8000, 1024 / 8000, seed=3)
    spectrum = magnitude_spectrum(clip, 1024, "rect")
    assert np.sum(spectrum.magnitudes ** 2) == pytest.approx(np.sum(clip.samples ** 2), rel=1e-9)


def test_spectrum_argument_checks():
    clip = sine(440.0, 8000, 0.5)
    with pytest.raises(NotPowerOfTwo):
        magnitude_spectrum(clip, 1000)
    with pytest.raises(TooShort):
        magnitude_spectrum(clip, 8192)


def test_stft_shape():
    clip = white_noise(10000, 1.0)
    spec = stft(clip, 256, 128, fft_size=512)
    assert spec.num_frames == (10000 - 256) // 128 + 1
    assert spec.num_bins == 257
    assert spec.bin_hz == pytest.approx(10000 / 512)


def test_resample_round_trip_keeps_dominant_frequency():
    clip = sine(300.0, 48000, 2.0)
    down = downsample(clip, 8000)
    up = upsample_poly(down, 48000)
    assert len(down) == 16000
    assert len(up) == 96000
    assert abs(dominant_hz(up, 65536) - 300.0) <= 1.0


def test_downsample_attenuates_above_target_nyquist():
    clip = sine(5000.0, 48000, 1.0)
    down = downsample(clip, 8000)
    middle = down.samples[1000:-1000]
    in_rms = np.sqrt(np.mean(clip.samples ** 2))
    out_rms = np.sqrt(np.mean(middle ** 2))
    assert 20 * np.log10(out_rms / in_rms) <= -40.0


def test_downsample_passes_in_band_tone():
    clip = sine(1000.0, 48000, 1.0)
    down = downsample(clip, 16000)
    middle = down.samples[2000:-2000]
    assert np.sqrt(np.mean(middle ** 2)) == pytest.approx(0.5 / np.sqrt(2), rel=0.02)


def test_resample_output_lengths():
    clip = white_noise(44100, 0.5)
    assert len(resample(clip, 16000)) == round(len(clip) * 16000 / 44100)
    assert len(resample(clip, 48000)) == round(len(clip) * 48000 / 44100)


def test_resample_same_rate_is_identity():
    clip = white_noise(16000, 0.1)
    assert resample(clip, 16000) is clip


def test_resample_direction_errors():
    clip = white_noise(16000, 0.1)
    with pytest.raises(NotUpsampling):
        upsample_poly(clip, 8000)
    with pytest.raises(NotDownsampling):
        downsample(clip, 48000)


def test_upsample_keeps_constant_signal():
    clip = AudioClip(np.full(100, 0.25), 8000)
    np.testing.assert_allclose(upsample_poly(clip, 48000).samples, 0.25)


def test_mfcc_shape_and_mean_normalization():
    clip = white_noise(16000, 1.0)
    feats = mfcc(clip)
    win, hop = 512, 256
    assert feats.rows.shape == ((16000 - win) // hop + 1, 13)
    assert feats.frame_rate_hz == pytest.approx(16000 / hop)
    np.testing.assert_allclose(feats.rows.mean(axis=0), 0.0, atol=1e-9)


def test_mfcc_shift_by_one_hop_shifts_rows():
    clip = white_noise(16000, 1.0, seed=4)
    hop = 256
    full = mfcc(clip, mean_normalize=False).rows
    shifted = mfcc(clip.with_samples(clip.samples[hop:]), mean_normalize=False).rows
    np.testing.assert_allclose(shifted, full[1:1 + shifted.shape[0]], atol=1e-9)


def test_mfcc_too_short():
    with pytest.raises(TooShort):
        mfcc(white_noise(16000, 0.01))


def test_third_octave_centers():
    centers = third_octave_centers()
    assert centers.shape == (15,)
    assert centers[0] == pytest.approx(150.0)
    np.testing.assert_allclose(centers[1:] / centers[:-1], 2 ** (1 / 3))


def test_third_octave_band_membership():
    frames = np.zeros((1, 501))
    frames[0, 15] = 1.0  # 150 Hz at 10 Hz per bin
    bands = third_octave_bands(Spectrogram(frames, 0.01, 10.0))
    assert bands.rows.shape == (1, 15)
    assert bands.rows[0, 0] == pytest.approx(1.0)
    assert np.all(bands.rows[0, 1:] == 0.0)


def test_third_octave_bands_above_nyquist():
    frames = np.ones((2, 301))  # Nyquist 3000 Hz
    with pytest.raises(BandAboveNyquist):
        third_octave_bands(Spectrogram(frames, 0.01, 10.0))
