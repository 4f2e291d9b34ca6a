import numpy as np
import pytest
import soundfile as sf

from enhancer.utils.audio_io import AudioClip, read_wav, to_mono, write_wav
from enhancer.utils.errors import EmptyAudio, InvalidAudio, MalformedHeader, UnsupportedEncoding


def test_clip_rejects_non_finite_samples():
    with pytest.raises(InvalidAudio):
        AudioClip(np.array([0.0, np.nan]), 8000)


def test_clip_rejects_bad_rate_and_shape():
    with pytest.raises(InvalidAudio):
        AudioClip(np.zeros(4), 0)
    with pytest.raises(InvalidAudio):
        AudioClip(np.zeros((2, 4)), 8000)


def test_clip_samples_are_read_only():
    clip = AudioClip(np.zeros(4), 8000)
    with pytest.raises(ValueError):
        clip.samples[0] = 1.0


def test_fit_length_trims_and_pads_the_tail():
    clip = AudioClip(np.arange(1.0, 6.0), 8000)
    assert clip.fit_length(5) is clip
    np.testing.assert_array_equal(clip.fit_length(3).samples, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(clip.fit_length(7).samples, [1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0])
    assert clip.fit_length(7).sample_rate == 8000


def test_float32_round_trip_is_exact(tmp_path):
    values = np.array([0.0, 0.5, -0.25, 0.125, -1.0, 0.75], dtype=np.float32).astype(np.float64)
    path = tmp_path / "x.wav"
    write_wav(AudioClip(values, 16000), path, "float32")
    clip = read_wav(path)
    assert clip.sample_rate == 16000
    np.testing.assert_array_equal(clip.samples, values)


def test_pcm16_round_trip_within_one_lsb(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.uniform(-0.9, 0.9, 1000)
    path = tmp_path / "x.wav"
    assert write_wav(AudioClip(values, 8000), path, "pcm16") == 0
    clip = read_wav(path)
    assert np.max(np.abs(clip.samples - values)) <= 1.0 / 32768


def test_pcm16_write_counts_clipped_samples(tmp_path):
    values = np.array([0.0, 1.5, -2.0, 0.5, 1.0])
    path = tmp_path / "loud.wav"
    assert write_wav(AudioClip(values, 8000), path, "pcm16") == 2
    data, _ = sf.read(str(path), dtype="int16")
    assert data[1] == 32767
    assert data[2] == -32768


def test_pcm16_full_scale_reads_as_minus_one(tmp_path):
    path = tmp_path / "min.wav"
    sf.write(str(path), np.array([-32768, 0, 16384], dtype=np.int16), 8000, subtype="PCM_16")
    np.testing.assert_array_equal(read_wav(path).samples, [-1.0, 0.0, 0.5])


def test_stereo_is_averaged_to_mono(tmp_path):
    path = tmp_path / "stereo.wav"
    data = np.array([[0.5, -0.5], [0.25, 0.25], [1.0, 0.0]], dtype=np.float32)
    sf.write(str(path), data, 8000, subtype="FLOAT")
    np.testing.assert_allclose(read_wav(path).samples, [0.0, 0.25, 0.5])


def test_to_mono_passes_mono_through():
    np.testing.assert_array_equal(to_mono(np.array([1.0, 2.0])), [1.0, 2.0])


def test_not_a_riff_file(tmp_path):
    path = tmp_path / "bogus.wav"
    path.write_bytes(b"OggS" + b"\x00" * 64)
    with pytest.raises(MalformedHeader):
        read_wav(path)


def test_unsupported_subtype(tmp_path):
    path = tmp_path / "pcm24.wav"
    sf.write(str(path), np.zeros(100), 8000, subtype="PCM_24")
    with pytest.raises(UnsupportedEncoding):
        read_wav(path)


def test_empty_data_chunk(tmp_path):
    path = tmp_path / "empty.wav"
    sf.write(str(path), np.zeros(0, dtype=np.float32), 8000, subtype="FLOAT")
    with pytest.raises(EmptyAudio):
        read_wav(path)


def test_refuses_to_write_empty_clip(tmp_path):
    with pytest.raises(EmptyAudio):
        write_wav(AudioClip(np.zeros(0), 8000), tmp_path / "e.wav")
