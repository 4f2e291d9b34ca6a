import numpy as np
import pytest

from enhancer.utils.audio_io import AudioClip
from enhancer.utils.dsp import magnitude_spectrum
from enhancer.utils.errors import (
    InvalidChunking,
    InvalidConfig,
    RateMismatch,
    ShapeMismatch,
    WeightMismatch,
)
from enhancer.utils.separator import (
    SeparatorConfig,
    SeparatorModel,
    chunk_starts,
    init_random,
    load_model,
    save_model,
    tensor_shapes,
    zero_weights,
)
from enhancer.utils.weight_store import WeightStore, save_weights

from conftest import sine, tiny_config, white_noise


def identity_model(rate=8000, kernel_len=16):
    """Encoder splits +x/-x, mask saturates at 1, decoder halves and overlap-adds back to x."""
    config = SeparatorConfig(
        sample_rate=rate, kernel_len=kernel_len, n_filters=2 * kernel_len, bottleneck=4, conv_channels=4,
        blocks_per_repeat=1, repeats=1,
    )
    store = zero_weights(config)
    eye = np.eye(kernel_len, dtype=np.float32)
    store.tensors["encoder.weight"][:] = np.vstack([eye, -eye])
    store.tensors["decoder.weight"][:] = 0.5 * np.vstack([eye, -eye])
    store.tensors["separator.mask_conv.bias"][:] = 30.0
    return SeparatorModel(config, store)


def brute_force_frames(T, L):
    stride = L // 2
    padded = max(T, L)
    while (padded - L) % stride:
        padded += 1
    return sum(1 for start in range(0, padded, stride) if start + L <= padded)


# --- config -------------------------------------------------------------


@pytest.mark.parametrize("rate,kernel_len", [(8000, 16), (16000, 32), (48000, 96)])
def test_presets_use_two_millisecond_kernels(rate, kernel_len):
    config = SeparatorConfig.preset(rate)
    assert config.kernel_len == kernel_len
    assert config.stride == kernel_len // 2
    assert (config.n_filters, config.bottleneck, config.conv_channels) == (512, 128, 512)
    assert (config.kernel_size, config.blocks_per_repeat, config.repeats) == (3, 8, 3)


@pytest.mark.parametrize("overrides", [
    {"num_sources": 2},
    {"kernel_len": 15},
    {"sample_rate": 44100},
    {"norm_kind": "batch"},
    {"mask_activation": "tanh"},
    {"repeats": 0},
])
def test_invalid_configs(overrides):
    with pytest.raises(InvalidConfig):
        SeparatorConfig(**overrides)


def test_weight_validation():
    config = tiny_config()
    store = zero_weights(config)
    del store.tensors["decoder.weight"]
    with pytest.raises(WeightMismatch):
        SeparatorModel(config, store)

    store = zero_weights(config)
    store.tensors["encoder.weight"] = np.zeros((3, 3), dtype=np.float32)
    with pytest.raises(WeightMismatch):
        SeparatorModel(config, store)

    store = zero_weights(config)
    store.tensors["decoder.weight"][0, 0] = np.nan
    with pytest.raises(WeightMismatch):
        SeparatorModel(config, store)


# --- encoder ------------------------------------------------------------


def test_encode_single_frame_at_kernel_length():
    model = init_random(tiny_config(), 0)
    frames = model.encode(white_noise(8000, 16 / 8000))
    assert frames.shape == (1, 16)


def test_encode_pads_short_input():
    model = init_random(tiny_config(), 0)
    assert model.encode(AudioClip(np.ones(5), 8000)).shape[0] == 1


def test_encode_frame_count_48k_preset_kernel():
    model = init_random(tiny_config(48000), 0)
    assert model.encode(white_noise(48000, 1.0)).shape == (999, 16)


def test_encode_frame_count_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(50):
        L = 2 * int(rng.integers(1, 33))
        T = int(rng.integers(1, 600))
        config = SeparatorConfig(sample_rate=8000, kernel_len=L, n_filters=4, bottleneck=2, conv_channels=2,
                                 blocks_per_repeat=1, repeats=1)
        model = init_random(config, 0)
        frames = model.encode(AudioClip(rng.standard_normal(T), 8000))
        assert frames.shape[0] == brute_force_frames(T, L), (T, L)


def test_encode_zero_input_gives_zero_frames():
    model = init_random(tiny_config(), 3)
    assert not np.any(model.encode(AudioClip(np.zeros(800), 8000)))


def test_encode_rate_mismatch():
    model = init_random(tiny_config(), 0)
    with pytest.raises(RateMismatch):
        model.encode(white_noise(16000, 0.1))


# --- mask ---------------------------------------------------------------


def test_sigmoid_masks_are_bounded():
    rng = np.random.default_rng(11)
    for seed in range(100):
        norm = ("global", "cumulative", "channel")[seed % 3]
        model = init_random(tiny_config(norm=norm), seed)
        frames = model.encode(AudioClip(rng.standard_normal(400), 8000))
        mask = model.estimate_mask(frames)
        assert mask.shape == frames.shape
        assert mask.min() >= 0.0 and mask.max() <= 1.0


def test_zero_weights_give_half_mask():
    config = tiny_config()
    model = SeparatorModel(config, zero_weights(config))
    mask = model.estimate_mask(np.zeros((20, config.n_filters), dtype=np.float32))
    np.testing.assert_array_equal(mask, 0.5)


def test_relu_mask_is_non_negative():
    model = init_random(tiny_config(mask_activation="relu"), 2)
    mask = model.estimate_mask(model.encode(white_noise(8000, 0.1)))
    assert mask.min() >= 0.0


def test_mask_shape_mismatch():
    model = init_random(tiny_config(), 0)
    with pytest.raises(ShapeMismatch):
        model.estimate_mask(np.zeros((10, 7), dtype=np.float32))


def test_receptive_field_with_cumulative_norm():
    config = tiny_config(norm="cumulative")
    model = init_random(config, 5)
    rng = np.random.default_rng(5)
    x = rng.standard_normal(4000) * 0.1
    t = 100
    rf = config.receptive_field_frames()
    far = (t + rf + 3) * config.stride  # touches frames >= t + rf + 2 only

    changed = x.copy()
    changed[far] += 1.0
    base = model.estimate_mask(model.encode(AudioClip(x, 8000)))
    moved = model.estimate_mask(model.encode(AudioClip(changed, 8000)))

    np.testing.assert_allclose(moved[:t + 1], base[:t + 1], rtol=0, atol=1e-6)
    assert not np.allclose(moved[t + rf + 2], base[t + rf + 2])


# --- decoder ------------------------------------------------------------


def test_decode_zero_frames():
    model = init_random(tiny_config(), 0)
    clip = model.decode(np.zeros((50, 16), dtype=np.float32), 333)
    assert len(clip) == 333
    assert clip.sample_rate == 8000
    assert not np.any(clip.samples)


def test_decode_identity_mask_keeps_length():
    model = init_random(tiny_config(), 1)
    x = white_noise(8000, 0.1234)
    frames = model.encode(x)
    assert len(model.decode(frames * 1.0, len(x))) == len(x)


def test_decode_shape_mismatch():
    model = init_random(tiny_config(), 0)
    with pytest.raises(ShapeMismatch):
        model.decode(np.zeros((4, 3), dtype=np.float32), 100)


def test_identity_model_reconstructs_input():
    model = identity_model()
    x = white_noise(8000, 0.5, seed=2)
    out = model.enhance(x)
    np.testing.assert_allclose(out.samples[16:-16], x.samples[16:-16], atol=1e-6)


# --- enhance ------------------------------------------------------------


def test_enhance_zero_clip():
    model = init_random(tiny_config(), 0)
    out = model.enhance(AudioClip(np.zeros(1000), 8000))
    assert not np.any(out.samples)


@pytest.mark.parametrize("rate", [8000, 16000, 48000])
@pytest.mark.parametrize("seconds", [1, 5, 10])
def test_enhance_preserves_length(rate, seconds):
    model = init_random(tiny_config(rate), 0)
    clip = white_noise(rate, seconds, seed=seconds)
    out = model.enhance(clip)
    assert len(out) == len(clip)
    assert out.sample_rate == rate


def test_enhance_is_deterministic():
    clip = white_noise(8000, 0.5)
    a = init_random(tiny_config(), 42).enhance(clip)
    b = init_random(tiny_config(), 42).enhance(clip)
    c = init_random(tiny_config(), 43).enhance(clip)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_enhance_outputs_finite_and_bounded():
    for seed in range(100):
        model = init_random(tiny_config(), seed)
        out = model.enhance(white_noise(8000, 0.05, seed=seed, amplitude=0.5))
        assert np.all(np.isfinite(out.samples))
        assert np.max(np.abs(out.samples)) <= 100.0


def test_default_config_runs():
    model = init_random(SeparatorConfig(), 0)
    out = model.enhance(white_noise(8000, 0.25))
    assert len(out) == 2000


def test_parallel_channels_match_sequential():
    clip = white_noise(8000, 0.5)
    config = tiny_config()
    sequential = init_random(config, 9)
    parallel = SeparatorModel(config, sequential.weights, parallel_workers=4)
    np.testing.assert_allclose(parallel.enhance(clip).samples, sequential.enhance(clip).samples, rtol=1e-6, atol=1e-9)


def test_enhance_rate_mismatch():
    model = init_random(tiny_config(), 0)
    with pytest.raises(RateMismatch):
        model.enhance(white_noise(16000, 0.1))


# --- chunked ------------------------------------------------------------


def test_chunked_short_clip_equals_enhance():
    model = init_random(tiny_config(), 0)
    clip = white_noise(8000, 2.0)
    np.testing.assert_array_equal(model.enhance_chunked(clip, 3.0, 0.25).samples, model.enhance(clip).samples)


def test_chunked_without_overlap_concatenates_chunks():
    model = init_random(tiny_config(), 0)
    clip = white_noise(8000, 7.0)
    seg = 24000
    expected = np.concatenate([
        model.enhance(clip.with_samples(clip.samples[start:start + seg])).samples for start in range(0, len(clip), seg)
    ])
    np.testing.assert_array_equal(model.enhance_chunked(clip, 3.0, 0.0).samples, expected)


def test_chunked_interior_matches_whole_clip():
    model = init_random(tiny_config(norm="channel"), 4)
    clip = white_noise(8000, 10.0, seed=4)
    whole = model.enhance(clip).samples
    chunked = model.enhance_chunked(clip, 3.0, 0.25).samples
    assert len(chunked) == len(clip)

    starts = chunk_starts(len(clip), 24000, 2000)
    boundaries = np.array(sorted(set(starts) | {min(s + 24000, len(clip)) for s in starts}))
    positions = np.arange(len(clip))
    distance = np.min(np.abs(positions[:, None] - boundaries[None, :]), axis=1)
    interior = distance > 4000
    assert interior.sum() > 0
    np.testing.assert_allclose(chunked[interior], whole[interior], rtol=0, atol=1e-5)


def test_chunked_rejects_bad_overlap():
    model = init_random(tiny_config(), 0)
    with pytest.raises(InvalidChunking):
        model.enhance_chunked(white_noise(8000, 1.0), 0.4, 0.25)
    with pytest.raises(InvalidChunking):
        model.enhance_chunked(white_noise(8000, 1.0), 3.0, -0.1)


# --- any rate -----------------------------------------------------------


def test_any_rate_resamples_and_returns_at_input_rate():
    model = init_random(tiny_config(8000), 0)
    clip = white_noise(48000, 1.0)
    result = model.enhance_any_rate(clip)
    assert result.resampled
    assert result.model_rate == 8000
    assert result.clip.sample_rate == 48000
    assert abs(len(result.clip) - len(clip)) <= 1


@pytest.mark.parametrize("length", range(44100, 44112))
def test_any_rate_keeps_exact_length_at_44k1(length):
    model = init_random(tiny_config(8000), 0)
    clip = AudioClip(white_noise(44100, 1.1, seed=length).samples[:length], 44100)
    result = model.enhance_any_rate(clip)
    assert result.clip.sample_rate == 44100
    assert len(result.clip) == length


def test_any_rate_bypass_at_model_rate():
    model = init_random(tiny_config(8000), 0)
    clip = white_noise(8000, 1.0)
    result = model.enhance_any_rate(clip)
    assert not result.resampled
    np.testing.assert_array_equal(result.clip.samples, model.enhance(clip).samples)


def test_any_rate_keeps_dominant_frequency():
    model = identity_model()
    result = model.enhance_any_rate(sine(300.0, 48000, 2.0))
    spectrum = magnitude_spectrum(result.clip, 65536, "hann")
    peak = spectrum.frequencies[int(np.argmax(spectrum.magnitudes))]
    assert abs(peak - 300.0) <= 1.0


# --- persistence --------------------------------------------------------


def test_full_48k_model_save_load_is_bit_exact(tmp_path):
    model = init_random(SeparatorConfig.preset(48000), 0)
    path = tmp_path / "m48.ctn"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == model.config
    assert set(loaded.weights.names()) == set(tensor_shapes(model.config))
    for name, tensor in model.weights.tensors.items():
        np.testing.assert_array_equal(loaded.weights[name], tensor)


def test_load_model_requires_config(tmp_path):
    config = tiny_config()
    path = tmp_path / "noconfig.ctn"
    save_weights(WeightStore(dict(zero_weights(config).tensors), None), path)
    with pytest.raises(InvalidConfig):
        load_model(path)
