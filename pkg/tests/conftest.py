import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

import numpy as np
import pytest

from enhancer.utils.audio_io import AudioClip, write_wav
from enhancer.utils.separator import SeparatorConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "timing: depends on wall-clock measurements of this machine")


def sine(freq, rate, seconds, amplitude=0.5, harmonics=(), phase=0.0):
    """Tone at freq plus (multiple, relative amplitude) harmonics."""
    t = np.arange(int(round(seconds * rate))) / rate
    x = amplitude * np.sin(2 * np.pi * freq * t + phase)
    for multiple, relative in harmonics:
        x += amplitude * relative * np.sin(2 * np.pi * freq * multiple * t)
    return AudioClip(x, rate)


def speech_like(rate, seconds, seed=0, amplitude=0.3):
    """Broadband noise under a syllable-rate envelope, with pauses."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * rate))
    t = np.arange(n) / rate
    carrier = rng.standard_normal(n)
    envelope = 0.55 + 0.45 * np.sin(2 * np.pi * 4.0 * t) * np.sin(2 * np.pi * 0.7 * t + 0.3)
    x = carrier * envelope
    return AudioClip(amplitude * x / np.max(np.abs(x)), rate)


def white_noise(rate, seconds, seed=0, amplitude=0.1):
    rng = np.random.default_rng(seed)
    return AudioClip(amplitude * rng.standard_normal(int(round(seconds * rate))), rate)


def tiny_config(rate=8000, norm="global", **overrides):
    """Narrow network with the preset kernel length for `rate`."""
    params = dict(n_filters=16, bottleneck=8, conv_channels=16, blocks_per_repeat=2, repeats=2, norm_kind=norm)
    params.update(overrides)
    return SeparatorConfig.preset(rate, **params)


@pytest.fixture
def wav_file(tmp_path):
    """Write a clip to tmp_path/name and return the path."""

    def _write(name, clip, encoding="float32"):
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        write_wav(clip, path, encoding)
        return path

    return _write
