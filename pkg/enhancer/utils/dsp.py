from dataclasses import dataclass
from math import gcd
from typing import Optional

import librosa
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft
from scipy import signal

from .audio_io import AudioClip
from .errors import (
    BandAboveNyquist,
    InvalidLength,
    NotDownsampling,
    NotPowerOfTwo,
    NotUpsampling,
    TooShort,
)
from .logging_utils import get_logger

# Initialize logger
logger = get_logger(__name__)

WINDOW_NAMES = ("hamming", "hann", "rect")

# Anti-alias design for downsample()
ANTIALIAS_CUTOFF_RATIO = 0.9
ANTIALIAS_STOPBAND_DB = 80.0

# MFCC defaults
MFCC_NUM_COEFFS = 13
MFCC_WIN_S = 0.032
MFCC_HOP_S = 0.016
MFCC_NUM_FILTERS = 26
LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude spectrum"""

    magnitudes: np.ndarray
    bin_hz: float
    window: str
    fft_size: int

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.magnitudes.shape[0]) * self.bin_hz


@dataclass(frozen=True)
class Spectrogram:
    """Per-frame one-sided magnitudes, shape [num_frames x num_bins]"""

    frames: np.ndarray
    hop_s: float
    bin_hz: float

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.num_bins) * self.bin_hz


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-frame feature vectors, shape [num_frames x num_features]"""

    rows: np.ndarray
    frame_rate_hz: float

    @property
    def num_frames(self) -> int:
        return self.rows.shape[0]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window, w[k] = 0.54 - 0.46*cos(2*pi*k/(n-1))."""
    if n < 2:
        raise InvalidLength(f"window length must be >= 2, got {n}")
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def get_window(name: str, n: int) -> np.ndarray:
    if name == "hamming":
        return hamming_window(n)
    if name == "hann":
        if n < 2:
            raise InvalidLength(f"window length must be >= 2, got {n}")
        return signal.get_window("hann", n, fftbins=True)
    if name == "rect":
        return np.ones(n)
    raise ValueError(f"Unknown window {name!r}; expected one of {WINDOW_NAMES}")


def frame_signal(samples: np.ndarray, win: int, hop: int) -> np.ndarray:
    """[num_frames x win] view, num_frames = floor((len - win)/hop) + 1."""
    return sliding_window_view(samples, win)[::hop]


def magnitude_spectrum(clip: AudioClip, fft_size: int = 8192, window: str = "hamming") -> Spectrum:
    """
    Welch-averaged one-sided magnitude spectrum.

    Segments of fft_size samples with 50% overlap are windowed and transformed;
    their powers are averaged. Magnitudes are scaled so that, for a single
    rect-windowed frame, the sum of squared magnitudes equals fft_size times the
    frame's mean square.

    Args:
        clip: Input clip, at least fft_size samples long
        fft_size: Power-of-two segment length
        window: "hamming", "hann" or "rect"

    Returns:
        Spectrum: fft_size/2 + 1 magnitudes at sample_rate/fft_size Hz per bin
    """
    if not is_power_of_two(fft_size) or fft_size < 2:
        raise NotPowerOfTwo(f"fft_size must be a power of two, got {fft_size}")
    if len(clip) < fft_size:
        raise TooShort(f"clip has {len(clip)} samples, fft_size is {fft_size}")

    w = get_window(window, fft_size)
    segments = frame_signal(clip.samples, fft_size, fft_size // 2)
    power = np.abs(np.fft.rfft(segments * w, axis=1)) ** 2 / fft_size
    power[:, 1:-1] *= 2.0  # fold negative frequencies into the one-sided bins
    magnitudes = np.sqrt(power.mean(axis=0))

    return Spectrum(magnitudes, clip.sample_rate / fft_size, window, fft_size)


def stft(
    clip: AudioClip,
    win: int,
    hop: int,
    window: str = "hann",
    fft_size: Optional[int] = None,
) -> Spectrogram:
    """Magnitude STFT; frames are zero-padded to fft_size (default: next power of two >= win)."""
    if hop < 1:
        raise InvalidLength(f"hop must be >= 1, got {hop}")
    if len(clip) < win:
        raise TooShort(f"clip has {len(clip)} samples, window is {win}")
    if fft_size is None:
        fft_size = next_power_of_two(win)
    if not is_power_of_two(fft_size) or fft_size < win:
        raise NotPowerOfTwo(f"fft_size must be a power of two >= {win}, got {fft_size}")

    frames = frame_signal(clip.samples, win, hop) * get_window(window, win)
    mags = np.abs(np.fft.rfft(frames, n=fft_size, axis=1))
    return Spectrogram(mags, hop / clip.sample_rate, clip.sample_rate / fft_size)


def upsample_poly(clip: AudioClip, target_rate: int) -> AudioClip:
    """
    Upsample with 4-point cubic (Catmull-Rom) interpolation.

    The ratio need not be an integer. Output length is
    round(len * target_rate / sample_rate).
    """
    source_rate = clip.sample_rate
    if target_rate <= source_rate:
        raise NotUpsampling(f"target rate {target_rate} Hz is not above {source_rate} Hz")

    x = clip.samples
    out_len = int(round(len(x) * target_rate / source_rate))
    if len(x) == 0 or out_len == 0:
        return AudioClip(np.zeros(out_len), target_rate)

    t = np.arange(out_len) * (source_rate / target_rate)
    i = np.floor(t).astype(np.int64)
    mu = t - i

    # Edge-replicate so every instant has its four neighbours
    padded = np.pad(x, (1, 2), mode="edge")
    p0 = padded[i]
    p1 = padded[i + 1]
    p2 = padded[i + 2]
    p3 = padded[i + 3]

    mu2 = mu * mu
    mu3 = mu2 * mu
    y = 0.5 * (
        2.0 * p1
        + (p2 - p0) * mu
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * mu2
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * mu3
    )
    return AudioClip(y, target_rate)


def antialias_filter(source_rate: int, target_rate: int) -> np.ndarray:
    """Kaiser-windowed sinc low-pass for source->target, designed at the interpolated rate."""
    g = gcd(source_rate, target_rate)
    up = target_rate // g
    nyq_int = source_rate * up / 2.0
    target_nyq = target_rate / 2.0
    cutoff = ANTIALIAS_CUTOFF_RATIO * target_nyq
    # Transition band is centred on the cutoff and ends at the target Nyquist
    width = 2.0 * (target_nyq - cutoff) / nyq_int
    numtaps, beta = signal.kaiserord(ANTIALIAS_STOPBAND_DB, width)
    numtaps |= 1
    return signal.firwin(numtaps, cutoff / nyq_int, window=("kaiser", beta))


def downsample(clip: AudioClip, target_rate: int) -> AudioClip:
    """
    Anti-aliased rational-rate downsampling.

    Output length is round(len * target_rate / sample_rate).
    """
    source_rate = clip.sample_rate
    if target_rate >= source_rate:
        raise NotDownsampling(f"target rate {target_rate} Hz is not below {source_rate} Hz")
    if target_rate <= 0:
        raise NotDownsampling(f"target rate must be positive, got {target_rate}")

    g = gcd(source_rate, target_rate)
    up, down = target_rate // g, source_rate // g
    out_len = int(round(len(clip) * target_rate / source_rate))
    if len(clip) == 0:
        return AudioClip(np.zeros(0), target_rate)

    h = antialias_filter(source_rate, target_rate)
    y = signal.resample_poly(clip.samples, up, down, window=h)
    if y.shape[0] < out_len:
        y = np.pad(y, (0, out_len - y.shape[0]))
    return AudioClip(y[:out_len], target_rate)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Dispatch to downsample/upsample_poly; identity when the rates agree."""
    if target_rate == clip.sample_rate:
        return clip
    if target_rate < clip.sample_rate:
        logger.debug(f"Downsampling {clip.sample_rate} Hz -> {target_rate} Hz")
        return downsample(clip, target_rate)
    logger.debug(f"Upsampling {clip.sample_rate} Hz -> {target_rate} Hz")
    return upsample_poly(clip, target_rate)


def mfcc(
    clip: AudioClip,
    num_coeffs: int = MFCC_NUM_COEFFS,
    win_s: float = MFCC_WIN_S,
    hop_s: float = MFCC_HOP_S,
    num_filters: int = MFCC_NUM_FILTERS,
    mean_normalize: bool = True,
) -> FeatureMatrix:
    """
    Mel-frequency cepstral coefficients.

    Per frame: Hann-windowed power spectrum, triangular mel filterbank over
    0 Hz..Nyquist, log with a 1e-10 floor, orthonormal DCT-II, first num_coeffs
    kept. With mean_normalize the per-utterance mean of each coefficient is
    subtracted.
    """
    sr = clip.sample_rate
    win = int(round(win_s * sr))
    hop = max(1, int(round(hop_s * sr)))
    if len(clip) < win:
        raise TooShort(f"clip has {len(clip)} samples, MFCC window is {win}")

    n_fft = next_power_of_two(win)
    frames = frame_signal(clip.samples, win, hop) * get_window("hann", win)
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2

    fb = librosa.filters.mel(sr=sr, n_fft=n_fft, n_mels=num_filters, fmin=0.0, fmax=sr / 2.0)
    log_energies = np.log(np.maximum(power @ fb.T, LOG_FLOOR))
    coeffs = sp_fft.dct(log_energies, type=2, norm="ortho", axis=1)[:, :num_coeffs]

    if mean_normalize:
        coeffs = coeffs - coeffs.mean(axis=0, keepdims=True)

    return FeatureMatrix(coeffs, sr / hop)


def third_octave_centers(num_bands: int = 15, first_center_hz: float = 150.0) -> np.ndarray:
    return first_center_hz * 2.0 ** (np.arange(num_bands) / 3.0)


def third_octave_bands(
    spectrogram: Spectrogram,
    num_bands: int = 15,
    first_center_hz: float = 150.0,
) -> FeatureMatrix:
    """
    Group spectrogram bins into one-third-octave bands.

    Band k spans [c/2^(1/6), c*2^(1/6)) with c = first_center_hz * 2^(k/3); its
    energy is the root of the summed squared bin magnitudes.
    """
    centers = third_octave_centers(num_bands, first_center_hz)
    lo = centers * 2.0 ** (-1.0 / 6.0)
    hi = centers * 2.0 ** (1.0 / 6.0)
    nyquist = spectrogram.bin_hz * (spectrogram.num_bins - 1)
    if hi[-1] > nyquist:
        raise BandAboveNyquist(f"top band edge {hi[-1]:.1f} Hz exceeds Nyquist {nyquist:.1f} Hz")

    freqs = spectrogram.frequencies
    membership = ((freqs[None, :] >= lo[:, None]) & (freqs[None, :] < hi[:, None])).astype(np.float64)
    energies = np.sqrt((spectrogram.frames ** 2) @ membership.T)
    return FeatureMatrix(energies, 1.0 / spectrogram.hop_s)
