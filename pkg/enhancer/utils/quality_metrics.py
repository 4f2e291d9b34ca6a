import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import librosa
import numpy as np

from .audio_io import AudioClip
from .dsp import (
    MFCC_HOP_S,
    MFCC_NUM_COEFFS,
    MFCC_WIN_S,
    frame_signal,
    get_window,
    magnitude_spectrum,
    mfcc,
    resample,
    stft,
    third_octave_bands,
)
from .errors import (
    AllFramesSilent,
    LengthMismatch,
    NoFundamental,
    RateMismatch,
    TooShort,
    ZeroReference,
)
from .logging_utils import get_logger

# Initialize logger
logger = get_logger(__name__)

SI_SDR_EPS = 1e-12

# Standard STOI constants
STOI_RATE = 10000
STOI_FRAME = 256
STOI_HOP = 128
STOI_FFT = 512
STOI_BANDS = 15
STOI_FIRST_CENTER_HZ = 150.0
STOI_SEGMENT = 30
STOI_BETA_DB = -15.0
STOI_DYN_RANGE_DB = 40.0
STOI_MIN_SECONDS = 0.5
_EPS = np.finfo(np.float64).eps

THD_FFT_SIZE = 8192
THD_MIN_FFT = 256
THD_F0_SEARCH = (50.0, 1000.0)
THD_MAX_HARMONICS = 10
THD_FLOOR_MARGIN_DB = 10.0
# Hamming main lobe spans +-2 bins
THD_LOBE_BINS = 2

WARPQ_PATCH_S = 0.5

REFERENCE_RATE = 48000

REPORT_FIELDS = ("si_sdr_db", "stoi", "thd_percent", "thd_norm", "warpq_distance", "warpq_norm")

DEFAULT_SETTINGS: Dict[str, Any] = {
    "f0_min_hz": THD_F0_SEARCH[0],
    "f0_max_hz": THD_F0_SEARCH[1],
    "max_harmonics": THD_MAX_HARMONICS,
    "thd_fft_size": THD_FFT_SIZE,
    "warpq_patch_s": WARPQ_PATCH_S,
    "mfcc_coeffs": MFCC_NUM_COEFFS,
    "mfcc_win_s": MFCC_WIN_S,
    "mfcc_hop_s": MFCC_HOP_S,
    "reference_rate": REFERENCE_RATE,
}


@dataclass
class MetricReport:
    """Per-clip effectiveness metrics; the normalized fields need a 48 kHz reference"""

    si_sdr_db: float
    stoi: float
    thd_percent: float
    warpq_distance: float
    thd_norm: Optional[float] = None
    warpq_norm: Optional[float] = None

    def to_dict(self) -> Dict[str, Optional[float]]:
        values = asdict(self)
        return {name: values[name] for name in REPORT_FIELDS}

    def populated_fields(self) -> List[str]:
        return [name for name, value in self.to_dict().items() if value is not None]

    @staticmethod
    def csv_header() -> List[str]:
        return list(REPORT_FIELDS)

    def csv_row(self) -> List[str]:
        return ["" if value is None else repr(float(value)) for value in self.to_dict().values()]


@dataclass
class HarmonicProfile:
    """Fundamental and harmonic peaks found in a Hamming-windowed averaged spectrum"""

    f0_hz: float
    bin_hz: float
    # (harmonic index, frequency in Hz, main-lobe amplitude); index 1 is the fundamental
    harmonics: List[Tuple[int, float, float]] = field(default_factory=list)

    @property
    def fundamental_magnitude(self) -> float:
        return self.harmonics[0][2]

    def thd_percent(self) -> float:
        overtones = np.array([mag for index, _, mag in self.harmonics if index >= 2])
        if overtones.size == 0:
            return 0.0
        return 100.0 * float(np.sqrt(np.sum(overtones ** 2))) / self.fundamental_magnitude

    def relative_db(self) -> List[Tuple[int, float, float]]:
        ref = self.fundamental_magnitude
        return [
            (index, freq, 20.0 * math.log10(max(mag, 1e-300) / ref))
            for index, freq, mag in self.harmonics
        ]


def _check_pair(metric: str, a: AudioClip, b: AudioClip) -> None:
    if a.sample_rate != b.sample_rate:
        raise RateMismatch(f"{metric}: {a.sample_rate} Hz vs {b.sample_rate} Hz")
    if len(a) != len(b):
        raise LengthMismatch(f"{metric}: {len(a)} samples vs {len(b)} samples")


def si_sdr(estimate: AudioClip, reference: AudioClip, zero_mean: bool = True) -> float:
    """
    Scale-invariant signal-to-distortion ratio in dB.

    Returns math.inf when the residual after projection is exactly zero.
    """
    _check_pair("si_sdr", estimate, reference)
    est = estimate.samples
    ref = reference.samples
    if zero_mean:
        est = est - est.mean()
        ref = ref - ref.mean()

    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise ZeroReference("si_sdr: reference has zero energy")

    alpha = float(np.dot(est, ref)) / ref_energy
    target = alpha * ref
    error = est - target
    error_energy = float(np.dot(error, error))
    if error_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(float(np.dot(target, target)) / (error_energy + SI_SDR_EPS))


def _stoi_window() -> np.ndarray:
    return get_window("hann", STOI_FRAME)


def remove_silent_frames(
    x: np.ndarray,
    y: np.ndarray,
    dyn_range: float = STOI_DYN_RANGE_DB,
    framelen: int = STOI_FRAME,
    hop: int = STOI_HOP,
) -> Tuple[np.ndarray, np.ndarray]:
    """Drop frames more than dyn_range dB below the loudest reference frame, then overlap-add."""
    w = _stoi_window()
    x_frames = frame_signal(x, framelen, hop) * w
    y_frames = frame_signal(y, framelen, hop) * w

    energies = 20.0 * np.log10(np.linalg.norm(x_frames, axis=1) + _EPS)
    if np.max(energies) <= 20.0 * np.log10(_EPS) + 1e-9:
        raise AllFramesSilent("stoi: reference has no energy")
    keep = (np.max(energies) - energies) < dyn_range
    if not np.any(keep):
        raise AllFramesSilent("stoi: every frame is below the silence threshold")

    x_kept = x_frames[keep]
    y_kept = y_frames[keep]
    n = x_kept.shape[0]
    out_len = (n - 1) * hop + framelen
    x_sil = np.zeros(out_len)
    y_sil = np.zeros(out_len)
    for i in range(n):
        x_sil[i * hop:i * hop + framelen] += x_kept[i]
        y_sil[i * hop:i * hop + framelen] += y_kept[i]
    return x_sil, y_sil


def stoi(estimate: AudioClip, reference: AudioClip) -> float:
    """
    Short-time objective intelligibility in [0, 1].

    Both clips are taken to 10 kHz, silent frames are removed, one-third-octave
    band envelopes are compared over 30-frame segments with clipping at -15 dB SDR.
    """
    _check_pair("stoi", estimate, reference)
    if reference.duration_seconds < STOI_MIN_SECONDS:
        raise TooShort(f"stoi: clips are {reference.duration_seconds:.3f} s, need {STOI_MIN_SECONDS} s")

    x = resample(reference, STOI_RATE).samples
    y = resample(estimate, STOI_RATE).samples
    x, y = remove_silent_frames(x, y)

    x_clip = AudioClip(x, STOI_RATE)
    y_clip = AudioClip(y, STOI_RATE)
    if len(x_clip) < STOI_FRAME:
        raise TooShort("stoi: nothing left after silence removal")
    x_spec = stft(x_clip, STOI_FRAME, STOI_HOP, window="hann", fft_size=STOI_FFT)
    y_spec = stft(y_clip, STOI_FRAME, STOI_HOP, window="hann", fft_size=STOI_FFT)

    # [bands x frames]
    x_tob = third_octave_bands(x_spec, STOI_BANDS, STOI_FIRST_CENTER_HZ).rows.T
    y_tob = third_octave_bands(y_spec, STOI_BANDS, STOI_FIRST_CENTER_HZ).rows.T
    num_frames = x_tob.shape[1]
    if num_frames < STOI_SEGMENT:
        raise TooShort(f"stoi: {num_frames} frames after silence removal, need {STOI_SEGMENT}")

    # [segments x bands x N]
    x_seg = np.stack([x_tob[:, m - STOI_SEGMENT:m] for m in range(STOI_SEGMENT, num_frames + 1)])
    y_seg = np.stack([y_tob[:, m - STOI_SEGMENT:m] for m in range(STOI_SEGMENT, num_frames + 1)])

    norm_const = np.linalg.norm(x_seg, axis=2, keepdims=True) / (
        np.linalg.norm(y_seg, axis=2, keepdims=True) + _EPS
    )
    y_norm = y_seg * norm_const
    clip_value = 10.0 ** (-STOI_BETA_DB / 20.0)
    y_prime = np.minimum(y_norm, x_seg * (1.0 + clip_value))

    y_prime = y_prime - y_prime.mean(axis=2, keepdims=True)
    x_cent = x_seg - x_seg.mean(axis=2, keepdims=True)
    y_prime = y_prime / (np.linalg.norm(y_prime, axis=2, keepdims=True) + _EPS)
    x_cent = x_cent / (np.linalg.norm(x_cent, axis=2, keepdims=True) + _EPS)

    score = float(np.sum(y_prime * x_cent) / (x_seg.shape[0] * x_seg.shape[1]))
    return float(np.clip(score, 0.0, 1.0))


def _lobe_amplitude(mags: np.ndarray, center: int) -> float:
    """Amplitude summed over the main lobe of the largest bin within one bin of center."""
    last_bin = mags.shape[0] - 1
    lo = max(0, center - 1)
    peak = lo + int(np.argmax(mags[lo:min(last_bin, center + 1) + 1]))
    lobe = mags[max(0, peak - THD_LOBE_BINS):min(last_bin, peak + THD_LOBE_BINS) + 1]
    return float(np.sqrt(np.sum(lobe ** 2)))


def _analysis_fft_size(num_samples: int, fft_size: int) -> int:
    if num_samples < THD_MIN_FFT:
        raise TooShort(f"thd: clip has {num_samples} samples, need at least {THD_MIN_FFT}")
    size = fft_size
    while size > num_samples:
        size //= 2
    return size


def harmonic_profile(
    clip: AudioClip,
    f0_search: Tuple[float, float] = THD_F0_SEARCH,
    max_harmonics: int = THD_MAX_HARMONICS,
    fft_size: int = THD_FFT_SIZE,
) -> HarmonicProfile:
    """
    Locate the fundamental and its harmonics.

    The fundamental is the strongest bin within f0_search, refined by parabolic
    interpolation on log magnitude. Harmonic k is the largest bin within one bin
    of k*f0, for k = 2..max_harmonics below Nyquist. Every amplitude is the root
    of the power summed over the peak's main lobe, so it does not depend on
    where the tone falls between bins.
    """
    size = _analysis_fft_size(len(clip), fft_size)
    spectrum = magnitude_spectrum(clip, size, window="hamming")
    mags = spectrum.magnitudes
    bin_hz = spectrum.bin_hz
    last_bin = mags.shape[0] - 1

    lo_bin = max(1, int(math.ceil(f0_search[0] / bin_hz)))
    hi_bin = min(last_bin - 1, int(math.floor(f0_search[1] / bin_hz)))
    if hi_bin < lo_bin:
        raise NoFundamental(f"thd: search range {f0_search} Hz has no bins at {bin_hz:.2f} Hz resolution")

    peak = lo_bin + int(np.argmax(mags[lo_bin:hi_bin + 1]))
    peak_mag = float(mags[peak])
    noise_floor = float(np.median(mags))
    if peak_mag <= 0.0 or peak_mag < noise_floor * 10.0 ** (THD_FLOOR_MARGIN_DB / 20.0):
        raise NoFundamental(f"thd: no peak {THD_FLOOR_MARGIN_DB:.0f} dB above the noise floor in {f0_search} Hz")

    a, b, c = (math.log(max(float(m), 1e-300)) for m in mags[peak - 1:peak + 2])
    denom = a - 2.0 * b + c
    delta = 0.5 * (a - c) / denom if denom != 0.0 else 0.0
    f0 = (peak + delta) * bin_hz

    harmonics = [(1, f0, _lobe_amplitude(mags, peak))]
    nyquist = last_bin * bin_hz
    for k in range(2, max_harmonics + 1):
        fk = k * f0
        if fk > nyquist:
            break
        center = int(round(fk / bin_hz))
        harmonics.append((k, fk, _lobe_amplitude(mags, center)))

    logger.debug(f"Fundamental {f0:.2f} Hz with {len(harmonics) - 1} harmonics below Nyquist")
    return HarmonicProfile(f0, bin_hz, harmonics)


def thd(
    clip: AudioClip,
    f0_search: Tuple[float, float] = THD_F0_SEARCH,
    max_harmonics: int = THD_MAX_HARMONICS,
    fft_size: int = THD_FFT_SIZE,
) -> float:
    """Total harmonic distortion in percent: 100*sqrt(sum A_k^2)/A_1."""
    return harmonic_profile(clip, f0_search, max_harmonics, fft_size).thd_percent()


def thd_norm(thd_computed: float, thd_reference: float) -> float:
    return thd_computed - thd_reference


def warpq(
    reference: AudioClip,
    degraded: AudioClip,
    patch_s: float = WARPQ_PATCH_S,
    num_coeffs: int = MFCC_NUM_COEFFS,
    win_s: float = MFCC_WIN_S,
    hop_s: float = MFCC_HOP_S,
) -> float:
    """
    Median subsequence-DTW cost of degraded MFCC patches against the reference.

    Each consecutive patch of the degraded features is aligned to the best
    matching stretch of the full reference sequence; its cost is the accumulated
    Euclidean frame distance divided by the path length.
    """
    if reference.sample_rate != degraded.sample_rate:
        raise RateMismatch(f"warpq: {reference.sample_rate} Hz vs {degraded.sample_rate} Hz")
    min_seconds = 2.0 * patch_s
    for name, clip in (("reference", reference), ("degraded", degraded)):
        if clip.duration_seconds < min_seconds:
            raise TooShort(f"warpq: {name} is {clip.duration_seconds:.3f} s, need {min_seconds} s")

    ref_feats = mfcc(reference, num_coeffs, win_s, hop_s)
    deg_feats = mfcc(degraded, num_coeffs, win_s, hop_s)
    patch_frames = max(1, int(round(patch_s * deg_feats.frame_rate_hz)))
    num_patches = deg_feats.num_frames // patch_frames
    if num_patches == 0:
        raise TooShort("warpq: degraded clip shorter than one patch")

    ref_seq = ref_feats.rows.T
    costs = []
    for p in range(num_patches):
        patch = deg_feats.rows[p * patch_frames:(p + 1) * patch_frames].T
        acc, path = librosa.sequence.dtw(X=patch, Y=ref_seq, metric="euclidean", subseq=True, backtrack=True)
        end_row, end_col = path[0]
        costs.append(float(acc[end_row, end_col]) / len(path))

    return float(np.median(costs))


def warpq_norm(warpq_computed: float, warpq_reference: float) -> float:
    return 1.0 / (abs(warpq_computed - warpq_reference) + 1.0)


class QualityMetricsCollector:
    """A class to run the full metric suite with one set of settings"""

    def __init__(self, settings: Optional[Dict[str, Any]] = None):
        self.settings = dict(DEFAULT_SETTINGS)
        if settings:
            self.settings.update({k: v for k, v in settings.items() if k in DEFAULT_SETTINGS})

    def harmonic_profile(self, clip: AudioClip) -> HarmonicProfile:
        s = self.settings
        return harmonic_profile(
            clip,
            (float(s["f0_min_hz"]), float(s["f0_max_hz"])),
            int(s["max_harmonics"]),
            int(s["thd_fft_size"]),
        )

    def _thd(self, clip: AudioClip) -> float:
        return self.harmonic_profile(clip).thd_percent()

    def _warpq(self, reference: AudioClip, degraded: AudioClip) -> float:
        s = self.settings
        return warpq(
            reference,
            degraded,
            s["warpq_patch_s"],
            int(s["mfcc_coeffs"]),
            s["mfcc_win_s"],
            s["mfcc_hop_s"],
        )

    def evaluate_pair(
        self,
        reference: AudioClip,
        degraded: AudioClip,
        ref48k: Optional[AudioClip] = None,
    ) -> MetricReport:
        """
        Get all metrics for one (reference, degraded) pair

        Returns:
            MetricReport: thd_norm and warpq_norm are filled only when ref48k is given
        """
        if reference.sample_rate != degraded.sample_rate:
            raise RateMismatch(f"evaluate_pair: {reference.sample_rate} Hz vs {degraded.sample_rate} Hz")

        report = MetricReport(
            si_sdr_db=si_sdr(degraded, reference),
            stoi=stoi(degraded, reference),
            thd_percent=self._thd(degraded),
            warpq_distance=self._warpq(reference, degraded),
        )

        if ref48k is not None:
            rate = int(self.settings["reference_rate"])
            if ref48k.sample_rate != rate:
                logger.info(f"Resampled normalization reference {ref48k.sample_rate} Hz -> {rate} Hz")
                ref48k = resample(ref48k, rate)
            degraded_ref_rate = resample(degraded, rate)
            if degraded_ref_rate is not degraded:
                logger.info(f"Resampled degraded clip {degraded.sample_rate} Hz -> {rate} Hz for normalization")
            report.thd_norm = thd_norm(self._thd(degraded_ref_rate), self._thd(ref48k))
            report.warpq_norm = warpq_norm(
                self._warpq(ref48k, degraded_ref_rate),
                self._warpq(ref48k, ref48k),
            )

        logger.debug(f"Metric report: {report.to_dict()}")
        return report

    def evaluate_batch(
        self,
        pairs: Sequence[Tuple[AudioClip, AudioClip]],
        max_workers: int = 1,
    ) -> List[MetricReport]:
        """Evaluate many pairs; results come back in input order."""
        if max_workers <= 1:
            return [self.evaluate_pair(ref, deg) for ref, deg in pairs]
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(lambda pair: self.evaluate_pair(pair[0], pair[1]), pairs))


def evaluate_pair(
    reference: AudioClip,
    degraded: AudioClip,
    ref48k: Optional[AudioClip] = None,
) -> MetricReport:
    return QualityMetricsCollector().evaluate_pair(reference, degraded, ref48k)


def evaluate_batch(
    pairs: Sequence[Tuple[AudioClip, AudioClip]],
    max_workers: int = 1,
) -> List[MetricReport]:
    return QualityMetricsCollector().evaluate_batch(pairs, max_workers)
