"""
Bench Worker Module

This module times separator forward passes and evaluates the per-frame
processing-time model against the real-time threshold.
"""

import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from enhancer.utils.audio_io import AudioClip
from enhancer.utils.errors import InvalidArgs
from enhancer.utils.logging_utils import get_logger
from src.core.cpu_info import CPUInfoCollector, single_core

# Initialize logger
logger = get_logger(__name__)

FRAME_SAMPLES = 256
PER_FRAME_MS = 0.4
REALTIME_THRESHOLD_MS = 185.19
SYNTH_AMPLITUDE = 0.1


def theoretical_frame_time(frame_samples: int, sample_rate: int, per_frame_ms: float = PER_FRAME_MS) -> Tuple[float, float]:
    """
    Per-frame processing-time model.

    Args:
        frame_samples: N, samples per frame
        sample_rate: n, sampling rate in Hz
        per_frame_ms: Forward time of one frame in ms

    Returns:
        tuple: (audio ms covered by one frame, processing ms per second of audio)
    """
    if frame_samples < 1 or sample_rate < 1:
        raise InvalidArgs(f"frame_samples and sample_rate must be >= 1, got {frame_samples}, {sample_rate}")
    if per_frame_ms < 0:
        raise InvalidArgs(f"per_frame_ms must be non-negative, got {per_frame_ms}")
    audio_ms_per_frame = 1000.0 * frame_samples / sample_rate
    processing_ms_per_second = (sample_rate / frame_samples) * per_frame_ms
    return audio_ms_per_frame, processing_ms_per_second


@dataclass
class BenchReport:
    sample_rate: int
    clip_seconds: float
    repeats: int
    samples_ms: List[float]
    measured_ms: Dict[str, float]
    theoretical_ms_per_second: float
    realtime_ok: bool
    frame_samples: int = FRAME_SAMPLES
    per_frame_ms: float = PER_FRAME_MS
    threshold_ms: float = REALTIME_THRESHOLD_MS
    pinned_core: Optional[int] = None
    cpu: Dict[str, Any] = field(default_factory=dict)

    @property
    def median_ms_per_second(self) -> float:
        return self.measured_ms["median"] / self.clip_seconds

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["median_ms_per_second"] = self.median_ms_per_second
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def summarize(samples_ms: Sequence[float]) -> Dict[str, float]:
    return {
        "min": float(min(samples_ms)),
        "median": float(statistics.median(samples_ms)),
        "mean": float(statistics.fmean(samples_ms)),
        "max": float(max(samples_ms)),
    }


def realtime_check(report: BenchReport, threshold_ms: float = REALTIME_THRESHOLD_MS) -> bool:
    """True iff the median latency per second of audio is at most threshold_ms."""
    return report.median_ms_per_second <= threshold_ms


def synth_clip(sample_rate: int, clip_seconds: float, seed: int) -> AudioClip:
    rng = np.random.default_rng(seed)
    num_samples = max(1, int(round(clip_seconds * sample_rate)))
    return AudioClip(SYNTH_AMPLITUDE * rng.standard_normal(num_samples), sample_rate)


def measure_forward(
    model,
    clip_seconds: float,
    repeats: int = 5,
    seed: int = 0,
    frame_samples: int = FRAME_SAMPLES,
    per_frame_ms: float = PER_FRAME_MS,
    threshold_ms: float = REALTIME_THRESHOLD_MS,
    pin_cpu: bool = True,
    cpu_snapshot: Optional[Dict[str, Any]] = None,
) -> BenchReport:
    """
    Time model.enhance on a synthetic clip at the model's rate.

    Only the enhance call is inside the timed region. One untimed warm-up pass
    runs first; timed passes never overlap.

    Args:
        model: Anything with config.sample_rate and enhance(clip)
        clip_seconds: Length of the synthetic clip
        repeats: Number of timed passes
        seed: Seed for the synthetic clip
        pin_cpu: Pin to one core while timing when the platform allows it

    Returns:
        BenchReport: Raw samples, statistics, model estimate and real-time flag
    """
    if repeats < 1:
        raise InvalidArgs(f"repeats must be >= 1, got {repeats}")
    if clip_seconds <= 0:
        raise InvalidArgs(f"clip_seconds must be positive, got {clip_seconds}")
    if repeats < 3:
        logger.warning(f"repeats={repeats}: statistics degenerate to the raw samples")

    sample_rate = model.config.sample_rate
    clip = synth_clip(sample_rate, clip_seconds, seed)
    _, theoretical = theoretical_frame_time(frame_samples, sample_rate, per_frame_ms)

    samples_ms: List[float] = []
    with single_core(pin_cpu) as core:
        model.enhance(clip)  # warm-up
        for _ in range(repeats):
            start = time.perf_counter()
            model.enhance(clip)
            samples_ms.append((time.perf_counter() - start) * 1000.0)

    report = BenchReport(
        sample_rate=sample_rate,
        clip_seconds=float(clip_seconds),
        repeats=repeats,
        samples_ms=samples_ms,
        measured_ms=summarize(samples_ms),
        theoretical_ms_per_second=theoretical,
        realtime_ok=False,
        frame_samples=frame_samples,
        per_frame_ms=per_frame_ms,
        threshold_ms=threshold_ms,
        pinned_core=core,
        cpu=cpu_snapshot if cpu_snapshot is not None else {},
    )
    report.realtime_ok = realtime_check(report, threshold_ms)
    logger.info(
        f"{sample_rate} Hz, {clip_seconds:g} s clip: median {report.measured_ms['median']:.1f} ms "
        f"({report.median_ms_per_second:.1f} ms per second of audio, model {theoretical:.1f}), "
        f"realtime {'yes' if report.realtime_ok else 'no'}"
    )
    return report


class BenchWorker:
    """Runs a benchmark plan sequentially against one CPU snapshot"""

    def __init__(self, models: Sequence, clip_seconds: Sequence[float], repeats: int = 5, seed: int = 0,
                 settings: Optional[Dict[str, Any]] = None):
        """
        Initialize the bench worker.

        Args:
            models: Models to time, one report per (model, clip length)
            clip_seconds: Clip lengths in seconds
            repeats: Timed passes per measurement
            seed: Seed for the synthetic clips
            settings: The "bench" config section (frame_samples, per_frame_ms, threshold_ms, pin_cpu)
        """
        self.models = list(models)
        self.clip_seconds = list(clip_seconds)
        self.repeats = repeats
        self.seed = seed
        self.settings = settings or {}
        self.reports: List[BenchReport] = []

    def run_all(self) -> List[BenchReport]:
        """Measure every (model, clip length) pair in order and return the reports."""
        cpu_snapshot = CPUInfoCollector().get_snapshot()
        self.reports = []
        for model in self.models:
            for seconds in self.clip_seconds:
                start_time = time.time()
                report = measure_forward(
                    model,
                    seconds,
                    self.repeats,
                    self.seed,
                    frame_samples=int(self.settings.get("frame_samples", FRAME_SAMPLES)),
                    per_frame_ms=float(self.settings.get("per_frame_ms", PER_FRAME_MS)),
                    threshold_ms=float(self.settings.get("threshold_ms", REALTIME_THRESHOLD_MS)),
                    pin_cpu=bool(self.settings.get("pin_cpu", True)),
                    cpu_snapshot=cpu_snapshot,
                )
                logger.debug(f"Measurement took {time.time() - start_time:.3f} seconds including warm-up")
                self.reports.append(report)
        return self.reports
