import csv
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import soundfile as sf

from .audio_io import AudioClip, read_wav, write_wav
from .dsp import resample
from .errors import EmptyCorpus, InvalidMixtureSpec, IoError, RateMismatch, SilentInput
from .logging_utils import get_logger

# Initialize logger
logger = get_logger(__name__)

# Mixtures peaking above this are rescaled together with their clean reference
PEAK_LIMIT = 0.99
CROSSFADE_S = 0.01
DEFAULT_SNR_RANGE_DB = (-3.0, 12.0)
DEFAULT_SPLIT = (0.8, 0.1, 0.1)
SPLIT_TAGS = ("train", "eval", "test")
MANIFEST_NAME = "manifest.csv"
MANIFEST_FIELDS = ("mixture_path", "clean_path", "noise_path", "snr_db", "split", "applied_gain", "rescale")


def rms(samples: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(samples)))) if samples.size else 0.0


def snr_db(clean: np.ndarray, noise: np.ndarray) -> float:
    """20*log10(rms(clean)/rms(noise))."""
    return 20.0 * math.log10(rms(clean) / rms(noise))


def noise_gain_for_snr(speech: AudioClip, noise: AudioClip, snr_db: float) -> float:
    """
    Gain g so that speech over g*noise has the requested SNR.

    Args:
        speech: Clean speech
        noise: Noise, already fitted to the speech length
        snr_db: Target SNR in dB

    Returns:
        float: g = (rms_speech / rms_noise) * 10^(-snr_db/20)
    """
    if speech.sample_rate != noise.sample_rate:
        raise RateMismatch(f"mix: speech {speech.sample_rate} Hz vs noise {noise.sample_rate} Hz")
    rms_speech = rms(speech.samples)
    rms_noise = rms(noise.samples)
    if rms_speech == 0.0:
        raise SilentInput("speech clip has zero RMS")
    if rms_noise == 0.0:
        raise SilentInput("noise clip has zero RMS")
    return (rms_speech / rms_noise) * 10.0 ** (-snr_db / 20.0)


def fit_noise(noise: AudioClip, length: int, offset: int = 0) -> AudioClip:
    """
    Trim or loop noise to exactly `length` samples.

    Longer noise is cut at `offset` (clamped into range). Shorter noise is
    looped, joining consecutive copies with a 10 ms linear cross-fade.
    """
    samples = noise.samples
    if len(samples) >= length:
        offset = int(min(max(offset, 0), len(samples) - length))
        return noise.with_samples(samples[offset:offset + length])

    shift = int(offset) % len(samples)
    needed = length + shift
    fade = min(int(round(CROSSFADE_S * noise.sample_rate)), len(samples) // 2)
    ramp = (np.arange(fade) + 0.5) / fade if fade else np.zeros(0)
    pieces = [samples]
    built = len(samples)
    tail = samples[-fade:] if fade else samples[:0]
    while built < needed:
        if fade:
            joined = tail * (1.0 - ramp) + samples[:fade] * ramp
            pieces[-1] = pieces[-1][:-fade]
            pieces.append(joined)
            pieces.append(samples[fade:])
            built += len(samples) - fade
        else:
            pieces.append(samples)
            built += len(samples)
    looped = np.concatenate(pieces)
    return noise.with_samples(looped[shift:shift + length])


@dataclass
class MixResult:
    """One synthesized pair; clean is the (possibly rescaled) reference to store"""

    mixture: AudioClip
    clean: AudioClip
    noise: AudioClip
    applied_gain: float
    rescale: float

    def achieved_snr_db(self) -> float:
        return snr_db(self.clean.samples, self.mixture.samples - self.clean.samples)


def mix(speech: AudioClip, noise: AudioClip, snr_db: float, offset: int = 0) -> MixResult:
    """
    mixture = speech + g*noise, jointly rescaled by 0.99/peak when it would clip.
    """
    if speech.sample_rate != noise.sample_rate:
        raise RateMismatch(f"mix: speech {speech.sample_rate} Hz vs noise {noise.sample_rate} Hz")
    fitted = fit_noise(noise, len(speech), offset)
    gain = noise_gain_for_snr(speech, fitted, snr_db)
    scaled_noise = gain * fitted.samples
    mixture = speech.samples + scaled_noise

    rescale = 1.0
    peak = float(np.max(np.abs(mixture)))
    if peak > PEAK_LIMIT:
        rescale = PEAK_LIMIT / peak
        logger.debug(f"Mixture peak {peak:.3f} above {PEAK_LIMIT}, rescaling mixture and clean by {rescale:.4f}")

    return MixResult(
        mixture=speech.with_samples(mixture * rescale),
        clean=speech.with_samples(speech.samples * rescale),
        noise=speech.with_samples(scaled_noise * rescale),
        applied_gain=gain,
        rescale=rescale,
    )


@dataclass(frozen=True)
class MixtureSpec:
    """Everything generate_dataset needs; the manifest is a pure function of it"""

    speech_dir: Path
    noise_dir: Path
    sample_rate: int = 16000
    snr_range_db: Tuple[float, float] = DEFAULT_SNR_RANGE_DB
    seed: int = 0
    split: Tuple[float, float, float] = DEFAULT_SPLIT
    target_hours: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "speech_dir", Path(self.speech_dir))
        object.__setattr__(self, "noise_dir", Path(self.noise_dir))
        object.__setattr__(self, "snr_range_db", tuple(float(v) for v in self.snr_range_db))
        object.__setattr__(self, "split", tuple(float(v) for v in self.split))
        self.validate()

    def validate(self) -> None:
        low, high = self.snr_range_db
        if low > high:
            raise InvalidMixtureSpec(f"snr range low {low} exceeds high {high}")
        if len(self.split) != 3 or any(f < 0 for f in self.split):
            raise InvalidMixtureSpec(f"split must be three non-negative fractions, got {self.split}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise InvalidMixtureSpec(f"split fractions must sum to 1, got {sum(self.split)}")
        if self.sample_rate <= 0:
            raise InvalidMixtureSpec(f"sample_rate must be positive, got {self.sample_rate}")
        if self.target_hours is not None and self.target_hours <= 0:
            raise InvalidMixtureSpec(f"target_hours must be positive, got {self.target_hours}")


@dataclass
class MixtureRow:
    mixture_path: str
    clean_path: str
    noise_path: str
    snr_db: float
    split: str
    applied_gain: float
    rescale: float

    def to_csv(self) -> List[str]:
        return [
            self.mixture_path,
            self.clean_path,
            self.noise_path,
            repr(float(self.snr_db)),
            self.split,
            repr(float(self.applied_gain)),
            repr(float(self.rescale)),
        ]

    @classmethod
    def from_csv(cls, record: Dict[str, str]) -> "MixtureRow":
        return cls(
            mixture_path=record["mixture_path"],
            clean_path=record["clean_path"],
            noise_path=record["noise_path"],
            snr_db=float(record["snr_db"]),
            split=record["split"],
            applied_gain=float(record["applied_gain"]),
            rescale=float(record["rescale"]),
        )


@dataclass
class MixtureManifest:
    """Manifest rows; generated paths are relative to `root`"""

    rows: List[MixtureRow] = field(default_factory=list)
    root: Optional[Path] = None

    def __len__(self) -> int:
        return len(self.rows)

    def resolve(self, relative: str) -> Path:
        path = Path(relative)
        if path.is_absolute() or self.root is None:
            return path
        return self.root / path

    def split_counts(self) -> Dict[str, int]:
        counts = Counter(row.split for row in self.rows)
        return {tag: counts.get(tag, 0) for tag in SPLIT_TAGS}

    def mean_snr_db(self) -> float:
        if not self.rows:
            return float("nan")
        return float(np.mean([row.snr_db for row in self.rows]))

    def rows_for(self, split: Optional[str]) -> List[MixtureRow]:
        if split is None:
            return list(self.rows)
        return [row for row in self.rows if row.split == split]

    def write_csv(self, path: Union[str, Path]) -> None:
        try:
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(MANIFEST_FIELDS)
                for row in self.rows:
                    writer.writerow(row.to_csv())
        except OSError as e:
            raise IoError(f"failed writing manifest {path}: {e}") from e

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "MixtureManifest":
        path = Path(path)
        try:
            with open(path, "r", newline="", encoding="utf-8") as f:
                rows = [MixtureRow.from_csv(record) for record in csv.DictReader(f)]
        except OSError as e:
            raise IoError(f"cannot read manifest {path}: {e}") from e
        except (KeyError, ValueError) as e:
            raise IoError(f"malformed manifest {path}: {e}") from e
        return cls(rows, path.parent)


def list_wavs(directory: Path) -> List[Path]:
    if not directory.is_dir():
        raise EmptyCorpus(f"{directory} is not a directory")
    files = sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() == ".wav")
    if not files:
        raise EmptyCorpus(f"no WAV files in {directory}")
    return files


def split_counts(n: int, fractions: Sequence[float]) -> Tuple[int, int, int]:
    """round/round/remainder partition of n items."""
    n_train = min(n, int(round(fractions[0] * n)))
    n_eval = min(n - n_train, int(round(fractions[1] * n)))
    return n_train, n_eval, n - n_train - n_eval


@dataclass
class _PlannedMixture:
    index: int
    speech: Path
    noise: Path
    snr_db: float
    offset_fraction: float
    split: str


def _plan(spec: MixtureSpec, speech_files: List[Path], noise_files: List[Path]) -> List[_PlannedMixture]:
    """Draw every random choice up front, in a fixed order, from one seeded generator."""
    rng = np.random.default_rng(spec.seed)
    speech_order = [speech_files[i] for i in rng.permutation(len(speech_files))]

    if spec.target_hours is not None:
        budget_s = spec.target_hours * 3600.0
        kept, total_s = [], 0.0
        for path in speech_order:
            if total_s >= budget_s:
                break
            info = sf.info(str(path))
            total_s += info.frames / info.samplerate
            kept.append(path)
        speech_order = kept
        logger.info(f"target_hours={spec.target_hours}: using {len(kept)} speech files ({total_s / 3600.0:.3f} h)")

    noise_queue: List[Path] = []
    drawn = []
    low, high = spec.snr_range_db
    for _ in speech_order:
        if not noise_queue:
            # noise pool exhausted: reuse it in a fresh order
            noise_queue = [noise_files[i] for i in rng.permutation(len(noise_files))]
        noise = noise_queue.pop(0)
        offset_fraction = float(rng.random())
        snr = float(rng.uniform(low, high)) if high > low else low
        drawn.append((noise, offset_fraction, snr))

    n = len(speech_order)
    n_train, n_eval, _ = split_counts(n, spec.split)
    tags = [""] * n
    for rank, position in enumerate(rng.permutation(n)):
        tags[position] = SPLIT_TAGS[0] if rank < n_train else SPLIT_TAGS[1] if rank < n_train + n_eval else SPLIT_TAGS[2]

    return [
        _PlannedMixture(i, speech, noise, snr, offset_fraction, tags[i])
        for i, (speech, (noise, offset_fraction, snr)) in enumerate(zip(speech_order, drawn))
    ]


def _load_at_rate(path: Path, rate: int) -> AudioClip:
    clip = read_wav(path)
    return resample(clip, rate)


def _render(plan: _PlannedMixture, spec: MixtureSpec, output_dir: Path) -> MixtureRow:
    speech = _load_at_rate(plan.speech, spec.sample_rate)
    noise = _load_at_rate(plan.noise, spec.sample_rate)
    if len(noise) >= len(speech):
        offset = int(plan.offset_fraction * (len(noise) - len(speech) + 1))
    else:
        offset = int(plan.offset_fraction * len(noise))
    result = mix(speech, noise, plan.snr_db, offset)

    name = f"{plan.index:05d}_{plan.speech.stem}_{plan.noise.stem}.wav"
    mixture_rel = Path(plan.split) / "mixture" / name
    clean_rel = Path(plan.split) / "clean" / name
    write_wav(result.mixture, output_dir / mixture_rel, encoding="float32")
    write_wav(result.clean, output_dir / clean_rel, encoding="float32")
    logger.debug(f"{name}: snr {plan.snr_db:.3f} dB, gain {result.applied_gain:.4f}, rescale {result.rescale:.4f}")

    return MixtureRow(
        mixture_path=mixture_rel.as_posix(),
        clean_path=clean_rel.as_posix(),
        noise_path=plan.noise.as_posix(),
        snr_db=plan.snr_db,
        split=plan.split,
        applied_gain=result.applied_gain,
        rescale=result.rescale,
    )


def generate_dataset(
    spec: MixtureSpec,
    output_dir: Union[str, Path],
    max_workers: int = 1,
) -> MixtureManifest:
    """
    Build mixture/clean WAV pairs and a CSV manifest under output_dir.

    Args:
        spec: Corpus directories, rate, SNR range, seed and split
        output_dir: Destination; gets <split>/{mixture,clean}/ and manifest.csv
        max_workers: Pairs rendered concurrently; row order is always seed order

    Returns:
        MixtureManifest: Rows in seed order, rooted at output_dir
    """
    output_dir = Path(output_dir)
    speech_files = list_wavs(spec.speech_dir)
    noise_files = list_wavs(spec.noise_dir)
    plans = _plan(spec, speech_files, noise_files)
    if not plans:
        raise EmptyCorpus("no speech files selected")

    for tag in SPLIT_TAGS:
        for kind in ("mixture", "clean"):
            (output_dir / tag / kind).mkdir(parents=True, exist_ok=True)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(lambda plan: _render(plan, spec, output_dir), plans))
    else:
        rows = [_render(plan, spec, output_dir) for plan in plans]

    manifest = MixtureManifest(rows, output_dir)
    manifest.write_csv(output_dir / MANIFEST_NAME)
    counts = manifest.split_counts()
    logger.info(
        f"Generated {len(manifest)} mixtures at {spec.sample_rate} Hz "
        f"(train {counts['train']}, eval {counts['eval']}, test {counts['test']}), "
        f"mean SNR {manifest.mean_snr_db():.2f} dB"
    )
    return manifest
