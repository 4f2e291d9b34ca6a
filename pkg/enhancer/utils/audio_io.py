from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf

from .errors import AudioIoError, EmptyAudio, InvalidAudio, MalformedHeader, UnsupportedEncoding
from .logging_utils import get_logger

# Initialize logger
logger = get_logger(__name__)

PathLike = Union[str, Path]

PCM16_SCALE = 32768.0
SUPPORTED_SUBTYPES = ("PCM_16", "FLOAT")
ENCODING_SUBTYPES = {"pcm16": "PCM_16", "float32": "FLOAT"}


@dataclass(frozen=True)
class AudioClip:
    """Mono floating-point signal with its sampling rate"""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidAudio(f"samples must be one-dimensional, got shape {samples.shape}")
        if isinstance(self.sample_rate, bool) or int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise InvalidAudio(f"sample_rate must be a positive integer, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise InvalidAudio("samples contain NaN or Inf")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_seconds(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "AudioClip":
        """Same rate, new samples."""
        return AudioClip(samples, self.sample_rate)

    def fit_length(self, length: int) -> "AudioClip":
        """Trim or zero-pad the tail to exactly length samples."""
        if len(self) == length:
            return self
        if len(self) > length:
            return self.with_samples(self.samples[:length])
        return self.with_samples(np.pad(self.samples, (0, length - len(self))))


def to_mono(data: np.ndarray) -> np.ndarray:
    """Average a [frames x channels] array down to one channel."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        return data
    return data.mean(axis=1)


def _check_riff_header(path: Path) -> None:
    try:
        with open(path, "rb") as f:
            head = f.read(12)
    except OSError as e:
        raise AudioIoError(f"cannot open {path}: {e}") from e
    if len(head) < 12 or head[0:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise MalformedHeader(f"{path} is not a RIFF/WAVE file")


def read_wav(path: PathLike) -> AudioClip:
    """
    Read a 16-bit PCM or 32-bit float WAV file as a mono clip.

    Args:
        path: WAV file path

    Returns:
        AudioClip: samples in [-1, 1), stereo averaged to mono
    """
    path = Path(path)
    _check_riff_header(path)

    try:
        info = sf.info(str(path))
    except (RuntimeError, sf.SoundFileError) as e:
        raise MalformedHeader(f"{path}: {e}") from e

    if info.subtype not in SUPPORTED_SUBTYPES:
        raise UnsupportedEncoding(f"{path}: subtype {info.subtype} (only PCM_16 and FLOAT are read)")
    if info.channels not in (1, 2):
        raise UnsupportedEncoding(f"{path}: {info.channels} channels (only mono and stereo are read)")
    if info.frames == 0:
        raise EmptyAudio(f"{path} has no audio data")

    try:
        if info.subtype == "PCM_16":
            data, rate = sf.read(str(path), dtype="int16", always_2d=True)
            data = data.astype(np.float64) / PCM16_SCALE
        else:
            data, rate = sf.read(str(path), dtype="float32", always_2d=True)
    except (RuntimeError, sf.SoundFileError) as e:
        raise AudioIoError(f"failed reading {path}: {e}") from e

    if data.shape[0] == 0:
        raise EmptyAudio(f"{path} has no audio data")

    logger.debug(f"Read {path}: {data.shape[0]} frames, {info.channels} ch, {rate} Hz, {info.subtype}")
    return AudioClip(to_mono(data), rate)


def write_wav(clip: AudioClip, path: PathLike, encoding: str = "float32") -> int:
    """
    Write a clip as a mono WAV file.

    Args:
        clip: Clip to write
        path: Destination path
        encoding: "pcm16" or "float32"

    Returns:
        int: Number of samples hard-clipped (pcm16 only)
    """
    if encoding not in ENCODING_SUBTYPES:
        raise ValueError(f"Unknown encoding {encoding!r}; expected one of {sorted(ENCODING_SUBTYPES)}")
    if len(clip) == 0:
        raise EmptyAudio("refusing to write an empty clip")

    clipped = 0
    if encoding == "pcm16":
        clipped = int(np.count_nonzero(np.abs(clip.samples) > 1.0))
        ints = np.clip(np.round(clip.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
        data = ints
        if clipped:
            logger.warning(f"{clipped} samples outside [-1, 1] were clipped while writing {path}")
    else:
        data = clip.samples.astype(np.float32)

    try:
        sf.write(str(path), data, clip.sample_rate, subtype=ENCODING_SUBTYPES[encoding], format="WAV")
    except (RuntimeError, OSError, sf.SoundFileError) as e:
        raise AudioIoError(f"failed writing {path}: {e}") from e

    logger.debug(f"Wrote {path}: {len(clip)} samples @ {clip.sample_rate} Hz ({encoding})")
    return clipped
