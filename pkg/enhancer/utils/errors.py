"""
Error hierarchy for the enhancement toolkit.

Every failure the library reports is an EnhancerError; the class name is the
error kind and is what the CLI prints in front of the message.
"""


class EnhancerError(Exception):
    """Base class for all toolkit errors"""


class IoError(EnhancerError):
    """A file could not be read or written."""


# audio-io
class AudioError(EnhancerError):
    pass


class MalformedHeader(AudioError):
    pass


class UnsupportedEncoding(AudioError):
    pass


class EmptyAudio(AudioError):
    pass


class AudioIoError(AudioError, IoError):
    pass


class InvalidAudio(AudioError):
    pass


# dsp
class DspError(EnhancerError):
    pass


class InvalidLength(DspError):
    pass


class TooShort(DspError):
    pass


class NotPowerOfTwo(DspError):
    pass


class NotUpsampling(DspError):
    pass


class NotDownsampling(DspError):
    pass


class BandAboveNyquist(DspError):
    pass


# metrics
class MetricError(EnhancerError):
    pass


class LengthMismatch(MetricError):
    pass


class ZeroReference(MetricError):
    pass


class AllFramesSilent(MetricError):
    pass


class NoFundamental(MetricError):
    pass


class RateMismatch(EnhancerError):
    """Two clips (or a clip and a model) disagree on sampling rate."""


# separator
class SeparatorError(EnhancerError):
    pass


class BadMagic(SeparatorError):
    pass


class ChecksumMismatch(SeparatorError):
    pass


class TruncatedFile(SeparatorError):
    pass


class UnsupportedDtype(SeparatorError):
    pass


class InvalidConfig(SeparatorError):
    pass


class WeightMismatch(SeparatorError):
    pass


class ShapeMismatch(SeparatorError):
    pass


class InvalidChunking(SeparatorError):
    pass


# mixer
class MixerError(EnhancerError):
    pass


class SilentInput(MixerError):
    pass


class EmptyCorpus(MixerError):
    pass


class InvalidMixtureSpec(MixerError):
    pass


# bench
class BenchError(EnhancerError):
    pass


class InvalidArgs(BenchError):
    pass
