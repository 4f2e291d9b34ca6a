from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio_io import AudioClip
from .dsp import resample
from .errors import InvalidChunking, InvalidConfig, RateMismatch, ShapeMismatch, WeightMismatch
from .logging_utils import get_logger
from .weight_store import WeightStore, load_weights, save_weights

# Initialize logger
logger = get_logger(__name__)

# Activations are [channels x frames] internally; frame and mask matrices handed out are [frames x filters]
PRESET_RATES = (8000, 16000, 48000)
NORM_KINDS = ("global", "cumulative", "channel")
MASK_ACTIVATIONS = ("sigmoid", "relu")
NORM_EPS = 1e-8
PRELU_INIT = 0.25

DEFAULT_SEGMENT_S = 3.0
DEFAULT_OVERLAP_S = 0.25


@dataclass(frozen=True)
class SeparatorConfig:
    """Architecture hyperparameters; defaults are the usual Conv-TasNet widths"""

    sample_rate: int = 8000
    kernel_len: int = 16  # L
    n_filters: int = 512  # N_enc
    bottleneck: int = 128  # B
    conv_channels: int = 512  # H
    kernel_size: int = 3  # P
    blocks_per_repeat: int = 8  # X
    repeats: int = 3  # R
    norm_kind: str = "global"
    mask_activation: str = "sigmoid"
    segment_s: float = DEFAULT_SEGMENT_S
    num_sources: int = 1

    def __post_init__(self):
        self.validate()

    @property
    def stride(self) -> int:
        return self.kernel_len // 2

    @property
    def num_blocks(self) -> int:
        return self.blocks_per_repeat * self.repeats

    def validate(self) -> None:
        if self.num_sources != 1:
            raise InvalidConfig(f"num_sources must be 1, got {self.num_sources}")
        if self.sample_rate not in PRESET_RATES:
            raise InvalidConfig(f"sample_rate must be one of {PRESET_RATES}, got {self.sample_rate}")
        if self.kernel_len < 2 or self.kernel_len % 2:
            raise InvalidConfig(f"kernel_len must be even and >= 2, got {self.kernel_len}")
        for name in ("n_filters", "bottleneck", "conv_channels", "kernel_size", "blocks_per_repeat", "repeats"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.norm_kind not in NORM_KINDS:
            raise InvalidConfig(f"norm_kind must be one of {NORM_KINDS}, got {self.norm_kind!r}")
        if self.mask_activation not in MASK_ACTIVATIONS:
            raise InvalidConfig(f"mask_activation must be one of {MASK_ACTIVATIONS}, got {self.mask_activation!r}")
        if self.segment_s <= 0:
            raise InvalidConfig(f"segment_s must be positive, got {self.segment_s}")

    @classmethod
    def preset(cls, sample_rate: int, **overrides) -> "SeparatorConfig":
        """Standard widths with L set to 2 ms of samples at every rate."""
        if sample_rate not in PRESET_RATES:
            raise InvalidConfig(f"no preset for {sample_rate} Hz; presets are {PRESET_RATES}")
        params = {"sample_rate": sample_rate, "kernel_len": sample_rate // 500}
        params.update(overrides)
        return cls(**params)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SeparatorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise InvalidConfig(str(e)) from e

    def receptive_field_frames(self) -> int:
        """Frames on either side of an output frame that can influence it."""
        half = (self.kernel_size - 1) // 2 + (self.kernel_size - 1) % 2
        per_repeat = sum(half * 2 ** x for x in range(self.blocks_per_repeat))
        return per_repeat * self.repeats


def block_prefix(index: int) -> str:
    return f"separator.blocks.{index}."


def tensor_shapes(config: SeparatorConfig) -> Dict[str, Tuple[int, ...]]:
    """Every tensor the model needs, in canonical order."""
    N, L, B, H, P = config.n_filters, config.kernel_len, config.bottleneck, config.conv_channels, config.kernel_size
    shapes: Dict[str, Tuple[int, ...]] = {
        "encoder.weight": (N, L),
        "separator.input_norm.gamma": (N,),
        "separator.input_norm.beta": (N,),
        "separator.bottleneck.weight": (B, N),
        "separator.bottleneck.bias": (B,),
    }
    for i in range(config.num_blocks):
        p = block_prefix(i)
        shapes.update({
            p + "conv1x1.weight": (H, B),
            p + "conv1x1.bias": (H,),
            p + "prelu1.alpha": (1,),
            p + "norm1.gamma": (H,),
            p + "norm1.beta": (H,),
            p + "dconv.weight": (H, P),
            p + "dconv.bias": (H,),
            p + "prelu2.alpha": (1,),
            p + "norm2.gamma": (H,),
            p + "norm2.beta": (H,),
            p + "res_conv.weight": (B, H),
            p + "res_conv.bias": (B,),
            p + "skip_conv.weight": (B, H),
            p + "skip_conv.bias": (B,),
        })
    shapes.update({
        "separator.mask_prelu.alpha": (1,),
        "separator.mask_conv.weight": (N * config.num_sources, B),
        "separator.mask_conv.bias": (N * config.num_sources,),
        "decoder.weight": (N, L),
    })
    return shapes


def validate_weights(config: SeparatorConfig, store: WeightStore) -> None:
    expected = tensor_shapes(config)
    missing = [name for name in expected if name not in store]
    if missing:
        raise WeightMismatch(f"{len(missing)} tensors missing, first: {missing[0]}")
    extra = [name for name in store.names() if name not in expected]
    if extra:
        raise WeightMismatch(f"{len(extra)} unexpected tensors, first: {extra[0]}")
    for name, shape in expected.items():
        if tuple(store[name].shape) != shape:
            raise WeightMismatch(f"{name}: shape {tuple(store[name].shape)}, expected {shape}")
    if not store.all_finite():
        raise WeightMismatch("weights contain NaN or Inf")


def _prelu(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, x, alpha[0] * x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class EnhancementResult:
    """Output of enhance_any_rate plus the resampling decision taken"""

    clip: AudioClip
    input_rate: int
    model_rate: int
    resampled: bool


class SeparatorModel:
    """Immutable config + validated weights; forward passes keep no state"""

    def __init__(self, config: SeparatorConfig, weights: WeightStore, parallel_workers: int = 0):
        validate_weights(config, weights)
        self.config = config
        self.weights = WeightStore(
            {name: np.array(t, dtype=np.float32) for name, t in weights.tensors.items()},
            config.to_dict(),
        )
        for tensor in self.weights.tensors.values():
            tensor.setflags(write=False)
        self.parallel_workers = parallel_workers

    def _w(self, name: str) -> np.ndarray:
        return self.weights.tensors[name]

    # --- normalisation -------------------------------------------------

    def _norm(self, x: np.ndarray, prefix: str) -> np.ndarray:
        gamma = self._w(prefix + "gamma")[:, None]
        beta = self._w(prefix + "beta")[:, None]
        kind = self.config.norm_kind
        if kind == "global":
            mean = x.mean()
            var = ((x - mean) ** 2).mean()
            normed = (x - mean) / np.sqrt(var + NORM_EPS)
        elif kind == "channel":
            mean = x.mean(axis=0, keepdims=True)
            var = ((x - mean) ** 2).mean(axis=0, keepdims=True)
            normed = (x - mean) / np.sqrt(var + NORM_EPS)
        else:
            # cumulative: statistics over channels and all frames up to t
            channels = x.shape[0]
            count = channels * np.arange(1, x.shape[1] + 1, dtype=np.float64)
            cum_sum = np.cumsum(x.sum(axis=0, dtype=np.float64))
            cum_pow = np.cumsum((x.astype(np.float64) ** 2).sum(axis=0))
            mean = cum_sum / count
            var = np.maximum(cum_pow / count - mean ** 2, 0.0)
            normed = (x - mean[None, :].astype(x.dtype)) / np.sqrt(var[None, :] + NORM_EPS).astype(x.dtype)
        return (gamma * normed + beta).astype(np.float32)

    # --- depthwise dilated conv -------------------------------------------

    def _depthwise(self, x: np.ndarray, weight: np.ndarray, bias: np.ndarray, dilation: int) -> np.ndarray:
        P = weight.shape[1]
        total_pad = dilation * (P - 1)
        left = total_pad // 2
        padded = np.pad(x, ((0, 0), (left, total_pad - left)))
        frames = x.shape[1]

        def run(channels: slice) -> np.ndarray:
            out = np.repeat(bias[channels, None], frames, axis=1).astype(np.float32)
            for p in range(P):
                start = p * dilation
                out += weight[channels, p:p + 1] * padded[channels, start:start + frames]
            return out

        if self.parallel_workers and self.parallel_workers > 1 and x.shape[0] >= self.parallel_workers:
            bounds = np.linspace(0, x.shape[0], self.parallel_workers + 1).astype(int)
            parts = [slice(bounds[i], bounds[i + 1]) for i in range(self.parallel_workers)]
            with ThreadPoolExecutor(max_workers=self.parallel_workers) as pool:
                return np.concatenate(list(pool.map(run, parts)), axis=0)
        return run(slice(None))

    # --- public stages -------------------------------------------------

    def padded_length(self, num_samples: int) -> int:
        L, stride = self.config.kernel_len, self.config.stride
        length = max(num_samples, L)
        extra = (length - L) % stride
        return length + (stride - extra if extra else 0)

    def encode(self, clip: AudioClip) -> np.ndarray:
        """Strided conv + ReLU; returns [K x N_enc] frames."""
        if clip.sample_rate != self.config.sample_rate:
            raise RateMismatch(f"encode: clip is {clip.sample_rate} Hz, model is {self.config.sample_rate} Hz")
        L, stride = self.config.kernel_len, self.config.stride
        x = clip.samples.astype(np.float32)
        x = np.pad(x, (0, self.padded_length(len(x)) - len(x)))
        windows = sliding_window_view(x, L)[::stride]
        return np.maximum(windows @ self._w("encoder.weight").T, 0.0)

    def estimate_mask(self, frames: np.ndarray) -> np.ndarray:
        """TCN mask estimator; returns a mask with the shape of frames."""
        if frames.ndim != 2 or frames.shape[1] != self.config.n_filters:
            raise ShapeMismatch(f"estimate_mask: frames shape {frames.shape}, expected [K x {self.config.n_filters}]")
        x = frames.T.astype(np.float32)

        out = self._norm(x, "separator.input_norm.")
        out = self._w("separator.bottleneck.weight") @ out + self._w("separator.bottleneck.bias")[:, None]
        skip_sum = np.zeros_like(out)

        for i in range(self.config.num_blocks):
            p = block_prefix(i)
            dilation = 2 ** (i % self.config.blocks_per_repeat)
            y = self._w(p + "conv1x1.weight") @ out + self._w(p + "conv1x1.bias")[:, None]
            y = self._norm(_prelu(y, self._w(p + "prelu1.alpha")), p + "norm1.")
            y = self._depthwise(y, self._w(p + "dconv.weight"), self._w(p + "dconv.bias"), dilation)
            y = self._norm(_prelu(y, self._w(p + "prelu2.alpha")), p + "norm2.")
            out = out + self._w(p + "res_conv.weight") @ y + self._w(p + "res_conv.bias")[:, None]
            skip_sum = skip_sum + self._w(p + "skip_conv.weight") @ y + self._w(p + "skip_conv.bias")[:, None]

        logits = _prelu(skip_sum, self._w("separator.mask_prelu.alpha"))
        logits = self._w("separator.mask_conv.weight") @ logits + self._w("separator.mask_conv.bias")[:, None]
        if self.config.mask_activation == "sigmoid":
            mask = _sigmoid(logits)
        else:
            mask = np.maximum(logits, 0.0)
        return mask.T

    def decode(self, masked_frames: np.ndarray, original_len: int) -> AudioClip:
        """Transposed conv with overlap-add, truncated to original_len."""
        if masked_frames.ndim != 2 or masked_frames.shape[1] != self.config.n_filters:
            raise ShapeMismatch(
                f"decode: frames shape {masked_frames.shape}, expected [K x {self.config.n_filters}]"
            )
        stride = self.config.stride
        basis = masked_frames.astype(np.float32) @ self._w("decoder.weight")  # [K x L]
        K = basis.shape[0]
        out = np.zeros((K + 1) * stride, dtype=np.float64)
        # L = 2 * stride: first halves start at k*stride, second halves one stride later
        out[:K * stride] += basis[:, :stride].reshape(-1)
        out[stride:] += basis[:, stride:].reshape(-1)
        if original_len > out.shape[0]:
            out = np.pad(out, (0, original_len - out.shape[0]))
        return AudioClip(out[:original_len], self.config.sample_rate)

    def enhance(self, clip: AudioClip) -> AudioClip:
        frames = self.encode(clip)
        mask = self.estimate_mask(frames)
        return self.decode(frames * mask, len(clip))

    def enhance_chunked(
        self,
        clip: AudioClip,
        segment_s: Optional[float] = None,
        overlap_s: float = DEFAULT_OVERLAP_S,
    ) -> AudioClip:
        """
        Enhance in segments, cross-fading overlaps with a linear ramp.

        Clips no longer than one segment go through enhance() unchanged.
        """
        if segment_s is None:
            segment_s = self.config.segment_s
        if not (overlap_s >= 0 and segment_s > 2 * overlap_s):
            raise InvalidChunking(f"need segment_s > 2*overlap_s >= 0, got segment {segment_s}, overlap {overlap_s}")
        if clip.sample_rate != self.config.sample_rate:
            raise RateMismatch(f"enhance: clip is {clip.sample_rate} Hz, model is {self.config.sample_rate} Hz")

        rate = clip.sample_rate
        seg = int(round(segment_s * rate))
        ov = int(round(overlap_s * rate))
        total = len(clip)
        if total <= seg:
            return self.enhance(clip)

        starts = chunk_starts(total, seg, ov)
        out = np.zeros(total)
        ramp_up = (np.arange(ov) + 0.5) / ov if ov else np.zeros(0)
        for n, start in enumerate(starts):
            stop = min(start + seg, total)
            piece = self.enhance(clip.with_samples(clip.samples[start:stop])).samples.copy()
            if ov and n > 0:
                piece[:ov] *= ramp_up
            if ov and n < len(starts) - 1:
                piece[-ov:] *= 1.0 - ramp_up
            out[start:stop] += piece
        logger.debug(f"Chunked enhancement: {len(starts)} segments of {seg} samples, overlap {ov}")
        return clip.with_samples(out)

    def enhance_any_rate(
        self,
        clip: AudioClip,
        segment_s: Optional[float] = None,
        overlap_s: float = DEFAULT_OVERLAP_S,
    ) -> EnhancementResult:
        """Resample to the model rate if needed, enhance in chunks, resample back."""
        model_rate = self.config.sample_rate
        if clip.sample_rate == model_rate:
            logger.info(f"Input already at model rate {model_rate} Hz, no resampling")
            out = self.enhance_chunked(clip, segment_s, overlap_s)
            return EnhancementResult(out, clip.sample_rate, model_rate, False)

        logger.info(f"Resampling {clip.sample_rate} Hz -> {model_rate} Hz for the model, back to {clip.sample_rate} Hz after")
        at_model_rate = resample(clip, model_rate)
        enhanced = self.enhance_chunked(at_model_rate, segment_s, overlap_s)
        # rounding at both rate changes can leave the round trip a few samples off
        restored = resample(enhanced, clip.sample_rate).fit_length(len(clip))
        return EnhancementResult(restored, clip.sample_rate, model_rate, True)


def chunk_starts(total: int, seg: int, overlap: int) -> List[int]:
    """Segment start offsets; consecutive segments share `overlap` samples."""
    step = seg - overlap
    starts = [0]
    while starts[-1] + seg < total:
        starts.append(starts[-1] + step)
    return starts


def init_random(config: SeparatorConfig, seed: int, parallel_workers: int = 0) -> SeparatorModel:
    """
    Deterministic random weights.

    2-D weights and their biases are U[-k, k] with k = 1/sqrt(fan_in); norm
    gains are 1, norm biases 0 and PReLU slopes 0.25.
    """
    rng = np.random.default_rng(seed)
    shapes = tensor_shapes(config)
    tensors: Dict[str, np.ndarray] = {}
    for name, shape in shapes.items():
        if name.endswith(".gamma"):
            tensors[name] = np.ones(shape, dtype=np.float32)
        elif name.endswith(".beta"):
            tensors[name] = np.zeros(shape, dtype=np.float32)
        elif name.endswith(".alpha"):
            tensors[name] = np.full(shape, PRELU_INIT, dtype=np.float32)
        else:
            weight_name = name[: -len("bias")] + "weight" if name.endswith(".bias") else name
            fan_in = shapes[weight_name][1]
            bound = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return SeparatorModel(config, WeightStore(tensors, config.to_dict()), parallel_workers)


def zero_weights(config: SeparatorConfig) -> WeightStore:
    return WeightStore({name: np.zeros(shape, dtype=np.float32) for name, shape in tensor_shapes(config).items()},
                       config.to_dict())


def save_model(model: SeparatorModel, path: Union[str, Path]) -> None:
    store = WeightStore(dict(model.weights.tensors), model.config.to_dict())
    save_weights(store, path)


def load_model(path: Union[str, Path], parallel_workers: int = 0) -> SeparatorModel:
    """Load a CTN1 file and build the model described by its embedded config."""
    store = load_weights(path)
    if store.config is None:
        raise InvalidConfig(f"{path}: container has no config object")
    config = SeparatorConfig.from_dict(store.config)
    logger.info(
        f"Loaded {config.sample_rate} Hz model from {path} "
        f"(N={config.n_filters}, L={config.kernel_len}, B={config.bottleneck}, H={config.conv_channels}, "
        f"X={config.blocks_per_repeat}, R={config.repeats})"
    )
    return SeparatorModel(config, store, parallel_workers)
