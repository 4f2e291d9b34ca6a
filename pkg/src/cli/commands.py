"""
Command-line interface.

Exit codes: 0 success, 1 processing error (any EnhancerError or OS error),
2 usage error (bad flags, missing input files).
"""

import argparse
import csv
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from enhancer.utils.audio_io import AudioClip, read_wav, write_wav
from enhancer.utils.dsp import WINDOW_NAMES, magnitude_spectrum, resample
from enhancer.utils.errors import EnhancerError
from enhancer.utils.logging_utils import add_file_handler, get_logger, set_log_level
from enhancer.utils.mixer import MixtureManifest, MixtureSpec, generate_dataset
from enhancer.utils.quality_metrics import REPORT_FIELDS, MetricReport, QualityMetricsCollector
from enhancer.utils.separator import (
    NORM_KINDS,
    PRESET_RATES,
    SeparatorConfig,
    init_random,
    load_model,
    save_model,
)
from src.cli.report_formatter import ReportFormatter
from src.core.bench_worker import BenchWorker
from src.core.config_manager import ConfigManager

# Initialize logger
logger = get_logger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
ENCODINGS = ("float32", "pcm16")

EXIT_OK = 0
EXIT_PROCESSING = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Invalid command-line input, reported with the offending flag"""

    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


def _require_file(path: Optional[str], flag: str) -> Path:
    if path is None:
        raise UsageError(flag, "is required")
    if not os.path.isfile(path):
        raise UsageError(flag, f"file not found: {path}")
    return Path(path)


def _require_dir(path: str, flag: str) -> Path:
    if not os.path.isdir(path):
        raise UsageError(flag, f"directory not found: {path}")
    return Path(path)


def _float_list(text: str, flag: str, sep: str = ",") -> List[float]:
    try:
        return [float(part) for part in text.split(sep) if part.strip()]
    except ValueError:
        raise UsageError(flag, f"expected numbers separated by '{sep}', got {text!r}")


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _seed(args, section: Dict, default: int = 0) -> int:
    if args.seed is not None:
        return args.seed
    return int(section.get("seed", default))


def _width_overrides(args) -> Dict:
    overrides = {}
    for flag, key in (
        ("filters", "n_filters"),
        ("bottleneck", "bottleneck"),
        ("channels", "conv_channels"),
        ("blocks", "blocks_per_repeat"),
        ("repeats_tcn", "repeats"),
        ("norm", "norm_kind"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return overrides


# --- subcommands -------------------------------------------------------


def cmd_enhance(args, config: ConfigManager) -> int:
    model_path = _require_file(args.model, "--model")
    input_path = _require_file(args.input, "--input")
    section = config.get_section("separator")
    segment_s = args.segment_s if args.segment_s is not None else float(section["segment_s"])
    overlap_s = args.overlap_s if args.overlap_s is not None else float(section["overlap_s"])
    encoding = args.encoding or config.get_section("audio")["write_encoding"]

    model = load_model(model_path, int(section.get("parallel_workers", 0)))
    clip = read_wav(input_path)
    result = model.enhance_any_rate(clip, segment_s, overlap_s)
    if result.resampled:
        print(f"Resampled {result.input_rate} Hz -> {result.model_rate} Hz -> {result.input_rate} Hz")
    else:
        print(f"Input at model rate {result.model_rate} Hz, no resampling")

    clipped = write_wav(result.clip, args.output, encoding)
    print(f"Wrote {args.output} ({len(result.clip)} samples @ {result.clip.sample_rate} Hz, {clipped} clipped)")
    return EXIT_OK


def _collector(config: ConfigManager) -> QualityMetricsCollector:
    return QualityMetricsCollector(config.get_section("metrics"))


def cmd_evaluate(args, config: ConfigManager) -> int:
    reference = read_wav(_require_file(args.reference, "--reference"))
    degraded = read_wav(_require_file(args.degraded, "--degraded"))
    ref48k = read_wav(_require_file(args.ref48k, "--ref48k")) if args.ref48k else None

    if degraded.sample_rate != reference.sample_rate:
        logger.info(f"Resampling degraded {degraded.sample_rate} Hz -> {reference.sample_rate} Hz to match the reference")
        degraded = resample(degraded, reference.sample_rate)

    report = _collector(config).evaluate_pair(reference, degraded, ref48k)
    for line in ReportFormatter.format_metric_report(report).values():
        print(line)

    if args.out_json:
        Path(args.out_json).write_text(ReportFormatter.metric_report_json(report) + "\n", encoding="utf-8")
    if args.out_csv:
        _write_csv(Path(args.out_csv), MetricReport.csv_header(), [report.csv_row()])
    return EXIT_OK


def cmd_evaluate_batch(args, config: ConfigManager) -> int:
    manifest = MixtureManifest.read_csv(_require_file(args.manifest, "--manifest"))
    enhanced_dir = _require_dir(args.enhanced_dir, "--enhanced-dir") if args.enhanced_dir else None
    rows = manifest.rows_for(args.split)
    if not rows:
        raise UsageError("--split", f"no manifest rows in split {args.split!r}")

    pairs = []
    for row in rows:
        mixture_path = manifest.resolve(row.mixture_path)
        degraded_path = enhanced_dir / mixture_path.name if enhanced_dir else mixture_path
        reference = read_wav(manifest.resolve(row.clean_path))
        degraded = read_wav(degraded_path)
        if degraded.sample_rate != reference.sample_rate:
            degraded = resample(degraded, reference.sample_rate)
        pairs.append((reference, degraded.fit_length(len(reference))))

    workers = args.workers if args.workers is not None else int(config.get_section("metrics")["max_workers"])
    reports = _collector(config).evaluate_batch(pairs, workers)

    if args.out_csv:
        _write_csv(
            Path(args.out_csv),
            ["mixture_path"] + MetricReport.csv_header(),
            [[row.mixture_path] + report.csv_row() for row, report in zip(rows, reports)],
        )

    print(f"Evaluated {len(reports)} pairs (split: {args.split or 'all'})")
    for name in ("si_sdr_db", "stoi", "thd_percent", "warpq_distance"):
        values = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        finite = values[np.isfinite(values)]
        mean = f"{finite.mean():.3f}" if finite.size else "N/A"
        print(f"  mean {name}: {mean}")
    return EXIT_OK


def cmd_compare(args, config: ConfigManager) -> int:
    noisy = read_wav(_require_file(args.noisy, "--noisy"))
    ref48k = read_wav(_require_file(args.ref48k, "--ref48k"))
    model_paths = [_require_file(path, "--models") for path in args.models]
    section = config.get_section("separator")
    collector = _collector(config)
    reference_rate = int(collector.settings["reference_rate"])
    if ref48k.sample_rate != reference_rate:
        logger.info(f"Resampling --ref48k {ref48k.sample_rate} Hz -> {reference_rate} Hz")
        ref48k = resample(ref48k, reference_rate)

    rows = []
    for path in model_paths:
        model = load_model(path, int(section.get("parallel_workers", 0)))
        result = model.enhance_any_rate(noisy, float(section["segment_s"]), float(section["overlap_s"]))
        enhanced = resample(result.clip, ref48k.sample_rate).fit_length(len(ref48k))
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            write_wav(enhanced, Path(args.out_dir) / f"enhanced_{model.config.sample_rate}.wav")
        report = collector.evaluate_pair(ref48k, enhanced, ref48k)
        rows.append({"model_rate": model.config.sample_rate, **report.to_dict()})

    print(ReportFormatter.comparison_table(rows))
    if args.out_csv:
        _write_csv(
            Path(args.out_csv),
            ["model_rate"] + list(REPORT_FIELDS),
            [[str(row["model_rate"])] + MetricReport(**{k: row[k] for k in REPORT_FIELDS}).csv_row() for row in rows],
        )
    return EXIT_OK


def _parse_snr(text: str):
    parts = _float_list(text, "--snr-db", sep=":")
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2 or parts[0] > parts[1]:
        raise UsageError("--snr-db", f"expected LOW:HIGH with LOW <= HIGH, got {text!r}")
    return parts[0], parts[1]


def cmd_mix(args, config: ConfigManager) -> int:
    section = config.get_section("mixer")
    speech_dir = _require_dir(args.speech_dir, "--speech-dir")
    noise_dir = _require_dir(args.noise_dir, "--noise-dir")
    snr_range = _parse_snr(args.snr_db) if args.snr_db else (float(section["snr_low_db"]), float(section["snr_high_db"]))
    split = _float_list(args.split, "--split") if args.split else [float(v) for v in section["split"]]
    if len(split) != 3 or abs(sum(split) - 1.0) > 1e-9:
        raise UsageError("--split", f"expected three fractions summing to 1, got {split}")

    spec = MixtureSpec(
        speech_dir=speech_dir,
        noise_dir=noise_dir,
        sample_rate=args.rate if args.rate is not None else int(section["sample_rate"]),
        snr_range_db=snr_range,
        seed=_seed(args, section),
        split=tuple(split),
        target_hours=args.target_hours,
    )
    workers = args.workers if args.workers is not None else int(section["max_workers"])
    manifest = generate_dataset(spec, args.out, workers)

    counts = manifest.split_counts()
    print(f"Wrote {len(manifest)} mixtures to {args.out}")
    print(f"  train {counts['train']}, eval {counts['eval']}, test {counts['test']}")
    print(f"  mean SNR {manifest.mean_snr_db():.2f} dB")
    return EXIT_OK


def cmd_bench(args, config: ConfigManager) -> int:
    section = config.get_section("bench")
    if not args.model and not args.preset:
        raise UsageError("--model", "give at least one --model or --preset")
    model_paths = [_require_file(path, "--model") for path in (args.model or [])]
    clip_seconds = _float_list(args.clip_seconds, "--clip-seconds") if args.clip_seconds else list(section["clip_seconds"])
    if not clip_seconds or any(s <= 0 for s in clip_seconds):
        raise UsageError("--clip-seconds", "clip lengths must be positive")
    repeats = args.repeats if args.repeats is not None else int(section["repeats"])
    if repeats < 1:
        raise UsageError("--repeats", "must be >= 1")
    seed = _seed(args, section)

    # parallel_workers stays 0: the timed region is single-threaded
    models = [load_model(path) for path in model_paths]
    overrides = _width_overrides(args)
    for rate in args.preset or []:
        models.append(init_random(SeparatorConfig.preset(rate, **overrides), seed))

    settings = dict(section)
    if args.no_pin:
        settings["pin_cpu"] = False
    worker = BenchWorker(models, clip_seconds, repeats, seed, settings)
    reports = worker.run_all()

    print(ReportFormatter.bench_table(reports))
    if args.out_json:
        Path(args.out_json).write_text(ReportFormatter.bench_json(reports) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_spectrum(args, config: ConfigManager) -> int:
    section = config.get_section("spectrum")
    clip = read_wav(_require_file(args.input, "--input"))
    fft_size = args.fft_size if args.fft_size is not None else int(section["fft_size"])
    window = args.window or section["window"]

    spectrum = magnitude_spectrum(clip, fft_size, window)
    rows = ReportFormatter.spectrum_rows(spectrum)
    _write_csv(Path(args.out_csv), ["frequency_hz", "magnitude_db"], rows)
    print(f"Wrote {len(rows)} spectrum rows ({spectrum.bin_hz:.3f} Hz per bin) to {args.out_csv}")
    return EXIT_OK


def cmd_harmonics(args, config: ConfigManager) -> int:
    section = config.get_section("metrics")
    clip = read_wav(_require_file(args.input, "--input"))
    collector = QualityMetricsCollector({
        **section,
        "max_harmonics": args.max_harmonics if args.max_harmonics is not None else section["max_harmonics"],
    })

    profile = collector.harmonic_profile(clip)
    rows = ReportFormatter.harmonics_rows(profile)
    _write_csv(Path(args.out_csv), ["harmonic_index", "frequency_hz", "magnitude_db"], rows)
    print(f"Fundamental {profile.f0_hz:.2f} Hz, {len(rows)} harmonics, THD {profile.thd_percent():.2f}%")
    return EXIT_OK


def cmd_resample(args, config: ConfigManager) -> int:
    clip = read_wav(_require_file(args.input, "--input"))
    if args.rate <= 0:
        raise UsageError("--rate", "must be positive")
    out = resample(clip, args.rate)
    if out is clip:
        print(f"Input already at {args.rate} Hz, no resampling")
    else:
        print(f"Resampled {clip.sample_rate} Hz -> {args.rate} Hz ({len(clip)} -> {len(out)} samples)")
    write_wav(out, args.output, args.encoding or config.get_section("audio")["write_encoding"])
    return EXIT_OK


def cmd_init_model(args, config: ConfigManager) -> int:
    seed = args.seed if args.seed is not None else 0
    model_config = SeparatorConfig.preset(args.rate, **_width_overrides(args))
    model = init_random(model_config, seed)
    save_model(model, args.out)
    print(f"Wrote random {args.rate} Hz model (seed {seed}, L={model_config.kernel_len}) to {args.out}")
    return EXIT_OK


# --- parser ------------------------------------------------------------


def _add_width_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model widths (defaults: preset values)")
    group.add_argument("--filters", type=int, help="encoder filters N")
    group.add_argument("--bottleneck", type=int, help="bottleneck channels B")
    group.add_argument("--channels", type=int, help="conv block channels H")
    group.add_argument("--blocks", type=int, help="blocks per repeat X")
    group.add_argument("--repeats-tcn", dest="repeats_tcn", type=int, help="repeats R")
    group.add_argument("--norm", choices=NORM_KINDS, help="normalization kind")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speech_enhance",
        description="Speech enhancement toolkit: enhance, evaluate, mix and benchmark.",
    )
    parser.add_argument("--log-level", choices=LOG_LEVELS, help="log level (default: config logging.level)")
    parser.add_argument("--seed", type=int, help="seed for every random choice")
    parser.add_argument("--config", help="path to config.json")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("enhance", help="enhance a noisy WAV with a model")
    p.add_argument("--model", required=True, help="CTN1 model file")
    p.add_argument("--input", required=True, help="noisy WAV")
    p.add_argument("--output", required=True, help="enhanced WAV (written at the input rate)")
    p.add_argument("--segment-s", type=float, help="chunk length in seconds")
    p.add_argument("--overlap-s", type=float, help="chunk overlap in seconds")
    p.add_argument("--encoding", choices=ENCODINGS)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="metric report for a reference/degraded pair")
    p.add_argument("--reference", required=True)
    p.add_argument("--degraded", required=True)
    p.add_argument("--ref48k", help="48 kHz reference for the normalized metrics")
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("evaluate-batch", help="evaluate a mixer manifest split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "eval", "test"), help="default: every row")
    p.add_argument("--enhanced-dir", help="directory of enhanced files named like the mixtures")
    p.add_argument("--workers", type=int)
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_evaluate_batch)

    p = sub.add_parser("compare", help="run one clip through several models and score each at 48 kHz")
    p.add_argument("--noisy", required=True)
    p.add_argument("--ref48k", required=True, help="clean 48 kHz reference aligned with --noisy")
    p.add_argument("--models", required=True, nargs="+")
    p.add_argument("--out-dir", help="also write each enhanced clip here")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("mix", help="synthesize a noisy-speech dataset and manifest")
    p.add_argument("--speech-dir", required=True)
    p.add_argument("--noise-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=int)
    p.add_argument("--snr-db", help="LOW:HIGH in dB")
    p.add_argument("--split", help="train,eval,test fractions")
    p.add_argument("--target-hours", type=float)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("bench", help="time forward passes")
    p.add_argument("--model", action="append", help="CTN1 model file (repeatable)")
    p.add_argument("--preset", action="append", type=int, choices=PRESET_RATES, help="random-weight preset rate (repeatable)")
    p.add_argument("--clip-seconds", help="comma-separated clip lengths")
    p.add_argument("--repeats", type=int)
    p.add_argument("--no-pin", action="store_true", help="do not pin to a single core")
    p.add_argument("--out-json")
    _add_width_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("spectrum", help="averaged magnitude spectrum CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--fft-size", type=int)
    p.add_argument("--window", choices=WINDOW_NAMES)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("harmonics", help="harmonic levels relative to the fundamental")
    p.add_argument("--input", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--max-harmonics", type=int)
    p.set_defaults(func=cmd_harmonics)

    p = sub.add_parser("resample", help="change the sampling rate of a WAV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--rate", required=True, type=int)
    p.add_argument("--encoding", choices=ENCODINGS)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("init-model", help="write a random-weight model file")
    p.add_argument("--rate", required=True, type=int, choices=PRESET_RATES)
    p.add_argument("--out", required=True)
    _add_width_args(p)
    p.set_defaults(func=cmd_init_model)

    return parser


def _configure_logging(args, config: ConfigManager) -> None:
    section = config.get_section("logging")
    set_log_level(args.log_level or section.get("level", "INFO"))
    if section.get("log_to_file"):
        add_file_handler(section.get("log_file_path", "enhancer.log"))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    config = ConfigManager(args.config)
    try:
        _configure_logging(args, config)
    except ValueError as e:
        print(f"usage error: logging.level: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.func(args, config)
    except UsageError as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EnhancerError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_PROCESSING
    except OSError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_PROCESSING
