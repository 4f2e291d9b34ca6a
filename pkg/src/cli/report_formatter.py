"""
Report Formatter Module

This module handles formatting of metric, spectrum and benchmark reports for
the terminal and for CSV/JSON files.
"""

import json
import math
from typing import Dict, List, Sequence

from enhancer.utils.dsp import Spectrum
from enhancer.utils.quality_metrics import HarmonicProfile, MetricReport
from src.core.bench_worker import BenchReport

MAG_FLOOR = 1e-12


def magnitude_db(magnitude: float) -> float:
    return 20.0 * math.log10(max(float(magnitude), MAG_FLOOR))


def _csv_float(value: float) -> str:
    return repr(float(value))


class ReportFormatter:
    """Class responsible for turning reports into text tables and CSV rows"""

    @staticmethod
    def format_metric_report(report: MetricReport):
        """
        Format a metric report for display.

        Args:
            report: MetricReport to format

        Returns:
            dict: Dictionary of formatted metric strings
        """
        formatted = {}

        sdr = report.si_sdr_db
        formatted["si_sdr_db"] = "SI-SDR: inf dB" if math.isinf(sdr) else f"SI-SDR: {sdr:.2f} dB"
        formatted["stoi"] = f"STOI: {report.stoi:.3f}"
        formatted["thd_percent"] = f"THD: {report.thd_percent:.2f}%"
        formatted["thd_norm"] = f"THD norm: {report.thd_norm:+.2f}" if report.thd_norm is not None else "THD norm: N/A"
        formatted["warpq_distance"] = f"WARP-Q: {report.warpq_distance:.3f}"
        formatted["warpq_norm"] = f"WARP-Q norm: {report.warpq_norm:.3f}" if report.warpq_norm is not None else "WARP-Q norm: N/A"

        return formatted

    @staticmethod
    def metric_report_json(report: MetricReport) -> str:
        # json writes +inf as Infinity
        return json.dumps(report.to_dict(), indent=2)

    @staticmethod
    def spectrum_rows(spectrum: Spectrum) -> List[List[str]]:
        """(frequency_hz, magnitude_db) per one-sided bin."""
        return [
            [_csv_float(freq), _csv_float(magnitude_db(mag))]
            for freq, mag in zip(spectrum.frequencies, spectrum.magnitudes)
        ]

    @staticmethod
    def harmonics_rows(profile: HarmonicProfile) -> List[List[str]]:
        """(harmonic_index, frequency_hz, magnitude_db re the fundamental)."""
        return [[str(index), _csv_float(freq), _csv_float(level)] for index, freq, level in profile.relative_db()]

    @staticmethod
    def comparison_table(rows: Sequence[Dict]) -> str:
        """One line per model rate; rows carry model_rate plus MetricReport fields."""
        header = f"{'Model':>10} {'SI-SDR dB':>10} {'STOI':>7} {'THD %':>8} {'THD norm':>9} {'WARP-Q':>8} {'WARP-Q n':>9}"
        lines = [header, "-" * len(header)]
        for row in rows:
            def cell(key, width, fmt):
                value = row.get(key)
                return f"{'N/A':>{width}}" if value is None else f"{format(value, fmt):>{width}}"
            lines.append(
                f"{str(row['model_rate']) + ' Hz':>10} "
                f"{cell('si_sdr_db', 10, '.2f')} {cell('stoi', 7, '.3f')} {cell('thd_percent', 8, '.2f')} "
                f"{cell('thd_norm', 9, '+.2f')} {cell('warpq_distance', 8, '.3f')} {cell('warpq_norm', 9, '.3f')}"
            )
        return "\n".join(lines)

    @staticmethod
    def bench_table(reports: Sequence[BenchReport]) -> str:
        """
        Rows are clip lengths, columns sampling rates; cells are median ms.

        Two trailing rows give the per-frame model estimate and the measured
        median per second of audio (with the real-time verdict) for each rate.
        """
        rates = sorted({r.sample_rate for r in reports})
        lengths = sorted({r.clip_seconds for r in reports}, reverse=True)
        by_key = {(r.clip_seconds, r.sample_rate): r for r in reports}

        label_width = 18
        col_width = 14
        lines = [f"{'':<{label_width}}" + "".join(f"{str(rate // 1000) + ' kHz':>{col_width}}" for rate in rates)]
        lines.append("-" * len(lines[0]))
        for seconds in lengths:
            cells = []
            for rate in rates:
                report = by_key.get((seconds, rate))
                cells.append(f"{report.measured_ms['median']:.1f} ms" if report else "-")
            lines.append(f"{f'{seconds:g}s clip':<{label_width}}" + "".join(f"{c:>{col_width}}" for c in cells))

        lines.append("-" * len(lines[0]))
        model_cells = []
        measured_cells = []
        for rate in rates:
            per_rate = [r for r in reports if r.sample_rate == rate]
            model_cells.append(f"{per_rate[0].theoretical_ms_per_second:.1f} ms")
            longest = max(per_rate, key=lambda r: r.clip_seconds)
            mark = "ok" if longest.realtime_ok else "SLOW"
            measured_cells.append(f"{longest.median_ms_per_second:.1f} {mark}")
        lines.append(f"{'model ms/s audio':<{label_width}}" + "".join(f"{c:>{col_width}}" for c in model_cells))
        lines.append(f"{'measured ms/s':<{label_width}}" + "".join(f"{c:>{col_width}}" for c in measured_cells))
        return "\n".join(lines)

    @staticmethod
    def bench_json(reports: Sequence[BenchReport]) -> str:
        return json.dumps({"reports": [r.to_dict() for r in reports]}, indent=2)
