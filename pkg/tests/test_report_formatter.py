import math

import numpy as np
import pytest

from enhancer.utils.dsp import Spectrum
from enhancer.utils.quality_metrics import MetricReport
from src.cli.report_formatter import ReportFormatter, magnitude_db
from src.core.bench_worker import BenchReport, summarize


def bench_report(rate, seconds, median_ms, realtime_ok=True):
    return BenchReport(
        sample_rate=rate,
        clip_seconds=seconds,
        repeats=1,
        samples_ms=[median_ms],
        measured_ms=summarize([median_ms]),
        theoretical_ms_per_second=rate / 256 * 0.4,
        realtime_ok=realtime_ok,
    )


def test_magnitude_db_floor():
    assert magnitude_db(1.0) == 0.0
    assert magnitude_db(0.1) == pytest.approx(-20.0)
    assert magnitude_db(0.0) == pytest.approx(-240.0)


def test_format_metric_report():
    report = MetricReport(si_sdr_db=math.inf, stoi=0.98765, thd_percent=1.234, warpq_distance=0.5)
    formatted = ReportFormatter.format_metric_report(report)
    assert formatted["si_sdr_db"] == "SI-SDR: inf dB"
    assert formatted["stoi"] == "STOI: 0.988"
    assert formatted["thd_norm"] == "THD norm: N/A"
    assert formatted["warpq_norm"] == "WARP-Q norm: N/A"


def test_spectrum_rows():
    spectrum = Spectrum(np.array([1.0, 0.1, 0.0]), 25.0, "rect", 4)
    rows = ReportFormatter.spectrum_rows(spectrum)
    assert [float(r[0]) for r in rows] == [0.0, 25.0, 50.0]
    assert float(rows[1][1]) == pytest.approx(-20.0)


def test_bench_table_layout():
    reports = [
        bench_report(8000, 1.0, 20.0),
        bench_report(8000, 10.0, 150.0),
        bench_report(48000, 1.0, 90.0),
        bench_report(48000, 10.0, 2500.0, realtime_ok=False),
    ]
    lines = ReportFormatter.bench_table(reports).splitlines()
    assert "8 kHz" in lines[0] and "48 kHz" in lines[0]
    assert lines[0].index("8 kHz") < lines[0].index("48 kHz")
    assert lines[2].startswith("10s clip")
    assert lines[3].startswith("1s clip")
    assert lines[-2].startswith("model ms/s audio")
    assert "12.5 ms" in lines[-2] and "75.0 ms" in lines[-2]
    assert "15.0 ok" in lines[-1]
    assert "250.0 SLOW" in lines[-1]


def test_format_metric_report_with_normalized_fields():
    report = MetricReport(si_sdr_db=12.5, stoi=0.9, thd_percent=3.0, warpq_distance=0.7, thd_norm=-1.25, warpq_norm=0.8)
    formatted = ReportFormatter.format_metric_report(report)
    assert formatted["thd_norm"] == "THD norm: -1.25"
    assert formatted["warpq_norm"] == "WARP-Q norm: 0.800"


def test_comparison_table_signs_thd_norm():
    rows = [
        {"model_rate": 8000, "si_sdr_db": 9.5, "stoi": 0.91, "thd_percent": 4.0, "thd_norm": 1.5,
         "warpq_distance": 1.2, "warpq_norm": 0.6},
        {"model_rate": 48000, "si_sdr_db": math.inf, "stoi": 1.0, "thd_percent": 2.5, "thd_norm": -0.25,
         "warpq_distance": 0.0, "warpq_norm": None},
    ]
    lines = ReportFormatter.comparison_table(rows).splitlines()
    assert len(lines) == 4
    assert len(lines[2]) == len(lines[0])
    assert "+1.50" in lines[2]
    assert "-0.25" in lines[3]
    assert lines[3].rstrip().endswith("N/A")
    assert "inf" in lines[3]
