import csv
import json
import math

import numpy as np
import pytest
import scipy.signal as sps
from hypothesis import given, settings, strategies as st

from oracles import tone_power, white_variance
from nmorsim.instrument import (
    FLATTOP_COEFFS,
    InstrumentError,
    NoiseSpec,
    Spectrum,
    Trace,
    acquisition_time,
    add_noise,
    average_scans,
    flattop,
    peak_power,
    psd,
    rms_average_spectra,
    segment_length,
    write_spectrum,
    write_trace,
)
from nmorsim.waveforms import MagneticWaveformSpec, synthesize


def zeros(n, fs=2000.0):
    return Trace(fs, np.zeros(n))


def test_white_noise_variance():
    fs = 50_000.0
    out = add_noise(zeros(1_000_000, fs), NoiseSpec(white_psd=1e-11, seed=11), "analyzer")
    assert out.samples.var() == pytest.approx(white_variance(1e-11, fs), rel=0.05)
    assert white_variance(1e-11, fs) == pytest.approx(2.5e-7)


def test_zero_noise_is_identity():
    tr = Trace(1000.0, np.sin(np.arange(100) / 7.0))
    for path in ("scope", "analyzer"):
        np.testing.assert_array_equal(add_noise(tr, NoiseSpec(seed=1), path).samples, tr.samples)


def test_noise_is_deterministic_per_seed():
    spec = NoiseSpec(white_psd=1e-9, scope_noise_rms=1e-3, seed=42)
    a = add_noise(zeros(500), spec, "scope", 3)
    b = add_noise(zeros(500), spec, "scope", 3)
    c = add_noise(zeros(500), spec, "scope", 4)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_scope_noise_only_on_scope_path():
    spec = NoiseSpec(scope_noise_rms=1e-2, seed=5)
    assert np.all(add_noise(zeros(100), spec, "analyzer").samples == 0)
    assert add_noise(zeros(20_000), spec, "scope").samples.std() == pytest.approx(1e-2, rel=0.03)
    with pytest.raises(InstrumentError):
        add_noise(zeros(10), spec, "camera")


def test_acquisition_time_of_64_scans():
    assert math.isclose(acquisition_time(64, 0.225), 14.4, rel_tol=1e-12)
    traces = [Trace(1000.0, np.ones(225)) for _ in range(64)]
    avg = average_scans(traces, 64)
    assert math.isclose(avg.metadata["acquisition_time_s"], 14.4, rel_tol=1e-12)
    assert avg.metadata["averaging_count"] == 64


def test_identical_scans_average_to_themselves():
    tr = Trace(1000.0, np.cos(np.arange(64) / 3.0))
    np.testing.assert_allclose(average_scans([tr] * 16).samples, tr.samples, rtol=0, atol=1e-15)


def test_average_scans_errors():
    with pytest.raises(InstrumentError):
        average_scans([zeros(10), zeros(11)])
    with pytest.raises(InstrumentError):
        average_scans([zeros(10)] * 3, n=4)
    with pytest.raises(InstrumentError):
        average_scans([])


def test_averaging_shrinks_noise_as_root_n():
    spec = NoiseSpec(scope_noise_rms=1.0, seed=9)
    base = zeros(4000)
    rms1 = add_noise(base, spec, "scope", 0).samples.std()
    for n in (16, 64, 128):
        avg = average_scans([add_noise(base, spec, "scope", k) for k in range(n)])
        assert avg.samples.std() * math.sqrt(n) / rms1 == pytest.approx(1.0, rel=0.10)


def test_zero_trace_has_zero_psd():
    sp = psd(zeros(20_000), rbw=1.0)
    assert np.all(sp.psd == 0)


def test_rms_average_definition():
    f = np.arange(5.0)
    a = Spectrum(f, np.array([1.0, 2, 3, 4, 5]), 1.0)
    b = Spectrum(f, np.array([5.0, 4, 3, 2, 1]), 1.0)
    assert rms_average_spectra([a]).psd.tolist() == a.psd.tolist()
    avg = rms_average_spectra([a, b])
    np.testing.assert_allclose(avg.psd, np.sqrt((a.psd**2 + b.psd**2) / 2))
    assert avg.n_rms_averages == 2
    with pytest.raises(InstrumentError):
        rms_average_spectra([a, Spectrum(f + 1, a.psd, 1.0)])


def test_rms_averaging_reduces_spread():
    fs, rbw = 2000.0, 5.0
    n = segment_length(fs, rbw)
    spectra = [psd(add_noise(zeros(4 * n), NoiseSpec(1e-11, seed=3), "analyzer", k), rbw) for k in range(15)]
    avg = rms_average_spectra(spectra)
    ratio = np.var(spectra[0].psd[5:-5]) / np.var(avg.psd[5:-5])
    assert 15 / 2 < ratio < 15 * 2


@settings(max_examples=15, deadline=None)
@given(st.floats(20.0, 400.0), st.floats(1e-3, 10.0))
def test_tone_power_is_amplitude_accurate(f, amp):
    fs, rbw = 2000.0, 2.0
    t = np.arange(4 * segment_length(fs, rbw)) / fs
    sp = psd(Trace(fs, amp * np.sin(2 * np.pi * f * t)), rbw)
    assert peak_power(sp, f, 2 * rbw) * sp.rbw == pytest.approx(tone_power(amp), rel=1e-3)


def test_peak_power_picks_the_tone_bin():
    fs = 2000.0
    t = np.arange(8 * segment_length(fs, 1.0)) / fs
    sp = psd(Trace(fs, np.sin(2 * np.pi * 40 * t)), 1.0)
    assert peak_power(sp, 40.0, 2.0) == sp.psd.max()
    with pytest.raises(InstrumentError):
        peak_power(sp, 5000.0, 2.0)
    with pytest.raises(InstrumentError):
        peak_power(sp, 40.0, 1e-9)


def test_gaussian_train_line_beats_off_harmonic():
    spec = MagneticWaveformSpec("gaussian_train", 1.0, 40.0, 0.002, duration=6.0, sample_rate=10_000.0)
    sp = psd(Trace(10_000.0, 1e-3 * synthesize(spec)))
    assert 10 * math.log10(peak_power(sp, 40.0, 1.0) / peak_power(sp, 37.0, 1.0)) > 20


def test_noise_only_floor():
    fs, rbw = 2000.0, 0.725
    tr = add_noise(zeros(3 * segment_length(fs, rbw)), NoiseSpec(white_psd=1e-11, seed=2), "analyzer")
    sp = psd(tr, rbw)
    assert 1e-11 / 3 < peak_power(sp, 40.0, 2.0) < 3e-11


def test_parseval_for_white_noise():
    fs = 2000.0
    tr = add_noise(zeros(200_000), NoiseSpec(white_psd=1e-8, seed=4), "analyzer")
    sp = psd(tr, 2.0)
    assert sp.psd.sum() * sp.bin_width == pytest.approx(tr.samples.var(), rel=0.02)


def test_flattop_window_coefficients():
    n = 1024
    k = np.arange(n)
    w = sum((-1) ** i * c * np.cos(2 * np.pi * i * k / n) for i, c in enumerate(FLATTOP_COEFFS))
    np.testing.assert_allclose(flattop(n), w, atol=1e-12)
    np.testing.assert_allclose(flattop(n), sps.windows.flattop(n, sym=False), atol=1e-15)


def test_short_trace_rejected():
    with pytest.raises(InstrumentError, match="too short"):
        psd(zeros(100), rbw=0.725)


def test_trace_validation():
    with pytest.raises(InstrumentError):
        Trace(0.0, np.zeros(3))
    with pytest.raises(InstrumentError):
        Trace(1.0, np.array([0.0, np.inf]))
    with pytest.raises(InstrumentError):
        Spectrum(np.arange(3.0), np.array([1.0, -1.0, 0.0]), 1.0)


def test_writers(tmp_path):
    tr = Trace(100.0, np.array([0.0, 1e-3, -2.5e-7]), {"seed": 3})
    path = write_trace(tr, tmp_path / "trace.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t_seconds", "volts"] and float(rows[3][1]) == -2.5e-7
    side = json.loads((tmp_path / "trace.csv.json").read_text())
    assert side["seed"] == 3 and side["sample_rate_hz"] == 100.0
    sp = Spectrum(np.arange(3.0), np.array([1e-11, 2e-11, 0.0]), 0.725)
    path = write_spectrum(sp, tmp_path / "spec.jsonl", fmt="jsonl")
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    assert lines[1] == {"freq_hz": 1.0, "psd_v2_per_hz": 2e-11}
    assert json.loads((tmp_path / "spec.jsonl.json").read_text())["rbw_hz"] == 0.725
