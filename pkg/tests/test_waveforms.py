import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import gaussian_area as oracle_area, gaussian_train_line
from nmorsim.instrument import Trace, psd
from nmorsim.waveforms import (
    MagneticWaveformSpec,
    WaveformError,
    field_at,
    gaussian_area,
    synthesize,
    time_grid,
    write_csv,
)


def train(amplitude=5.0, rate=40.0, fwhm=0.002, duration=0.1, fs=20_000.0, offset=0.0):
    return MagneticWaveformSpec("gaussian_train", amplitude, rate, fwhm, offset, duration, fs)


def test_gaussian_train_peaks_and_width():
    spec = train()
    b = synthesize(spec)
    t = time_grid(spec)
    assert b.size == 2000
    period = int(spec.sample_rate / spec.frequency_or_rate)
    for k in range(4):
        seg = b[k * period : (k + 1) * period]
        i = int(np.argmax(seg))
        assert seg[i] == pytest.approx(5.0, rel=1e-12)
        assert t[k * period + i] == pytest.approx((k + 0.5) * 0.025)
        # half-maximum crossings, linearly interpolated between samples
        above = np.flatnonzero(seg >= 2.5)
        lo, hi = above[0], above[-1]
        left = lo - (seg[lo] - 2.5) / (seg[lo] - seg[lo - 1])
        right = hi + (seg[hi] - 2.5) / (seg[hi] - seg[hi + 1])
        width = (right - left) / spec.sample_rate
        assert abs(width - 0.002) <= 1 / spec.sample_rate


def test_constant():
    b = synthesize(MagneticWaveformSpec("constant", 10.0, duration=0.01))
    assert b.size == 100 and np.all(b == 10.0)


@pytest.mark.parametrize("amp,offset", [(1.0, 0.0), (3.5, -2.0), (0.2, 50_000.0)])
def test_sine_mean_and_span(amp, offset):
    f = 7.0
    spec = MagneticWaveformSpec("sine", amp, f, offset=offset, duration=1 / f, sample_rate=1e4 * f)
    b = synthesize(spec)
    assert b.mean() == pytest.approx(offset, abs=1e-3 * amp)
    assert b.max() - b.min() == pytest.approx(2 * amp, rel=1e-3)


def test_pulse_area():
    spec = train(duration=0.025, fs=200_000.0)
    area = synthesize(spec).sum() / spec.sample_rate
    assert area == pytest.approx(oracle_area(5.0, 0.002), rel=5e-3)
    assert gaussian_area(5.0, 0.002) == pytest.approx(oracle_area(5.0, 0.002), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(["constant", "sine", "square", "gaussian_train"]),
    offset=st.sampled_from([0.0, 1.0, -3.0, 0.5, 50_000.0]),
)
def test_offset_shifts_every_sample_exactly(kind, offset):
    base = dict(kind=kind, amplitude=2.0, frequency_or_rate=20.0, duration=0.05, sample_rate=10_000.0)
    if kind == "gaussian_train":
        base["fwhm"] = 0.002
    plain = synthesize(MagneticWaveformSpec(**base))
    shifted = synthesize(MagneticWaveformSpec(**base, offset=offset))
    np.testing.assert_array_equal(shifted, plain + offset)


def test_square_is_half_duty():
    spec = MagneticWaveformSpec("square", 4.0, 20.0, duration=0.5, sample_rate=20_000.0)
    b = synthesize(spec)
    assert set(np.unique(b)) == {0.0, 4.0}
    assert np.mean(b == 4.0) == pytest.approx(0.5)
    assert b[0] == 4.0


def test_field_at_matches_samples():
    spec = train()
    np.testing.assert_array_equal(field_at(spec, time_grid(spec)), synthesize(spec))
    assert field_at(spec, 0.0125) == pytest.approx(5.0)


def test_train_spectrum_has_lines_only_at_harmonics():
    rate, fs = 40.0, 20_000.0
    spec = train(rate=rate, duration=8.0, fs=fs)
    sp = psd(Trace(fs, synthesize(spec)), rbw=2.0)
    f, p = sp.freq_bins, sp.psd
    fundamental = p[np.abs(f - rate) <= 2 * sp.rbw].max()
    harmonic = np.abs(f - rate * np.round(f / rate)) <= 3 * sp.rbw
    assert p[~harmonic].max() / fundamental < 1e-6
    # the harmonic heights follow the Fourier series of the train
    for k in (1, 3, 10):
        line = p[np.abs(f - k * rate) <= 2 * sp.rbw].max() * sp.rbw
        assert line == pytest.approx(gaussian_train_line(5.0, 0.002, rate, k) ** 2 / 2, rel=1e-3)


@pytest.mark.parametrize(
    "kwargs,needle",
    [
        (dict(kind="sine", amplitude=1.0, frequency_or_rate=100.0, sample_rate=1000.0), "sample_rate >= 20"),
        (dict(kind="gaussian_train", amplitude=1.0, frequency_or_rate=10.0), "fwhm > 0"),
        (dict(kind="constant", amplitude=1.0, duration=0.0), "duration > 0"),
        (dict(kind="sine", amplitude=1.0, frequency_or_rate=0.0), "frequency_or_rate > 0"),
        (dict(kind="triangle", amplitude=1.0), "kind must be"),
        (dict(kind="constant", amplitude=math.nan), "amplitude must be finite"),
    ],
)
def test_violations_are_named(kwargs, needle):
    with pytest.raises(WaveformError, match=needle.replace("(", r"\(")):
        MagneticWaveformSpec(**kwargs)


def test_write_csv(tmp_path):
    spec = train(duration=0.005)
    path = write_csv(spec, tmp_path / "b.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t_seconds", "b_nT"]
    assert len(rows) == 1 + spec.n_samples
    np.testing.assert_array_equal([float(r[1]) for r in rows[1:]], synthesize(spec))
