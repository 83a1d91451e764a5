"""Measurement electronics: noise, oscilloscope averaging and a flat-top spectrum analyzer."""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Mapping, Optional, Sequence

import numpy as np
from scipy import signal as sps

# Standard 5-term flat-top (same coefficients as scipy.signal.windows.flattop):
#   w[n] = a0 - a1 cos(2 pi n/N) + a2 cos(4 pi n/N) - a3 cos(6 pi n/N) + a4 cos(8 pi n/N)
FLATTOP_COEFFS = (0.21557895, 0.41663158, 0.277263158, 0.083578947, 0.006947368)
WINDOW_ID = "flattop5"

DEFAULT_RBW_HZ = 0.725
DEFAULT_SPAN_HZ = 25_000.0
ANALYZER_FLOOR_V2_HZ = 1e-11

# Without padding the flat-top ripple costs up to 0.22 % of tone power between
# bins; two-fold padding brings the worst case to 0.054 %.
ZERO_PAD = 2

NoisePath = Literal["scope", "analyzer"]


class InstrumentError(ValueError):
    pass


def rng_for(seed: int, stage: str, index: int = 0) -> np.random.Generator:
    """Independent random stream keyed by ``(seed, stage, index)``.

    The stage name is hashed with CRC-32 so streams do not depend on the order
    in which stages are visited.
    """
    if seed is None or int(seed) < 0:
        raise InstrumentError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(stage.encode()), int(index)))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class Trace:
    sample_rate: float
    samples: np.ndarray
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise InstrumentError("sample_rate must be > 0")
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1:
            raise InstrumentError("samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise InstrumentError("samples must be finite")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def window(self, start: float, stop: float) -> np.ndarray:
        t = self.times
        return self.samples[(t >= start) & (t < stop)]


@dataclass(frozen=True)
class NoiseSpec:
    white_psd: float = 0.0
    scope_noise_rms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.white_psd < 0 or self.scope_noise_rms < 0:
            raise InstrumentError("noise levels must be >= 0")


@dataclass(frozen=True)
class Spectrum:
    freq_bins: np.ndarray
    psd: np.ndarray
    rbw: float
    window: str = WINDOW_ID
    n_rms_averages: int = 1

    def __post_init__(self):
        f = np.asarray(self.freq_bins, dtype=float)
        p = np.asarray(self.psd, dtype=float)
        if f.shape != p.shape or f.ndim != 1:
            raise InstrumentError("freq_bins and psd must be 1-D arrays of equal length")
        if np.any(p < 0):
            raise InstrumentError("psd must be nonnegative")
        if f.size > 2 and not np.allclose(np.diff(f), f[1] - f[0], rtol=1e-9, atol=0):
            raise InstrumentError("bins must be uniformly spaced")
        object.__setattr__(self, "freq_bins", f)
        object.__setattr__(self, "psd", p)

    @property
    def bin_width(self) -> float:
        return float(self.freq_bins[1] - self.freq_bins[0])


def add_noise(
    trace: Trace, spec: NoiseSpec, path: NoisePath = "scope", index: int = 0, stream: str = ""
) -> Trace:
    """Add white detector noise (and, on the scope path, oscilloscope noise).

    The white part has one-sided PSD ``white_psd``, i.e. variance
    ``white_psd * sample_rate / 2``.  ``stream`` and ``index`` select the
    random stream, e.g. one stream per arm and one index per scan.
    """
    if path not in ("scope", "analyzer"):
        raise InstrumentError(f"path must be 'scope' or 'analyzer', got {path!r}")
    out = trace.samples.copy()
    n = out.size
    if spec.white_psd > 0:
        sigma = math.sqrt(spec.white_psd * trace.sample_rate / 2)
        out += sigma * rng_for(spec.seed, f"{stream}/white/{path}", index).standard_normal(n)
    if path == "scope" and spec.scope_noise_rms > 0:
        out += spec.scope_noise_rms * rng_for(spec.seed, f"{stream}/scope", index).standard_normal(n)
    meta = dict(trace.metadata, seed=spec.seed, noise_path=path, scan_index=index)
    return Trace(trace.sample_rate, out, meta)


def average_scans(traces: Sequence[Trace], n: Optional[int] = None) -> Trace:
    """Pointwise mean of ``n`` equal-length scans.

    The result carries ``averaging_count`` and ``acquisition_time_s`` (``n`` times
    one scan's duration) in its metadata.
    """
    traces = list(traces)
    if not traces:
        raise InstrumentError("no traces to average")
    if n is not None and n != len(traces):
        raise InstrumentError(f"n={n} does not match {len(traces)} traces")
    first = traces[0]
    for tr in traces[1:]:
        if len(tr) != len(first):
            raise InstrumentError(f"mismatched lengths: {len(tr)} vs {len(first)}")
        if tr.sample_rate != first.sample_rate:
            raise InstrumentError("mismatched sample rates")
    mean = np.mean([tr.samples for tr in traces], axis=0)
    count = len(traces)
    meta = dict(first.metadata)
    meta.pop("scan_index", None)
    meta.update(averaging_count=count, acquisition_time_s=acquisition_time(count, first.duration))
    return Trace(first.sample_rate, mean, meta)


def acquisition_time(n_scans: int, scan_duration: float) -> float:
    return n_scans * scan_duration


def flattop(n: int) -> np.ndarray:
    """Periodic (DFT-even) 5-term flat-top window of length ``n``."""
    return sps.get_window("flattop", n, fftbins=True)


def enbw_bins(window: np.ndarray) -> float:
    """Equivalent noise bandwidth in bins: ``N sum(w^2) / (sum w)^2``."""
    return window.size * float(np.sum(window**2)) / float(np.sum(window)) ** 2


# Asymptotic ENBW of the flat-top, used to size segments.
FLATTOP_ENBW_BINS = enbw_bins(flattop(1 << 16))


def segment_length(sample_rate: float, rbw: float) -> int:
    return int(math.ceil(FLATTOP_ENBW_BINS * sample_rate / rbw))


def psd(trace: Trace, rbw: float = DEFAULT_RBW_HZ, overlap: float = 0.5, pad: int = ZERO_PAD) -> Spectrum:
    """One-sided flat-top Welch PSD in V^2/Hz at resolution bandwidth ``rbw``.

    The segment length is chosen so that the window's equivalent noise
    bandwidth equals ``rbw``; a tone of amplitude ``A`` then reads
    ``peak * rbw = A^2 / 2`` and white noise reads its density.  Segments are
    zero-padded ``pad`` times, which leaves the RBW alone but samples the
    main lobe finely enough that the peak bin sits on the flat part.
    """
    if not rbw > 0:
        raise InstrumentError("rbw must be > 0")
    nseg = segment_length(trace.sample_rate, rbw)
    if len(trace) < nseg:
        raise InstrumentError(
            f"trace of {trace.duration:.4g} s is too short for rbw={rbw:g} Hz "
            f"(needs {nseg / trace.sample_rate:.4g} s)"
        )
    win = flattop(nseg)
    freqs, p = sps.welch(
        trace.samples,
        fs=trace.sample_rate,
        window=win,
        nperseg=nseg,
        nfft=pad * nseg,
        noverlap=int(nseg * overlap),
        detrend=False,
        scaling="density",
        return_onesided=True,
    )
    actual_rbw = enbw_bins(win) * trace.sample_rate / nseg
    return Spectrum(freqs, np.maximum(p, 0.0), actual_rbw, WINDOW_ID, 1)


def rms_average_spectra(spectra: Sequence[Spectrum]) -> Spectrum:
    """Per-bin root-mean-square of the PSD values."""
    spectra = list(spectra)
    if not spectra:
        raise InstrumentError("no spectra to average")
    first = spectra[0]
    for sp in spectra[1:]:
        if sp.freq_bins.shape != first.freq_bins.shape or not np.array_equal(sp.freq_bins, first.freq_bins):
            raise InstrumentError("mismatched frequency bins")
        if sp.rbw != first.rbw or sp.window != first.window:
            raise InstrumentError("mismatched rbw or window")
    stack = np.array([sp.psd for sp in spectra])
    total = sum(sp.n_rms_averages for sp in spectra)
    return Spectrum(first.freq_bins, np.sqrt(np.mean(stack**2, axis=0)), first.rbw, first.window, total)


def peak_power(spec: Spectrum, f0: float, tol: float) -> float:
    """Largest PSD value in ``[f0 - tol, f0 + tol]``."""
    f = spec.freq_bins
    if not f[0] <= f0 <= f[-1]:
        raise InstrumentError(f"f0={f0:g} Hz outside spectrum range")
    sel = (f >= f0 - tol) & (f <= f0 + tol)
    if not np.any(sel):
        raise InstrumentError(f"no bins within {tol:g} Hz of {f0:g} Hz")
    return float(spec.psd[sel].max())


# --- serialisation -------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def write_table(path, columns: Mapping[str, np.ndarray], fmt: str = "csv") -> Path:
    """Write equal-length columns as CSV or JSON lines with round-trip float formatting."""
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    with path.open("w", newline="") as fh:
        if fmt == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in zip(*cols):
                w.writerow([_cell(v) for v in row])
        elif fmt == "jsonl":
            for row in zip(*cols):
                fh.write(json.dumps({k: _json_value(v) for k, v in zip(names, row)}) + "\n")
        else:
            raise InstrumentError(f"unknown format {fmt!r}")
    return path


def _cell(v) -> str:
    if isinstance(v, (str, np.str_)):
        return str(v)
    return _fmt(v)


def _json_value(v):
    if isinstance(v, (str, np.str_)):
        return str(v)
    return float(v)


def write_sidecar(path, payload: Mapping) -> Path:
    path = Path(str(path) + ".json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_trace(trace: Trace, path, fmt: str = "csv", extra: Optional[Mapping] = None) -> Path:
    out = write_table(path, {"t_seconds": trace.times, "volts": trace.samples}, fmt)
    write_sidecar(out, {"sample_rate_hz": trace.sample_rate, **trace.metadata, **(extra or {})})
    return out


def write_spectrum(spec: Spectrum, path, fmt: str = "csv", extra: Optional[Mapping] = None) -> Path:
    out = write_table(path, {"freq_hz": spec.freq_bins, "psd_v2_per_hz": spec.psd}, fmt)
    meta = {"rbw_hz": spec.rbw, "window": spec.window, "n_rms_averages": spec.n_rms_averages}
    write_sidecar(out, {**meta, **(extra or {})})
    return out


def with_metadata(trace: Trace, **meta) -> Trace:
    return replace(trace, metadata=dict(trace.metadata, **meta))
