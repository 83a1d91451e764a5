"""Applied magnetic-field time series, in nT."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Literal, Optional

import numpy as np

WaveformKind = Literal["constant", "sine", "square", "gaussian_train"]
KINDS = ("constant", "sine", "square", "gaussian_train")

# Typical geomagnetic magnitude used as the static offset of shield-less presets.
EARTH_FIELD_NT = 50_000.0
# Sample-rate margin over the fastest time scale of the waveform.
OVERSAMPLING = 20

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


class WaveformError(ValueError):
    pass


@dataclass(frozen=True)
class MagneticWaveformSpec:
    """Parameters of an applied-field waveform.

    ``frequency_or_rate`` is the sine frequency or the pulse repetition rate.
    ``fwhm`` only matters for ``gaussian_train``.  ``offset`` is a static field
    added to every sample (the Earth field when running without a shield).
    """

    kind: WaveformKind
    amplitude: float
    frequency_or_rate: float = 0.0
    fwhm: Optional[float] = None
    offset: float = 0.0
    duration: float = 1.0
    sample_rate: float = 10_000.0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise WaveformError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if self.kind not in KINDS:
            out.append(f"kind must be one of {KINDS}, got {self.kind!r}")
            return out
        for name in ("amplitude", "frequency_or_rate", "offset", "duration", "sample_rate"):
            if not math.isfinite(getattr(self, name)):
                out.append(f"{name} must be finite")
        if not self.duration > 0:
            out.append("duration > 0 violated")
        if not self.sample_rate > 0:
            out.append("sample_rate > 0 violated")
        if self.kind != "constant" and not self.frequency_or_rate > 0:
            out.append(f"frequency_or_rate > 0 violated for {self.kind}")
        if self.kind == "gaussian_train" and not (self.fwhm is not None and self.fwhm > 0):
            out.append("fwhm > 0 violated for gaussian_train")
        fastest = self.fastest_rate()
        if fastest > 0 and self.sample_rate < OVERSAMPLING * fastest:
            out.append(
                f"sample_rate >= {OVERSAMPLING} x {fastest:g} Hz violated (got {self.sample_rate:g} Hz)"
            )
        return out

    def fastest_rate(self) -> float:
        rates = []
        if self.kind != "constant":
            rates.append(self.frequency_or_rate)
        if self.kind == "gaussian_train" and self.fwhm:
            rates.append(1.0 / self.fwhm)
        return max(rates, default=0.0)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def period(self) -> Optional[float]:
        return None if self.kind == "constant" else 1.0 / self.frequency_or_rate

    def to_dict(self) -> dict:
        return asdict(self)


def time_grid(spec: MagneticWaveformSpec) -> np.ndarray:
    return np.arange(spec.n_samples) / spec.sample_rate


# kinds without jumps, whose field can be evaluated between samples
SMOOTH_KINDS = ("constant", "sine", "gaussian_train")


def field_at(spec: MagneticWaveformSpec, t) -> np.ndarray:
    """``B(t)`` in nT at arbitrary times (s)."""
    t = np.asarray(t, dtype=float)
    a, f = spec.amplitude, spec.frequency_or_rate
    if spec.kind == "constant":
        b = np.full(t.shape, a, dtype=float)
    elif spec.kind == "sine":
        b = a * np.sin(2 * np.pi * f * t)
    elif spec.kind == "square":
        # unipolar, 50 % duty: high for the first half of every period
        phase = np.mod(t * f, 1.0)
        b = np.where(phase < 0.5, a, 0.0)
    else:
        sigma = spec.fwhm * FWHM_TO_SIGMA
        # pulse k is centred at (k + 1/2) / rate; neighbours within 8 sigma contribute
        reach = int(math.ceil(8 * sigma * f)) + 1
        k0 = np.floor(t * f)
        b = np.zeros_like(t)
        for j in range(-reach, reach + 1):
            centre = (k0 + j + 0.5) / f
            b += np.exp(-0.5 * ((t - centre) / sigma) ** 2)
        b *= a
    return b + spec.offset


def synthesize(spec: MagneticWaveformSpec) -> np.ndarray:
    """Sample ``B(t)`` in nT at ``t = k / sample_rate`` for ``duration * sample_rate`` samples."""
    return field_at(spec, time_grid(spec))


def gaussian_area(amplitude: float, fwhm: float) -> float:
    """Closed-form area of one Gaussian pulse (nT s)."""
    return amplitude * fwhm * math.sqrt(math.pi / (4 * math.log(2)))


def write_csv(spec: MagneticWaveformSpec, path, samples: Optional[np.ndarray] = None) -> Path:
    path = Path(path)
    b = synthesize(spec) if samples is None else np.asarray(samples, dtype=float)
    t = np.arange(b.size) / spec.sample_rate
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_seconds", "b_nT"])
        for ti, bi in zip(t, b):
            w.writerow([repr(float(ti)), repr(float(bi))])
    return path
