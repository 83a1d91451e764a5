"""Headline quantities: SNR, log-log fits, enhancement factors and resonance linewidths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .dynamics import liouvillian_family, steady_state
from .instrument import Trace
from .medium import FieldDrive, LevelScheme
from .optics import PolarimeterConfig, probe_drive, signal_from_states

DETECTION_THRESHOLD = 3.0
DEFAULT_SCAN_POINTS = 201
MAX_WIDENINGS = 12


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class LineShape:
    """Polarimeter voltage sampled against the Zeeman shift (Hz).

    ``model`` optionally evaluates the same curve at arbitrary shifts; when it
    is present :func:`linewidth` refines extrema off-grid and widens the scan
    if an extremum sits on its edge.
    """

    delta_b_grid: np.ndarray
    signal: np.ndarray
    metadata: Mapping = field(default_factory=dict)
    model: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.delta_b_grid, dtype=float)
        sig = np.asarray(self.signal, dtype=float)
        if grid.ndim != 1 or grid.shape != sig.shape:
            raise AnalysisError("grid and signal must be 1-D arrays of equal length")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise AnalysisError("delta_b_grid must be strictly increasing")
        object.__setattr__(self, "delta_b_grid", grid)
        object.__setattr__(self, "signal", sig)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def negated(self) -> "LineShape":
        model = None if self.model is None else (lambda d, m=self.model: -m(d))
        return replace(self, signal=-self.signal, model=model)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float

    def __post_init__(self):
        if not 0.0 <= self.r_squared <= 1.0:
            raise AnalysisError(f"r_squared {self.r_squared} outside [0, 1]")


# --- time domain -----------------------------------------------------------


def snr_time(trace: Trace, signal_window: Sequence[float], noise_window: Sequence[float]) -> float:
    """Pulse amplitude over RMS noise.

    The amplitude is the mean level of ``signal_window`` relative to the
    baseline (mean of ``noise_window``); the noise is the standard deviation
    of ``noise_window``.  Place the signal window on the pulse peak: a narrow
    window there reads the peak height, whereas taking the largest single
    sample would add roughly two to three noise RMS of bias.  Windows are
    ``(start, stop)`` in seconds.
    """
    (s0, s1), (n0, n1) = signal_window, noise_window
    if not (s0 < s1 and n0 < n1):
        raise AnalysisError("windows must have start < stop")
    if s0 < n1 and n0 < s1:
        raise AnalysisError("signal and noise windows overlap")
    if min(s0, n0) < 0 or max(s1, n1) > trace.duration + 1e-12:
        raise AnalysisError("window outside the trace")
    sig, noise = trace.window(s0, s1), trace.window(n0, n1)
    if sig.size == 0 or noise.size < 2:
        raise AnalysisError("empty window")
    baseline = noise.mean()
    rms = noise.std()
    peak = abs(sig.mean() - baseline)
    if rms == 0:
        return math.inf if peak > 0 else 0.0
    return float(peak / rms)


def detected(snr: float, threshold: float = DETECTION_THRESHOLD) -> bool:
    return snr >= threshold


# --- spectra ---------------------------------------------------------------


def loglog_fit(points: Sequence[tuple[float, float]]) -> FitResult:
    """Least-squares line through ``(log10 amplitude, log10 PSD)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise AnalysisError("points must be (amplitude, psd) pairs")
    if len(pts) < 3:
        raise AnalysisError(f"need at least 3 points, got {len(pts)}")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise AnalysisError("amplitudes and PSD values must be positive and finite")
    x, y = np.log10(pts[:, 0]), np.log10(pts[:, 1])
    if np.ptp(x) == 0:
        raise AnalysisError("amplitudes must not all be equal")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return FitResult(float(slope), float(intercept), min(1.0, max(0.0, r2)))


def enhancement(peak_wm: float, peak_single: float) -> tuple[float, float]:
    """``(psd_ratio, amplitude_ratio)`` with ``amplitude_ratio = sqrt(psd_ratio)``."""
    if not (peak_wm > 0 and peak_single > 0):
        raise AnalysisError("peak PSD values must be > 0")
    ratio = peak_wm / peak_single
    return ratio, math.sqrt(ratio)


# --- resonance line shapes -------------------------------------------------


def resonance_model(
    scheme: LevelScheme,
    drives: Sequence[FieldDrive],
    cfg: PolarimeterConfig = PolarimeterConfig(),
    scale: float = 1.0,
) -> Callable[[np.ndarray], np.ndarray]:
    """Steady-state voltage as a vectorised function of the Zeeman shift (Hz)."""
    family = liouvillian_family(scheme, drives)
    probe = probe_drive(drives)
    steady_state(family.at(0.0))  # fail early on a degenerate configuration

    def model(delta_b):
        d = np.atleast_1d(np.asarray(delta_b, dtype=float))
        states = np.array([steady_state(family.at(float(x)), check_unique=False).matrix for x in d])
        v = signal_from_states(states, scheme, probe, cfg, scale)
        return v if np.ndim(delta_b) else v[0]

    return model


def width_guess(scheme: LevelScheme, drives: Sequence[FieldDrive]) -> float:
    """Rough resonance half-width (Hz): ground decoherence plus optical pumping and light shifts."""
    gamma = scheme.excited_decay
    w = scheme.ground_decoherence
    for d in drives:
        rabi2 = d.rabi_plus**2 + d.rabi_minus**2
        w += rabi2 * gamma / (gamma**2 + 4 * d.detuning**2) + rabi2 / (4 * max(abs(d.detuning), gamma))
    return max(w, 1e-3)


def resonance_scan(
    scheme: LevelScheme,
    drives: Sequence[FieldDrive],
    delta_b_grid: Optional[np.ndarray] = None,
    cfg: PolarimeterConfig = PolarimeterConfig(),
    scale: float = 1.0,
    points: int = DEFAULT_SCAN_POINTS,
) -> LineShape:
    """Steady-state line shape ``V(delta_B)``.

    Without an explicit grid, a symmetric grid of ``points`` samples spanning
    four times :func:`width_guess` on each side is used.
    """
    model = resonance_model(scheme, drives, cfg, scale)
    if delta_b_grid is None:
        half = 4 * width_guess(scheme, drives)
        delta_b_grid = np.linspace(-half, half, points)
    grid = np.asarray(delta_b_grid, dtype=float)
    meta = {
        "scheme": scheme.to_dict(),
        "drives": [
            {"role": d.role, "rabi_plus_hz": d.rabi_plus, "rabi_minus_hz": d.rabi_minus, "detuning_hz": d.detuning}
            for d in drives
        ],
        "scale": scale,
    }
    return LineShape(grid, model(grid), meta, model)


def _first_extremum(x: np.ndarray, y: np.ndarray) -> Optional[int]:
    """Index of the first local maximum of ``y`` walking away from ``x[0]``; None if only at the edge."""
    for i in range(1, len(y) - 1):
        if y[i] >= y[i - 1] and y[i] >= y[i + 1] and y[i] > y[0]:
            return i
    return None


def _extrema(ls: LineShape) -> tuple[Optional[float], Optional[float], tuple]:
    x, v = ls.delta_b_grid, ls.signal
    pos, neg = x > 0, x < 0
    if not (pos.sum() >= 2 and neg.sum() >= 2):
        raise AnalysisError("grid must extend on both sides of zero")
    xp, vp = x[pos], v[pos]
    xn, vn = x[neg][::-1], v[neg][::-1]
    s = np.sign(vp[0] - vn[0]) or 1.0
    # walk outwards from zero; include the centre so a peak on the first sample counts
    centre = np.interp(0.0, x, v)
    i_p = _first_extremum(np.r_[0.0, xp], s * np.r_[centre, vp])
    i_n = _first_extremum(np.r_[0.0, xn], -s * np.r_[centre, vn])
    return (
        None if i_p is None else i_p - 1,
        None if i_n is None else i_n - 1,
        (xp, vp, xn, vn, s),
    )


def _refine(x3: np.ndarray, y3: np.ndarray, model, sign: float) -> float:
    lo, hi = float(min(x3[0], x3[2])), float(max(x3[0], x3[2]))
    if model is not None:
        res = minimize_scalar(
            lambda d: -sign * float(model(d)), bounds=(lo, hi), method="bounded", options={"xatol": (hi - lo) * 1e-9}
        )
        return float(res.x)
    # vertex of the parabola through three samples
    (x0, x1, x2), (y0, y1, y2) = x3, y3
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    return float(-b / (2 * a)) if a != 0 else float(x1)


def extrema_positions(ls: LineShape, max_widenings: int = MAX_WIDENINGS) -> tuple[float, float]:
    """Shifts ``(negative, positive)`` of the two dispersive extrema nearest zero.

    If either extremum is not bracketed by the grid and the line shape has a
    model, the scan is widened by a factor 2 up to ``max_widenings`` times.
    """
    for attempt in range(max_widenings + 1):
        i_p, i_n, (xp, vp, xn, vn, s) = _extrema(ls)
        if i_p is not None and i_n is not None and i_p + 1 < len(xp) and i_n + 1 < len(xn):
            break
        if ls.model is None or attempt == max_widenings:
            raise AnalysisError("dispersive extrema not bracketed by the scan grid")
        grid = np.linspace(2 * ls.delta_b_grid[0], 2 * ls.delta_b_grid[-1], ls.delta_b_grid.size)
        ls = replace(ls, delta_b_grid=grid, signal=ls.model(grid))

    def around(xs, vs, i):
        xs3 = np.r_[0.0, xs][i : i + 3]
        vs3 = np.r_[np.interp(0.0, ls.delta_b_grid, ls.signal), vs][i : i + 3]
        return xs3, vs3

    xp3, vp3 = around(xp, vp, i_p)
    xn3, vn3 = around(xn, vn, i_n)
    right = _refine(xp3, s * vp3, ls.model, s)
    left = _refine(xn3, -s * vn3, ls.model, -s)
    return left, right


def linewidth(ls: LineShape, max_widenings: int = MAX_WIDENINGS) -> float:
    """Peak-to-peak width (Hz) of the dispersive line: separation of its extrema."""
    left, right = extrema_positions(ls, max_widenings)
    return right - left


def shape_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation of two line shapes sampled on the same grid."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise AnalysisError("line shapes must share a grid")
    return float(np.corrcoef(a, b)[0, 1])
