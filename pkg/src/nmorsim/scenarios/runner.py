"""Run a scenario end to end and write its artifact bundle.

Every arm is simulated once per waveform: a periodic field goes through
:func:`~nmorsim.dynamics.evolve_periodic` for one period and the voltage is
tiled, anything else is integrated over the full duration.  Noise is then
drawn per scan (oscilloscope) or per trace (spectrum analyzer) from streams
keyed by arm, stage and index, so outputs depend only on the config and seed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .. import __version__
from ..analysis import (
    detected,
    enhancement,
    extrema_positions,
    linewidth,
    loglog_fit,
    resonance_scan,
    shape_correlation,
    snr_time,
    width_guess,
)
from ..dynamics import Trajectory, evolve, evolve_periodic, liouvillian_family, steady_state
from ..instrument import (
    Spectrum,
    Trace,
    add_noise,
    average_scans,
    peak_power,
    psd,
    rms_average_spectra,
    segment_length,
    write_sidecar,
    write_table,
)
from ..medium import make_scheme, zeeman_shift
from ..optics import calibrate_scale, signal_from_states
from ..waveforms import SMOOTH_KINDS, MagneticWaveformSpec, field_at, synthesize
from .config import ConfigError, Scenario, load, resolve, set_path, waveform_spec

MANIFEST = "manifest.json"


class RunError(RuntimeError):
    pass


@dataclass
class Bundle:
    out_dir: Path
    files: dict[str, str] = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    @property
    def manifest_path(self) -> Path:
        return self.out_dir / MANIFEST


# --- physics per arm ---------------------------------------------------------


def arm_scheme(scn: Scenario, label: str, **drive_overrides):
    arm = scn.arm(label)
    atoms = scn.config["atoms"]
    drives = scn.drives(label)
    if drive_overrides:
        drives = [replace(d, **drive_overrides) if d.role == "probe" else d for d in drives]
    wm = next((d for d in drives if d.role == "wm"), None)
    scheme = make_scheme(
        arm["scheme"],
        excited_decay=atoms["excited_decay_hz"],
        ground_decoherence=atoms["ground_decoherence_hz"],
        wm=wm,
        relative_dipoles=_dipoles_for(arm["scheme"], atoms["relative_dipoles"]),
        trapped_fraction=arm["trapped_fraction"],
    )
    return scheme, drives


def _dipoles_for(kind: str, dipoles: Mapping) -> dict:
    # single-Lambda arms ignore the weights of the absent WM branches
    if kind == "single_lambda":
        return {k: v for k, v in dipoles.items() if k.startswith("probe")}
    return dict(dipoles)


def field_shift(scn: Scenario, spec: MagneticWaveformSpec) -> np.ndarray:
    """Zeeman shift (Hz) sampled on the waveform grid."""
    return zeeman_shift(synthesize(spec), scn.calibration)


def periodic_samples(spec: MagneticWaveformSpec) -> Optional[int]:
    """Samples per period when the waveform repeats on the sample grid, else None."""
    if spec.kind == "constant":
        return 1
    m = spec.sample_rate * spec.period
    if abs(m - round(m)) < 1e-9 * m and round(m) >= 1:
        return int(round(m))
    return None


def simulate(scn: Scenario, label: str, spec: Optional[MagneticWaveformSpec] = None) -> Trajectory:
    """Density-matrix trajectory of one arm: one period if the field repeats, else the whole scan."""
    spec = spec or scn.waveform
    scheme, drives = arm_scheme(scn, label)
    family = liouvillian_family(scheme, drives)
    shift = field_shift(scn, spec)
    dt = 1.0 / spec.sample_rate
    if spec.kind == "constant":
        return evolve(family, shift[:1], np.zeros(1), method="quasi_static")
    m = periodic_samples(spec)
    # samples actually propagated: one period, or the whole scan if the field does not repeat
    samples = shift if m is None else field_shift(scn, replace(spec, duration=m * dt))
    cal = scn.calibration
    if spec.kind in SMOOTH_KINDS:

        def path(t):
            return zeeman_shift(field_at(spec, t), cal)

    else:
        # square edges rise linearly over one sample, like a coil much slower than
        # the optical response; a spline would overshoot and ring at every edge
        knots = np.arange(samples.size + 1) * dt
        values = np.r_[samples, samples[0] if m is not None else samples[-1]]

        def path(t):
            return np.interp(np.mod(t, m * dt) if m is not None else t, knots, values)

    if m is None:
        return evolve(family, shift, np.arange(shift.size) * dt, method="propagator", field=path)
    traj = evolve_periodic(family, samples, dt, field=path)
    if m > shift.size:
        # scan shorter than one period: keep the scan
        return Trajectory(traj.t[: shift.size], traj.states[: shift.size], shift, traj.method, traj.metadata)
    return traj


def voltage(scn: Scenario, label: str, traj: Trajectory, scale: float) -> np.ndarray:
    scheme, drives = arm_scheme(scn, label)
    probe = next(d for d in drives if d.role == "probe")
    return signal_from_states(traj.states, scheme, probe, scn.polarimeter, scale)


def tile(v: np.ndarray, n: int) -> np.ndarray:
    return np.resize(v, n)


def calibration_scale(scn: Scenario) -> float:
    """Susceptibility scale fixing the reference arm's steady-state line peak."""
    cal = scn.config["calibration"]
    if "scale" in cal:
        return float(cal["scale"])
    label = cal.get("reference_arm") or scn.arms[0]["label"]
    scheme, drives = arm_scheme(scn, label)
    family = liouvillian_family(scheme, drives)
    probe = next(d for d in drives if d.role == "probe")
    ls = resonance_scan(scheme, drives, cfg=scn.polarimeter)
    left, right = extrema_positions(ls)
    # dense sampling around each extremum so the discrete max is the line peak
    w = right - left
    grid = np.r_[np.linspace(left - 0.1 * w, left + 0.1 * w, 81), np.linspace(right - 0.1 * w, right + 0.1 * w, 81)]
    states = np.array([steady_state(family.at(float(d)), check_unique=False).matrix for d in grid])
    return calibrate_scale(states, scheme, probe, scn.polarimeter, float(cal["target_peak_v"]))


# --- acquisition ---------------------------------------------------------------


def scope_trace(scn: Scenario, label: str, clean: np.ndarray, sample_rate: float, n_scans: int, stream: str = "scope") -> Trace:
    noise = scn.noise(label)
    base = Trace(sample_rate, clean, {"scenario": scn.name, "arm": label})
    scans = [add_noise(base, noise, "scope", k, stream=f"{label}/{stream}") for k in range(n_scans)]
    return average_scans(scans, n_scans)


def analyzer_spectrum(
    scn: Scenario, label: str, v_period: np.ndarray, sample_rate: float, stream: str = "analyzer"
) -> Spectrum:
    an = scn.config["analyzer"]
    rbw = float(an["rbw_hz"])
    n = analyzer_samples(scn, sample_rate)
    clean = tile(v_period, n)
    noise = scn.noise(label)
    spectra = []
    for k in range(int(an["n_spectra"])):
        tr = add_noise(Trace(sample_rate, clean), noise, "analyzer", k, stream=f"{label}/{stream}")
        spectra.append(psd(tr, rbw))
    return rms_average_spectra(spectra)


def analyzer_samples(scn: Scenario, sample_rate: float) -> int:
    an = scn.config["analyzer"]
    need = segment_length(sample_rate, float(an["rbw_hz"]))
    if an["duration_s"] is None:
        return need
    n = int(round(an["duration_s"] * sample_rate))
    if n < need:
        raise ConfigError([("analyzer.duration_s", f"shorter than one {an['rbw_hz']} Hz RBW segment ({need / sample_rate:.4g} s)")])
    return n


# --- the run -------------------------------------------------------------------


class _Writer:
    def __init__(self, out_dir: Path, fmt: str):
        self.out_dir, self.fmt = out_dir, fmt
        self.files: dict[str, str] = {}

    def table(self, stem: str, columns: Mapping, sidecar: Optional[Mapping] = None) -> Path:
        path = self.out_dir / f"{stem}.{self.fmt}"
        write_table(path, columns, self.fmt)
        self._record(path)
        if sidecar is not None:
            self._record(write_sidecar(path, sidecar))
        return path

    def _record(self, path: Path):
        self.files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()


def run(scenario, out_dir=None, fmt: Optional[str] = None) -> Bundle:
    """Execute ``scenario`` (a :class:`Scenario`, mapping or config path) and write its bundle.

    A ``manifest.json`` is written in every case; a failed run is labelled
    ``"status": "failed"`` with the error, and partial files are listed.
    """
    scn = scenario if isinstance(scenario, Scenario) else load(scenario)
    out = Path(out_dir or scn.config["output"]["dir"] or Path("runs") / scn.name)
    out.mkdir(parents=True, exist_ok=True)
    fmt = fmt or scn.config["output"]["format"]
    writer = _Writer(out, fmt)
    results: dict = {}
    try:
        _execute(scn, writer, results)
        status, error = "complete", None
    except Exception as exc:
        status, error = "failed", f"{type(exc).__name__}: {exc}"
        _write_manifest(out, scn, writer.files, results, status, error)
        raise
    _write_manifest(out, scn, writer.files, results, status, error)
    return Bundle(out, dict(writer.files), results)


def _write_manifest(out: Path, scn: Scenario, files, results, status, error):
    manifest = {
        "status": status,
        "error": error,
        "nmorsim_version": __version__,
        "seed": scn.seed,
        "scenario": scn.to_dict(),
        "files": dict(sorted(files.items())),
        "results": results,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _execute(scn: Scenario, w: _Writer, results: dict) -> None:
    spec = scn.waveform
    fs = spec.sample_rate
    n = spec.n_samples
    w.table("waveform", {"t_seconds": np.arange(n) / fs, "b_nT": synthesize(spec)}, {"waveform": spec.to_dict()})

    scale = calibration_scale(scn)
    results["calibration_scale"] = scale
    labels = [a["label"] for a in scn.arms]

    trajectories = {}
    v_period = {}

    def period_voltage(label):
        if label not in v_period:
            traj = simulate(scn, label)
            trajectories[label] = traj
            v_period[label] = voltage(scn, label, traj, scale)
        return v_period[label]

    spectra_cache: dict[str, Spectrum] = {}

    def spectrum(label):
        if label not in spectra_cache:
            spectra_cache[label] = analyzer_spectrum(scn, label, period_voltage(label), fs)
        return spectra_cache[label]

    for idx, req in enumerate(scn.config["analyses"]):
        kind = req["type"]
        if kind == "time_domain":
            _time_domain(scn, w, results, labels, req, period_voltage, n, fs)
        elif kind == "spectrum":
            _spectrum(scn, w, results, labels, req, spectrum)
        elif kind == "amplitude_sweep":
            _amplitude_sweep(scn, w, results, labels, req, scale)
        elif kind == "enhancement":
            peak_wm = peak_power(spectrum(req["wm_arm"]), req["f0_hz"], req["tol_hz"])
            peak_single = peak_power(spectrum(req["single_arm"]), req["f0_hz"], req["tol_hz"])
            psd_ratio, amp_ratio = enhancement(peak_wm, peak_single)
            w.table(
                "enhancement",
                {
                    "wm_arm": [req["wm_arm"]],
                    "single_arm": [req["single_arm"]],
                    "peak_wm_v2_per_hz": [peak_wm],
                    "peak_single_v2_per_hz": [peak_single],
                    "psd_ratio": [psd_ratio],
                    "amplitude_ratio": [amp_ratio],
                },
            )
            results["enhancement"] = {
                "peak_wm": peak_wm,
                "peak_single": peak_single,
                "psd_ratio": psd_ratio,
                "amplitude_ratio": amp_ratio,
            }
        elif kind == "resonance_scan":
            _resonance(scn, w, results, labels, req, scale)
        elif kind == "rabi_sweep":
            _rabi_sweep(scn, w, results, req)
        else:  # pragma: no cover - schema rejects unknown types
            raise RunError(f"unknown analysis {kind!r}")

    results["invariants"] = {label: traj.invariant_errors() for label, traj in trajectories.items()}


def _time_domain(scn, w, results, labels, req, period_voltage, n, fs):
    rows = {"arm": [], "n_scans": [], "acquisition_time_s": [], "snr": [], "detected": []}
    out = {}
    for label in labels:
        clean = tile(period_voltage(label), n)
        n_scans = scn.n_scans(label)
        tr = scope_trace(scn, label, clean, fs, n_scans)
        snr = snr_time(tr, req["signal_window_s"], req["noise_window_s"])
        w.table(
            f"trace_{label}",
            {"t_seconds": tr.times, "volts": tr.samples},
            {"seed": scn.seed, "nmorsim_version": __version__, **tr.metadata},
        )
        w.table(f"clean_{label}", {"t_seconds": tr.times, "volts": clean})
        rows["arm"].append(label)
        rows["n_scans"].append(n_scans)
        rows["acquisition_time_s"].append(tr.metadata["acquisition_time_s"])
        rows["snr"].append(snr)
        rows["detected"].append(int(detected(snr)))
        out[label] = {
            "snr": snr,
            "detected": detected(snr),
            "n_scans": n_scans,
            "acquisition_time_s": tr.metadata["acquisition_time_s"],
            "clean_peak_v": float(np.abs(clean - clean[0]).max()),
        }
    w.table("snr", rows)
    results["time_domain"] = out


def _spectrum(scn, w, results, labels, req, spectrum):
    rows = {"arm": [], "f0_hz": [], "peak_psd_v2_per_hz": [], "floor_psd_v2_per_hz": []}
    out = {}
    for label in labels:
        sp = spectrum(label)
        pk = peak_power(sp, req["f0_hz"], req["tol_hz"])
        band = req["floor_band_hz"]
        if band is not None:
            sel = (sp.freq_bins >= band[0]) & (sp.freq_bins <= band[1])
            if not np.any(sel):
                raise RunError(f"floor band {band} contains no bins")
            floor = float(np.mean(sp.psd[sel]))
        else:
            floor = float("nan")
        w.table(
            f"spectrum_{label}",
            {"freq_hz": sp.freq_bins, "psd_v2_per_hz": sp.psd},
            {"rbw_hz": sp.rbw, "window": sp.window, "n_rms_averages": sp.n_rms_averages, "seed": scn.seed, "arm": label},
        )
        rows["arm"].append(label)
        rows["f0_hz"].append(req["f0_hz"])
        rows["peak_psd_v2_per_hz"].append(pk)
        rows["floor_psd_v2_per_hz"].append(floor)
        out[label] = {"peak_psd": pk, "floor_psd": None if math.isnan(floor) else floor, "rbw_hz": sp.rbw}
    w.table("spectrum_peaks", rows)
    results["spectrum"] = out


def amplitude_sweep(scn: Scenario, label: str, amplitudes: Sequence[float], f0: float, tol: float, scale: float):
    """Peak PSD near ``f0`` for each waveform amplitude, through dynamics, optics and the analyzer."""
    peaks = []
    for k, amp in enumerate(amplitudes):
        spec = waveform_spec(scn.config, amplitude_nt=amp)
        v = voltage(scn, label, simulate(scn, label, spec), scale)
        sp = analyzer_spectrum(scn, label, v, spec.sample_rate, stream=f"sweep/{k}")
        peaks.append(peak_power(sp, f0, tol))
    return np.array(peaks)


def _amplitude_sweep(scn, w, results, labels, req, scale):
    amps = [float(a) for a in req["amplitudes_nt"]]
    fits = {"arm": [], "slope": [], "intercept": [], "r_squared": []}
    out = {}
    for label in labels:
        peaks = amplitude_sweep(scn, label, amps, req["f0_hz"], req["tol_hz"], scale)
        w.table(f"sweep_{label}", {"amplitude_nt": amps, "peak_psd_v2_per_hz": peaks})
        fit = loglog_fit(list(zip(amps, peaks)))
        fits["arm"].append(label)
        fits["slope"].append(fit.slope)
        fits["intercept"].append(fit.intercept)
        fits["r_squared"].append(fit.r_squared)
        out[label] = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared, "peaks": list(peaks)}
    w.table("fits", fits)
    slopes = fits["slope"]
    if len(slopes) > 1:
        mean = float(np.mean(slopes))
        out["slope_spread"] = float((max(slopes) - min(slopes)) / abs(mean))
    results["amplitude_sweep"] = out


def _resonance(scn, w, results, labels, req, scale):
    ref = labels[0]
    scheme, drives = arm_scheme(scn, ref)
    half = req["halfwidth_hz"] or 4 * width_guess(scheme, drives)
    grid = np.linspace(-half, half, int(req["points"]))
    rows = {"arm": [], "linewidth_hz": [], "peak_v": [], "shape_correlation": []}
    out = {}
    first = None
    for label in labels:
        scheme, drives = arm_scheme(scn, label)
        ls = resonance_scan(scheme, drives, grid, scn.polarimeter, scale)
        width = linewidth(ls)
        if first is None:
            first = ls.signal
        corr = shape_correlation(first, ls.signal)
        w.table(
            f"lineshape_{label}",
            {"delta_b_hz": ls.delta_b_grid, "b_nT": ls.delta_b_grid / scn.calibration.gamma, "volts": ls.signal},
        )
        rows["arm"].append(label)
        rows["linewidth_hz"].append(width)
        rows["peak_v"].append(float(np.abs(ls.signal).max()))
        rows["shape_correlation"].append(corr)
        out[label] = {"linewidth_hz": width, "peak_v": float(np.abs(ls.signal).max()), "shape_correlation": corr}
    w.table("linewidths", rows)
    results["resonance_scan"] = out


def _rabi_sweep(scn, w, results, req):
    label = req["arm"]
    widths = []
    for rabi in req["rabi_hz"]:
        scheme, drives = arm_scheme(scn, label, rabi_plus=float(rabi), rabi_minus=float(rabi))
        ls = resonance_scan(scheme, drives, cfg=scn.polarimeter, points=int(req["points"]))
        widths.append(linewidth(ls))
    w.table("rabi_sweep", {"rabi_hz": req["rabi_hz"], "linewidth_hz": widths})
    results["rabi_sweep"] = {
        "arm": label,
        "rabi_hz": list(req["rabi_hz"]),
        "linewidth_hz": widths,
        "monotone": bool(np.all(np.diff(widths) >= 0)),
    }


# --- manifests and sweeps ------------------------------------------------------------


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    return json.loads(path.read_text())


def rerun(manifest_path, out_dir, fmt: Optional[str] = None) -> Bundle:
    """Re-execute the scenario recorded in a manifest."""
    manifest = read_manifest(manifest_path)
    return run(Scenario(resolve(manifest["scenario"])), out_dir, fmt)


def sweep(scenario, param: str, values: Sequence, out_dir=None, fmt: Optional[str] = None) -> list[Bundle]:
    """Run ``scenario`` once per value of the dotted config ``param``; one sub-directory per point."""
    scn = scenario if isinstance(scenario, Scenario) else load(scenario)
    root = Path(out_dir or scn.config["output"]["dir"] or Path("runs") / f"{scn.name}_sweep")
    root.mkdir(parents=True, exist_ok=True)
    bundles = []
    for i, value in enumerate(values):
        cfg = set_path(scn.config, param, value)
        bundles.append(run(Scenario(resolve(cfg)), root / f"point_{i:03d}", fmt))
    index = {"point": [f"point_{i:03d}" for i in range(len(values))], "value": [json.dumps(v) for v in values]}
    fmt = fmt or scn.config["output"]["format"]
    write_table(root / f"sweep.{fmt}", index, fmt)
    (root / "sweep.json").write_text(
        json.dumps({"param": param, "values": list(values), "base": scn.to_dict()}, indent=2, sort_keys=True) + "\n"
    )
    return bundles
