"""From density matrix to polarimeter voltage.

Thin-medium picture: the probe's sigma+/sigma- susceptibilities are read off
the optical coherences of the steady state and accumulated linearly over the
cell.  Conventions::

    chi_+-     = scale * rho[upper, lower] / (Omega_+- / (2 Gamma))
    rotation   = (pi L / lambda) * Re(chi_- - chi_+) / 2
    ellipticity= (pi L / lambda) * Im(chi_- - chi_+) / 2
    T_+-       = exp(-(2 pi L / lambda) * Im chi_+-), clamped to [0, 1]
    V          = gain * I_in * mean(T) * sin(2 (rotation - (analyzer - pi/4)))

Normalising the Rabi frequency by the excited-state linewidth keeps chi
dimensionless; ``scale`` lumps atom density and dipole strength into one
per-scenario calibration constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import brentq

from .dynamics import DensityMatrix, LiouvillianFamily, steady_state
from .medium import FieldDrive, LevelScheme

RB87_D1_WAVELENGTH_M = 794.979e-9
# Weak-probe Rabi frequency suggested when a branch is undriven.
PERTURBATIVE_RABI_HZ = 1e3


class OpticsError(ValueError):
    pass


@dataclass(frozen=True)
class PolarimeterConfig:
    cell_length: float = 0.05
    wavelength: float = RB87_D1_WAVELENGTH_M
    input_intensity: float = 1.0
    detector_gain: float = 1.0
    analyzer_angle: float = math.pi / 4

    def __post_init__(self):
        for name in ("cell_length", "wavelength", "detector_gain"):
            if not getattr(self, name) > 0:
                raise OpticsError(f"{name} must be > 0")
        if self.input_intensity < 0:
            raise OpticsError("input_intensity must be >= 0")

    @property
    def phase_factor(self) -> float:
        """pi L / lambda."""
        return math.pi * self.cell_length / self.wavelength


@dataclass(frozen=True)
class OpticalResponse:
    chi_plus: complex
    chi_minus: complex
    rotation_angle: float
    ellipticity: float
    transmission_plus: float
    transmission_minus: float

    @property
    def mean_transmission(self) -> float:
        return 0.5 * (self.transmission_plus + self.transmission_minus)


def susceptibilities(
    rho: DensityMatrix, scheme: LevelScheme, probe: FieldDrive, scale: float = 1.0
) -> tuple[complex, complex]:
    """Complex susceptibilities seen by the probe's sigma+ and sigma- components."""
    out = []
    for pol, rabi in (("+", probe.rabi_plus), ("-", probe.rabi_minus)):
        role = "probe" + pol
        lower, upper = scheme.branch_map[role]
        rabi_eff = rabi * scheme.dipole(role)
        if rabi_eff == 0:
            raise OpticsError(
                f"probe {pol} branch has zero Rabi frequency; use a perturbative probe "
                f"(e.g. {PERTURBATIVE_RABI_HZ:g} Hz) instead"
            )
        out.append(complex(scale * rho[upper, lower] / (rabi_eff / (2 * scheme.excited_decay))))
    return out[0], out[1]


def faraday(chi_plus: complex, chi_minus: complex, cfg: PolarimeterConfig) -> OpticalResponse:
    if not (np.isfinite(chi_plus) and np.isfinite(chi_minus)):
        raise OpticsError("susceptibilities must be finite")
    k = cfg.phase_factor
    diff = chi_minus - chi_plus
    t_plus = min(1.0, max(0.0, math.exp(-2 * k * chi_plus.imag)))
    t_minus = min(1.0, max(0.0, math.exp(-2 * k * chi_minus.imag)))
    return OpticalResponse(
        chi_plus=chi_plus,
        chi_minus=chi_minus,
        rotation_angle=k * diff.real / 2,
        ellipticity=k * diff.imag / 2,
        transmission_plus=t_plus,
        transmission_minus=t_minus,
    )


def balanced_signal(resp: OpticalResponse, cfg: PolarimeterConfig) -> float:
    """Difference voltage of the balanced detector behind the analyzer.

    At the balanced analyzer setting (pi/4) this is ``gain * I * T * sin(2 phi)``
    and vanishes at zero rotation whatever the absorption.
    """
    offset = cfg.analyzer_angle - math.pi / 4
    return cfg.detector_gain * cfg.input_intensity * resp.mean_transmission * math.sin(
        2 * (resp.rotation_angle - offset)
    )


def probe_signal(
    rho: DensityMatrix,
    scheme: LevelScheme,
    probe: FieldDrive,
    cfg: PolarimeterConfig,
    scale: float = 1.0,
) -> float:
    chi_p, chi_m = susceptibilities(rho, scheme, probe, scale)
    return balanced_signal(faraday(chi_p, chi_m, cfg), cfg)


def probe_drive(drives: Iterable[FieldDrive]) -> FieldDrive:
    for d in drives:
        if d.role == "probe":
            return d
    raise OpticsError("no probe drive")


def signal_from_states(
    states: np.ndarray,
    scheme: LevelScheme,
    probe: FieldDrive,
    cfg: PolarimeterConfig,
    scale: float = 1.0,
) -> np.ndarray:
    """Vectorised :func:`probe_signal` over a stack of density matrices ``(n, d, d)``."""
    (l_p, u_p), (l_m, u_m) = scheme.branch_map["probe+"], scheme.branch_map["probe-"]
    gamma = scheme.excited_decay
    rp = probe.rabi_plus * scheme.dipole("probe+")
    rm = probe.rabi_minus * scheme.dipole("probe-")
    if rp == 0 or rm == 0:
        raise OpticsError("probe branch with zero Rabi frequency; use a perturbative probe")
    chi_p = scale * states[:, u_p, l_p] / (rp / (2 * gamma))
    chi_m = scale * states[:, u_m, l_m] / (rm / (2 * gamma))
    k = cfg.phase_factor
    rotation = k * (chi_m - chi_p).real / 2
    t_p = np.clip(np.exp(-2 * k * chi_p.imag), 0.0, 1.0)
    t_m = np.clip(np.exp(-2 * k * chi_m.imag), 0.0, 1.0)
    offset = cfg.analyzer_angle - math.pi / 4
    return cfg.detector_gain * cfg.input_intensity * 0.5 * (t_p + t_m) * np.sin(2 * (rotation - offset))


def steady_signal(
    family: LiouvillianFamily,
    delta_b: float,
    cfg: PolarimeterConfig,
    scale: float = 1.0,
) -> float:
    """Polarimeter voltage in the steady state at Zeeman shift ``delta_b`` (Hz)."""
    rho = steady_state(family.at(delta_b), check_unique=False)
    return probe_signal(rho, family.scheme, probe_drive(family.drives), cfg, scale)


def calibrate_scale(
    states: np.ndarray,
    scheme: LevelScheme,
    probe: FieldDrive,
    cfg: PolarimeterConfig,
    target_peak: float,
) -> float:
    """Susceptibility scale at which ``max |V|`` over ``states`` equals ``target_peak`` volts."""
    if not target_peak > 0:
        raise OpticsError("target_peak must be > 0")
    if target_peak >= cfg.detector_gain * cfg.input_intensity:
        raise OpticsError("target exceeds the detector's full-scale output")

    def peak(scale: float) -> float:
        return float(np.abs(signal_from_states(states, scheme, probe, cfg, scale)).max())

    unit = peak(1.0)
    if unit == 0:
        raise OpticsError("signal is identically zero; cannot calibrate")
    hi = target_peak / unit
    while peak(hi) < target_peak:
        hi *= 2
        if hi > 1e300:
            raise OpticsError("calibration did not bracket the target")
    return brentq(lambda s: peak(s) - target_peak, 0.0, hi, xtol=hi * 1e-15, rtol=1e-14, maxiter=200)


def resolved_response(
    rho: DensityMatrix,
    scheme: LevelScheme,
    probe: FieldDrive,
    cfg: PolarimeterConfig,
    scale: float = 1.0,
) -> OpticalResponse:
    chi_p, chi_m = susceptibilities(rho, scheme, probe, scale)
    return faraday(chi_p, chi_m, cfg)

