"""Atomic level schemes, optical drives and the field-to-Zeeman-shift calibration.

Two topologies are supported:

``single_lambda``
    three states ``|1>, |2>, |3>``; the sigma+ and sigma- components of one
    linearly polarised probe couple ``|1>`` and ``|3>`` to the excited ``|2>``.

``wave_mixing``
    a double-Lambda: the probe Lambda above plus a second excited state
    ``|2'>`` reached from the same ground states by the wave-mixing (WM)
    field, and a decoupled reservoir state standing in for the hyperfine
    manifold that the light never addresses.  Both Lambdas share the ground
    Zeeman coherence ``rho_13``, which is how the WM drive feeds the probe.

Frequencies (Rabi frequencies, detunings, decay rates) are given as cyclic
frequencies in Hz, i.e. ``Omega/2pi``, ``delta/2pi``, ``Gamma/2pi``.  The
conversion to angular units happens once, inside :mod:`nmorsim.dynamics`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, Mapping, Optional

# Basis ordering shared by every module.
GROUND_1 = 0
EXCITED_PROBE = 1
GROUND_3 = 2
EXCITED_WM = 3
RESERVOIR = 4

ROLES = ("probe+", "probe-", "wm+", "wm-")

DEFAULT_EXCITED_DECAY_HZ = 5.7e6  # 87Rb D1 natural linewidth
DEFAULT_GAMMA_HZ_PER_NT = 6.0  # 500 nT <-> 3 kHz shield-limit anchor
RB87_F2_GAMMA_HZ_PER_NT = 7.0  # textbook g_F * mu_B / h for 87Rb F=2

SchemeKind = Literal["single_lambda", "wave_mixing"]
DriveRole = Literal["probe", "wm"]


class SchemeError(ValueError):
    """Invalid level-scheme or drive configuration."""


@dataclass(frozen=True)
class ZeemanCalibration:
    """Linear map from applied field (nT) to ground-state Zeeman shift (Hz)."""

    gamma: float = DEFAULT_GAMMA_HZ_PER_NT

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise SchemeError(f"gamma must be positive and finite, got {self.gamma!r}")


def zeeman_shift(b_field, cal: ZeemanCalibration = ZeemanCalibration()):
    """Zeeman shift ``delta_B = gamma * B`` in Hz for a field in nT.

    Works elementwise on numpy arrays.
    """
    return cal.gamma * b_field


@dataclass(frozen=True)
class FieldDrive:
    """One optical field.

    ``rabi_plus``/``rabi_minus`` are the sigma+/sigma- Rabi frequencies and
    ``detuning`` the one-photon detuning (laser minus atom), all in Hz.
    ``intensity_label`` is bookkeeping only (uW/cm^2 quoted for the run).
    """

    role: DriveRole
    rabi_plus: float
    rabi_minus: float
    detuning: float = 0.0
    intensity_label: Optional[float] = None

    def __post_init__(self):
        if self.role not in ("probe", "wm"):
            raise SchemeError(f"drive role must be 'probe' or 'wm', got {self.role!r}")
        for name in ("rabi_plus", "rabi_minus", "detuning"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise SchemeError(f"{self.role}.{name} must be finite")
        if self.rabi_plus < 0 or self.rabi_minus < 0:
            raise SchemeError(f"{self.role} Rabi frequencies must be >= 0")

    @classmethod
    def linear(cls, role: DriveRole, rabi: float, detuning: float = 0.0, **kw) -> "FieldDrive":
        """Linearly polarised drive: equal sigma+ and sigma- components."""
        return cls(role, rabi, rabi, detuning, **kw)


@dataclass(frozen=True)
class LevelScheme:
    kind: SchemeKind
    n_states: int
    excited_decay: float
    ground_decoherence: float
    branch_map: Mapping[str, tuple[int, int]]
    relative_dipoles: Mapping[str, float] = field(default_factory=dict)
    trapped_fraction: float = 0.0

    def __post_init__(self):
        if self.excited_decay < 0 or self.ground_decoherence < 0:
            raise SchemeError("decay rates must be >= 0")
        if not 0.0 <= self.trapped_fraction < 1.0:
            raise SchemeError("trapped_fraction must lie in [0, 1)")
        if self.trapped_fraction > 0 and self.reservoir is None:
            raise SchemeError(f"{self.kind} has no reservoir state for a trapped fraction")
        for role, (lower, upper) in self.branch_map.items():
            if role not in ROLES:
                raise SchemeError(f"unknown branch role {role!r}")
            if not (0 <= lower < self.n_states and 0 <= upper < self.n_states) or lower == upper:
                raise SchemeError(f"branch {role} references invalid states {(lower, upper)}")
        for drive in ("probe", "wm"):
            plus, minus = self.branch_map.get(drive + "+"), self.branch_map.get(drive + "-")
            if (plus is None) != (minus is None):
                raise SchemeError(f"{drive} needs both sigma+ and sigma- branches")
            if plus is not None and (plus[1] != minus[1] or plus[0] == minus[0]):
                raise SchemeError(
                    f"{drive} sigma+/sigma- must couple different ground states to one excited state"
                )
        for role, weight in self.relative_dipoles.items():
            if role not in self.branch_map:
                raise SchemeError(f"relative dipole given for absent branch {role!r}")
            if not weight > 0:
                raise SchemeError(f"relative dipole of {role} must be > 0")
        if self.excited_decay > 0 and self.ground_decoherence > 0.01 * self.excited_decay:
            warnings.warn(
                "ground decoherence is not much smaller than the excited-state decay",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def has_wm(self) -> bool:
        return "wm+" in self.branch_map

    @property
    def ground_states(self) -> tuple[int, int]:
        return (GROUND_1, GROUND_3)

    @property
    def excited_states(self) -> tuple[int, ...]:
        return tuple(sorted({upper for _, upper in self.branch_map.values()}))

    @property
    def reservoir(self) -> Optional[int]:
        return RESERVOIR if self.kind == "wave_mixing" else None

    def dipole(self, role: str) -> float:
        return self.relative_dipoles.get(role, 1.0)

    def equilibrium_populations(self) -> list[float]:
        """Unpolarised ground mixture the ground relaxation pulls toward."""
        pops = [0.0] * self.n_states
        active = 1.0 - self.trapped_fraction
        pops[GROUND_1] = pops[GROUND_3] = active / 2
        if self.reservoir is not None:
            pops[self.reservoir] = self.trapped_fraction
        return pops

    def swap_ground(self) -> list[int]:
        """Permutation relabelling ``|1> <-> |3>``."""
        perm = list(range(self.n_states))
        perm[GROUND_1], perm[GROUND_3] = GROUND_3, GROUND_1
        return perm

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "excited_decay_hz": self.excited_decay,
            "ground_decoherence_hz": self.ground_decoherence,
            "relative_dipoles": dict(self.relative_dipoles),
            "trapped_fraction": self.trapped_fraction,
        }


def make_scheme(
    kind: SchemeKind,
    *,
    excited_decay: float = DEFAULT_EXCITED_DECAY_HZ,
    ground_decoherence: float,
    wm: Optional[FieldDrive] = None,
    relative_dipoles: Optional[Mapping[str, float]] = None,
    trapped_fraction: float = 0.0,
) -> LevelScheme:
    """Build a validated :class:`LevelScheme`.

    Parameters
    ----------
    kind : {"single_lambda", "wave_mixing"}
    excited_decay : float
        Total population decay of each excited state, Gamma/2pi in Hz.
    ground_decoherence : float
        Ground Zeeman decoherence gamma_0 in Hz.
    wm : FieldDrive, optional
        Only used to reject a WM drive paired with a single-Lambda scheme.
    relative_dipoles : mapping, optional
        Per-branch coupling weights, default 1.
    trapped_fraction : float
        Population parked in the reservoir state (wave_mixing only).
    """
    if excited_decay < 0 or ground_decoherence < 0:
        raise SchemeError("decay rates must be >= 0")
    if kind == "single_lambda":
        if wm is not None:
            raise SchemeError("single_lambda scheme cannot take a wave-mixing drive")
        branch_map = {"probe+": (GROUND_1, EXCITED_PROBE), "probe-": (GROUND_3, EXCITED_PROBE)}
        n_states = 3
    elif kind == "wave_mixing":
        if wm is not None and wm.role != "wm":
            raise SchemeError("wm drive must have role 'wm'")
        branch_map = {
            "probe+": (GROUND_1, EXCITED_PROBE),
            "probe-": (GROUND_3, EXCITED_PROBE),
            "wm+": (GROUND_1, EXCITED_WM),
            "wm-": (GROUND_3, EXCITED_WM),
        }
        n_states = 5
    else:
        raise SchemeError(f"unknown scheme kind {kind!r}")
    return LevelScheme(
        kind=kind,
        n_states=n_states,
        excited_decay=float(excited_decay),
        ground_decoherence=float(ground_decoherence),
        branch_map=branch_map,
        relative_dipoles=dict(relative_dipoles or {}),
        trapped_fraction=float(trapped_fraction),
    )


# Saturation intensity of the 87Rb D1 line (isotropic pumping), mW/cm^2.
RB87_D1_SATURATION_MW_CM2 = 4.49


def rabi_from_intensity(intensity_uw_cm2: float, excited_decay: float = DEFAULT_EXCITED_DECAY_HZ) -> float:
    """Rabi frequency (Hz) from an intensity in uW/cm^2.

    Uses ``Omega = Gamma * sqrt(I / (2 I_sat))``.  Presets record the intensity
    next to the chosen Rabi frequency; nothing downstream reads intensities.
    """
    if intensity_uw_cm2 < 0:
        raise SchemeError("intensity must be >= 0")
    return excited_decay * math.sqrt(intensity_uw_cm2 * 1e-3 / (2 * RB87_D1_SATURATION_MW_CM2))
