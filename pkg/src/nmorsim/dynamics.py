"""Lindblad dynamics of a level scheme in the probe rotating frame.

Vectorisation is row-major (``numpy.ravel``), so ``vec(A rho B) = (A kron B.T) vec(rho)``
and ``L[i*n + i, :]`` is the row that drives the population ``rho_ii``.

Generator, in angular units and with hbar = 1::

    d rho/dt = -i [H, rho]
               + sum_c (C rho C^+ - {C^+ C, rho}/2)        excited decay
               + gamma_0 (sigma Tr(rho) - rho)               ground relaxation

``H`` holds the ground Zeeman energies ``+-delta_B/2``, the excited-state
energies ``-delta`` of each drive, and the couplings ``Omega/2`` per branch.
Each excited state decays at Gamma, split equally over the ground states it
couples to.  The ground relaxation resets the atom to the unpolarised mixture
``sigma`` at rate gamma_0: in the dark the Zeeman coherence decays at exactly
gamma_0 and both ground states end up equally populated, which makes the
steady state unique for any gamma_0 > 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.interpolate
import scipy.linalg

from .medium import GROUND_1, GROUND_3, FieldDrive, LevelScheme, SchemeError

TWO_PI = 2 * np.pi

# Sign of the Zeeman energy of |1>; chosen so that a positive delta_B gives a
# positive polarimeter voltage for red-detuned light (the presets).
ZEEMAN_SIGN = 1.0

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-9
# Raw (pre-symmetrisation) tolerances inside evolve; beyond these the run aborts.
ABORT_TOL = 1e-8


class DynamicsError(RuntimeError):
    """Solver failure: degenerate steady state, invalid grid, broken invariant."""


class DegenerateSteadyState(DynamicsError):
    pass


class InvariantViolation(DynamicsError):
    pass


@dataclass(frozen=True)
class DensityMatrix:
    """Complex Hermitian unit-trace state."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __getitem__(self, idx):
        return self.matrix[idx]

    @classmethod
    def from_vec(cls, vec: np.ndarray) -> "DensityMatrix":
        n = math.isqrt(vec.size)
        rho = vec.reshape(n, n)
        return cls(0.5 * (rho + rho.conj().T))

    @classmethod
    def diagonal(cls, populations: Sequence[float]) -> "DensityMatrix":
        return cls(np.diag(np.asarray(populations, dtype=complex)))

    def vec(self) -> np.ndarray:
        return self.matrix.ravel()

    def hermiticity_error(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def trace_error(self) -> float:
        return float(abs(np.trace(self.matrix) - 1.0))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())

    def violations(self) -> list[str]:
        out = []
        if self.hermiticity_error() >= HERMITIAN_TOL:
            out.append(f"non-Hermitian by {self.hermiticity_error():.3g}")
        if self.trace_error() >= TRACE_TOL:
            out.append(f"trace off by {self.trace_error():.3g}")
        if self.min_eigenvalue() < -POSITIVITY_TOL:
            out.append(f"negative eigenvalue {self.min_eigenvalue():.3g}")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    def relabel(self, perm: Sequence[int]) -> "DensityMatrix":
        p = np.asarray(perm)
        return DensityMatrix(self.matrix[np.ix_(p, p)])


@dataclass(frozen=True)
class Liouvillian:
    matrix: np.ndarray
    dim: int
    delta_b: float
    drives: tuple[FieldDrive, ...] = ()
    scheme: Optional[LevelScheme] = field(default=None, repr=False)

    def trace_row_defect(self) -> float:
        """max_jk |sum_i L[(i,i),(j,k)]|, zero for a trace-preserving generator."""
        n = self.dim
        rows = self.matrix[[i * n + i for i in range(n)], :]
        return float(np.abs(rows.sum(axis=0)).max())

    def apply(self, rho: DensityMatrix) -> np.ndarray:
        return (self.matrix @ rho.vec()).reshape(self.dim, self.dim)


def _commutator_super(h: np.ndarray) -> np.ndarray:
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def _dissipator_super(c: np.ndarray) -> np.ndarray:
    eye = np.eye(c.shape[0])
    cdc = c.conj().T @ c
    return np.kron(c, c.conj()) - 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))


def _drive_table(scheme: LevelScheme, drives: Sequence[FieldDrive]) -> dict[str, FieldDrive]:
    by_role: dict[str, FieldDrive] = {}
    for d in drives:
        if d.role in by_role:
            raise SchemeError(f"more than one {d.role} drive")
        by_role[d.role] = d
    if "probe" not in by_role:
        raise SchemeError("exactly one probe drive is required")
    if "wm" in by_role and not scheme.has_wm:
        raise SchemeError(
            f"{scheme.kind} scheme ({scheme.n_states} states) has no branches for a wm drive"
        )
    return by_role


def hamiltonian(scheme: LevelScheme, drives: Sequence[FieldDrive], delta_b: float) -> np.ndarray:
    """Rotating-frame Hamiltonian in rad/s."""
    table = _drive_table(scheme, drives)
    n = scheme.n_states
    h = np.zeros((n, n), dtype=complex)
    h[GROUND_1, GROUND_1] = ZEEMAN_SIGN * delta_b / 2
    h[GROUND_3, GROUND_3] = -ZEEMAN_SIGN * delta_b / 2
    for role, (lower, upper) in scheme.branch_map.items():
        drive_role, pol = role[:-1], role[-1]
        drive = table.get(drive_role)
        if drive is None:
            continue
        h[upper, upper] = -drive.detuning
        rabi = drive.rabi_plus if pol == "+" else drive.rabi_minus
        coupling = 0.5 * rabi * scheme.dipole(role)
        h[upper, lower] += coupling
        h[lower, upper] += coupling
    return TWO_PI * h


def relaxation_super(scheme: LevelScheme) -> np.ndarray:
    n = scheme.n_states
    out = np.zeros((n * n, n * n), dtype=complex)
    gamma = TWO_PI * scheme.excited_decay
    for excited in scheme.excited_states:
        grounds = sorted({lo for lo, up in scheme.branch_map.values() if up == excited})
        for g in grounds:
            c = np.zeros((n, n))
            c[g, excited] = math.sqrt(gamma / len(grounds))
            out += _dissipator_super(c)
    gamma0 = TWO_PI * scheme.ground_decoherence
    if gamma0 > 0:
        sigma = np.diag(scheme.equilibrium_populations())
        out += gamma0 * (np.outer(sigma.ravel(), np.eye(n).ravel()) - np.eye(n * n))
    return out


@dataclass(frozen=True)
class LiouvillianFamily:
    """``L(delta_B) = base + delta_B * zeeman``; delta_B in Hz."""

    base: np.ndarray
    zeeman: np.ndarray
    scheme: LevelScheme
    drives: tuple[FieldDrive, ...]

    @property
    def dim(self) -> int:
        return self.scheme.n_states

    def matrix(self, delta_b: float) -> np.ndarray:
        return self.base + delta_b * self.zeeman

    def at(self, delta_b: float) -> Liouvillian:
        return Liouvillian(self.matrix(delta_b), self.dim, float(delta_b), self.drives, self.scheme)

    __call__ = at

    @property
    def response_rate(self) -> float:
        """Smallest nonzero relaxation rate (rad/s)."""
        rates = [r for r in (self.scheme.ground_decoherence, self.scheme.excited_decay) if r > 0]
        return TWO_PI * min(rates) if rates else 0.0


def liouvillian_family(scheme: LevelScheme, drives: Sequence[FieldDrive]) -> LiouvillianFamily:
    drives = tuple(drives)
    base = _commutator_super(hamiltonian(scheme, drives, 0.0)) + relaxation_super(scheme)
    n = scheme.n_states
    hz = np.zeros((n, n))
    hz[GROUND_1, GROUND_1] = ZEEMAN_SIGN * TWO_PI / 2
    hz[GROUND_3, GROUND_3] = -ZEEMAN_SIGN * TWO_PI / 2
    return LiouvillianFamily(base, _commutator_super(hz), scheme, drives)


def build_liouvillian(scheme: LevelScheme, drives: Sequence[FieldDrive], delta_b: float) -> Liouvillian:
    """Superoperator ``L`` with ``d vec(rho)/dt = L vec(rho)`` at Zeeman shift ``delta_b`` (Hz)."""
    drives = tuple(drives)
    mat = _commutator_super(hamiltonian(scheme, drives, delta_b)) + relaxation_super(scheme)
    return Liouvillian(mat, scheme.n_states, float(delta_b), drives, scheme)


REFINEMENT_STEPS = 2


def _bordered_solve(mat: np.ndarray, n: int) -> np.ndarray:
    a = mat.copy()
    a[0, :] = np.eye(n).ravel()
    rhs = np.zeros(n * n, dtype=complex)
    rhs[0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu = scipy.linalg.lu_factor(a, check_finite=False)
    if np.any(np.diag(lu[0]) == 0):
        raise np.linalg.LinAlgError("singular bordered Liouvillian")
    x = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
    # detunings of GHz against ground rates of Hz leave ~1e-10 relative error
    # in the coherences; residuals in extended precision recover most of it
    a_ext = a.astype(np.clongdouble)
    for _ in range(REFINEMENT_STEPS):
        r = (rhs - a_ext @ x.astype(np.clongdouble)).astype(complex)
        x = x + scipy.linalg.lu_solve(lu, r, check_finite=False)
    return x


def null_space_dimension(mat: np.ndarray) -> int:
    s = scipy.linalg.svdvals(mat)
    tol = mat.shape[0] * np.finfo(float).eps * s[0]
    return int(np.sum(s <= tol))


def steady_state(L: Union[Liouvillian, np.ndarray], *, check_unique: bool = True) -> DensityMatrix:
    """Stationary state of ``L``.

    Solves ``L vec(rho) = 0`` with the population equation of ``rho_11``
    replaced by ``Tr(rho) = 1``.  With ``check_unique`` the null space is
    inspected first and a :class:`DegenerateSteadyState` raised if it is not
    one-dimensional.
    """
    mat = L.matrix if isinstance(L, Liouvillian) else np.asarray(L)
    n = math.isqrt(mat.shape[0])
    if check_unique:
        k = null_space_dimension(mat)
        if k != 1:
            raise DegenerateSteadyState(f"null space of L has dimension {k}; steady state not unique")
    try:
        x = _bordered_solve(mat, n)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSteadyState(str(exc)) from exc
    return DensityMatrix.from_vec(x)


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (n_t, d, d)
    delta_b: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> DensityMatrix:
        return DensityMatrix(self.states[i])

    def element(self, i: int, j: int) -> np.ndarray:
        return self.states[:, i, j]

    def invariant_errors(self) -> dict[str, float]:
        s = self.states
        herm = np.abs(s - np.conj(np.swapaxes(s, 1, 2))).max()
        trace = np.abs(np.trace(s, axis1=1, axis2=2) - 1).max()
        herm_part = 0.5 * (s + np.conj(np.swapaxes(s, 1, 2)))
        min_eig = np.linalg.eigvalsh(herm_part).min()
        return {"hermiticity": float(herm), "trace": float(trace), "min_eigenvalue": float(min_eig)}

    def check_invariants(self) -> list[str]:
        err = self.invariant_errors()
        out = []
        if err["hermiticity"] >= HERMITIAN_TOL:
            out.append(f"hermiticity {err['hermiticity']:.3g}")
        if err["trace"] >= TRACE_TOL:
            out.append(f"trace {err['trace']:.3g}")
        if err["min_eigenvalue"] < -POSITIVITY_TOL:
            out.append(f"min eigenvalue {err['min_eigenvalue']:.3g}")
        return out


FamilyLike = Union[LiouvillianFamily, Callable[[float], Union[Liouvillian, np.ndarray]]]


def _matrix_at(family: FamilyLike, delta_b: float) -> np.ndarray:
    if isinstance(family, LiouvillianFamily):
        return family.matrix(delta_b)
    out = family(delta_b)
    return out.matrix if isinstance(out, Liouvillian) else np.asarray(out)


def _checked(vec: np.ndarray, n: int, t: float) -> np.ndarray:
    rho = vec.reshape(n, n)
    anti = np.abs(rho - rho.conj().T).max()
    tr = abs(np.trace(rho) - 1)
    if anti > ABORT_TOL or tr > ABORT_TOL:
        raise InvariantViolation(
            f"state left the physical set at t={t:.6g} s (anti-Hermitian {anti:.3g}, trace error {tr:.3g})"
        )
    rho = 0.5 * (rho + rho.conj().T)
    lam = np.linalg.eigvalsh(rho).min()
    if lam < -POSITIVITY_TOL:
        raise InvariantViolation(f"negative eigenvalue {lam:.3g} at t={t:.6g} s")
    return rho


# Local error target of the propagator, elementwise relative.
EVOLVE_TOL = 1e-8
# Interval halvings allowed before giving up with a step-size underflow.
MAX_HALVINGS = 8

_GAUSS = 0.5 / math.sqrt(3.0)
_MAGNUS_C = math.sqrt(3.0) / 12.0

FieldPath = Callable[[np.ndarray], np.ndarray]


def _field_path(t: np.ndarray, delta_b: np.ndarray, field: Optional[FieldPath], period: Optional[float] = None):
    """Zeeman shift between samples: ``field`` if given, else a cubic spline through the samples."""
    if field is not None:
        return lambda x: np.asarray(field(np.asarray(x, dtype=float)), dtype=float)
    if period is not None:
        if delta_b.size < 3:
            return lambda x: np.interp(np.mod(x, period), np.r_[t, period], np.r_[delta_b, delta_b[0]])
        spline = scipy.interpolate.CubicSpline(np.r_[t, period], np.r_[delta_b, delta_b[0]], bc_type="periodic")
        return lambda x: spline(np.mod(x, period))
    if delta_b.size < 4:
        return lambda x: np.interp(x, t, delta_b)
    return scipy.interpolate.CubicSpline(t, delta_b)


class _Stepper:
    """Exponential steps in the adiabatic frame ``rho = rho_ss(delta_B(t)) + eta``.

    ``eta`` obeys ``d eta/dt = L(t) eta - d rho_ss/dt``.  Over ``[a, b]`` with
    ``h = b - a``, Gauss-point generators ``A1``, ``A2`` and ``tau = (t - a)/h``::

        Omega  = h (A1 + A2) / 2 + (sqrt(3) / 12) h^2 [A2, A1]      (Magnus, 4th order)
        eta(b) = exp(Omega) eta(a) - phi1(Omega) s0 - phi2(Omega) s1

    where ``s0 + s1 tau`` is d rho_ss/d tau of the quadratic through the steady
    states at ``a``, the midpoint and ``b``; the phi terms come from one
    augmented matrix exponential.  For ``L = base + delta_B Z`` the commutator
    is ``(d2 - d1) [Z, base]``.  The optical coherences follow the field within
    nanoseconds; carrying them in ``rho_ss`` puts them at the end-point field
    exactly, and the remaining ``eta`` is small, so the field-driven part of
    ``rho`` keeps its full relative precision.
    """

    def __init__(self, family: FamilyLike, path, n: int):
        self.family, self.path, self.n = family, path, n
        if isinstance(family, LiouvillianFamily):
            self.comm = family.zeeman @ family.base - family.base @ family.zeeman
        else:
            self.comm = None
        self._ss: dict[float, np.ndarray] = {}

    def steady(self, d: float) -> np.ndarray:
        if d not in self._ss:
            if len(self._ss) > 256:
                self._ss.clear()
            self._ss[d] = _bordered_solve(_matrix_at(self.family, d), self.n)
        return self._ss[d]

    def operators(self, a: float, b: float):
        """``(E, anchor, base)`` with ``rho(b) = base + E (rho(a) - anchor)``."""
        h = b - a
        c = 0.5 * (a + b)
        d1, d2, da, dm, db = (float(v) for v in self.path(np.array([c - _GAUSS * h, c + _GAUSS * h, a, c, b])))
        if self.comm is not None:
            omega = h * self.family.matrix(0.5 * (d1 + d2)) + _MAGNUS_C * h * h * (d2 - d1) * self.comm
        else:
            a1, a2 = _matrix_at(self.family, d1), _matrix_at(self.family, d2)
            omega = 0.5 * h * (a1 + a2) + _MAGNUS_C * h * h * (a2 @ a1 - a1 @ a2)
        ra, rm, rb = self.steady(da), self.steady(dm), self.steady(db)
        nn = omega.shape[0]
        if da == dm == db:
            return scipy.linalg.expm(omega), ra, rb
        aug = np.zeros((nn + 2, nn + 2), dtype=complex)
        aug[:nn, :nn] = omega
        aug[:nn, nn] = 4 * (ra + rb - 2 * rm)  # s1
        aug[:nn, nn + 1] = 4 * rm - 3 * ra - rb  # s0
        aug[nn, nn + 1] = 1.0
        x = scipy.linalg.expm(aug)
        return x[:nn, :nn], ra, rb - x[:nn, nn + 1]

    def interval(self, a: float, b: float, rho: np.ndarray, tol: float) -> list:
        """Sub-step operators covering ``[a, b]``, halved until the local error estimate meets ``tol``.

        The estimate compares one step against two half steps, elementwise
        relative to ``|rho|`` (floored at 1e-6 of its largest element); ``rho``
        is the state at ``a``.
        """
        whole = [self.operators(a, b)]
        weight = np.abs(rho) + 1e-6 * np.abs(rho).max()
        for depth in range(1, MAX_HALVINGS + 1):
            k = 1 << depth
            edges = np.linspace(a, b, k + 1)
            halves = [self.operators(edges[i], edges[i + 1]) for i in range(k)]
            err = float(np.max(np.abs(_apply(whole, rho) - _apply(halves, rho)) / weight)) / 7.0
            if err <= tol:
                return halves
            whole = halves
        raise DynamicsError(
            f"step-size underflow on [{a:.6g}, {b:.6g}] s: relative local error {err:.3g} after "
            f"{1 << MAX_HALVINGS} sub-steps (is the field discontinuous inside the interval?)"
        )


def _apply(ops: list, rho: np.ndarray) -> np.ndarray:
    for prop, anchor, base in ops:
        rho = base + prop @ (rho - anchor)
    return rho


def evolve(
    family: FamilyLike,
    delta_b: np.ndarray,
    t_grid: np.ndarray,
    rho0: Optional[DensityMatrix] = None,
    *,
    method: str = "auto",
    field_timescale: Optional[float] = None,
    field: Optional[FieldPath] = None,
    tol: float = EVOLVE_TOL,
) -> Trajectory:
    """Integrate the master equation along a Zeeman shift ``delta_b(t)`` (Hz) sampled on ``t_grid``.

    ``method="propagator"`` steps each grid interval with exponential
    Magnus steps (see :class:`_Stepper`), halving the interval until the
    step-doubling estimate of the elementwise relative error is below
    ``tol``; :class:`DynamicsError` reports a step-size underflow after
    ``MAX_HALVINGS`` halvings.  Between samples the shift is ``field(t)`` when
    given (vectorised, Hz), otherwise a cubic spline through ``delta_b``.

    ``method="quasi_static"`` returns the steady state of ``L(delta_b(t))`` at
    every sample.  ``"auto"`` picks it when ``field_timescale`` (s) exceeds
    100 times the slowest relaxation time, otherwise propagates.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    delta_b = np.broadcast_to(np.asarray(delta_b, dtype=float), t_grid.shape)
    if t_grid.ndim != 1 or t_grid.size < 1:
        raise DynamicsError("t_grid must be a non-empty 1-D array")
    if t_grid.size > 1 and not np.all(np.diff(t_grid) > 0):
        raise DynamicsError("t_grid must be strictly increasing")
    mat0 = _matrix_at(family, float(delta_b[0]))
    n = math.isqrt(mat0.shape[0])

    chosen = method
    if method == "auto":
        rate = family.response_rate if isinstance(family, LiouvillianFamily) else 0.0
        quasi = field_timescale is not None and rate > 0 and field_timescale * rate >= 100
        chosen = "quasi_static" if quasi else "propagator"
    if chosen not in ("quasi_static", "propagator"):
        raise DynamicsError(f"unknown method {method!r}")

    states = np.empty((t_grid.size, n, n), dtype=complex)
    substeps = 0
    if chosen == "quasi_static":
        steady_state(mat0)  # uniqueness check once
        for k, d in enumerate(delta_b):
            states[k] = _checked(_bordered_solve(_matrix_at(family, float(d)), n), n, t_grid[k])
    else:
        if rho0 is None:
            rho0 = steady_state(mat0)
        if rho0.dim != n:
            raise DynamicsError(f"rho0 has dimension {rho0.dim}, Liouvillian acts on {n}")
        bad = rho0.violations()
        if bad:
            raise DynamicsError("rho0 is not a valid density matrix: " + "; ".join(bad))
        stepper = _Stepper(family, _field_path(t_grid, np.array(delta_b), field), n)
        rho = rho0.vec().copy()
        states[0] = rho0.matrix
        for k in range(t_grid.size - 1):
            ops = stepper.interval(t_grid[k], t_grid[k + 1], rho, tol)
            substeps += len(ops)
            states[k + 1] = _checked(_apply(ops, rho), n, t_grid[k + 1])
            rho = states[k + 1].ravel()
    meta = {"method": chosen}
    if chosen == "propagator":
        meta.update(integrator="adiabatic_magnus", tol=tol, substeps=substeps)
    return Trajectory(t_grid, states, np.array(delta_b), chosen, meta)


def evolve_periodic(
    family: FamilyLike,
    delta_b_period: np.ndarray,
    dt: float,
    *,
    field: Optional[FieldPath] = None,
    tol: float = EVOLVE_TOL,
) -> Trajectory:
    """Periodic steady state for a field repeating every ``len(delta_b_period) * dt``.

    The one-period map ``rho -> A rho + b`` is composed from the same
    error-controlled steps as :func:`evolve` (the error of each
    interval is estimated on the quasi-static state at its start) and its
    trace-one fixed point is solved for directly, so no transient has to be
    integrated away.  ``field``, if given, must have the same period.
    Samples are returned at ``t = k dt`` for one period.
    """
    delta_b_period = np.asarray(delta_b_period, dtype=float)
    m = delta_b_period.size
    if m < 1 or not dt > 0:
        raise DynamicsError("need at least one sample and dt > 0")
    n = math.isqrt(_matrix_at(family, float(delta_b_period[0])).shape[0])
    nn = n * n
    steady_state(_matrix_at(family, float(delta_b_period[0])))  # uniqueness check once
    t = np.arange(m) * dt
    stepper = _Stepper(family, _field_path(t, delta_b_period, field, period=m * dt), n)
    intervals = []
    a = np.eye(nn, dtype=complex)
    b = np.zeros(nn, dtype=complex)
    for k in range(m):
        probe = _bordered_solve(_matrix_at(family, float(delta_b_period[k])), n)
        ops = stepper.interval(k * dt, (k + 1) * dt, probe, tol)
        intervals.append(ops)
        for prop, anchor, base in ops:
            a = prop @ a
            b = base + prop @ (b - anchor)
    # (A - I) x = -b with the rho_11 row replaced by Tr x = 1
    system = a - np.eye(nn)
    system[0, :] = np.eye(n).ravel()
    rhs = -b
    rhs[0] = 1.0
    rho = np.linalg.solve(system, rhs)
    states = np.empty((m, n, n), dtype=complex)
    states[0] = _checked(rho, n, 0.0)
    rho = states[0].ravel()
    for k in range(m - 1):
        states[k + 1] = _checked(_apply(intervals[k], rho), n, t[k + 1])
        rho = states[k + 1].ravel()
    meta = {
        "method": "periodic",
        "period_s": m * dt,
        "integrator": "adiabatic_magnus",
        "tol": tol,
        "substeps": sum(len(ops) for ops in intervals),
    }
    return Trajectory(t, states, delta_b_period.copy(), "periodic", meta)
