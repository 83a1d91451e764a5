import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from oracles import dark_state, null_space_steady_state, three_level_generator
from nmorsim.dynamics import (
    DegenerateSteadyState,
    DensityMatrix,
    DynamicsError,
    InvariantViolation,
    build_liouvillian,
    evolve,
    evolve_periodic,
    liouvillian_family,
    steady_state,
)
from nmorsim.medium import FieldDrive, make_scheme

GAMMA = 5.7e6


def lam(gamma0=10.0, gamma=GAMMA):
    return make_scheme("single_lambda", excited_decay=gamma, ground_decoherence=gamma0)


def probe(rp, rm=None, detuning=0.0):
    return FieldDrive("probe", rp, rp if rm is None else rm, detuning)


@settings(max_examples=100, deadline=None)
@given(
    log_rp=st.floats(5, 7),
    log_rm=st.floats(5, 7),
    detuning=st.floats(-5e7, 5e7),
    delta_b=st.floats(-2e4, 2e4),
    log_g0=st.floats(1, 4),
)
def test_steady_state_matches_null_space_oracle(log_rp, log_rm, detuning, delta_b, log_g0):
    rp, rm, g0 = 10**log_rp, 10**log_rm, 10**log_g0
    rho = steady_state(build_liouvillian(lam(g0), [probe(rp, rm, detuning)], delta_b)).matrix
    ref = null_space_steady_state(rp, rm, detuning, delta_b, GAMMA, g0)
    np.testing.assert_allclose(rho, ref, rtol=0, atol=1e-9)


def test_reference_configuration_against_oracle():
    rho = steady_state(build_liouvillian(lam(10.0), [probe(1e5)], 50.0)).matrix
    ref = null_space_steady_state(1e5, 1e5, 0.0, 50.0, GAMMA, 10.0)
    np.testing.assert_allclose(rho, ref, rtol=0, atol=1e-9)
    assert abs(rho[0, 2]) > 1e-3  # a genuine ground coherence is being compared


def test_undriven_steady_state_is_unpolarised():
    rho = steady_state(build_liouvillian(lam(), [probe(0.0)], 0.0)).matrix
    np.testing.assert_allclose(rho, np.diag([0.5, 0, 0.5]), atol=1e-14)


def test_degenerate_null_space_is_reported():
    with pytest.raises(DegenerateSteadyState):
        steady_state(build_liouvillian(lam(0.0), [probe(0.0)], 0.0))


def test_dark_state_without_ground_relaxation():
    rp, rm = 2e5, 1e5
    rho = steady_state(build_liouvillian(lam(0.0), [probe(rp, rm)], 0.0)).matrix
    np.testing.assert_allclose(rho, dark_state(rp, rm), atol=1e-9)


def test_generator_is_trace_preserving():
    L = build_liouvillian(lam(), [probe(3e5, 1e5, -1e6)], 123.0)
    assert L.trace_row_defect() < 1e-6 * np.abs(L.matrix).max() * 1e-9


def _swap_super(n=3):
    perm = [2, 1, 0]
    idx = [perm[i] * n + perm[j] for i in range(n) for j in range(n)]
    return np.array(idx)


def test_liouvillian_symmetric_under_ground_swap():
    m = build_liouvillian(lam(), [probe(1e5)], 0.0).matrix
    p = _swap_super()
    np.testing.assert_array_equal(m[np.ix_(p, p)], m)


def test_zero_field_state_is_swap_invariant_and_real():
    rho = steady_state(build_liouvillian(lam(), [probe(1e5, detuning=-5e9)], 0.0))
    np.testing.assert_allclose(rho.relabel([2, 1, 0]).matrix, rho.matrix, atol=1e-15)
    assert rho[0, 2].imag == pytest.approx(0.0, abs=1e-15)


@given(st.floats(1.0, 5e3))
@settings(max_examples=25, deadline=None)
def test_field_reversal_is_ground_relabelling(delta_b):
    # swapping |1> and |3> maps H(delta_B) onto H(-delta_B) for a linear probe
    fam = liouvillian_family(lam(), [probe(3e5, detuning=-1e9)])
    plus = steady_state(fam.at(delta_b)).relabel([2, 1, 0]).matrix
    minus = steady_state(fam.at(-delta_b)).matrix
    np.testing.assert_allclose(plus, minus, rtol=0, atol=1e-15)


def test_wave_mixing_without_wm_field_embeds_single_lambda():
    drives = [probe(1e6, detuning=-5e9)]
    single = steady_state(build_liouvillian(lam(1000.0), drives, 700.0)).matrix
    wm = make_scheme("wave_mixing", excited_decay=GAMMA, ground_decoherence=1000.0)
    rho = steady_state(build_liouvillian(wm, drives + [FieldDrive.linear("wm", 0.0, -2e9)], 700.0)).matrix
    np.testing.assert_allclose(rho[:3, :3], single, rtol=0, atol=1e-15)
    assert np.abs(rho[3:, :]).max() < 1e-15


@pytest.mark.parametrize("fraction", [0.0, 0.375, 0.8])
def test_reservoir_holds_trapped_fraction(fraction):
    wm = make_scheme("wave_mixing", ground_decoherence=1000.0, trapped_fraction=fraction)
    drives = [probe(1e6, detuning=-5e9), FieldDrive.linear("wm", 5e5, -2e9)]
    rho = steady_state(build_liouvillian(wm, drives, 300.0)).matrix
    assert rho[4, 4].real == pytest.approx(fraction, abs=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-13)


def test_scheme_drive_mismatch_rejected():
    from nmorsim.medium import SchemeError

    with pytest.raises(SchemeError):
        build_liouvillian(lam(), [probe(1e5), FieldDrive.linear("wm", 1e5)], 0.0)
    with pytest.raises(SchemeError):
        build_liouvillian(lam(), [], 0.0)


# --- time evolution ------------------------------------------------------------


def test_constant_field_is_a_fixed_point():
    fam = liouvillian_family(lam(1000.0), [probe(1e6, detuning=-5e9)])
    t = np.linspace(0, 0.01, 201)
    traj = evolve(fam, 500.0, t, rho0=steady_state(fam.at(500.0)), method="propagator")
    assert np.abs(traj.states - traj.states[0]).max() < 1e-8
    assert traj.metadata["method"] == "propagator"


def test_pulse_decays_back_to_steady_state():
    fam = liouvillian_family(lam(1000.0), [probe(1e6, detuning=-5e9)])
    t = np.arange(0, 0.03, 5e-5)
    sigma = 0.002 / (2 * math.sqrt(2 * math.log(2)))
    shift = 600.0 * np.exp(-0.5 * ((t - 0.005) / sigma) ** 2)
    traj = evolve(fam, shift, t, method="propagator")
    assert np.abs(traj.states[-1] - traj.states[0]).max() < 1e-6
    assert np.abs(traj.states[100] - traj.states[0]).max() > 1e-6


def test_ground_coherence_precesses_and_decays():
    g0, db = 200.0, 1500.0
    fam = liouvillian_family(lam(g0), [probe(0.0)])
    v = np.array([1, 0, 1]) / math.sqrt(2)
    rho0 = DensityMatrix(np.outer(v, v).astype(complex))
    t = np.linspace(0, 0.004, 41)
    traj = evolve(fam, db, t, rho0=rho0, method="propagator")
    expect = 0.5 * np.exp(-2 * np.pi * g0 * t - 2j * np.pi * db * t)
    np.testing.assert_allclose(traj.element(0, 2), expect, rtol=1e-9, atol=1e-14)


def test_propagator_matches_ode_integration():
    # small rates keep a general-purpose integrator honest
    gamma, g0, rabi, det = 1e4, 50.0, 4e3, 2e3
    fam = liouvillian_family(lam(g0, gamma), [probe(rabi, 0.7 * rabi, det)])
    t = np.linspace(0, 0.02, 2001)

    def field(tt):
        return 300.0 * np.sin(2 * np.pi * 100 * tt)

    traj = evolve(fam, field(t), t, method="propagator", field=field)

    def rhs(tt, y):
        f = three_level_generator(rabi, 0.7 * rabi, det, field(tt), gamma, g0)
        return 2 * np.pi * f(y.reshape(3, 3)).ravel()

    sol = solve_ivp(rhs, (0, t[-1]), traj.states[0].ravel(), t_eval=t, rtol=1e-10, atol=1e-13, method="DOP853")
    ref = sol.y.T.reshape(-1, 3, 3)
    # local tolerance 1e-8 per step, accumulated over ~2000 intervals
    assert np.abs(traj.states - ref).max() < 1e-7
    # sampled field only: spline between samples
    spline = evolve(fam, field(t), t, method="propagator")
    assert np.abs(spline.states - ref).max() < 1e-7


def test_small_sine_is_linear_response():
    fam = liouvillian_family(lam(1000.0), [probe(1e6, detuning=-5e9)])
    fs, f = 20_000.0, 5.0
    t = np.arange(int(fs / f)) / fs
    shift = 20.0 * np.sin(2 * np.pi * f * t)
    traj = evolve(fam, shift, t, method="quasi_static")
    per_sample = np.array([steady_state(fam.at(d)).matrix[0, 2] for d in shift])
    np.testing.assert_allclose(traj.element(0, 2), per_sample, rtol=0, atol=1e-15)
    y = traj.element(0, 2).imag
    spec = np.abs(np.fft.rfft(y - y.mean()))
    assert np.sqrt(np.sum(spec[2:] ** 2)) / spec[1] < 0.01


def test_auto_method_choice_is_recorded():
    fam = liouvillian_family(lam(1000.0), [probe(1e6, detuning=-5e9)])
    t = np.linspace(0, 1, 5)
    assert evolve(fam, 0.0, t, field_timescale=10.0).method == "quasi_static"
    assert evolve(fam, 0.0, t, field_timescale=1e-4).metadata["method"] == "propagator"


def test_periodic_solution_matches_long_integration():
    fam = liouvillian_family(lam(500.0), [probe(1e6, detuning=-5e9)])
    fs, rate = 20_000.0, 40.0
    m = int(fs / rate)
    t = np.arange(m) / fs
    period = 800.0 * np.exp(-0.5 * ((t - 0.0125) / 0.00085) ** 2)
    per = evolve_periodic(fam, period, 1 / fs)
    n_periods = 6
    long = evolve(fam, np.tile(period, n_periods), np.arange(m * n_periods) / fs, method="propagator")
    np.testing.assert_allclose(long.states[-m:], per.states, rtol=0, atol=1e-10)


def test_evolve_argument_checks():
    fam = liouvillian_family(lam(), [probe(1e5)])
    with pytest.raises(DynamicsError):
        evolve(fam, 0.0, np.array([0.0, 0.0, 1.0]))
    with pytest.raises(DynamicsError):
        evolve(fam, 0.0, np.linspace(0, 1, 3), rho0=DensityMatrix(np.diag([1.0, 1.0, 0.0]).astype(complex)))
    with pytest.raises(DynamicsError):
        evolve(fam, 0.0, np.linspace(0, 1, 3), method="rk4")


def test_non_physical_generator_aborts():
    # an amplifying "relaxation" drives the trace away and must be caught, not returned
    def bad(delta_b):
        return np.eye(9) * 1e3

    rho0 = DensityMatrix(np.diag([0.5, 0, 0.5]).astype(complex))
    with pytest.raises(InvariantViolation, match="t="):
        evolve(bad, 0.0, np.linspace(0, 0.01, 11), rho0=rho0, method="propagator")


def test_density_matrix_checks():
    good = DensityMatrix(np.diag([0.5, 0, 0.5]).astype(complex))
    assert good.is_valid()
    bad = DensityMatrix(np.diag([1.2, 0, -0.2]).astype(complex))
    assert any("negative eigenvalue" in v for v in bad.violations())
