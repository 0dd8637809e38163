import math

import numpy as np
import pytest
from scipy.linalg import expm

from dampedwave.functionals import phase_norm_sq
from dampedwave.integrator import (
    BLOWUP,
    STALLED,
    SURVIVED,
    ConfigurationError,
    StepControl,
    Thresholds,
    estimate_lifespan,
    integrate,
    linear_propagator,
    step,
)
from dampedwave.model import State, make_profile, scale_initial_state, validate_coefficients
from dampedwave.oracle import fd_crossings, fd_run
from dampedwave.spectral import DomainSpec, build_basis


def damped_oscillator(t, gamma, lam=1.0):
    """c'' + gamma c' + lam c = 0, c(0) = 1, c'(0) = 0 (underdamped)."""
    w = math.sqrt(lam - gamma**2 / 4)
    return math.exp(-gamma * t / 2) * (math.cos(w * t) + gamma / (2 * w) * math.sin(w * t))


def test_oscillator_reference_value():
    assert damped_oscillator(1.0, 0.5) == pytest.approx(0.6070548491670357, rel=1e-15)


@pytest.mark.parametrize(
    "lam, damping",
    [(1.0, 0.5), (4.0, 4.0), (1.0, 2.0), (9.0, 100.0), (1e4, 1e3), (2.0, 0.0), (1.0, -0.3)],
)
@pytest.mark.parametrize("dt", [1e-4, 0.1, 1.7])
def test_propagator_matches_matrix_exponential(lam, damping, dt):
    m = np.array(linear_propagator(np.array([lam]), np.array([damping]), dt)).reshape(2, 2)
    ref = expm(np.array([[0.0, 1.0], [-lam, -damping]]) * dt)
    assert np.allclose(m, ref, rtol=1e-10, atol=1e-13)


def test_single_mode_linear_run_is_exact(basis_pi):
    coeffs = validate_coefficients(0.0, 0.5, 3, 1, basis_pi.lambda_1)
    prof = make_profile("first-mode", basis_pi)
    exact = damped_oscillator(1.0, 0.5)
    for dt in (1e-1, 1e-2, 1e-3):
        state = scale_initial_state(prof, 1.0)
        for _ in range(int(round(1 / dt))):
            state = step(state, coeffs, basis_pi, dt, mode="linear-only")
        c = basis_pi.forward(state.psi)
        assert c[0] == pytest.approx(exact, rel=1e-10)
        assert np.max(np.abs(c[1:])) < 1e-13


def test_zero_state_stays_zero(basis_pi, ref_coeffs):
    z = np.zeros(255)
    traj, est = integrate(State(z, z), ref_coeffs, basis_pi, StepControl(1e-2, 1e-2, 1.0))
    assert est.status == SURVIVED
    assert np.all(traj.column("Y") == 0)
    assert est.thresholds_hit == []


def test_linear_only_energy_nonincreasing(basis_pi):
    coeffs = validate_coefficients(0.3, -0.2, 3, 1, basis_pi.lambda_1)
    prof = make_profile("random", basis_pi, seed=4, modes=20)
    traj, _ = integrate(scale_initial_state(prof, 3.0), coeffs, basis_pi,
                        StepControl(1e-2, 1e-2, 3.0), mode="linear-only")
    Y = traj.column("Y")
    assert np.all(Y[1:] <= Y[:-1] * (1 + 1e-12))


def test_strang_scheme_second_order(basis_pi, ref_coeffs, first_mode):
    state0 = scale_initial_state(first_mode, 10.0)

    def y_at(dt):
        traj, _ = integrate(state0, ref_coeffs, basis_pi, StepControl(dt, dt, 0.5),
                            stride=int(round(0.5 / dt)))
        return traj.column("Y")[-1]

    ref = y_at(0.5 / 8000)
    errs = [abs(y_at(0.5 / n) - ref) for n in (250, 500, 1000)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 1.8) & (orders < 2.2)), orders


def test_blowup_example_rho50(basis_pi, ref_coeffs, first_mode):
    ctl = StepControl(1e-4, 1e-14, 5.0)
    _, est = integrate(scale_initial_state(first_mode, 50.0), ref_coeffs, basis_pi, ctl, stride=10)
    assert est.status == BLOWUP
    assert len(est.thresholds_hit) == 5
    times = [t for _, t in est.thresholds_hit]
    assert all(np.diff(times) > 0)
    assert est.t_star_est > times[-1]
    assert est.method in ("power-fit", "richardson")
    # independent solver: FD crossings of the same levels
    levels = [m for m, _ in est.thresholds_hit]
    fd = fd_crossings(scale_initial_state(first_mode, 50.0), ref_coeffs, basis_pi.domain, 2e-5, levels, 1.0)
    assert len(fd) == 5
    for (_, ts), (_, tf) in zip(est.thresholds_hit, fd):
        assert tf == pytest.approx(ts, rel=1e-2)


def test_lifespan_stable_under_dt_halving(basis_pi, ref_coeffs, first_mode):
    state0 = scale_initial_state(first_mode, 50.0)
    est = [integrate(state0, ref_coeffs, basis_pi, StepControl(dt, 1e-14, 5.0))[1].t_star_est
           for dt in (2e-4, 1e-4)]
    assert est[0] == pytest.approx(est[1], rel=1e-2)


def test_small_data_survives(basis_pi, ref_coeffs, first_mode):
    state0 = scale_initial_state(first_mode, 0.01)
    ctl = StepControl(1e-2, 1e-6, 10.0)
    traj, est = integrate(state0, ref_coeffs, basis_pi, ctl, stride=10)
    assert est.status == SURVIVED
    assert est.thresholds_hit == []
    # FD oracle agrees: Y decays and never reaches the first level
    levels = Thresholds().levels(traj.column("Y")[0])
    _, ys, _ = fd_run(state0, ref_coeffs, basis_pi.domain, 5e-4, 10.0, every=2000)
    assert ys.max() < levels[0] and ys[-1] < ys[0]


def test_small_data_tracks_linear_flow(basis_pi, ref_coeffs, first_mode):
    state0 = scale_initial_state(first_mode, 1e-3)
    ctl = StepControl(1e-3, 1e-3, 1.0)
    full, _ = integrate(state0, ref_coeffs, basis_pi, ctl, stride=10)
    lin, _ = integrate(state0, ref_coeffs, basis_pi, ctl, stride=10, mode="linear-only")
    rel = np.abs(full.column("Y") - lin.column("Y")) / lin.column("Y")
    assert rel.max() <= 1e-3


def test_small_data_deviation_matches_fd(basis_pi, ref_coeffs, first_mode):
    """At rho = 0.01 the nonlinear deviation is a few 1e-3; both solvers agree on it."""
    state0 = scale_initial_state(first_mode, 1e-2)
    ctl = StepControl(1e-3, 1e-3, 1.0)
    full, _ = integrate(state0, ref_coeffs, basis_pi, ctl, stride=1000)
    lin, _ = integrate(state0, ref_coeffs, basis_pi, ctl, stride=1000, mode="linear-only")
    dev = full.column("Y")[-1] / lin.column("Y")[-1] - 1
    _, yf, _ = fd_run(state0, ref_coeffs, basis_pi.domain, 5e-4, 1.0, every=2000)
    _, yl, _ = fd_run(state0, ref_coeffs, basis_pi.domain, 5e-4, 1.0, every=2000, mode="linear-only")
    assert dev == pytest.approx(yf[-1] / yl[-1] - 1, rel=2e-2)


def test_stall_when_dt_min_too_large(basis_pi, ref_coeffs, first_mode):
    ctl = StepControl(1e-2, 1e-2, 5.0, safety=0.1)
    _, est = integrate(scale_initial_state(first_mode, 200.0), ref_coeffs, basis_pi, ctl,
                       thresholds=Thresholds(base_factor=1e12))
    assert est.status == STALLED
    assert est.t_star_est is None


def test_determinism(basis_pi, ref_coeffs, first_mode):
    ctl = StepControl(1e-3, 1e-14, 5.0)
    state0 = scale_initial_state(first_mode, 30.0)
    a = integrate(state0, ref_coeffs, basis_pi, ctl, stride=5)
    b = integrate(state0, ref_coeffs, basis_pi, ctl, stride=5)
    assert a[0].samples == b[0].samples
    assert a[1].to_dict() == b[1].to_dict()


def test_samples_uniform_after_halving(basis_pi, ref_coeffs, first_mode):
    ctl = StepControl(1e-3, 1e-14, 5.0)
    traj, est = integrate(scale_initial_state(first_mode, 100.0), ref_coeffs, basis_pi, ctl, stride=5,
                          thresholds=Thresholds(base_factor=1e6, factor=100.0))
    assert est.status == BLOWUP
    assert est.dt_final < 1e-3  # halving happened
    t = traj.column("t")
    assert np.allclose(np.diff(t), 5e-3, rtol=1e-9)


def test_lp_crossings_recorded(basis_pi, ref_coeffs, first_mode):
    _, est = integrate(scale_initial_state(first_mode, 50.0), ref_coeffs, basis_pi,
                       StepControl(1e-4, 1e-14, 5.0))
    assert len(est.lp_crossings) >= 1
    assert all(t <= est.thresholds_hit[-1][1] + 1e-12 for _, t in est.lp_crossings)


@pytest.mark.parametrize("gamma, T, c", [(1.0, 2.0, 0.3), (0.5, 1.0, 0.1), (2.0, 0.37, 0.05)])
def test_estimate_lifespan_exact_power_law(gamma, T, c):
    levels = [100.0 * 4.0**j for j in range(6)]
    hits = [(m, T - c * (m / levels[0]) ** (-gamma)) for m in levels]
    est, resid, method = estimate_lifespan(hits)
    assert est == pytest.approx(T, rel=1e-9)
    assert resid < 1e-9
    assert method == "power-fit"


def test_estimate_lifespan_window_and_errors():
    levels = [4.0**j for j in range(8)]
    hits = [(m, 1.0 - 0.5 * m**-0.5) for m in levels]
    # corrupt an early crossing; the trailing window ignores it
    hits[0] = (hits[0][0], hits[0][1] - 0.2)
    assert estimate_lifespan(hits, window=5)[0] == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ValueError):
        estimate_lifespan(hits[:2])
    with pytest.raises(ValueError):
        estimate_lifespan([(1, 0.3), (2, 0.2), (3, 0.4)])


@pytest.mark.parametrize(
    "kwargs",
    [dict(dt0=1e-3, dt_min=1e-2, t_max=1), dict(dt0=1e-3, dt_min=0, t_max=1),
     dict(dt0=1e-3, dt_min=1e-4, t_max=0), dict(dt0=1e-3, dt_min=1e-4, t_max=1, safety=0)],
)
def test_step_control_validation(kwargs):
    with pytest.raises(ConfigurationError):
        StepControl(**kwargs)


def test_thresholds_validation_and_levels():
    assert Thresholds().levels(2.0) == [200.0, 800.0, 3200.0, 12800.0, 51200.0]
    assert Thresholds().levels(0.0) == []
    with pytest.raises(ConfigurationError):
        Thresholds(count=2)
    with pytest.raises(ConfigurationError):
        Thresholds(factor=1.0)


def test_bad_stride_and_mode(basis_pi, ref_coeffs, first_mode):
    with pytest.raises(ConfigurationError):
        integrate(scale_initial_state(first_mode, 1.0), ref_coeffs, basis_pi,
                  StepControl(1e-2, 1e-2, 1.0), stride=0)
    with pytest.raises((ConfigurationError, ValueError)):
        step(scale_initial_state(first_mode, 1.0), ref_coeffs, basis_pi, 1e-2, mode="bogus")


def test_two_dimensional_run():
    basis = build_basis(DomainSpec(2, (math.pi, math.pi), 31))
    coeffs = validate_coefficients(0.1, 0.1, 3, 2, basis.lambda_1)
    prof = make_profile("first-mode", basis)
    state0 = scale_initial_state(prof, 0.01)
    traj, est = integrate(state0, coeffs, basis, StepControl(1e-2, 1e-2, 2.0), stride=10)
    assert est.status == SURVIVED
    assert traj.column("Y")[0] == pytest.approx(phase_norm_sq(state0, basis), rel=1e-12)
    assert traj.column("Y")[-1] < traj.column("Y")[0]


@pytest.mark.parametrize("T, c, gamma", [(1.0, 1.0, 1.0), (2.0, 3.0, 0.5)])
def test_estimate_lifespan_reference_examples(T, c, gamma):
    levels = [10.0 * 4.0**j for j in range(5)]
    hits = [(m, T - c * m**-gamma) for m in levels]
    assert estimate_lifespan(hits)[0] == pytest.approx(T, abs=1e-6)
