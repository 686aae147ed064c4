import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadic.integrator import (
    PicardError,
    StepControl,
    SuspectedBlowUp,
    compute_L,
    etd_coefficients,
    integrate,
    L_tail,
    observed_contraction_rate,
    picard_local_solve,
)
from dyadic.shell_model import AveragedState, ModelParams, PhiSpec, ShellState, rhs_dyadic


def e1(N):
    x = np.zeros(N)
    x[0] = 1.0
    return x


def test_etd_coefficients_match_closed_form_on_both_branches():
    z = np.array([0.0, 1e-8, 5e-4, 2e-3, 0.5, 3.0, 50.0])
    p1, p2 = etd_coefficients(z)
    import mpmath as mp

    mp.mp.dps = 40
    for zi, a, b in zip(z, p1, p2):
        if zi == 0:
            assert (a, b) == (1.0, 0.5)
            continue
        zm = mp.mpf(zi)
        assert a == pytest.approx(float((1 - mp.exp(-zm)) / zm), rel=1e-14)
        assert b == pytest.approx(float((mp.exp(-zm) - 1 + zm) / zm**2), rel=1e-13)


def test_step_control_validation():
    with pytest.raises(ValueError):
        StepControl(dt_init=1.0, dt_max=0.1)
    with pytest.raises(ValueError):
        StepControl(rtol=0.0)


def test_exact_linear_decay():
    p = ModelParams(beta=1.0, N=3, g=np.ones(3), phi=PhiSpec.constant(0.0))
    traj = integrate(ShellState(0.0, e1(3)), p, 1.0, StepControl(rtol=1e-8))
    assert traj.x[-1, 0] == pytest.approx(math.exp(-2.0), rel=1e-8)
    # D_1 = 1 - exp(-4) for the single decaying mode
    assert traj.D[-1, 0] == pytest.approx(1 - math.exp(-4.0), rel=1e-6)


def test_linear_flow_exact_for_any_step():
    p = ModelParams(beta=1.0, N=4, g=np.arange(1.0, 5.0), phi=PhiSpec.constant(0.0))
    x0 = np.array([1.0, -0.5, 0.25, 2.0])
    traj = integrate(ShellState(0.0, x0), p, 3.0, StepControl(dt_init=0.1, dt_max=0.1))
    np.testing.assert_allclose(traj.x[-1], x0 * np.exp(-p.decay_rates * 3.0), rtol=1e-12)


def test_trajectory_invariants():
    p = ModelParams.from_family(1.0, 12, "linear")
    traj = integrate(ShellState(0.0, e1(12)), p, 1.0)
    assert np.all(np.diff(traj.t) > 0)
    assert np.all(traj.D >= 0)
    assert np.all(np.diff(traj.D, axis=0) >= -1e-15)
    assert traj.energy[-1] <= traj.energy[0]
    assert traj.accepted == len(traj) - 1


def test_output_times_are_hit_exactly():
    p = ModelParams.from_family(1.0, 8, "constant")
    t_out = np.linspace(0, 0.5, 6)[1:]
    traj = integrate(ShellState(0.0, e1(8)), p, 0.5, t_out=t_out)
    np.testing.assert_array_equal(traj.t, np.concatenate([[0.0], t_out]))


def test_averaged_trajectory_shapes():
    p = ModelParams.from_family(1.0, 5, "linear")
    x = np.zeros((4, 5))
    x[0, 0] = 0.3
    traj = integrate(AveragedState(0.0, x, np.full(5, 0.5)), p, 0.2)
    assert traj.x.shape[1:] == (4, 5)
    assert traj.shell_energies.shape == (len(traj), 5)
    assert traj.final.x.shape == (4, 5)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["constant", "sqrt", "linear"]))
def test_energy_inequality_on_random_data(seed, family):
    rng = np.random.default_rng(seed)
    N = 10
    x = rng.uniform(-1, 1, N) * np.exp2(-np.arange(N))
    p = ModelParams.from_family(1.0, N, family, phi=PhiSpec.constant(rng.uniform(-1, 1)))
    ctrl = StepControl(rtol=1e-7)
    traj = integrate(ShellState(0.0, x), p, 0.5, ctrl)
    E0 = traj.energy[0]
    total = traj.energy + traj.D.sum(axis=1)
    assert np.all(total <= E0 * (1 + 100 * ctrl.rtol) + ctrl.atol)


def test_matches_independent_implicit_reference():
    from scipy.integrate import solve_ivp

    N = 20
    p = ModelParams.from_family(1.0, N, "constant")
    t_out = np.linspace(0, 1.0, 11)[1:]
    ctrl = StepControl(rtol=1e-8, atol=1e-12)
    traj = integrate(ShellState(0.0, e1(N)), p, 1.0, ctrl, t_out=t_out)

    def f(t, x):
        return rhs_dyadic(ShellState(t, x), p)

    def jac(t, x):
        k = p.k
        J = np.diag(-p.decay_rates - k[1 : N + 1] * np.append(x[1:], 0.0))
        J[np.arange(N - 1), np.arange(1, N)] = -k[1:N] * x[:-1]
        J[np.arange(1, N), np.arange(N - 1)] = 2 * k[1:N] * x[:-1]
        return J

    ref = solve_ivp(f, (0, 1.0), e1(N), method="Radau", rtol=1e-9, atol=1e-13,
                    t_eval=t_out, jac=jac)
    assert ref.success
    err = np.max(np.linalg.norm(traj.x[1:] - ref.y.T, axis=1))
    assert err <= 1e-6


def test_step_budget_exhaustion_is_reported():
    p = ModelParams.from_family(1.0, 10, "linear")
    with pytest.raises(SuspectedBlowUp) as info:
        integrate(ShellState(0.0, e1(10)), p, 5.0, StepControl(max_steps=10))
    assert info.value.reason == "max_steps"
    assert info.value.last_state.x.shape == (10,)
    assert info.value.stats["accepted"] + info.value.stats["rejected"] == 10


def test_bad_arguments():
    p = ModelParams.from_family(1.0, 4, "linear")
    with pytest.raises(ValueError):
        integrate(ShellState(1.0, e1(4)), p, 0.5)
    with pytest.raises(ValueError):
        integrate(ShellState(0.0, e1(5)), p, 0.5)


# -- contraction modulus ------------------------------------------------------

def test_L_vanishes_at_zero():
    assert compute_L(0.0, ModelParams.from_family(1.0, 10, "constant"), 1.0) == 0.0


def test_L_negative_eta():
    with pytest.raises(ValueError):
        compute_L(-1e-3, ModelParams.from_family(1.0, 10, "constant"), 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.sampled_from(["constant", "linear", "sqrt"]))
def test_L_monotone(a, b, family):
    p = ModelParams.from_family(1.0, 15, family)
    lo, hi = sorted((a, b))
    assert compute_L(lo, p, 1.0) <= compute_L(hi, p, 1.0)


def test_L_against_high_precision_sum():
    # 50-digit direct summation of the ten terms
    p = ModelParams.from_family(1.0, 10, "constant")
    assert compute_L(0.01, p, 1.0) == pytest.approx(0.0937391799036754619304251852607, rel=1e-14)


def test_L_tail_small_for_summable_family():
    p = ModelParams.from_family(1.0, 20, "linear")
    tail = L_tail(p, 1.0)
    assert 0 < tail < 1e-8


# -- Picard local solver ------------------------------------------------------

def test_picard_zero_data():
    p = ModelParams.from_family(1.0, 6, "constant")
    res = picard_local_solve(ShellState(0.0, np.zeros(6)), p, s=1.0, n_grid=64)
    assert np.all(res.x == 0)
    assert res.iterations == 1


def test_picard_linear_case_converges_at_once():
    p = ModelParams.from_family(1.0, 6, "linear", phi=PhiSpec.constant(0.0))
    x0 = np.array([1.0, 0.5, 0.25, 0, 0, 0])
    res = picard_local_solve(ShellState(0.0, x0), p, s=1.0, n_grid=64, keep_iterates=True)
    assert res.iterations <= 2
    exact = x0[None, :] * np.exp(-np.outer(res.t, p.decay_rates))
    np.testing.assert_allclose(res.x, exact, rtol=0, atol=1e-15)
    assert observed_contraction_rate(res.iterates, 1.0) == 0.0


def test_picard_agrees_with_integrator():
    N = 20
    p = ModelParams.from_family(1.0, N, "constant")
    res = picard_local_solve(ShellState(0.0, e1(N)), p, s=1.0, theta=0.5, iter_tol=1e-12)
    ctrl = StepControl(rtol=1e-10, atol=1e-14, dt_init=1e-6)
    traj = integrate(ShellState(0.0, e1(N)), p, res.eta, ctrl, t_out=res.t[1:])
    diff = np.max(np.linalg.norm(traj.x - res.x, axis=1))
    assert diff <= 10 * max(1e-12, ctrl.rtol)
    assert res.contraction_rate <= 0.5 + 0.05
    assert res.stayed_in_ball
    assert compute_L(res.eta, p, 1.0) <= res.threshold


def test_picard_rejects_bad_theta():
    p = ModelParams.from_family(1.0, 5, "constant")
    with pytest.raises(ValueError):
        picard_local_solve(ShellState(0.0, e1(5)), p, theta=1.5)


def test_picard_iteration_cap():
    p = ModelParams.from_family(1.0, 8, "constant")
    with pytest.raises(PicardError):
        picard_local_solve(ShellState(0.0, e1(8)), p, s=1.0, max_iter=1, iter_tol=0.0,
                           n_grid=32)


def test_contraction_rate_examples():
    a = np.zeros((3, 2))
    assert observed_contraction_rate([a, a, a], 1.0) == 0.0
    its = [np.full((2, 2), v) for v in (0.0, 1.0, 1.5, 1.75)]
    assert observed_contraction_rate(its, 0.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        observed_contraction_rate([a, a], 1.0)
