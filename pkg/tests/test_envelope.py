import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dyadic.envelope import (
    C_n,
    SubsequenceExhausted,
    adjacent_pairs_growth,
    auto_ladder,
    bounding_sequence,
    count_adjacent_pairs,
    d_n_squared,
    d_squared_table,
    dn_recursion_excess,
    envelope_dominates,
    product_bound_excess,
    select_ladder_parameters,
    special_subsequence,
    summability_report,
    tail_sums,
    verify_decay_ladder,
    weighted_tail_sum,
)
from dyadic.integrator import StepControl, integrate
from dyadic.shell_model import ModelParams, ShellState, g_table

small = st.floats(-1.0, 1.0, allow_nan=False)


def e1(N):
    x = np.zeros(N)
    x[0] = 1.0
    return x


@pytest.fixture(scope="module")
def conjecture_run():
    p = ModelParams.from_family(1.0, 16, "linear", monotone_g=True)
    return integrate(ShellState(0.0, e1(16)), p, 2.0, StepControl(rtol=1e-8))


# -- C_n ------------------------------------------------------------------------

def test_C_examples():
    assert C_n(1.0, 2.0, 1.0) == 0.5
    assert C_n(0.5, 4.0, 1.0) == 0.5
    assert C_n(0.0, 3.0, 1.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-12, 1e-3), st.floats(0.1, 10), st.floats(0.1, 10))
def test_C_first_order_bound(v, g, phi):
    assert C_n(v, g, phi) <= 0.5 * g * phi * v


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3), st.floats(0.1, 10), st.floats(0.1, 10))
def test_C_increasing_and_in_unit_interval(a, b, g, phi):
    assume(a < b)
    ca, cb = C_n(a, g, phi), C_n(b, g, phi)
    assert 0 < ca <= cb < 1


def test_C_rejects_bad_arguments():
    for args in ((-1.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, -2.0)):
        with pytest.raises(ValueError):
            C_n(*args)


# -- bounding sequence --------------------------------------------------------

def test_tail_sums_exact_at_truncation():
    np.testing.assert_array_equal(tail_sums(np.array([1.0, 2.0, 3.0])), [6.0, 5.0, 3.0])


def test_first_unit_mode_against_high_precision():
    bs = bounding_sequence(e1(5), g=g_table("linear", 5), phi_sup=1.0)
    assert bs.y[0] == bs.y[1] == 2.0
    # 113-bit evaluation of C_3(sqrt 2) * 2 with g_3 = 3
    assert bs.y[2] == pytest.approx(1.35924551796591852959855252211, rel=1e-15)
    assert np.isnan(bs.c[0]) and np.isnan(bs.c[1])


def test_zero_data_gives_zero_sequence():
    bs = bounding_sequence(np.zeros(10), g=np.ones(10), phi_sup=1.0)
    assert np.all(bs.y == 0)
    assert np.all(bs.c[2:] == 0)


def test_monotone_data_against_quad_precision():
    N = 20
    n = np.arange(1, N + 1)
    bs = bounding_sequence(np.exp2(-n), g=g_table("linear", N), phi_sup=1.0)
    # 113-bit recomputation of the recursion
    expected = {3: 0.3878401714771692944283238, 5: 0.2359008695881279664854586,
                10: 0.0811807359529460153359735, 20: 0.0024394556415369150991826}
    for k, v in expected.items():
        assert bs.y[k - 1] == pytest.approx(v, rel=1e-13)
    assert np.all(np.diff(bs.y[2:]) < 0)


def test_requires_positive_phi_and_g():
    with pytest.raises(ValueError):
        bounding_sequence(e1(4), g=np.ones(4), phi_sup=0.0)
    with pytest.raises(ValueError):
        bounding_sequence(e1(4), g=np.ones(3), phi_sup=1.0)
    with pytest.raises(ValueError):
        bounding_sequence(e1(4))


def test_from_params_uses_phi_sup():
    p = ModelParams.from_family(1.0, 6, "sqrt")
    a = bounding_sequence(e1(6), p)
    b = bounding_sequence(e1(6), g=p.gN, phi_sup=1.0)
    np.testing.assert_array_equal(a.y, b.y)


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(3, 40), elements=small), st.sampled_from(["constant", "sqrt", "linear"]))
def test_structure_of_sequence(x, family):
    bs = bounding_sequence(x, g=g_table(family, x.size), phi_sup=1.0)
    assert bs.y[0] == bs.y[1] == pytest.approx(2 * np.sum(x * x))
    assert bs.reconstruction_excess() == 0.0
    c = bs.c[2:]
    assert np.all((c >= 0) & (c < 1))
    if np.all(bs.y[1:-1] > 0):
        assert np.all(c > 0)
    np.testing.assert_allclose(bs.h, bs.h_closed_form(), rtol=1e-13, atol=1e-300)


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(4, 30), elements=small), st.data())
def test_product_bound(x, data):
    bs = bounding_sequence(x, g=g_table("linear", x.size), phi_sup=1.0)
    n = data.draw(st.integers(1, x.size - 2))
    m = data.draw(st.integers(1, (x.size - n) // 2))
    assert product_bound_excess(bs, n, m) <= 1e-15 * max(bs.y[0], 1e-300)


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(3, 30), elements=small),
       arrays(float, 30, elements=st.floats(0, 5)))
def test_larger_g_gives_larger_envelope(x, bump):
    g = g_table("sqrt", x.size)
    g2 = g + bump[: x.size]
    y1 = bounding_sequence(x, g=g, phi_sup=1.0).y
    y2 = bounding_sequence(x, g=g2, phi_sup=1.0).y
    assert np.all(y1 <= y2 * (1 + 1e-14))


@pytest.mark.parametrize("family", ["constant", "sqrt", "linear"])
def test_envelope_vanishes_at_the_end(family):
    N = 60
    bs = bounding_sequence(4.0 ** -np.arange(1, N + 1), g=g_table(family, N), phi_sup=1.0)
    assert bs.y[-6:].max() < 1e-3 * bs.y.max()


# -- domination and d_n ---------------------------------------------------------

def test_zero_trajectory_has_no_violations():
    p = ModelParams.from_family(1.0, 5, "linear")
    traj = integrate(ShellState(0.0, np.zeros(5)), p, 0.1)
    rep = envelope_dominates(traj, bounding_sequence(np.zeros(5), p))
    assert rep.passed and rep.max_excess == 0.0


def test_run_stays_under_envelope(conjecture_run):
    bs = bounding_sequence(conjecture_run.x[0], conjecture_run.params)
    rep = envelope_dominates(conjecture_run, bs, 1e-8)
    assert rep.passed
    assert rep.to_dict()["n_violations"] == 0


def test_halved_envelope_is_caught():
    # energy starting in shell 5: y_5 is within a factor 2 of X_5(0)^2
    p = ModelParams.from_family(1.0, 10, "constant")
    x = np.zeros(10)
    x[4] = 1.0
    traj = integrate(ShellState(0.0, x), p, 0.05)
    bs = bounding_sequence(x, p)
    assert envelope_dominates(traj, bs).passed
    bs.y = 0.5 * bs.y
    rep = envelope_dominates(traj, bs, 1e-8)
    assert not rep.passed
    assert rep.violations[0] == {"t": 0.0, "n": 5, "X2": 1.0, "y": bs.y[4]}


def test_d_n_at_time_zero_and_energy(conjecture_run):
    x2 = conjecture_run.x[0] ** 2
    for n in (1, 2, 5):
        assert d_n_squared(conjecture_run, n, 0.0) == pytest.approx(np.sum(x2[n - 1:]))
    E0 = np.sum(x2)
    table = d_squared_table(conjecture_run)
    assert np.all(table[:, 0] <= E0 * (1 + 1e-6))
    with pytest.raises(ValueError):
        d_n_squared(conjecture_run, 1, 10.0)
    with pytest.raises(ValueError):
        d_n_squared(conjecture_run, 0, 0.0)


def test_dn_recursion(conjecture_run):
    exc = dn_recursion_excess(conjecture_run)
    assert exc.shape == (14,)
    assert np.max(exc) <= 1e-6


# -- index ladder ---------------------------------------------------------------

def test_subsequence_examples():
    assert special_subsequence(np.ones(50), 1, 1.0, 2.0, 1).indices[1] == 3
    # harmonic partial sums: 1/3+...+1/6 < 1 <= 1/3+...+1/7
    assert special_subsequence(g_table("linear", 50), 1, 1.0, 1.0, 1).indices[1] == 7


def test_tiny_theta_gives_adjacent_steps():
    sub = special_subsequence(g_table("linear", 200), 1, 1e-12, 1.0, 20)
    np.testing.assert_array_equal(np.diff(sub.indices), 2)
    assert count_adjacent_pairs(sub) == sub.K == 20


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10), st.floats(0.05, 2), st.floats(0.3, 1.5),
       st.sampled_from(["constant", "sqrt", "linear"]))
def test_subsequence_infimum_property(n0, theta, s, family):
    g = g_table(family, 200_000)
    sub = special_subsequence(g, n0, theta, s, 6)
    inv = 1.0 / g
    for k, (a, b) in enumerate(zip(sub.indices[:-1], sub.indices[1:])):
        need = 2.0 ** (-s * k) * theta
        assert b >= a + 2
        assert math.fsum(inv[a + 1 : b]) >= need
        assert math.fsum(inv[a + 1 : b - 1]) < need


def test_exhausted_table_reports_level():
    with pytest.raises(SubsequenceExhausted) as info:
        special_subsequence(np.ones(10), 1, 1.0, 0.0, 100)
    assert info.value.level == 4


def test_adjacent_pairs_grow_for_divergent_family():
    rep = adjacent_pairs_growth(g_table("linear", 100_000), 1, 1.0, 1.0)
    assert rep["status"] == "ok"
    c = rep["counts"]
    assert c[10] >= 1 and c[10] <= c[20] <= c[40]


def test_adjacent_pairs_convergent_family_flagged():
    rep = adjacent_pairs_growth(g_table("nlogn", 100_000, power=2.0), 1, 1.0, 1.0)
    assert rep["status"] == "hypothesis violated"


def test_ladder_on_zero_data():
    bs = bounding_sequence(np.zeros(20), g=g_table("linear", 20), phi_sup=1.0)
    lp, sub, rep = auto_ladder(bs, 0.5)
    assert rep.passed
    assert all(lv["sup_y"] == 0 for lv in rep.levels)


def test_ladder_parameter_selection():
    N = 64
    n = np.arange(1, N + 1)
    x = np.where(n <= N // 2, np.exp2(-n), 0.0)
    bs = bounding_sequence(x, g=g_table("linear", N), phi_sup=1.0)
    lp = select_ladder_parameters(bs, 0.5)
    assert lp.c == 2.0
    # smallest power of two with 2 / (1 + theta) + 1/4 <= 1/2
    assert lp.theta == 8.0
    assert np.all(bs.y[lp.n0 - 1 :] <= 1)
    assert np.all(bs.h[lp.n0 - 1 :] <= 0.25 * np.exp2(-n[lp.n0 - 1 :]))
    ok_prev = bs.y[lp.n0 - 2] <= 1 and bs.h[lp.n0 - 2] <= 0.25 * 2.0 ** -(lp.n0 - 1)
    assert lp.n0 == 1 or not ok_prev


def test_ladder_report_flags_failures():
    bs = bounding_sequence(e1(10), g=np.ones(10), phi_sup=1.0)
    sub = special_subsequence(np.ones(10), 1, 1.0, 1.0, 3)
    rep = verify_decay_ladder(bs, sub)
    assert not rep.passed
    assert rep.levels[0]["sup_y"] == 2.0


# -- summability ----------------------------------------------------------------

def test_weighted_sum_of_zero():
    bs = bounding_sequence(np.zeros(10), g=np.ones(10), phi_sup=1.0)
    assert weighted_tail_sum(bs, 1.0) == 0.0


def test_summability_on_conjecture_family():
    N = 60
    bs = bounding_sequence(4.0 ** -np.arange(1, N + 1), g=g_table("linear", N), phi_sup=1.0)
    rep = summability_report(bs, 0.5)
    assert rep["last_quarter_share"] < 1e-2
    assert rep["c_decreasing"]
    assert rep["decay_constant"] == pytest.approx(2.0 / math.sqrt(bs.y.max()))


def test_unit_mode_envelope_collapses_past_its_transient():
    bs = bounding_sequence(e1(100), g=g_table("linear", 100), phi_sup=1.0)
    assert summability_report(bs, 0.5)["last_quarter_share"] < 1e-2
