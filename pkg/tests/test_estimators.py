import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from dyadic.estimators import BoundingEnvelope, DyadicFlow
from dyadic.integrator import StepControl, integrate
from dyadic.shell_model import ModelParams, ShellState


def test_flow_params_round_trip():
    est = DyadicFlow(beta=0.5, g_family="sqrt", t_end=0.2)
    assert est.get_params()["g_family"] == "sqrt"
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    est.set_params(rtol=1e-6)
    assert est.rtol == 1e-6


def test_flow_transform_matches_integrator():
    X = np.zeros((2, 6))
    X[0, 0] = 1.0
    X[1, :2] = [0.5, -0.5]
    est = DyadicFlow(t_end=0.3).fit(X)
    out = est.transform(X)
    assert out.shape == X.shape
    p = ModelParams.from_family(1.0, 6, "linear")
    ref = integrate(ShellState(0.0, X[1]), p, 0.3, StepControl(rtol=1e-8, atol=1e-12))
    np.testing.assert_array_equal(out[1], ref.x[-1])
    assert est.score(X) > -1e-6


def test_flow_requires_fit_and_shape():
    with pytest.raises(NotFittedError):
        DyadicFlow().transform(np.ones((1, 4)))
    est = DyadicFlow(t_end=0.1).fit(np.ones((1, 4)))
    with pytest.raises(ValueError):
        est.transform(np.ones((1, 5)))
    with pytest.raises(ValueError):
        DyadicFlow().fit(np.array([[1.0, np.nan, 0.0]]))


def test_envelope_scores_own_trajectory():
    x = np.zeros(8)
    x[0] = 1.0
    flow = DyadicFlow(t_end=0.5).fit(x)
    traj = flow.trajectory(x)
    env = BoundingEnvelope().fit(x)
    assert env.score(traj.x) == 1.0
    ratios = env.transform(traj.x)
    assert ratios.shape == traj.x.shape
    assert np.all(ratios <= 1.0)


def test_envelope_flags_states_above():
    env = BoundingEnvelope(g_family="constant").fit(np.array([1.0, 0.0, 0.0, 0.0]))
    assert env.score(np.array([[2.0, 0, 0, 0]])) == 0.0
    with pytest.raises(ValueError):
        BoundingEnvelope().fit(np.ones((2, 4)))


def test_pipeline_composition():
    pipe = make_pipeline(DyadicFlow(t_end=0.1), DyadicFlow(t_end=0.1))
    x = np.zeros((1, 5))
    x[0, 0] = 1.0
    two_steps = pipe.fit_transform(x)
    one_step = DyadicFlow(t_end=0.2, rtol=1e-10, atol=1e-14).fit(x).transform(x)
    np.testing.assert_allclose(two_steps, one_step, atol=1e-7)
