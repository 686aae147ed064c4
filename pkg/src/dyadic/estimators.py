"""Estimator-style wrappers so the model composes with scikit-learn tooling.

``DyadicFlow`` is a transformer mapping initial data to the state at
``t_end``; ``BoundingEnvelope`` fits the a-priori bounding sequence to one
initial condition and scores trajectories against it.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from . import diagnostics, envelope
from .integrator import StepControl, integrate
from .shell_model import ModelParams, PhiSpec, ShellState


def _as_batch(X, n_shells=None):
    X = check_array(X, ensure_2d=False, dtype=np.float64, ensure_all_finite=True)
    if X.ndim == 1:
        X = X[None, :]
    if n_shells is not None and X.shape[1] != n_shells:
        raise ValueError(f"expected {n_shells} shells, got {X.shape[1]}")
    return X


class DyadicFlow(TransformerMixin, BaseEstimator):
    """Flow map of the truncated scalar model over ``[0, t_end]``.

    ``fit`` only builds and validates the model parameters; ``transform``
    integrates every row of ``X`` (one initial condition per row) and
    returns the states at ``t_end``.
    """

    def __init__(self, beta=1.0, g_family="linear", phi=1.0, t_end=1.0,
                 rtol=1e-8, atol=1e-12, dt_max=0.1):
        self.beta = beta
        self.g_family = g_family
        self.phi = phi
        self.t_end = t_end
        self.rtol = rtol
        self.atol = atol
        self.dt_max = dt_max

    def _make_params(self, N):
        phi = self.phi if isinstance(self.phi, PhiSpec) else PhiSpec.constant(self.phi)
        return ModelParams.from_family(self.beta, N, self.g_family, phi=phi)

    def fit(self, X, y=None):
        X = _as_batch(X)
        self.n_features_in_ = X.shape[1]
        self.params_ = self._make_params(X.shape[1])
        self.control_ = StepControl(rtol=self.rtol, atol=self.atol,
                                    dt_max=self.dt_max, dt_init=min(1e-4, self.dt_max))
        return self

    def trajectory(self, x0):
        check_is_fitted(self, "params_")
        x0 = _as_batch(x0, self.n_features_in_)[0]
        return integrate(ShellState(0.0, x0), self.params_, self.t_end, self.control_)

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = _as_batch(X, self.n_features_in_)
        out = np.empty_like(X)
        for i, row in enumerate(X):
            out[i] = integrate(ShellState(0.0, row), self.params_, self.t_end,
                               self.control_).x[-1]
        return out

    def score(self, X, y=None):
        """Negative worst relative energy-equality residual over the rows of X."""
        X = _as_batch(X, self.n_features_in_)
        worst = 0.0
        for row in X:
            rep = diagnostics.energy_report(self.trajectory(row))
            worst = max(worst, rep.max_abs_residual / max(rep.E[0], self.atol))
        return -worst


class BoundingEnvelope(TransformerMixin, BaseEstimator):
    """Bounding sequence y of one initial condition.

    After ``fit(x)``, ``transform(X)`` returns X_n^2 / y_n for a batch of
    states (values <= 1 mean the state lies under the envelope).
    """

    def __init__(self, g_family="linear", phi_sup=1.0, g_kwargs=None):
        self.g_family = g_family
        self.phi_sup = phi_sup
        self.g_kwargs = g_kwargs

    def fit(self, X, y=None):
        from .shell_model import g_table

        x = _as_batch(X)
        if x.shape[0] != 1:
            raise ValueError("BoundingEnvelope is fitted to a single initial condition")
        x = x[0]
        self.n_features_in_ = x.size
        g = g_table(self.g_family, x.size, **(self.g_kwargs or {}))
        self.sequence_ = envelope.bounding_sequence(x, g=g, phi_sup=self.phi_sup)
        self.y_ = self.sequence_.y
        return self

    def transform(self, X):
        check_is_fitted(self, "y_")
        X = _as_batch(X, self.n_features_in_)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = X * X / self.y_
        return np.where(self.y_ > 0, ratio, np.where(X == 0, 0.0, np.inf))

    def score(self, X, y=None):
        """Fraction of rows lying entirely under the envelope."""
        return float(np.mean(np.all(self.transform(X) <= 1.0, axis=1)))
