"""Exponential time integration of the truncated systems and the Picard local solver.

The linear dissipation is diagonal, so the integrating factor
``exp(-rate * h)`` is applied exactly.  The nonlinear part is advanced with
the second-order exponential Runge-Kutta pair (exponential Euler predictor,
ETD2 corrector); their difference drives the step-size control.

Per-shell dissipation integrals D_n(t) = int_0^t 2 rate_n X_n^2 are carried
as extra zero-rate components, so they are advanced (trapezoidally, from the
stage values) and error-controlled together with the state.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive
from .shell_model import (
    AveragedState,
    ModelParams,
    ShellState,
    nonlinear_averaged,
    nonlinear_dyadic,
    sobolev_norm,
)

logger = logging.getLogger(__name__)

__all__ = [
    "StepControl",
    "Trajectory",
    "IntegrationError",
    "SuspectedBlowUp",
    "PicardError",
    "PicardResult",
    "etd_coefficients",
    "integrate",
    "compute_L",
    "L_tail",
    "picard_local_solve",
    "observed_contraction_rate",
]

_SERIES_CUTOFF = 1e-3


def etd_coefficients(z):
    """phi1(-z) = (1 - e^{-z})/z and phi2(-z) = (e^{-z} - 1 + z)/z^2, elementwise, z >= 0."""
    z = np.asarray(z, dtype=float)
    small = z < _SERIES_CUTOFF
    zs = np.where(small, 1.0, z)
    em1 = -np.expm1(-zs)
    p1 = np.where(small, 1.0 - z / 2 + z * z / 6 - z**3 / 24, em1 / zs)
    p2 = np.where(small, 0.5 - z / 6 + z * z / 24 - z**3 / 120, (zs - em1) / (zs * zs))
    return p1, p2


@dataclass(frozen=True)
class StepControl:
    dt_init: float = 1e-4
    rtol: float = 1e-8
    atol: float = 1e-12
    dt_min: float = 1e-14
    dt_max: float = 0.1
    max_steps: int = 500_000

    def __post_init__(self):
        for name in ("dt_init", "rtol", "atol", "dt_min", "dt_max"):
            check_positive(getattr(self, name), name)
        if not self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need dt_min <= dt_init <= dt_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def with_(self, **changes):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return StepControl(**d)


@dataclass
class Trajectory:
    """Stored states of one run.

    ``x`` has shape ``(T, N)`` (scalar) or ``(T, 4, N)`` (averaged);
    ``D`` has shape ``(T, N)`` and holds the accumulated dissipation per shell.
    """

    params: ModelParams
    t: np.ndarray
    x: np.ndarray
    D: np.ndarray
    control: StepControl
    model: str = "scalar"
    constants: np.ndarray | None = None
    accepted: int = 0
    rejected: int = 0
    nfev: int = 0

    def __len__(self):
        return self.t.shape[0]

    @property
    def shell_energies(self):
        """X_n^2(t), shape (T, N); components are summed for the averaged model."""
        if self.model == "averaged":
            return np.sum(self.x * self.x, axis=1)
        return self.x * self.x

    @property
    def energy(self):
        return self.shell_energies.sum(axis=1)

    def state(self, i):
        if self.model == "averaged":
            return AveragedState(float(self.t[i]), self.x[i], self.constants)
        return ShellState(float(self.t[i]), self.x[i])

    def __iter__(self):
        return (self.state(i) for i in range(len(self)))

    @property
    def final(self):
        return self.state(len(self) - 1)


class IntegrationError(RuntimeError):
    pass


class SuspectedBlowUp(IntegrationError):
    """Raised when the step budget or the minimum step is exhausted.

    Carries the last accepted state and the step statistics.
    """

    def __init__(self, reason, last_state, stats):
        super().__init__(
            f"suspected blow-up ({reason}) at t={last_state.t:.6g}: {stats}"
        )
        self.reason = reason
        self.last_state = last_state
        self.stats = stats


class _System:
    """Flat view of a truncated system: y' = -rates*y + nonlinear(t, y)."""

    def __init__(self, x0, params):
        self.params = params
        self.N = params.N
        if isinstance(x0, AveragedState):
            self.model = "averaged"
            self.shape = (4, self.N)
            self.constants = x0.constants
            self.rates = np.tile(params.averaged_decay_rates, 4)
            self.shell_rates = 2.0 * params.averaged_decay_rates
            y0 = x0.x
        elif isinstance(x0, ShellState):
            self.model = "scalar"
            self.shape = (self.N,)
            self.constants = None
            self.rates = params.decay_rates.copy()
            self.shell_rates = 2.0 * params.decay_rates
            y0 = x0.x
        else:
            raise TypeError(f"unsupported initial state {type(x0).__name__}")
        if y0.shape != self.shape:
            raise ValueError(f"initial state has shape {y0.shape}, expected {self.shape}")
        self.y0 = np.asarray(y0, dtype=float).ravel()
        self.m = self.y0.size
        # augmented rates: D has no linear part
        self.aug_rates = np.concatenate([self.rates, np.zeros(self.N)])

    def shell_energy(self, y):
        if self.model == "averaged":
            y = y.reshape(self.shape)
            return np.sum(y * y, axis=0)
        return y * y

    def nonlinear(self, t, y):
        if self.model == "averaged":
            return nonlinear_averaged(y.reshape(self.shape), self.constants, self.params).ravel()
        return nonlinear_dyadic(t, y, self.params)

    def augmented(self, t, z):
        y = z[: self.m]
        return np.concatenate([self.nonlinear(t, y), self.shell_rates * self.shell_energy(y)])

    def make_state(self, t, y):
        if self.model == "averaged":
            return AveragedState(t, y.reshape(self.shape).copy(), self.constants)
        return ShellState(t, y.copy())


def integrate(x0, params, t_end, ctrl=None, t_out=None):
    """Integrate from ``x0`` (a ShellState or AveragedState) to ``t_end``.

    Every accepted step is stored unless ``t_out`` is given, in which case
    steps are shortened to land exactly on those times and only they are
    stored (plus the initial state).

    Raises SuspectedBlowUp when ``max_steps`` is exhausted or the step
    falls below ``dt_min``.
    """
    ctrl = ctrl or StepControl()
    t0 = float(x0.t)
    if not t_end > t0:
        raise ValueError(f"t_end={t_end} must exceed the initial time {t0}")
    sysm = _System(x0, params)
    if not np.all(np.isfinite(sysm.y0)):
        raise ValueError("initial data must be finite")
    if t_out is not None:
        t_out = np.unique(np.asarray(t_out, dtype=float))
        t_out = t_out[(t_out > t0) & (t_out <= t_end)]
        if t_out.size == 0 or t_out[-1] < t_end:
            t_out = np.append(t_out, t_end)
    targets = t_out if t_out is not None else np.array([t_end])

    z = np.concatenate([sysm.y0, np.zeros(sysm.N)])
    m = sysm.m
    ts, ys, Ds = [t0], [sysm.y0.copy()], [np.zeros(sysm.N)]
    t = t0
    h = min(ctrl.dt_init, t_end - t0)
    rates = sysm.aug_rates
    accepted = rejected = nfev = 0
    ti = 0
    f0 = sysm.augmented(t, z)
    nfev += 1

    def stats():
        return {"accepted": accepted, "rejected": rejected, "nfev": nfev, "dt": h}

    while ti < targets.size:
        if accepted + rejected >= ctrl.max_steps:
            raise SuspectedBlowUp("max_steps", sysm.make_state(t, z[:m]), stats())
        target = targets[ti]
        hit = False
        if t + h >= target - 1e-14 * max(1.0, abs(target)):
            h_try = target - t
            hit = True
        else:
            h_try = h
        p1, p2 = etd_coefficients(rates * h_try)
        a = np.exp(-rates * h_try) * z + h_try * p1 * f0
        f1 = sysm.augmented(t + h_try, a)
        nfev += 1
        corr = h_try * p2 * (f1 - f0)
        z_new = a + corr
        scale = ctrl.atol + ctrl.rtol * np.maximum(np.abs(z), np.abs(z_new))
        if np.all(np.isfinite(z_new)):
            err = math.sqrt(np.mean((corr / scale) ** 2))
        else:
            err = math.inf
        if err <= 1.0:
            t = target if hit else t + h_try
            z = z_new
            accepted += 1
            f0 = sysm.augmented(t, z)
            nfev += 1
            if t_out is None or hit:
                ts.append(t)
                ys.append(z[:m].copy())
                Ds.append(z[m:].copy())
            if hit:
                ti += 1
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 / math.sqrt(err)))
            # a step shortened to hit a target says little about the next one
            h = min(ctrl.dt_max, max(h, h_try) * fac if hit else h_try * fac)
        else:
            rejected += 1
            fac = 0.2 if not math.isfinite(err) else max(0.2, 0.9 / math.sqrt(err))
            h = h_try * fac
            if h < ctrl.dt_min:
                raise SuspectedBlowUp("dt_min", sysm.make_state(t, z[:m]), stats())

    logger.debug("integrate: %d accepted, %d rejected, %d evals", accepted, rejected, nfev)
    x = np.array(ys)
    if sysm.model == "averaged":
        x = x.reshape((-1,) + sysm.shape)
    return Trajectory(
        params=params, t=np.array(ts), x=x, D=np.array(Ds), control=ctrl,
        model=sysm.model, constants=sysm.constants,
        accepted=accepted, rejected=rejected, nfev=nfev,
    )


# -- local existence ---------------------------------------------------------

def compute_L(eta, params, s):
    """Contraction modulus L(eta) of the Duhamel map, summed over the N shells.

    L(eta)^2 = sum_{n<=N} k_n^{2s} k_{n-1}^{-4s} g_n^2 (1 - exp(-k_n eta / g_n))^2.
    The contribution of shells beyond the truncation is given by ``L_tail``.
    """
    if eta < 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    n = np.arange(1, params.N + 1)
    weight = np.exp2(params.beta * s * (2.0 * n - 4.0 * (n - 1)))
    damp = -np.expm1(-params.decay_rates * eta)
    return float(math.sqrt(np.sum(weight * params.gN**2 * damp**2)))


def L_tail(params, s, extra=400):
    """Bound for the shells beyond N: 2^{4 beta s} sum_{n>N} k_n^{-2s} g_n^2.

    The g values past N come from the params' declared family (custom
    tables are extended by their last value).
    """
    family, kw = params.g_family
    top = min(params.N + extra, int(1000 / params.beta))
    if top <= params.N:
        return 0.0
    if family == "custom" and not kw:
        g = np.concatenate([params.g, np.full(max(0, top - params.g.size), params.g[-1])])[:top]
    else:
        from .shell_model import g_table

        g = g_table(family, top, **kw)
    n = np.arange(params.N + 1, top + 1)
    terms = np.exp2(-2.0 * params.beta * s * n) * g[params.N :] ** 2
    return float(2.0 ** (4 * params.beta * s) * np.sum(terms))


def _duhamel_weights(rates, h):
    p1, p2 = etd_coefficients(rates * h)
    return h * (p1 - p2), h * p2


def _sup_hs_distance(a, b, weights):
    return float(np.max(np.sqrt(np.sum(((a - b) * weights) ** 2, axis=1))))


def _rate_from_distances(distances, floor):
    ratios = [
        d1 / d0 for d0, d1 in zip(distances[:-1], distances[1:]) if d0 > floor
    ]
    return max(ratios, default=0.0)


def observed_contraction_rate(iterates, s, floor=None):
    """Largest ratio of successive sup-H^s distances between Picard iterates.

    Ratios whose denominator is below ``floor`` (default: rounding level of
    the iterates) are ignored.
    """
    iterates = [np.asarray(v, dtype=float) for v in iterates]
    if len(iterates) < 3:
        raise ValueError("need at least 3 iterates")
    n = np.arange(1, iterates[0].shape[-1] + 1)
    w = np.exp2(s * n)
    dists = [_sup_hs_distance(b, a, w) for a, b in zip(iterates[:-1], iterates[1:])]
    if floor is None:
        size = max(float(np.max(np.abs(v * w))) for v in iterates)
        floor = 1e3 * np.finfo(float).eps * max(size, np.finfo(float).tiny)
    return _rate_from_distances(dists, floor)


class PicardError(RuntimeError):
    pass


@dataclass
class PicardResult:
    eta: float
    t: np.ndarray
    x: np.ndarray
    iterations: int
    distances: list = field(default_factory=list)
    contraction_rate: float = 0.0
    threshold: float = math.inf
    ball_radius: float = 0.0
    stayed_in_ball: bool = True
    iterates: list | None = None


def _select_eta(params, s, threshold, eta_max, rel_tol=1e-6):
    if compute_L(eta_max, params, s) <= threshold:
        return eta_max
    lo, hi = 0.0, eta_max
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if compute_L(mid, params, s) <= threshold:
            lo = mid
        else:
            hi = mid
    return lo


def picard_local_solve(x0, params, s=None, theta=0.5, iter_tol=1e-12,
                       n_grid=2**10, max_iter=200, eta_max=1.0, keep_iterates=False):
    """Fixed point of the Duhamel map on [0, eta].

    eta is the largest value (by bisection) with
    L(eta) <= theta / (8 ||phi||_inf ||x0||_{H^s}).  Iterates start from the
    constant x0 and use product trapezoidal quadrature (the nonlinearity is
    interpolated linearly, the exponential kernel integrated exactly) on
    ``n_grid`` uniform intervals.
    """
    s = params.s if s is None else s
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    x = np.asarray(x0.x, dtype=float)
    norm = sobolev_norm(x, s)
    phi_sup = params.phi.sup_bound
    threshold = math.inf if norm == 0 or phi_sup == 0 else theta / (8 * phi_sup * norm)
    eta = eta_max if math.isinf(threshold) else _select_eta(params, s, threshold, eta_max)
    if eta <= 0:
        raise PicardError("could not select a positive eta")

    t = x0.t + np.linspace(0.0, eta, n_grid + 1)
    h = eta / n_grid
    rates = params.decay_rates
    free = x[None, :] * np.exp(-np.outer(t - x0.t, rates))
    w0, w1 = _duhamel_weights(rates, h)
    decay = np.exp(-rates * h)
    weights = np.exp2(s * np.arange(1, params.N + 1))
    radius = 2.0 * norm

    def apply(V):
        nl = np.array([nonlinear_dyadic(tj, vj, params) for tj, vj in zip(t, V)])
        out = np.empty_like(V)
        acc = np.zeros(params.N)
        out[0] = free[0]
        for j in range(n_grid):
            acc = decay * acc + w0 * nl[j] + w1 * nl[j + 1]
            out[j + 1] = free[j + 1] + acc
        return out

    V = np.tile(x, (n_grid + 1, 1))
    iterates = [V] if keep_iterates else None
    distances = []
    in_ball = True
    floor = 1e3 * np.finfo(float).eps * max(norm, np.finfo(float).tiny)
    for it in range(1, max_iter + 1):
        W = apply(V)
        d = _sup_hs_distance(W, V, weights)
        distances.append(d)
        if keep_iterates:
            iterates.append(W)
        sup_norm = float(np.max(np.sqrt(np.sum((W * weights) ** 2, axis=1))))
        if sup_norm > radius * (1 + 1e-12):
            in_ball = False
        V = W
        rate = _rate_from_distances(distances, floor)
        if len(distances) >= 2 and rate >= 1.0:
            raise PicardError(f"observed contraction rate {rate:.3g} >= 1 at eta={eta:.3g}")
        if d < iter_tol:
            return PicardResult(
                eta=eta, t=t, x=V, iterations=it, distances=distances,
                contraction_rate=rate, threshold=threshold, ball_radius=radius,
                stayed_in_ball=in_ball, iterates=iterates,
            )
    raise PicardError(f"no convergence in {max_iter} iterations (last distance {distances[-1]:.3g})")
