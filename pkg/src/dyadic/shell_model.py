"""Generalized dyadic model: parameters, states and right-hand sides.

Shell ``n`` (1-based) lives at array index ``n - 1``.  The truncated system
uses the Galerkin closure ``X_0 = X_{N+1} = 0``, which keeps the nonlinear
energy transfer exactly telescoping.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from ._validation import check_averaged_matrix, check_positive, check_shell_vector

__all__ = [
    "PhiSpec",
    "ModelParams",
    "ShellState",
    "AveragedState",
    "ReducedAveraged",
    "PHI_REGISTRY",
    "register_phi",
    "g_table",
    "wavenumber",
    "nonlinear_dyadic",
    "rhs_dyadic",
    "nonlinear_averaged",
    "rhs_averaged",
    "sobolev_norm",
    "reduce_averaged_to_scalar",
]

# float64 exponent budget for 2**(beta*n)
_MAX_EXP2 = 1023.0


def wavenumber(beta, n):
    """k_n = 2**(beta*n).

    Raises OverflowError when the result is not representable.
    """
    if n < 0:
        raise ValueError(f"shell index must be nonnegative, got {n}")
    e = beta * n
    if e > _MAX_EXP2:
        raise OverflowError(f"2**({beta}*{n}) exceeds the float64 range")
    return float(np.exp2(e))


# -- phi coefficients --------------------------------------------------------

PhiCallback = Callable[[float, np.ndarray], np.ndarray]

PHI_REGISTRY: dict[str, PhiCallback] = {}


def register_phi(name):
    """Register a windowed coefficient ``f(t, windows) -> values``.

    ``windows`` has shape ``(N, 2m+1)``; row ``n-1`` holds
    ``(X_{n-m}, ..., X_{n+m})`` with zero padding outside ``1..N``.
    """
    def deco(func):
        PHI_REGISTRY[name] = func
        return func
    return deco


@register_phi("unit")
def _phi_unit(t, windows):
    return np.ones(windows.shape[0])


@register_phi("time_cosine")
def _phi_time_cosine(t, windows):
    return np.full(windows.shape[0], math.cos(t))


@register_phi("neighbour_damped")
def _phi_neighbour_damped(t, windows):
    return 1.0 / (1.0 + np.sum(windows * windows, axis=1))


@register_phi("gradient_sign")
def _phi_gradient_sign(t, windows):
    # signed, bounded by 1, Lipschitz
    return np.tanh(windows[:, -1] - windows[:, 0])


@dataclass(frozen=True, eq=False)
class PhiSpec:
    """Coefficients phi_n: constant, per shell, or a registered windowed callback."""

    variant: str = "constant"
    value: float = 1.0
    values: np.ndarray | None = None
    m: int = 1
    callback: str | None = None
    sup_bound: float | None = None

    def __post_init__(self):
        if self.variant not in ("constant", "per_shell", "windowed"):
            raise ValueError(f"unknown phi variant {self.variant!r}")
        if self.variant == "per_shell":
            if self.values is None:
                raise ValueError("per_shell phi requires values")
            vals = np.asarray(self.values, dtype=float)
            if not np.all(np.isfinite(vals)):
                raise ValueError("phi values must be finite")
            object.__setattr__(self, "values", vals)
        if self.variant == "windowed":
            if self.callback not in PHI_REGISTRY:
                raise ValueError(f"unknown phi callback {self.callback!r}")
            if self.m < 1:
                raise ValueError("window half-width m must be >= 1")
            if self.sup_bound is None:
                raise ValueError("windowed phi needs an explicit sup_bound")
        if self.sup_bound is None:
            if self.variant == "constant":
                sup = abs(float(self.value))
            else:
                sup = float(np.max(np.abs(self.values))) if self.values.size else 0.0
            object.__setattr__(self, "sup_bound", sup)
        if self.sup_bound < 0:
            raise ValueError("sup_bound must be nonnegative")

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", value=float(c))

    @classmethod
    def per_shell(cls, values, sup_bound=None):
        return cls("per_shell", values=np.asarray(values, dtype=float), sup_bound=sup_bound)

    @classmethod
    def windowed(cls, callback, m=1, sup_bound=1.0):
        return cls("windowed", m=int(m), callback=callback, sup_bound=float(sup_bound))

    @property
    def is_zero(self):
        return self.sup_bound == 0.0

    def evaluate(self, t, x):
        """phi_1..phi_N at time ``t`` for shell amplitudes ``x`` (clipped to sup_bound)."""
        n = x.shape[0]
        if self.variant == "constant":
            return np.full(n, self.value)
        if self.variant == "per_shell":
            if self.values.shape[0] < n:
                raise ValueError(f"per_shell phi has {self.values.shape[0]} values, need {n}")
            return self.values[:n]
        padded = np.concatenate([np.zeros(self.m), x, np.zeros(self.m)])
        windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * self.m + 1)
        vals = np.asarray(PHI_REGISTRY[self.callback](t, windows), dtype=float)
        return np.clip(vals, -self.sup_bound, self.sup_bound)

    def to_dict(self):
        d = {"variant": self.variant, "sup_bound": self.sup_bound}
        if self.variant == "constant":
            d["value"] = self.value
        elif self.variant == "per_shell":
            d["values"] = self.values.tolist()
        else:
            d.update(m=self.m, callback=self.callback)
        return d


# -- g families --------------------------------------------------------------

def g_table(family, n_max, **kw):
    """Explicit table g_1..g_{n_max} for a named family.

    Families: ``constant(c=1)``, ``sqrt``, ``linear``, ``nlogn(power=1)``
    (``n * log(n+1)**power``), ``custom(values)``, ``counterexample(n1, levels, beta)``.
    """
    n = np.arange(1, n_max + 1, dtype=float)
    if family == "constant":
        return np.full(n_max, float(kw.get("c", 1.0)))
    if family == "sqrt":
        return np.sqrt(n)
    if family == "linear":
        return n.copy()
    if family == "nlogn":
        return n * np.log(n + 1.0) ** float(kw.get("power", 1.0))
    if family == "custom":
        vals = np.asarray(kw["values"], dtype=float)
        if vals.shape[0] < n_max:
            # extend with the last value
            vals = np.concatenate([vals, np.full(n_max - vals.shape[0], vals[-1])])
        return vals[:n_max].copy()
    if family == "counterexample":
        from .diagnostics import counterexample_g

        g = counterexample_g(kw.get("beta", 1.0), int(kw["n1"]), int(kw["levels"])).g
        if g.shape[0] < n_max:
            raise ValueError(
                f"counterexample table has {g.shape[0]} entries, need {n_max}"
            )
        return g[:n_max].copy()
    raise ValueError(f"unknown g family {family!r}")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Model constants for a truncated run.

    ``g`` holds g_1..g_M with M >= N.  ``alpha`` and ``gamma`` only enter
    the averaged system; the scalar model always uses k_n / g_n.
    """

    beta: float
    N: int
    g: np.ndarray
    phi: PhiSpec = field(default_factory=PhiSpec.constant)
    alpha: float = 1.0
    gamma: float = 1.0
    s: float = 1.0
    g_family: tuple = ("custom", {})
    monotone_g: bool = False

    def __post_init__(self):
        check_positive(self.beta, "beta")
        if int(self.N) != self.N or self.N < 3:
            raise ValueError(f"N must be an integer >= 3, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 1 or g.shape[0] < self.N:
            raise ValueError(f"g must provide at least N={self.N} entries")
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise ValueError("g must be finite and strictly positive")
        if self.monotone_g and np.any(np.diff(g) < 0):
            raise ValueError("g declared monotone but decreases somewhere")
        object.__setattr__(self, "g", g)
        check_positive(self.alpha, "alpha")
        check_positive(self.gamma, "gamma")
        if self.beta * (self.N + 1) > _MAX_EXP2:
            raise OverflowError("k_{N+1} overflows float64; reduce N or beta")

    @classmethod
    def from_family(cls, beta, N, family="constant", phi=None, extra=1, **kw):
        """Build params with g tabulated from a named family (``extra`` spare entries)."""
        fam_kw = {k: v for k, v in kw.items() if k not in ("alpha", "gamma", "s", "monotone_g")}
        if family == "counterexample":
            fam_kw.setdefault("beta", beta)
        g = g_table(family, N + extra, **fam_kw)
        rest = {k: kw[k] for k in ("alpha", "gamma", "s", "monotone_g") if k in kw}
        return cls(beta=beta, N=N, g=g, phi=phi or PhiSpec.constant(1.0),
                   g_family=(family, fam_kw), **rest)

    @cached_property
    def k(self):
        """k_0..k_{N+1}."""
        return np.exp2(self.beta * np.arange(self.N + 2))

    @cached_property
    def gN(self):
        return self.g[: self.N]

    @cached_property
    def decay_rates(self):
        """k_n / g_n for n = 1..N (scalar model)."""
        return self.k[1 : self.N + 1] / self.gN

    @cached_property
    def averaged_decay_rates(self):
        """k_n**alpha / g_n for n = 1..N."""
        return self.k[1 : self.N + 1] ** self.alpha / self.gN

    @cached_property
    def transport(self):
        """k_n**gamma for n = 0..N+1."""
        return self.k ** self.gamma

    def with_(self, **changes):
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self):
        return {
            "beta": self.beta, "N": self.N, "g": self.g.tolist(),
            "phi": self.phi.to_dict(), "alpha": self.alpha, "gamma": self.gamma,
            "s": self.s, "g_family": [self.g_family[0], dict(self.g_family[1])],
        }


@dataclass(frozen=True, eq=False)
class ShellState:
    t: float
    x: np.ndarray

    def __post_init__(self):
        check_positive(self.t, "t", strict=False)
        object.__setattr__(self, "x", check_shell_vector(self.x))


@dataclass(frozen=True, eq=False)
class AveragedState:
    t: float
    x: np.ndarray
    constants: np.ndarray = field(default_factory=lambda: np.zeros(5))

    def __post_init__(self):
        check_positive(self.t, "t", strict=False)
        object.__setattr__(self, "x", check_averaged_matrix(self.x))
        c = np.asarray(self.constants, dtype=float)
        if c.shape != (5,) or not np.all(np.isfinite(c)):
            raise ValueError("constants must be five finite reals C1..C5")
        object.__setattr__(self, "constants", c)


# -- scalar model ------------------------------------------------------------

def nonlinear_dyadic(t, x, params):
    """phi_{n-1} k_{n-1} X_{n-1}^2 - phi_n k_n X_n X_{n+1}, closure X_0 = X_{N+1} = 0."""
    k = params.k[1 : params.N + 1]
    phi = params.phi.evaluate(t, x)
    flux = phi * k * x  # phi_n k_n X_n
    out = np.empty_like(x)
    out[:-1] = -flux[:-1] * x[1:]
    out[-1] = 0.0
    out[1:] += flux[:-1] * x[:-1]
    return out


def rhs_dyadic(state, params):
    """Right-hand side of the truncated scalar model at ``state``."""
    x = check_shell_vector(state.x, params.N)
    return nonlinear_dyadic(state.t, x, params) - params.decay_rates * x


# -- averaged system ---------------------------------------------------------

def nonlinear_averaged(x, constants, params):
    """Quadratic part of the four-component averaged system (4 x N)."""
    c1, c2, c3, c4, c5 = constants
    x1, x2, x3, x4 = x
    kg = params.transport[1 : params.N + 1]
    kg_next = params.transport[2 : params.N + 2]
    x4_prev = np.concatenate([[0.0], x4[:-1]])
    x1_next = np.concatenate([x1[1:], [0.0]])
    out = np.empty_like(x)
    out[0] = kg * (-c1 * x3 * x4 - c2 * x1 * x2 - c3 * x1 * x3 + c4 * x4_prev**2)
    out[1] = kg * (c2 * x1**2 - c5 * x3**2)
    out[2] = kg * (c3 * x1**2 + c5 * x2 * x3)
    out[3] = kg * c1 * x1 * x3 - kg_next * c4 * x4 * x1_next
    return out


def rhs_averaged(state, params):
    x = check_averaged_matrix(state.x, params.N)
    return nonlinear_averaged(x, state.constants, params) - params.averaged_decay_rates * x


# -- norms -------------------------------------------------------------------

def sobolev_norm(x, s, p=2.0):
    """(sum_n 2**(p*s*n) |x_n|**p)**(1/p), shells indexed from 1.

    Computed with a max-scaling so large weights do not overflow early.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    x = check_shell_vector(x)
    if x.size == 0:
        return 0.0
    n = np.arange(1, x.size + 1)
    with np.errstate(divide="ignore"):
        logs = p * s * n * math.log(2.0) + p * np.log(np.abs(x))
    top = np.max(logs)
    if not np.isfinite(top):
        return 0.0
    return float(math.exp((top + math.log(np.sum(np.exp(logs - top)))) / p))


# -- averaged -> scalar reduction -------------------------------------------

@dataclass
class ReducedAveraged:
    """Shell energies of an averaged trajectory and the terms of their balance.

    Arrays have shape ``(T, N)``.  ``energy_rate`` is d/dt(X_n^2 / 2)
    evaluated from the right-hand side; ``residual`` is
    ``energy_rate + dissipation - inflow + outflow``.
    """

    t: np.ndarray
    energies: np.ndarray
    inflow: np.ndarray
    outflow: np.ndarray
    dissipation: np.ndarray
    energy_rate: np.ndarray

    @property
    def residual(self):
        return self.energy_rate + self.dissipation - self.inflow + self.outflow


def reduce_averaged_to_scalar(states, params):
    """Sum the four components of each shell: X_n^2 = sum_i X_{i,n}^2.

    Returns the shell energies with the effective transport terms
    C4 k_n^gamma X_{4,n-1}^2 X_{1,n} (inflow) and
    C4 k_{n+1}^gamma X_{4,n}^2 X_{1,n+1} (outflow).
    """
    states = list(states)
    if not states:
        raise ValueError("trajectory is empty")
    N = params.N
    kg = params.transport[1 : N + 1]
    kg_next = params.transport[2 : N + 2]
    rates = params.averaged_decay_rates
    T = len(states)
    t = np.empty(T)
    energies, inflow, outflow, diss, erate = (np.empty((T, N)) for _ in range(5))
    for j, st in enumerate(states):
        x = check_averaged_matrix(st.x, N)
        c4 = st.constants[3]
        t[j] = st.t
        energies[j] = np.sum(x * x, axis=0)
        x4_prev = np.concatenate([[0.0], x[3, :-1]])
        x1_next = np.concatenate([x[0, 1:], [0.0]])
        inflow[j] = c4 * kg * x4_prev**2 * x[0]
        outflow[j] = c4 * kg_next * x[3] ** 2 * x1_next
        diss[j] = rates * energies[j]
        erate[j] = np.sum(x * rhs_averaged(st, params), axis=0)
    return ReducedAveraged(t, energies, inflow, outflow, diss, erate)
