"""Energy bookkeeping, fluxes, a-priori quantities and smoothing functions."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .shell_model import ModelParams, PhiSpec

__all__ = [
    "EnergyReport",
    "energy_report",
    "flux_profile",
    "flux_balance_residual",
    "TaoQuantities",
    "tao_quantities",
    "SmoothingValue",
    "smoothing_psi",
    "linear_evolution",
    "CounterexampleG",
    "counterexample_g",
    "window_balance",
]


@dataclass
class EnergyReport:
    """Energy tables along a scalar trajectory.

    ``En[:, n-1]`` is E_n = sum_{i<=n} X_i^2, ``Fn[:, n-1]`` is
    F_n = sum_{i>=n} X_i^2, ``residual`` is E(t) + sum_n D_n(t) - E(0).
    """

    t: np.ndarray
    E: np.ndarray
    En: np.ndarray
    Fn: np.ndarray
    dissipation: np.ndarray
    residual: np.ndarray
    l3w_integral: np.ndarray
    eps_tol: float
    equality: bool

    @property
    def max_abs_residual(self):
        return float(np.max(np.abs(self.residual)))

    @property
    def inequality(self):
        return bool(np.all(self.residual <= self.eps_tol * max(self.E[0], 0.0)))


def energy_report(traj, eps_tol=None):
    """Energy, tail energies, dissipation and the energy-equality residual.

    ``eps_tol`` defaults to 100 * rtol of the run.  The equality flag is set
    when |r(t)| <= eps_tol * max(E(0), atol) at every stored time.  The last
    column is the running integral of ||X||_{W^{beta/3,3}}^3 (trapezoid).
    """
    X2 = traj.shell_energies
    E = X2.sum(axis=1)
    En = np.cumsum(X2, axis=1)
    Fn = np.cumsum(X2[:, ::-1], axis=1)[:, ::-1]
    diss = traj.D.sum(axis=1)
    r = E + diss - E[0]
    if eps_tol is None:
        eps_tol = 100.0 * traj.control.rtol
    equality = bool(np.all(np.abs(r) <= eps_tol * max(E[0], traj.control.atol)))
    n = np.arange(1, traj.params.N + 1)
    w3 = np.sum(np.exp2(traj.params.beta * n) * X2**1.5, axis=1)
    l3 = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(traj.t) * (w3[1:] + w3[:-1]))])
    return EnergyReport(traj.t.copy(), E, En, Fn, diss, r, l3, eps_tol, equality)


def flux_profile(state, params):
    """Energy flux Pi_n = 2 phi_n k_n X_n^2 X_{n+1} across the n -> n+1 boundary
    and dissipation rate delta_n = 2 (k_n/g_n) X_n^2.

    Along a solution, d/dt E_n = -Pi_n - sum_{i<=n} delta_i.
    """
    x = np.asarray(state.x, dtype=float)
    k = params.k[1 : params.N + 1]
    phi = params.phi.evaluate(state.t, x)
    x_next = np.concatenate([x[1:], [0.0]])
    flux = 2.0 * phi * k * x * x * x_next
    diss = 2.0 * params.decay_rates * x * x
    return flux, diss


def _time_derivative(t, values):
    # centered in the interior, second-order one-sided at the ends
    if len(t) < 2:
        return np.zeros_like(values)
    return np.gradient(values, t, axis=0, edge_order=2 if len(t) >= 3 else 1)


def flux_balance_residual(traj):
    """Finite-difference d/dt E_n minus (-Pi_n - sum_{i<=n} delta_i), shape (T, N)."""
    En = np.cumsum(traj.shell_energies, axis=1)
    dEn = _time_derivative(traj.t, En)
    pred = np.empty_like(En)
    for i, st in enumerate(traj):
        flux, diss = flux_profile(st, traj.params)
        pred[i] = -flux - np.cumsum(diss)
    return dEn - pred


@dataclass
class TaoQuantities:
    a: float
    A: float
    B: float
    N_cut: int
    L_part: float
    H_part: float

    def as_tuple(self):
        return (self.a, self.A, self.B, self.N_cut, self.L_part, self.H_part)

    def audit(self, params):
        """Ratios L_part / (g_N^2 a A) and H_part / ((g_N/k_N) A^2) at the cut N = N_cut.

        Both are <= 1 for s >= 1 when g and k/g are non-decreasing.
        """
        n = min(self.N_cut, params.N)
        gN = params.g[n - 1]
        kN = params.k[n]
        lb = gN**2 * self.a * self.A
        hb = gN / kN * self.A**2
        return {
            "L_ratio": self.L_part / lb if lb > 0 else 0.0,
            "H_ratio": self.H_part / hb if hb > 0 else 0.0,
        }


def tao_quantities(state, params, s):
    """a = sum (k/g) X^2, A = sum k^{2s} X^2, B = sum (k^{2s+1}/g) X^2, the cut
    N_cut = least n with k_n >= A (1 when A <= k_1 or A = 0), and the two
    pieces of sum g_n k_n^{2s+1} X_n^2 X_{n+1}^2 below and above the cut:

        L = sum_{n<=N_cut} g_n^2 ((k_n/g_n) X_n^2) (k_n^{2s} X_{n+1}^2)
        H = sum_{n>N_cut} (g_n/k_n) (k_n^{s+1} X_n^2) (k_n^{s+1} X_{n+1}^2)
    """
    x = np.asarray(state.x, dtype=float)
    N = params.N
    k = params.k[1 : N + 1]
    g = params.gN
    x2 = x * x
    x2_next = np.concatenate([x2[1:], [0.0]])
    a = float(np.sum(k / g * x2))
    A = float(np.sum(k ** (2 * s) * x2))
    B = float(np.sum(k ** (2 * s + 1) / g * x2))
    if A <= params.k[1]:
        N_cut = 1
    else:
        N_cut = max(1, math.ceil(math.log2(A) / params.beta))
        # guard against rounding in log2
        while N_cut > 1 and 2.0 ** (params.beta * (N_cut - 1)) >= A:
            N_cut -= 1
        while 2.0 ** (params.beta * N_cut) < A:
            N_cut += 1
    low = np.arange(1, N + 1) <= N_cut
    L_terms = g**2 * (k / g * x2) * (k ** (2 * s) * x2_next)
    H_terms = (g / k) * (k ** (s + 1) * x2) * (k ** (s + 1) * x2_next)
    return TaoQuantities(a, A, B, int(N_cut), float(np.sum(L_terms[low])), float(np.sum(H_terms[~low])))


@dataclass
class SmoothingValue:
    psi: float
    phi: float
    argmax: int
    interior: bool


def smoothing_psi(t, s1, s2, params, warn=True):
    """psi(t) = max_{n<=N} 2^{(s2-s1)n} exp(-(k_n/g_n) t) and phi = 1/psi.

    Evaluated in log space.  ``interior`` is False when the maximum sits
    at the truncation n = N, in which case psi is limited by N.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if s2 < s1:
        raise ValueError("need s2 >= s1")
    n = np.arange(1, params.N + 1)
    logs = (s2 - s1) * n * math.log(2.0) - params.decay_rates * t
    j = int(np.argmax(logs))
    interior = j < params.N - 1
    if not interior and warn and s2 > s1:
        warnings.warn(f"psi({t}) attained at the truncation n=N={params.N}", RuntimeWarning)
    log_psi = float(logs[j])
    return SmoothingValue(math.exp(log_psi), math.exp(-log_psi), j + 1, interior)


def linear_evolution(x, params, t):
    """Z_n(t) = x_n exp(-(k_n/g_n) t) for the linear part of the model."""
    return np.asarray(x, dtype=float) * np.exp(-params.decay_rates * t)


@dataclass
class CounterexampleG:
    """A g table for which linear dissipation need not smooth.

    ``table`` lists, per plateau p: n_p, m_p, g_{n_p} and n_{p+1}.
    ``witness`` is an l^2 sequence with x_{n_p} = 1/p and zeros elsewhere.
    """

    beta: float
    g: np.ndarray
    table: list
    witness: np.ndarray
    max_level: int

    def params(self, N=None, phi=None):
        N = self.g.size if N is None else N
        return ModelParams(beta=self.beta, N=N, g=self.g, phi=phi or PhiSpec.constant(1.0),
                           g_family=("counterexample", {}))

    def witness_sup(self, s, t):
        """max_n 2^{sn} |Z_n(t)| for the witness under linear evolution."""
        n = np.arange(1, self.g.size + 1)
        k = np.exp2(self.beta * n)
        logs = s * n * math.log(2.0) - k / self.g * t
        with np.errstate(divide="ignore"):
            logs = logs + np.log(np.abs(self.witness))
        return float(math.exp(np.max(logs)))


_MAX_TABLE = 1 << 22


def counterexample_g(beta, n1, levels, max_len=_MAX_TABLE):
    """Piecewise g with n g_n / k_n = 1 at the start of every plateau.

    n_{p+1} = n_p 2^{ceil(beta r_p)} with r_p = ceil(k_{n_p}/n_p), m_p = n_p + r_p,
    g_{n_p} = k_{n_p}/n_p, g constant on [n_p, m_p], g_n = g_{n_p} k_n/k_{m_p}
    on (m_p, n_{p+1}).  Before n_1, g_n = g_{n_1}.  The table runs up to
    n_{levels+1} inclusive.  Raises OverflowError naming the largest
    representable level when the construction outgrows ``max_len`` or the
    float range.
    """
    if n1 < 1 or levels < 1:
        raise ValueError("need n1 >= 1 and levels >= 1")
    starts = [int(n1)]
    table = []
    for p in range(1, levels + 1):
        n_p = starts[-1]
        if beta * n_p > 1000:
            raise OverflowError(f"k_{n_p} overflows; max representable level is {p - 2}")
        ratio = 2.0 ** (beta * n_p) / n_p
        r = math.ceil(ratio)
        expo = math.ceil(beta * r)
        if expo > 60 or n_p * 2**expo > max_len:
            raise OverflowError(f"level {p} needs n_{p + 1} = {n_p} * 2^{expo}; "
                                f"max representable level is {p - 1}")
        n_next = n_p * 2**expo
        starts.append(n_next)
        table.append({"p": p, "n_p": n_p, "m_p": n_p + r, "g_n_p": ratio, "n_next": n_next})
    n_last = starts[-1]
    if beta * n_last > 1000:
        raise OverflowError(f"k_{n_last} overflows; max representable level is {levels - 1}")
    g = np.empty(n_last)
    n_idx = np.arange(1, n_last + 1)
    k = np.exp2(beta * n_idx)
    g[: n1 - 1] = 2.0 ** (beta * n1) / n1
    for row in table:
        n_p, m_p, gp, n_next = row["n_p"], row["m_p"], row["g_n_p"], row["n_next"]
        g[n_p - 1 : m_p] = gp
        if m_p + 1 < n_next:
            g[m_p : n_next - 1] = gp * k[m_p : n_next - 1] / 2.0 ** (beta * m_p)
    g[n_last - 1] = 2.0 ** (beta * n_last) / n_last
    witness = np.zeros(n_last)
    for p, n_p in enumerate(starts, start=1):
        witness[n_p - 1] = 1.0 / p
    return CounterexampleG(float(beta), g, table, witness, levels)


def window_balance(traj, n, m):
    """Residual of the energy balance on the shell window n..n+m.

    d/dt(1/2 sum_{i=n}^{n+m} X_i^2) is taken by finite differences and
    compared with phi_{n-1} k_{n-1} X_{n-1}^2 X_n
    - phi_{n+m} k_{n+m} X_{n+m}^2 X_{n+m+1} - sum (k_i/g_i) X_i^2.
    Shells outside 1..N count as zero.
    """
    N = traj.params.N
    if n < 1 or m < 0 or n + m > N:
        raise ValueError(f"window {n}..{n + m} out of range 1..{N}")
    params = traj.params
    k = params.k
    lo, hi = n - 1, n + m  # python slice of the window
    half = 0.5 * np.sum(traj.x[:, lo:hi] ** 2, axis=1)
    lhs = _time_derivative(traj.t, half)
    rhs = np.empty_like(lhs)
    for i, st in enumerate(traj):
        x = st.x
        phi = params.phi.evaluate(st.t, x)
        inflow = phi[n - 2] * k[n - 1] * x[n - 2] ** 2 * x[n - 1] if n >= 2 else 0.0
        top = n + m  # last shell in the window
        outflow = phi[top - 1] * k[top] * x[top - 1] ** 2 * x[top] if top < N else 0.0
        rhs[i] = inflow - outflow - np.sum(params.decay_rates[lo:hi] * x[lo:hi] ** 2)
    return lhs - rhs
