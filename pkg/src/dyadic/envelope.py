"""A-priori bounding sequence and its decay machinery.

Given initial data x, the bounding sequence

    y_1 = y_2 = 2 ||x||^2,
    y_{n+2} = C_{n+2}(sqrt(y_{n+1})) y_n + f_{n+2},    f_n = sum_{i>=n} x_i^2,

dominates X_n^2(t) for every solution satisfying the energy inequality
when g is non-decreasing.  The helpers below build y, the index ladder
n_k that paces its decay, and the checks that the decay is summable.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_shell_vector

__all__ = [
    "C_n",
    "tail_sums",
    "BoundingSequence",
    "bounding_sequence",
    "EnvelopeReport",
    "envelope_dominates",
    "d_squared_table",
    "d_n_squared",
    "dn_recursion_excess",
    "SpecialSubsequence",
    "SubsequenceExhausted",
    "special_subsequence",
    "count_adjacent_pairs",
    "adjacent_pairs_growth",
    "LadderParameters",
    "select_ladder_parameters",
    "LadderReport",
    "verify_decay_ladder",
    "weighted_tail_sum",
    "product_bound_excess",
    "summability_report",
    "auto_ladder",
]


def C_n(v, g_n, phi_sup):
    """(1 + 1/(g_n phi_sup v / 2))^{-1}, with the limit value 0 at v = 0.

    Works elementwise on arrays.
    """
    v = np.asarray(v, dtype=float)
    g_n = np.asarray(g_n, dtype=float)
    if np.any(v < 0) or np.any(g_n <= 0) or not phi_sup > 0:
        raise ValueError("C_n needs v >= 0, g_n > 0 and phi_sup > 0")
    z = 0.5 * g_n * phi_sup * v
    out = z / (1.0 + z)
    return float(out) if out.ndim == 0 else out


class _Kahan:
    """Running compensated sum."""

    def __init__(self):
        self.total = 0.0
        self.carry = 0.0

    def add(self, value):
        y = value - self.carry
        t = self.total + y
        self.carry = (t - self.total) - y
        self.total = t
        return self.total


def tail_sums(values):
    """Suffix sums s_n = sum_{i>=n} values_i, accumulated backwards with Kahan compensation."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    acc = _Kahan()
    for i in range(values.size - 1, -1, -1):
        out[i] = acc.add(values[i])
    return out


@dataclass
class BoundingSequence:
    """y_n, f_n = F_n(0), h_n = sum_{j>=n} f_j and c_n = C_n(sqrt(y_{n-1})).

    Index n lives at position n-1.  c_1 and c_2 are undefined (NaN).
    """

    y: np.ndarray
    f: np.ndarray
    h: np.ndarray
    c: np.ndarray
    x: np.ndarray
    g: np.ndarray
    phi_sup: float

    @property
    def N(self):
        return self.y.size

    def h_closed_form(self):
        """sum_{j>=1} j x_{j+n-1}^2, the equivalent form of h_n."""
        x2 = self.x * self.x
        N = x2.size
        j = np.arange(1, N + 1)
        return np.array([math.fsum(j[: N - n] * x2[n:]) for n in range(N)])

    def reconstruction_excess(self):
        """max_n |y_{n+2} - (c_{n+2} y_n + f_{n+2})| over 1 <= n <= N-2."""
        if self.N < 3:
            return 0.0
        return float(np.max(np.abs(self.y[2:] - (self.c[2:] * self.y[:-2] + self.f[2:]))))


def bounding_sequence(x, params=None, *, g=None, phi_sup=None):
    """Bounding sequence of ``x``.

    g and ||phi||_inf come from ``params`` unless given explicitly (useful
    for truncations too long for a wavenumber table).
    """
    if params is not None:
        g = params.gN if g is None else g
        phi_sup = params.phi.sup_bound if phi_sup is None else phi_sup
    if g is None or phi_sup is None:
        raise ValueError("need params or both g and phi_sup")
    x = check_shell_vector(x)
    g = np.asarray(g, dtype=float)[: x.size]
    if g.size < x.size:
        raise ValueError(f"g has {g.size} entries, x has {x.size}")
    x2 = x * x
    f = tail_sums(x2)
    h = tail_sums(f)
    N = x.size
    y = np.empty(N)
    c = np.full(N, np.nan)
    y[0] = y[1] = 2.0 * f[0]
    if not phi_sup > 0 or np.any(g <= 0):
        raise ValueError("bounding sequence needs phi_sup > 0 and positive g")
    half_gphi = 0.5 * phi_sup * g
    for i in range(2, N):
        # i is the 0-based position of shell n = i + 1; inlined C_n
        z = half_gphi[i] * math.sqrt(y[i - 1])
        c[i] = z / (1.0 + z)
        y[i] = c[i] * y[i - 2] + f[i]
    return BoundingSequence(y=y, f=f, h=h, c=c, x=x.copy(), g=g.copy(), phi_sup=phi_sup)


def product_bound_excess(bs, n, m):
    """y_{n+2m} - (y_n prod_{i=1}^m C_{n+2i}(sqrt(y_{n+2i-1})) + h_n); <= 0 when the bound holds."""
    y, c, h = bs.y, bs.c, bs.h
    prod = 1.0
    for i in range(1, m + 1):
        prod *= c[n + 2 * i - 1]
    return float(y[n + 2 * m - 1] - (y[n - 1] * prod + h[n - 1]))


@dataclass
class EnvelopeReport:
    violations: list
    max_excess: float
    slack: float
    n_checked: int

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            "passed": self.passed, "n_violations": len(self.violations),
            "max_excess": self.max_excess, "slack": self.slack,
            "n_checked": self.n_checked, "violations": self.violations[:50],
        }


def envelope_dominates(traj, bs, slack=1e-8):
    """Check X_n^2(t) <= y_n + slack for every stored state and shell."""
    X2 = traj.shell_energies
    excess = X2 - bs.y[None, :]
    bad = np.argwhere(excess > slack)
    violations = [
        {"t": float(traj.t[i]), "n": int(j + 1), "X2": float(X2[i, j]), "y": float(bs.y[j])}
        for i, j in bad
    ]
    return EnvelopeReport(violations, float(excess.max()), slack, int(X2.size))


def d_squared_table(traj):
    """d_n^2(t) = F_n(t) + sum_{i>=n+1} D_i(t) at every stored time, shape (T, N)."""
    F = np.cumsum(traj.shell_energies[:, ::-1], axis=1)[:, ::-1]
    Dtail = np.cumsum(traj.D[:, ::-1], axis=1)[:, ::-1]
    out = F.copy()
    out[:, :-1] += Dtail[:, 1:]
    return out


def d_n_squared(traj, n, t):
    """d_n^2 at time ``t``, linearly interpolated between stored states."""
    if n < 1 or n > traj.params.N:
        raise ValueError(f"shell index {n} out of range")
    if t < traj.t[0] or t > traj.t[-1]:
        raise ValueError(f"t={t} outside the trajectory span [{traj.t[0]}, {traj.t[-1]}]")
    col = d_squared_table(traj)[:, n - 1]
    return float(np.interp(t, traj.t, col))


def dn_recursion_excess(traj):
    """d̄_{n+2}^2 - C_{n+2}(d̄_{n+1}) d̄_n^2 - F_{n+2}(0) for n = 1..N-2.

    d̄_n is the supremum of d_n over the stored states.  Nonpositive
    entries mean the recursion bound holds.
    """
    d2 = d_squared_table(traj)
    dbar2 = d2.max(axis=0)
    F0 = tail_sums(traj.shell_energies[0])
    g = traj.params.gN
    phi_sup = traj.params.phi.sup_bound
    c = C_n(np.sqrt(dbar2[1:-1]), g[2:], phi_sup)
    return dbar2[2:] - c * dbar2[:-2] - F0[2:]


# -- index ladder ------------------------------------------------------------

@dataclass
class SpecialSubsequence:
    n0: int
    theta: float
    s: float
    indices: np.ndarray

    @property
    def K(self):
        return self.indices.size - 1


class SubsequenceExhausted(ValueError):
    def __init__(self, level, indices):
        super().__init__(f"g table exhausted while building level {level + 1}")
        self.level = level
        self.indices = indices


def special_subsequence(g, n0, theta, s, K):
    """n_{k+1} = least n >= n_k + 2 with sum_{j=n_k+2}^{n} 1/g_j >= 2^{-sk} theta.

    ``g`` holds g_1, g_2, ...  Raises SubsequenceExhausted (carrying the
    level reached) when the table ends first.
    """
    g = np.asarray(g, dtype=float)
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    inv = 1.0 / g
    idx = [int(n0)]
    for k in range(K):
        need = 2.0 ** (-s * k) * theta
        n = idx[-1] + 2
        if n > g.size:
            raise SubsequenceExhausted(k, np.array(idx))
        acc = _Kahan()
        while acc.add(inv[n - 1]) < need:
            n += 1
            if n > g.size:
                raise SubsequenceExhausted(k, np.array(idx))
        idx.append(n)
    return SpecialSubsequence(int(n0), float(theta), float(s), np.array(idx))


def count_adjacent_pairs(sub):
    """Number of levels k < K with n_{k+1} = n_k + 2."""
    return int(np.sum(np.diff(sub.indices) == 2))


def adjacent_pairs_growth(g, n0, theta, s, Ks=(10, 20, 40)):
    """Adjacent-pair counts as K grows; flags a violated divergence hypothesis.

    When the g table runs out before a requested level, the partial sums of
    1/g are treated as convergent and the report says so.
    """
    counts = {}
    for K in Ks:
        try:
            counts[int(K)] = count_adjacent_pairs(special_subsequence(g, n0, theta, s, K))
        except SubsequenceExhausted as exc:
            return {"status": "hypothesis violated", "counts": counts,
                    "exhausted_at_level": exc.level, "requested_K": int(K)}
    vals = [counts[int(K)] for K in Ks]
    monotone = all(a <= b for a, b in zip(vals, vals[1:]))
    return {"status": "ok", "counts": counts, "monotone": monotone,
            "at_least_one": vals[0] >= 1}


@dataclass
class LadderParameters:
    n0: int
    theta: float
    eta: float
    c: float


def select_ladder_parameters(bs, s, eta=0.25, theta_max=2.0**60):
    """Smallest n0 with y_n <= 1 and h_n <= eta 2^{-2sn} for all n0 <= n <= N,
    then the smallest power of two theta with
    2^{2s} (1 + c theta / 2)^{-1} + eta <= 2^{-2s},  c = 2/||phi||_inf.
    """
    n = np.arange(1, bs.N + 1)
    ok = (bs.y <= 1.0) & (bs.h <= eta * np.exp2(-2.0 * s * n))
    # suffix-all: position i is good iff ok[i:] all hold
    good = np.flip(np.logical_and.accumulate(np.flip(ok)))
    if not good[-1]:
        raise ValueError("no admissible n0 within the truncation")
    n0 = int(np.argmax(good)) + 1
    c = 2.0 / bs.phi_sup
    lhs_target = 2.0 ** (-2 * s) - eta
    if lhs_target <= 0:
        raise ValueError(f"eta={eta} too large for s={s}")
    theta = 1.0
    while 2.0 ** (2 * s) / (1.0 + 0.5 * c * theta) > lhs_target:
        theta *= 2.0
        if theta > theta_max:
            raise ValueError("no admissible theta below theta_max")
    return LadderParameters(n0=n0, theta=theta, eta=eta, c=c)


@dataclass
class LadderReport:
    levels: list
    passed: bool
    min_margin: float

    def to_dict(self):
        return {"passed": self.passed, "min_margin": self.min_margin, "levels": self.levels}


def verify_decay_ladder(bs, sub):
    """Check sup_{n_k <= j <= N} y_j <= 2^{-2sk} for every constructed level k.

    The margin of level k is ``bound - sup`` (nonnegative when it holds).
    """
    levels = []
    for k, nk in enumerate(sub.indices):
        if nk > bs.N:
            break
        sup = float(np.max(bs.y[nk - 1 :]))
        bound = 2.0 ** (-2 * sub.s * k)
        levels.append({"k": k, "n_k": int(nk), "sup_y": sup, "bound": bound,
                       "margin": bound - sup, "holds": sup <= bound})
    passed = all(lv["holds"] for lv in levels)
    min_margin = min((lv["margin"] for lv in levels), default=math.inf)
    return LadderReport(levels, passed, min_margin)


def weighted_tail_sum(bs, s, n_lo=1):
    """sum_{n=n_lo}^{N} 2^{2sn} y_n (compensated)."""
    n = np.arange(n_lo, bs.N + 1)
    return math.fsum(np.exp2(2 * s * n) * bs.y[n_lo - 1 :])


def summability_report(bs, s, quarter=0.25):
    """Cauchy-style evidence that sum 2^{2sn} y_n converges.

    Reports the share of the last ``quarter`` of shells in the weighted sum,
    whether c_n in the second half of the range stays below its minimum
    over the first decade (n = 3..12), and the decay constant
    c = 2 / ||phi||_inf * (sup y)^{-1/2} used in C_j(sqrt(y_{j-1})) <= (1 + c/g_j)^{-1}.
    """
    N = bs.N
    total = weighted_tail_sum(bs, s, 1)
    lo = N - int(quarter * N) + 1
    last = weighted_tail_sum(bs, s, lo)
    share = last / total if total > 0 else 0.0
    first_decade = bs.c[2 : min(12, N)]
    second_half = bs.c[N // 2 - 1 :]
    ymax = float(np.max(bs.y))
    return {
        "total": total,
        "last_quarter_from": lo,
        "last_quarter_share": share,
        "c_late_max": float(np.nanmax(second_half)),
        "c_early_min": float(np.nanmin(first_decade)),
        "c_decreasing": bool(np.nanmax(second_half) < np.nanmin(first_decade)),
        "decay_constant": (2.0 / bs.phi_sup / math.sqrt(ymax)) if ymax > 0 else math.inf,
    }


def auto_ladder(bs, s, eta=0.25, K_max=10_000):
    """Select (n0, theta), build as many ladder levels as the truncation allows
    and verify the decay ladder on them.

    Returns ``(LadderParameters, SpecialSubsequence, LadderReport)``.
    """
    lp = select_ladder_parameters(bs, s, eta=eta)
    try:
        sub = special_subsequence(bs.g, lp.n0, lp.theta, s, K_max)
    except SubsequenceExhausted as exc:
        sub = SpecialSubsequence(lp.n0, lp.theta, float(s), exc.indices)
    return lp, sub, verify_decay_ladder(bs, sub)
