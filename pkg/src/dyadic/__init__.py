"""Slightly supercritical dyadic shell models: simulation, a-priori envelopes, diagnostics."""

from .diagnostics import (
    counterexample_g,
    energy_report,
    flux_profile,
    smoothing_psi,
    tao_quantities,
    window_balance,
)
from .envelope import (
    C_n,
    bounding_sequence,
    count_adjacent_pairs,
    d_n_squared,
    envelope_dominates,
    special_subsequence,
    verify_decay_ladder,
    weighted_tail_sum,
)
from .estimators import BoundingEnvelope, DyadicFlow
from .integrator import (
    StepControl,
    SuspectedBlowUp,
    Trajectory,
    compute_L,
    integrate,
    observed_contraction_rate,
    picard_local_solve,
)
from .shell_model import (
    AveragedState,
    ModelParams,
    PhiSpec,
    ShellState,
    g_table,
    reduce_averaged_to_scalar,
    rhs_averaged,
    rhs_dyadic,
    sobolev_norm,
    wavenumber,
)

__version__ = "0.1.0"
