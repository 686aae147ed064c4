"""Input validation helpers shared by the model, envelope and estimator code."""

import numbers

import numpy as np
from sklearn.utils import check_array


def check_shell_vector(x, n_shells=None, name="x"):
    """Return ``x`` as a finite 1-D float64 array, optionally of length ``n_shells``."""
    arr = check_array(
        np.asarray(x, dtype=float), ensure_2d=False, dtype=np.float64,
        ensure_all_finite=True, input_name=name, copy=False,
    )
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if n_shells is not None and arr.shape[0] != n_shells:
        raise ValueError(f"{name} has {arr.shape[0]} shells, expected {n_shells}")
    return arr


def check_averaged_matrix(x, n_shells=None, name="x"):
    arr = check_array(
        np.asarray(x, dtype=float), dtype=np.float64, ensure_all_finite=True,
        input_name=name, copy=False,
    )
    if arr.shape[0] != 4:
        raise ValueError(f"{name} must have 4 rows, got shape {arr.shape}")
    if n_shells is not None and arr.shape[1] != n_shells:
        raise ValueError(f"{name} has {arr.shape[1]} shells, expected {n_shells}")
    return arr


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return float(value)
