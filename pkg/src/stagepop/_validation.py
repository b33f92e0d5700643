"""Input validation helpers used across the public API."""

import numbers

import numpy as np

from .exceptions import ConfigurationError, ShapeError


def check_positive(value, name, *, strict=True):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise ConfigurationError(f"expected a real number, got {value!r}", name)
    value = float(value)
    if not np.isfinite(value) or value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise ConfigurationError(f"must be {bound}, got {value!r}", name)
    return value


def check_nodal(values, n, name="field", *, allow_batch=False):
    """Return ``values`` as a float array with leading dimension ``n``."""
    arr = np.asarray(values, dtype=float)
    ok_ndim = arr.ndim in ((1, 2) if allow_batch else (1,))
    if not ok_ndim or arr.shape[0] != n:
        raise ShapeError(f"{name}: expected {n} nodal values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name}: contains non-finite values")
    return arr


def check_nonnegative_state(u1, u2, n):
    u1 = check_nodal(u1, n, "u1")
    u2 = check_nodal(u2, n, "u2")
    if u1.min() < 0 or u2.min() < 0:
        raise ConfigurationError("initial densities must be nonnegative", "u0")
    return u1, u2


def sup_norm(*fields):
    """Max-norm of a tuple of components (max over components)."""
    return max(float(np.max(np.abs(f))) if np.size(f) else 0.0 for f in fields)
