"""Input validation helpers used by the estimators and simulators."""
from __future__ import annotations

import numbers

import numpy as np


def check_probability_vector(pi, name="pi", strictly_positive=True):
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or pi.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(pi)):
        raise ValueError(f"{name} must be finite")
    if strictly_positive and np.any(pi <= 0):
        raise ValueError(f"{name} must be strictly positive")
    if np.any(pi < 0):
        raise ValueError(f"{name} must be non-negative")
    if abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1 (got {pi.sum()!r})")
    return pi


def check_matrix(a, name, shape=None, low=None, high=None, strict_low=False):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array")
    if shape is not None and a.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    if low is not None:
        bad = a <= low if strict_low else a < low
        if np.any(bad):
            op = ">" if strict_low else ">="
            raise ValueError(f"{name} entries must be {op} {low}")
    if high is not None and np.any(a > high):
        raise ValueError(f"{name} entries must be <= {high}")
    return a


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number")
    if value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'non-negative' if allow_zero else 'positive'}")
    return float(value)


def check_unit_interval(value, name, open_low=True, open_high=True):
    value = float(value)
    lo_bad = value <= 0 if open_low else value < 0
    hi_bad = value >= 1 if open_high else value > 1
    if lo_bad or hi_bad:
        raise ValueError(f"{name} must lie in the unit interval, got {value!r}")
    return value


def check_point(p, name="point"):
    p = np.asarray(p, dtype=float)
    if p.shape != (2,) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} must be a finite 2-D point")
    return p


def check_random_state(seed):
    """Coerce ``seed`` to a :class:`numpy.random.Generator`."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise ValueError(f"cannot build a random generator from {seed!r}")
