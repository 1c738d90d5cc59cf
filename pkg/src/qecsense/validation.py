"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numbers

import numpy as np

from .exceptions import InvalidModelError


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_time(t) -> float:
    t = float(t)
    if not np.isfinite(t) or t <= 0:
        raise ValueError(f"evolution time must be positive and finite, got {t}")
    return t


def check_probability_vector(p, name: str = "p", atol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidModelError(f"{name} must be a non-empty 1-D array")
    if np.any(p < -atol) or np.any(p > 1 + atol):
        raise InvalidModelError(f"{name} has entries outside [0, 1]")
    if abs(p.sum() - 1.0) > atol:
        raise InvalidModelError(f"{name} sums to {p.sum():.15g}, not 1")
    return p


def check_fisher_matrix(m, sym_tol: float = 1e-12, psd_tol: float = 1e-10) -> np.ndarray:
    """Validate the symmetric positive-semidefinite contract of a Fisher matrix.

    Tolerances are relative to the largest entry so that matrices growing like
    N^2 are judged on the same footing as O(1) ones.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 3):
        raise ValueError(f"Fisher matrix must be 2x2 or 3x3, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > sym_tol * scale:
        raise ValueError("Fisher matrix is not symmetric")
    if np.min(np.linalg.eigvalsh(m)) < -psd_tol * scale:
        raise ValueError("Fisher matrix is not positive semidefinite")
    return m


def check_random_state_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)
