"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .errors import DimMismatchError, DomainError


def check_probability(value, name: str, *, low: float = 0.0, high: float = 1.0,
                      inclusive: tuple[bool, bool] = (True, True)) -> float:
    value = float(value)
    lo_ok = value >= low if inclusive[0] else value > low
    hi_ok = value <= high if inclusive[1] else value < high
    if not (lo_ok and hi_ok and np.isfinite(value)):
        lo_b = "[" if inclusive[0] else "("
        hi_b = "]" if inclusive[1] else ")"
        raise DomainError(f"{name}={value!r} outside {lo_b}{low}, {high}{hi_b}")
    return value


def check_positive_int(value, name: str, *, minimum: int = 1) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise DomainError(f"{name}={value} must be >= {minimum}")
    return value


def check_labels(labels, class_count: int, name: str = "labels") -> np.ndarray:
    """Coerce to a 1-D int64 array of leaf ids in [0, class_count)."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise DimMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise DomainError(f"{name} must be integer-typed, got {arr.dtype}")
    arr = arr.astype(np.int64, copy=False)
    if arr.size and (arr.min() < 0 or arr.max() >= class_count):
        raise DomainError(f"{name} contains ids outside 0..{class_count - 1}")
    return arr


def check_row_stochastic(rows, name: str = "posteriors", tol: float = 1e-5) -> np.ndarray:
    """Check the trailing axis sums to 1 within tol and entries are >= 0."""
    arr = np.asarray(rows, dtype=np.float64)
    if arr.size == 0:
        raise DomainError(f"{name} is empty")
    if arr.min() < 0:
        raise DomainError(f"{name} has negative entries")
    sums = arr.sum(axis=-1)
    err = np.abs(sums - 1.0).max()
    if err > tol:
        raise DomainError(f"{name} rows sum to 1 +/- {err:.2e}, tolerance {tol}")
    return arr


def check_same_components(n_a: int, n_b: int, what: str) -> None:
    if int(n_a) != int(n_b):
        raise DimMismatchError(f"{what}: {n_a} != {n_b}")
