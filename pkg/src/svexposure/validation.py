"""Input validation helpers shared by the functional API and the estimators."""
from __future__ import annotations

import numpy as np


class PreconditionError(ValueError):
    """Input violates a documented precondition (shape, range, finiteness)."""


def check_radiance(radiance, even: bool = False, name: str = "radiance") -> np.ndarray:
    """Return ``radiance`` as a 2-D float64 array of finite, non-negative values."""
    arr = np.asarray(radiance, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise PreconditionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{name} contains non-finite values")
    if np.any(arr < 0):
        raise PreconditionError(f"{name} contains negative values")
    if even and (arr.shape[0] % 2 or arr.shape[1] % 2):
        raise PreconditionError(f"{name} dimensions must be even for 2x2 tiling, got {arr.shape}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise PreconditionError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def check_odd_window(n: int, minimum: int = 3) -> int:
    n = int(n)
    if n < minimum or n % 2 == 0:
        raise PreconditionError(f"window size must be odd and >= {minimum}, got {n}")
    return n
