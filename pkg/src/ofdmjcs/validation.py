"""Input checks shared by the estimator wrappers.

scikit-learn's ``check_array`` rejects complex input, so frames are validated here.
"""
from __future__ import annotations

import numpy as np


def check_frame(x, name: str = "frame", shape: tuple[int, int] | None = None) -> np.ndarray:
    """Finite complex 2-D array, optionally of a given shape."""
    x = np.asarray(getattr(x, "values", x))
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-D (subcarriers x symbols), got ndim={x.ndim}")
    if not np.issubdtype(x.dtype, np.number):
        raise TypeError(f"{name} must be numeric, got {x.dtype}")
    x = x.astype(complex, copy=False)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or infinite values")
    if shape is not None and x.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {x.shape}")
    return x


def check_vector(x, n: int | None = None, name: str = "vector") -> np.ndarray:
    x = np.asarray(x).astype(complex, copy=False)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if n is not None and x.size != n:
        raise ValueError(f"{name} must have {n} entries, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return x


def check_bits(bits, n: int | None = None) -> np.ndarray:
    b = np.asarray(bits).ravel()
    if b.size and not np.all((b == 0) | (b == 1)):
        raise ValueError("bits must be 0 or 1")
    if n is not None and b.size != n:
        raise ValueError(f"expected {n} bits, got {b.size}")
    return b.astype(np.int8)
