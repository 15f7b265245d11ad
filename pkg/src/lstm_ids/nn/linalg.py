"""Dense linear-algebra and activation kernels.

Matrices and vectors are plain numpy arrays of float64 in row-major (C)
order; that order is also the order weights are serialized in. Every
function returns a fresh array and leaves its inputs untouched, so the
kernels are safe to call from any number of threads.
"""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from lstm_ids.exceptions import ConfigError, ShapeError

Matrix = np.ndarray
Vector = np.ndarray


def as_matrix(data, *, name: str = "matrix") -> Matrix:
    """Coerce ``data`` to a 2-D float64 C-ordered array with rows, cols >= 1."""
    out = np.array(data, dtype=np.float64, order="C", ndmin=2)
    if out.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {out.shape}")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and column, "
                         f"got shape {out.shape}")
    return out


def as_vector(data, *, name: str = "vector") -> Vector:
    out = np.array(data, dtype=np.float64, order="C", ndmin=1)
    if out.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {out.shape}")
    return out


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product of an (r×k) and a (k×c) matrix."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"Cannot multiply {_shape(a)} by {_shape(b)}")
    return a @ b


_ELEMENTWISE: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def elementwise(op: str, a: Matrix, b: Matrix) -> Matrix:
    """Entrywise ``add``/``sub``/``mul`` of two identically shaped arrays."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ConfigError(
            f"Unknown elementwise op {op!r}; expected one of "
            f"{', '.join(sorted(_ELEMENTWISE))}") from None
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(
            f"Elementwise {op} needs identical shapes, got {_shape(a)} "
            f"and {_shape(b)}")
    return fn(a, b)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, evaluated without overflow for any finite input."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


_ACTIVATIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sigmoid": sigmoid,
    "tanh": tanh,
}


def apply(fn: str, a: np.ndarray) -> np.ndarray:
    """Apply the named activation (``sigmoid`` or ``tanh``) entrywise."""
    try:
        activation = _ACTIVATIONS[fn]
    except KeyError:
        raise ConfigError(
            f"Unknown activation {fn!r}; expected one of "
            f"{', '.join(sorted(_ACTIVATIONS))}") from None
    return activation(a)


def _shape(a: np.ndarray) -> str:
    return "×".join(str(d) for d in a.shape) or "scalar"
