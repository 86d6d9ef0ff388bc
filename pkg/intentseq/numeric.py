"""Dense numeric kernel shared by every network.

Matrices are plain numpy arrays. ``as_matrix`` produces the read-only, finite
variant used at module boundaries; the hot paths below accept any array of the
right shape. Training and inference run in float32, gradient checking in float64.
"""

import logging
from collections.abc import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit

from .errors import EmptyTimeAxisError, NonFiniteLossError, ShapeMismatchError

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float32
CHECK_DTYPE = np.float64

Array = NDArray[np.floating]


def as_matrix(data: ArrayLike, dtype: type[np.floating] = DEFAULT_DTYPE, checked: bool = True) -> Array:
    """Build an immutable 2-D matrix.

    Args:
        data: Nested rows or an array
        dtype: float32 for training/inference, float64 for gradient checks
        checked: Reject NaN and Inf entries

    Returns:
        Read-only array of shape (rows, cols)

    Raises:
        ShapeMismatchError: If ``data`` is not two-dimensional
        ValueError: If ``checked`` and an entry is not finite
    """
    matrix = np.array(data, dtype=dtype)
    if matrix.ndim != 2:
        raise ShapeMismatchError(f"Matrix must be 2-D, got shape {matrix.shape}")
    if checked and not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix entries must be finite")
    matrix.setflags(write=False)
    return matrix


def _require_2d(name: str, a: Array) -> None:
    if a.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {a.shape}")


def matmul(a: Array, b: Array) -> Array:
    """Matrix product ``a @ b``.

    float32 operands are multiplied in float64 and rounded once, so each output
    row depends only on its own input row regardless of batch composition.

    Raises:
        ShapeMismatchError: If ``a.cols != b.rows``
    """
    _require_2d("left operand", a)
    _require_2d("right operand", b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"Cannot multiply {a.shape} by {b.shape}")
    out_dtype = np.result_type(a.dtype, b.dtype)
    if out_dtype == np.float64:
        return a @ b
    return np.matmul(a, b, dtype=np.float64).astype(out_dtype)


def widen(b: Array) -> NDArray[np.float64]:
    """Contiguous float64 copy of a right operand reused by ``widened_affine``."""
    return np.ascontiguousarray(b, dtype=np.float64)


def widened_affine(a: Array, b_wide: NDArray[np.float64], offset: Array) -> Array:
    """``matmul(a, b) + offset`` for ``b_wide = widen(b)``, bitwise.

    Per-step kernel of the recurrent layers: no shape checks, and the weight
    cast happens once per pass instead of once per call.
    """
    return np.add(np.matmul(a, b_wide), offset, dtype=offset.dtype)


def hadamard(a: Array, b: Array) -> Array:
    """Elementwise product of equally shaped arrays."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"Hadamard product needs equal shapes, got {a.shape} and {b.shape}")
    return a * b


def sigmoid(x: Array) -> Array:
    """Logistic function; saturates to 0/1 without overflow."""
    return expit(x)


def tanh(x: Array) -> Array:
    return np.tanh(x)


def relu(x: Array) -> Array:
    return np.maximum(x, 0)


def sigmoid_grad(s: Array) -> Array:
    """Derivative of the sigmoid given its output ``s``."""
    return s * (1 - s)


def tanh_grad(t: Array) -> Array:
    """Derivative of tanh given its output ``t``."""
    return 1 - t * t


def relu_grad(grad: Array, pre: Array) -> Array:
    """Pull ``grad`` back through a ReLU whose input was ``pre``."""
    return grad * (pre > 0)


def concat_rows(h: Array, x: Array) -> Array:
    """Horizontal concatenation ``[h | x]`` of two batches.

    Raises:
        ShapeMismatchError: If the batch dimensions differ
    """
    _require_2d("h", h)
    _require_2d("x", x)
    if h.shape[0] != x.shape[0]:
        raise ShapeMismatchError(f"Batch mismatch: {h.shape[0]} vs {x.shape[0]}")
    if x.shape[1] == 0:
        return h
    return np.concatenate([h, x.astype(h.dtype, copy=False)], axis=1)


def mean_over_time(x: Array) -> Array:
    """Average a [batch, channels, time] activation over time.

    Raises:
        ShapeMismatchError: If ``x`` is not rank 3
        EmptyTimeAxisError: If the time axis is empty
    """
    if x.ndim != 3:
        raise ShapeMismatchError(f"Expected [batch, channels, time], got shape {x.shape}")
    if x.shape[2] == 0:
        raise EmptyTimeAxisError("Cannot average over an empty time axis")
    return x.mean(axis=2, dtype=np.float64).astype(x.dtype)


def finite_diff_check(
    f: Callable[[NDArray[np.float64]], float],
    params: ArrayLike,
    analytic_grad: ArrayLike,
    h: float = 1e-5,
    floor: float = 1e-6,
) -> float:
    """Compare an analytic gradient against central differences.

    Args:
        f: Scalar loss as a function of the parameter array
        params: Point at which the gradient is checked (evaluated in float64)
        analytic_grad: Gradient to verify, same shape as ``params``
        h: Perturbation size
        floor: Smallest denominator, so coordinates whose gradient is at the
            level of the differencing roundoff (about eps * |f| / h) compare
            absolutely rather than relatively

    Returns:
        Maximum relative error over all coordinates, using the denominator
        ``max(|analytic|, |numeric|, floor)``

    Raises:
        ShapeMismatchError: If the gradient shape differs from the parameters
        NonFiniteLossError: If ``f`` returns NaN or Inf
    """
    point = np.array(params, dtype=CHECK_DTYPE)
    analytic = np.asarray(analytic_grad, dtype=CHECK_DTYPE)
    if analytic.shape != point.shape:
        raise ShapeMismatchError(f"Gradient shape {analytic.shape} does not match parameters {point.shape}")

    numeric = np.zeros_like(point)
    flat_point = point.reshape(-1)
    flat_numeric = numeric.reshape(-1)
    for index in range(flat_point.size):
        original = flat_point[index]
        flat_point[index] = original + h
        upper = float(f(point))
        flat_point[index] = original - h
        lower = float(f(point))
        flat_point[index] = original
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise NonFiniteLossError(f"Loss is not finite around coordinate {index}")
        flat_numeric[index] = (upper - lower) / (2 * h)

    if point.size == 0:
        return 0.0
    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    error = float(np.max(np.abs(analytic - numeric) / denominator))
    logger.debug(f"Finite-difference check over {point.size} coordinates: max relative error {error:.3e}")
    return error
