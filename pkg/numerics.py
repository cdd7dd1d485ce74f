"""
Small dense complex linear algebra and scalar root finding.

Matrices are plain ``numpy`` complex arrays of shape (n, n); n stays small
(at most 16 in practice), so there are no sparse or blocked code paths.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import bisect

from errors import DimensionMismatchError, InvalidIntervalError, SingularMatrixError

logger = logging.getLogger(__name__)

# relative pivot threshold separating true singularity from round-off
PIVOT_TOLERANCE = 1e-13

DenseMatrix = NDArray[np.complex128]


@dataclass(frozen=True)
class RootBracket:
    """Interval [lo, hi] over which a function changes sign"""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise InvalidIntervalError(f"invalid bracket [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def as_matrix(a: ArrayLike) -> DenseMatrix:
    """Coerce to a square complex matrix, rejecting anything else"""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DimensionMismatchError("matrix entries must be finite")
    return m


def mat_mul(a: ArrayLike, b: ArrayLike) -> DenseMatrix:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def _factorize(a: DenseMatrix) -> Tuple[DenseMatrix, NDArray[np.int32]]:
    lu, piv = lu_factor(a, check_finite=False)
    return lu, piv


def _row_permutation(piv: NDArray[np.int32]) -> NDArray[np.intp]:
    """Turn LAPACK's sequential row swaps into a permutation of row indices"""
    perm = np.arange(len(piv))
    for i, p in enumerate(piv):
        perm[i], perm[p] = perm[p], perm[i]
    return perm


def solve_linear(a: ArrayLike, b: ArrayLike) -> DenseMatrix:
    """Solve a·X = b by LU elimination with partial pivoting.

    Raises SingularMatrixError when a pivot drops below PIVOT_TOLERANCE times
    the largest magnitude in its (permuted) row of ``a``.
    """
    a = as_matrix(a)
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != a.shape[0] or b.ndim not in (1, 2):
        raise DimensionMismatchError(f"right-hand side of shape {b.shape} does not fit {a.shape}")

    lu, piv = _factorize(a)
    perm = _row_permutation(piv)
    row_scale = np.max(np.abs(a[perm]), axis=1)
    pivots = np.abs(np.diag(lu))
    bad = (row_scale == 0) | (pivots < PIVOT_TOLERANCE * row_scale)
    if np.any(bad):
        row = int(np.argmax(bad))
        raise SingularMatrixError(f"pivot {pivots[row]:.3e} in row {row} is below tolerance")

    return lu_solve((lu, piv), b, check_finite=False)


def determinant(a: ArrayLike) -> complex:
    """Determinant from the LU factors with row-swap sign tracking"""
    a = as_matrix(a)
    lu, piv = _factorize(a)
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    sign = -1.0 if swaps % 2 else 1.0
    return complex(sign * np.prod(np.diag(lu)))


def _sample(f: Callable, xs: NDArray[np.float64], vectorized: bool) -> NDArray[np.float64]:
    if vectorized:
        values = np.asarray(f(xs), dtype=float)
        if values.shape == xs.shape:
            return values
    return np.array([f(float(x)) for x in xs], dtype=float)


def find_roots(f: Callable[[float], float], interval: Tuple[float, float], grid: int,
               tol: float = 1e-12, vectorized: bool = False) -> List[float]:
    """Roots of a continuous real function on [a, b].

    The interval is sampled at ``grid`` equally spaced points and every
    sign-change bracket is bisected until it is narrower than ``tol``.
    Zeros where f touches the axis without changing sign are not found;
    callers that care about them have to look for them separately.
    """
    a, b = float(interval[0]), float(interval[1])
    RootBracket(a, b)
    if grid < 2:
        raise InvalidIntervalError(f"grid must have at least 2 points, got {grid}")
    if not tol > 0:
        raise InvalidIntervalError(f"tolerance must be positive, got {tol}")

    xs = np.linspace(a, b, int(grid))
    values = _sample(f, xs, vectorized)

    roots: List[float] = []
    for i in range(len(xs) - 1):
        v0, v1 = values[i], values[i + 1]
        if not (math.isfinite(v0) and math.isfinite(v1)):
            continue
        if v0 == 0.0:
            roots.append(float(xs[i]))
        elif v0 * v1 < 0:
            bracket = RootBracket(float(xs[i]), float(xs[i + 1]))
            roots.append(bisect(lambda x: float(f(x)), bracket.lo, bracket.hi, xtol=tol, maxiter=200))
    if values[-1] == 0.0:
        roots.append(float(xs[-1]))

    logger.debug(f"find_roots on [{a}, {b}] with {grid} points: {len(roots)} roots")
    return sorted(roots)
