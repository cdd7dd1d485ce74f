"""
Circulant unitary vertex couplings.

A circulant matrix is stored by its first row; row i is the first row
cyclically shifted right i times, so U[i, j] = c[(j - i) mod n]. All such
matrices share the discrete Fourier eigenbasis

    phi_j = (1, w^j, w^2j, ..., w^(n-1)j) / sqrt(n),   w = exp(2 pi i / n),

with eigenvalue lambda_j = sum_d c[d] w^(j d). Eigenphases are stored in the
order phi_0 (= phi_n), phi_1, ..., phi_{n-1}.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.fft import fft, ifft
from scipy.linalg import circulant

from errors import ConstraintViolationError, IndexOutOfRangeError, NonUnitaryError, ValidationError
from numerics import DenseMatrix, mat_mul

logger = logging.getLogger(__name__)

UNITARITY_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-10
DNR_TOLERANCE = 1e-9
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class CirculantUnitary:
    """Unitary circulant matrix given by its first row (c_1, ..., c_n)"""

    first_row: NDArray[np.complex128]

    @property
    def n(self) -> int:
        return len(self.first_row)

    @property
    def matrix(self) -> DenseMatrix:
        # scipy builds from the first column; the transpose has our first row
        return np.ascontiguousarray(circulant(self.first_row).T)

    def eigenvalues(self) -> NDArray[np.complex128]:
        """lambda_j = sum_d c[d] w^(j d), j = 0..n-1"""
        return self.n * ifft(self.first_row)

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "first_row": [[float(z.real), float(z.imag)] for z in self.first_row],
        })

    @classmethod
    def from_json(cls, text: str) -> "CirculantUnitary":
        try:
            data = json.loads(text)
            row = [complex(re, im) for re, im in data["first_row"]]
            n = int(data.get("n", len(row)))
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"malformed circulant JSON: {e}") from e
        if n != len(row):
            raise ValidationError(f"declared n={n} but first_row has {len(row)} entries")
        return from_first_row(row)


@dataclass(frozen=True, eq=False)
class EigenPhases:
    """Eigenphases gamma_j in [0, 2pi), lambda_j = exp(i gamma_j)"""

    gamma: NDArray[np.float64]

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim != 1 or len(gamma) < 1:
            raise ValidationError("eigenphases must be a non-empty 1-D array")
        if not np.all(np.isfinite(gamma)) or np.any(gamma < 0) or np.any(gamma >= TWO_PI):
            raise ValidationError("eigenphases must lie in [0, 2pi)")
        object.__setattr__(self, "gamma", gamma)

    @property
    def n(self) -> int:
        return len(self.gamma)

    @classmethod
    def normalized(cls, phases: ArrayLike) -> "EigenPhases":
        """Wrap arbitrary real phases into [0, 2pi)"""
        gamma = np.mod(np.asarray(phases, dtype=float), TWO_PI)
        # a phase a hair below 2pi is the eigenvalue 1
        gamma[gamma >= TWO_PI - 1e-12] = 0.0
        return cls(gamma)


@dataclass(frozen=True)
class DnrDecomposition:
    """Dirichlet (lambda = -1), Neumann (lambda = 1) and Robin multiplicities"""

    dirichlet: int
    neumann: int
    robin: int
    tol: float

    @property
    def n(self) -> int:
        return self.dirichlet + self.neumann + self.robin


@dataclass(frozen=True)
class SymmetryReport:
    time_reversal: bool
    pt_symmetric: bool
    parity_fixed_edges: Tuple[int, ...]

    @property
    def nontrivial_pt(self) -> bool:
        return self.pt_symmetric and not self.time_reversal


def unitarity_residual(m: ArrayLike) -> float:
    m = np.asarray(m, dtype=np.complex128)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def from_first_row(row: Sequence[complex]) -> CirculantUnitary:
    first_row = np.asarray(row, dtype=np.complex128).ravel()
    if len(first_row) < 2:
        raise ValidationError(f"a circulant coupling needs n >= 2, got {len(first_row)}")
    if not np.all(np.isfinite(first_row)):
        raise ValidationError("first row entries must be finite")
    u = CirculantUnitary(first_row)
    residual = unitarity_residual(u.matrix)
    if residual >= UNITARITY_TOLERANCE:
        raise NonUnitaryError(f"circulant with first row {np.round(first_row, 6).tolist()} is not unitary (residual {residual:.2e})")
    return u


def from_eigenphases(phases: EigenPhases) -> CirculantUnitary:
    """Inverse DFT: c[d] = (1/n) sum_m lambda_m w^(-m d)"""
    lam = np.exp(1j * phases.gamma)
    return from_first_row(fft(lam) / phases.n)


def eigenvalues(u: CirculantUnitary) -> EigenPhases:
    lam = u.eigenvalues()
    moduli = np.abs(lam)
    if np.any(np.abs(moduli - 1.0) >= UNITARITY_TOLERANCE):
        raise NonUnitaryError(f"eigenvalue moduli {moduli} are not all one")
    return EigenPhases.normalized(np.angle(lam))


def eigenvector(n: int, j: int) -> NDArray[np.complex128]:
    """Normalized eigenvector phi_j, 1 <= j <= n"""
    if n < 1 or not 1 <= j <= n:
        raise IndexOutOfRangeError(f"eigenvector index {j} outside 1..{n}")
    m = np.arange(n)
    return np.exp(2j * math.pi * j * m / n) / math.sqrt(n)


def eigenbasis(n: int) -> DenseMatrix:
    """Columns phi_0 (= phi_n), phi_1, ..., phi_{n-1}"""
    return np.column_stack([eigenvector(n, j if j else n) for j in range(n)])


def parity_operator(n: int) -> DenseMatrix:
    """Mirror permutation fixing edge 1 and swapping edge j with n + 2 - j"""
    if n < 2:
        raise ValidationError(f"parity operator needs n >= 2, got {n}")
    theta = np.zeros((n, n), dtype=np.complex128)
    theta[0, 0] = 1.0
    for i in range(1, n):
        theta[i, n - i] = 1.0
    return theta


def gram_parity_operator(n: int) -> DenseMatrix:
    """Theta_ij = (conj(phi_i), phi_j), i.e. the bilinear Gram matrix of the eigenbasis"""
    if n < 2:
        raise ValidationError(f"parity operator needs n >= 2, got {n}")
    phi = eigenbasis(n)
    return phi.T @ phi


def parity_fixed_edges(n: int) -> Tuple[int, ...]:
    return (1, n // 2 + 1) if n % 2 == 0 else (1,)


def symmetry_report(u: CirculantUnitary) -> SymmetryReport:
    m = u.matrix
    theta = parity_operator(u.n)
    mirrored = mat_mul(mat_mul(theta, m), theta)
    return SymmetryReport(
        time_reversal=bool(np.allclose(m, m.T, rtol=0, atol=SYMMETRY_TOLERANCE)),
        pt_symmetric=bool(np.allclose(mirrored, m.T, rtol=0, atol=SYMMETRY_TOLERANCE)),
        parity_fixed_edges=parity_fixed_edges(u.n),
    )


def dnr_decomposition(u: CirculantUnitary, tol: float = DNR_TOLERANCE) -> DnrDecomposition:
    if not 0 < tol < 0.1:
        raise ValidationError(f"classification tolerance must lie in (0, 0.1), got {tol}")
    lam = np.exp(1j * eigenvalues(u).gamma)
    dirichlet = int(np.count_nonzero(np.abs(lam + 1) < tol))
    neumann = int(np.count_nonzero(np.abs(lam - 1) < tol))
    return DnrDecomposition(dirichlet, neumann, u.n - dirichlet - neumann, tol)


def permutation_invariant(n: int, u: complex, v: complex) -> CirculantUnitary:
    """U = uI + vJ, unitary iff |u| = 1 and |u + n v| = 1"""
    if n < 2:
        raise ConstraintViolationError(f"n must be at least 2, got {n}")
    if abs(abs(u) - 1) >= UNITARITY_TOLERANCE or abs(abs(u + n * v) - 1) >= UNITARITY_TOLERANCE:
        raise ConstraintViolationError(f"|u| = {abs(u):.12g} and |u + n v| = {abs(u + n * v):.12g} must both equal 1")
    row = np.full(n, v, dtype=np.complex128)
    row[0] += u
    return from_first_row(row)


def delta_coupling(n: int, alpha: float) -> CirculantUnitary:
    """U = -I + 2/(n + i alpha) J; alpha = 0 is the Kirchhoff coupling"""
    return permutation_invariant(n, -1.0, 2.0 / (n + 1j * alpha))


def shift_matrix(n: int) -> CirculantUnitary:
    row = np.zeros(n, dtype=np.complex128)
    if n >= 2:
        row[1] = 1.0
    return from_first_row(row)


def scaled_shift(n: int, mu: float = 0.0, sign: int = 1) -> CirculantUnitary:
    """sign * exp(i mu) * R"""
    row = np.zeros(n, dtype=np.complex128)
    if n >= 2:
        row[1] = sign * np.exp(1j * mu)
    return from_first_row(row)


def pt_symmetric_parameter_counts(n: int) -> Tuple[int, int]:
    """Real dimensions of the separately P/T symmetric family and of its nontrivially PT complement"""
    return n // 2 + 1, (n - 1) // 2


def random_circulant(n: int, rng: np.random.Generator) -> Tuple[CirculantUnitary, EigenPhases]:
    phases = EigenPhases(rng.uniform(0.0, TWO_PI, size=n))
    return from_eigenphases(phases), phases


def phases_as_set(phases: EigenPhases) -> List[float]:
    return sorted(float(g) for g in phases.gamma)
