"""
Star graph vertex physics: the matching condition

    (U - I) Psi + i ell (U + I) Psi' = 0,

the on-shell scattering matrix, its low/high energy limits and the bound
and antibound states. Derivatives are outward on every edge.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import svdvals

from circulant import (
    CirculantUnitary,
    UNITARITY_TOLERANCE,
    eigenbasis,
    eigenvalues,
    unitarity_residual,
)
from errors import DimensionMismatchError, NonCirculantError, NonUnitaryError, ParameterRangeError
from numerics import DenseMatrix, as_matrix, solve_linear

logger = logging.getLogger(__name__)

S_MATRIX_UNITARITY_TOLERANCE = 1e-9
# eigenphases this close to 0 or pi give neither bound nor antibound states
PHASE_EDGE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class VertexCoupling:
    """Unitary U with length scale ell; circulant U enables the spectral fast paths"""

    u: Union[CirculantUnitary, NDArray[np.complex128]]
    ell: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.ell) and self.ell > 0):
            raise ParameterRangeError(f"length scale must be positive and finite, got {self.ell}")
        if not isinstance(self.u, CirculantUnitary):
            m = as_matrix(self.u)
            residual = unitarity_residual(m)
            if residual >= UNITARITY_TOLERANCE:
                raise NonUnitaryError(f"coupling matrix is not unitary (residual {residual:.2e})")
            object.__setattr__(self, "u", m)

    @property
    def is_circulant(self) -> bool:
        return isinstance(self.u, CirculantUnitary)

    @property
    def matrix(self) -> DenseMatrix:
        return self.u.matrix if self.is_circulant else self.u

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def require_circulant(self, operation: str) -> CirculantUnitary:
        if not self.is_circulant:
            raise NonCirculantError(f"{operation} needs a circulant coupling")
        return self.u


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Boundary values Psi and outward derivatives Psi' at the vertex"""

    psi: NDArray[np.complex128]
    dpsi: NDArray[np.complex128]

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=np.complex128).ravel()
        dpsi = np.asarray(self.dpsi, dtype=np.complex128).ravel()
        if psi.shape != dpsi.shape:
            raise DimensionMismatchError(f"Psi has {psi.size} entries but Psi' has {dpsi.size}")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "dpsi", dpsi)


@dataclass(frozen=True, eq=False)
class ScatteringMatrix:
    k: float
    s: DenseMatrix

    @property
    def n(self) -> int:
        return self.s.shape[0]

    def is_unitary(self, tol: float = S_MATRIX_UNITARITY_TOLERANCE) -> bool:
        return unitarity_residual(self.s) < tol


@dataclass(frozen=True)
class BoundStateList:
    kappas: tuple = field(default_factory=tuple)
    energies: tuple = field(default_factory=tuple)
    antibound_kappas: tuple = field(default_factory=tuple)

    @property
    def count(self) -> int:
        return len(self.kappas)


def boundary_residual(c: VertexCoupling, b: BoundaryData) -> NDArray[np.complex128]:
    if b.psi.size != c.n:
        raise DimensionMismatchError(f"boundary data of size {b.psi.size} for a vertex of degree {c.n}")
    u = c.matrix
    eye = np.eye(c.n)
    return (u - eye) @ b.psi + 1j * c.ell * (u + eye) @ b.dpsi


def _eigen_s_values(lam: NDArray[np.complex128], kl: complex) -> NDArray[np.complex128]:
    return ((kl - 1) + (kl + 1) * lam) / ((kl + 1) + (kl - 1) * lam)


def s_matrix(c: VertexCoupling, k: float, fast: bool = True) -> ScatteringMatrix:
    """S(k) = ((k ell - 1) I + (k ell + 1) U) ((k ell + 1) I + (k ell - 1) U)^-1"""
    if not (math.isfinite(k) and k > 0):
        raise ParameterRangeError(f"momentum must be positive, got {k}")
    kl = k * c.ell

    if c.is_circulant and fast:
        s_values = _eigen_s_values(c.u.eigenvalues(), kl)
        # S is circulant with eigenvalues s_j on the same Fourier basis
        s = CirculantUnitary(np.fft.fft(s_values) / c.n).matrix
        return ScatteringMatrix(k, s)

    u = c.matrix
    eye = np.eye(c.n)
    numerator = (kl - 1) * eye + (kl + 1) * u
    denominator = (kl + 1) * eye + (kl - 1) * u
    # numerator and denominator commute, so D^-1 N = N D^-1
    return ScatteringMatrix(k, solve_linear(denominator, numerator))


def _spectral_projector_sum(basis: DenseMatrix, values: NDArray[np.complex128]) -> DenseMatrix:
    return (basis * values) @ basis.conj().T


def s_matrix_limit(c: VertexCoupling, end: Literal["zero", "infinity"]) -> DenseMatrix:
    """Limit of S(k) for k -> 0 or k -> infinity, assembled from spectral projectors.

    At infinity S -> -1 on the Dirichlet eigenspace and +1 elsewhere; at zero
    S -> +1 on the Neumann eigenspace and -1 elsewhere.
    """
    u = c.require_circulant("s_matrix_limit")
    lam = u.eigenvalues()
    if end == "infinity":
        limits = np.where(np.abs(lam + 1) < 1e-9, -1.0, 1.0)
    elif end == "zero":
        limits = np.where(np.abs(lam - 1) < 1e-9, 1.0, -1.0)
    else:
        raise ParameterRangeError(f"limit end must be 'zero' or 'infinity', got {end!r}")
    return _spectral_projector_sum(eigenbasis(u.n), limits.astype(np.complex128))


def s_matrix_shift_closed_form(n: int, mu: float, ell: float, k: float) -> ScatteringMatrix:
    """Closed-form S(k) for U = exp(i mu) R, element by element"""
    if n < 3:
        raise ParameterRangeError(f"closed form needs n >= 3, got {n}")
    if not (k > 0 and ell > 0):
        raise ParameterRangeError("k and ell must be positive")
    if not 0 <= mu < 2 * math.pi / n:
        raise ParameterRangeError(f"mu must lie in [0, 2pi/n), got {mu}")

    eps = complex(math.cos(mu), math.sin(mu))
    eta = (1 - k * ell) / (1 + k * ell)
    prefactor = 1.0 / (1 - eps ** n * eta ** n)
    diagonal = -eta * (1 - eps ** n * eta ** (n - 2))

    s = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            if i == j:
                s[i, j] = prefactor * diagonal
            else:
                power = (j - i - 1) % n
                s[i, j] = prefactor * (1 - eta ** 2) * eps * (eps * eta) ** power
    return ScatteringMatrix(k, s)


def s_matrix_minus_shift_closed_form(k: float) -> ScatteringMatrix:
    """S(k) for U = -R, n = 3, ell = 1 in terms of eta = (1 - k)/(1 + k)"""
    if not k > 0:
        raise ParameterRangeError(f"momentum must be positive, got {k}")
    eta = (1 - k) / (1 + k)
    row = np.array([-eta, eta - 1, eta * (1 - eta)], dtype=np.complex128) / (1 - eta + eta ** 2)
    return ScatteringMatrix(k, CirculantUnitary(row).matrix)


def plane_wave_boundary_data(scattering: ScatteringMatrix, j: int) -> BoundaryData:
    """Boundary data of psi_m(x) = delta_mj exp(-ikx) + S_mj exp(ikx) (edge index j is 1-based)"""
    n = scattering.n
    if not 1 <= j <= n:
        raise DimensionMismatchError(f"edge index {j} outside 1..{n}")
    incoming = np.zeros(n, dtype=np.complex128)
    incoming[j - 1] = 1.0
    outgoing = scattering.s[:, j - 1]
    k = scattering.k
    return BoundaryData(psi=incoming + outgoing, dpsi=1j * k * (outgoing - incoming))


def transmission_probabilities(scattering: ScatteringMatrix) -> NDArray[np.float64]:
    return np.abs(scattering.s) ** 2


def bound_states(c: VertexCoupling) -> BoundStateList:
    """kappa_j = tan(gamma_j / 2) / ell for every eigenphase gamma_j in (0, pi).

    Eigenphases in (pi, 2pi) produce antibound states, reported by their
    negative kappa only.
    """
    u = c.require_circulant("bound_states")
    kappas, antibound = [], []
    for gamma in eigenvalues(u).gamma:
        if min(gamma, abs(gamma - math.pi), 2 * math.pi - gamma) < PHASE_EDGE_TOLERANCE:
            continue
        kappa = math.tan(gamma / 2) / c.ell
        if gamma < math.pi:
            kappas.append(kappa)
        else:
            antibound.append(kappa)

    kappas.sort()
    antibound.sort()
    logger.debug(f"bound states for n={u.n}: {len(kappas)} bound, {len(antibound)} antibound")
    return BoundStateList(
        kappas=tuple(kappas),
        energies=tuple(-kappa ** 2 for kappa in kappas),
        antibound_kappas=tuple(antibound),
    )


def denominator_matrix(c: VertexCoupling, k: complex) -> DenseMatrix:
    kl = k * c.ell
    return (kl + 1) * np.eye(c.n) + (kl - 1) * c.matrix


def pole_singular_value(c: VertexCoupling, kappa: float) -> float:
    """Smallest singular value of ((k ell + 1) I + (k ell - 1) U) at k = i kappa"""
    return float(np.min(svdvals(denominator_matrix(c, 1j * kappa))))
