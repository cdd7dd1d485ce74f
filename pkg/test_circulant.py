#!/usr/bin/env python3
"""Tests for circulant couplings, their spectra and PT symmetry"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from circulant import (
    CirculantUnitary,
    EigenPhases,
    delta_coupling,
    dnr_decomposition,
    eigenbasis,
    eigenvalues,
    eigenvector,
    from_eigenphases,
    from_first_row,
    gram_parity_operator,
    parity_operator,
    permutation_invariant,
    phases_as_set,
    pt_symmetric_parameter_counts,
    random_circulant,
    scaled_shift,
    shift_matrix,
    symmetry_report,
)
from errors import ConstraintViolationError, IndexOutOfRangeError, NonUnitaryError, ValidationError


def test_from_first_row_builds_cyclic_rows():
    u = from_first_row([0, 1, 0])
    assert_allclose(u.matrix, [[0, 1, 0], [0, 0, 1], [1, 0, 0]])

    v = from_first_row([0.6, 0.8j])
    assert_allclose(v.matrix, [[0.6, 0.8j], [0.8j, 0.6]])


def test_from_first_row_rejects_non_unitary():
    with pytest.raises(NonUnitaryError):
        from_first_row([1, 1, 0])
    with pytest.raises(ValidationError):
        from_first_row([1])


def test_from_eigenphases_examples():
    assert_allclose(from_eigenphases(EigenPhases(np.zeros(3))).matrix, np.eye(3), atol=1e-15)
    assert_allclose(from_eigenphases(EigenPhases(np.full(4, math.pi))).matrix, -np.eye(4), atol=1e-15)
    three = EigenPhases(np.array([0.0, 2 * math.pi / 3, 4 * math.pi / 3]))
    assert_allclose(from_eigenphases(three).first_row, [0, 1, 0], atol=1e-14)


def test_eigenphases_round_trip_random():
    rng = np.random.default_rng(11)
    for n in range(2, 9):
        u, phases = random_circulant(n, rng)
        recovered = eigenvalues(u).gamma
        diff = np.angle(np.exp(1j * (recovered - phases.gamma)))
        assert np.max(np.abs(diff)) < 1e-10


def test_eigenvalues_of_shift_and_identity():
    assert_allclose(phases_as_set(eigenvalues(shift_matrix(3))), [0, 2 * math.pi / 3, 4 * math.pi / 3], atol=1e-12)
    assert phases_as_set(eigenvalues(from_first_row([1, 0, 0, 0]))) == [0.0] * 4
    assert_allclose(phases_as_set(eigenvalues(from_first_row([-1, 0]))), [math.pi, math.pi], atol=1e-12)


def test_eigenvector_diagonalizes_every_circulant():
    rng = np.random.default_rng(5)
    u, _ = random_circulant(6, rng)
    lam = u.eigenvalues()
    for j in range(6):
        phi = eigenbasis(6)[:, j]
        assert_allclose(u.matrix @ phi, lam[j] * phi, atol=1e-12)
    assert_allclose(eigenvector(4, 4), np.full(4, 0.5))


def test_eigenvector_index_range():
    with pytest.raises(IndexOutOfRangeError):
        eigenvector(3, 0)
    with pytest.raises(IndexError):
        eigenvector(3, 4)


def test_parity_operator_examples():
    assert_allclose(parity_operator(3), [[1, 0, 0], [0, 0, 1], [0, 1, 0]])
    theta = parity_operator(4)
    assert_allclose(theta @ theta, np.eye(4))
    assert_allclose(np.diag(theta), [1, 0, 1, 0])


def test_gram_matrix_equals_parity_permutation():
    for n in range(2, 11):
        assert np.max(np.abs(gram_parity_operator(n) - parity_operator(n))) < 1e-12


def test_pt_theorem_random_circulants():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        n = int(rng.integers(2, 11))
        u, _ = random_circulant(n, rng)
        theta = parity_operator(n)
        m = u.matrix
        assert np.max(np.abs(theta @ m @ theta - m.T)) < 1e-10


def test_symmetry_report_shift():
    report = symmetry_report(shift_matrix(5))
    assert not report.time_reversal
    assert report.pt_symmetric
    assert report.nontrivial_pt
    assert report.parity_fixed_edges == (1,)
    assert symmetry_report(shift_matrix(4)).parity_fixed_edges == (1, 3)


def test_symmetry_report_symmetric_couplings():
    report = symmetry_report(delta_coupling(4, 1.5))
    assert report.time_reversal and report.pt_symmetric and not report.nontrivial_pt


def test_dnr_decomposition_examples():
    d = dnr_decomposition(shift_matrix(4))
    assert (d.dirichlet, d.neumann, d.robin) == (1, 1, 2)
    d = dnr_decomposition(scaled_shift(3, sign=-1))
    assert (d.dirichlet, d.neumann, d.robin) == (1, 0, 2)
    d = dnr_decomposition(delta_coupling(5, 0.0))
    assert (d.dirichlet, d.neumann, d.robin) == (4, 1, 0)
    assert d.n == 5


def test_dnr_tolerance_range():
    with pytest.raises(ValidationError):
        dnr_decomposition(shift_matrix(3), tol=0.5)


def test_permutation_invariant_and_delta():
    u = permutation_invariant(3, -1, 2 / 3)
    assert_allclose(u.matrix, delta_coupling(3, 0.0).matrix)
    assert_allclose(u.matrix, -np.eye(3) + (2 / 3) * np.ones((3, 3)))
    with pytest.raises(ConstraintViolationError):
        permutation_invariant(3, 1, 1)


def test_scaled_shift_and_counts():
    u = scaled_shift(4, 0.5)
    assert_allclose(u.first_row, [0, np.exp(0.5j), 0, 0])
    assert_allclose(scaled_shift(3, sign=-1).matrix, -shift_matrix(3).matrix)
    assert pt_symmetric_parameter_counts(4) == (3, 1)
    assert pt_symmetric_parameter_counts(5) == (3, 2)


def test_json_round_trip_and_errors():
    u = scaled_shift(5, 0.3)
    again = CirculantUnitary.from_json(u.to_json())
    assert_allclose(again.first_row, u.first_row)
    with pytest.raises(ValidationError):
        CirculantUnitary.from_json('{"n": 4, "first_row": [[0, 0], [1, 0], [0, 0]]}')
    with pytest.raises(ValidationError):
        CirculantUnitary.from_json('{"rows": []}')


def test_eigenphases_validation_and_wrapping():
    with pytest.raises(ValidationError):
        EigenPhases(np.array([7.0]))
    wrapped = EigenPhases.normalized([-math.pi / 2, 2 * math.pi - 1e-14, 3 * math.pi])
    assert_allclose(wrapped.gamma, [1.5 * math.pi, 0.0, math.pi])


if __name__ == "__main__":
    pytest.main([__file__])
