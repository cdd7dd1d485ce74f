#!/usr/bin/env python3
"""Tests for star graph scattering and bound states"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from circulant import (
    delta_coupling,
    dnr_decomposition,
    eigenvalues,
    from_first_row,
    parity_operator,
    random_circulant,
    scaled_shift,
    shift_matrix,
)
from errors import DimensionMismatchError, NonCirculantError, NonUnitaryError, ParameterRangeError
from star import (
    BoundaryData,
    VertexCoupling,
    bound_states,
    boundary_residual,
    plane_wave_boundary_data,
    pole_singular_value,
    s_matrix,
    s_matrix_limit,
    s_matrix_minus_shift_closed_form,
    s_matrix_shift_closed_form,
    transmission_probabilities,
)

MINUS_R_HIGH_ENERGY = np.array([[1, -2, -2], [-2, 1, -2], [-2, -2, 1]]) / 3


def test_boundary_residual_neumann_and_dirichlet():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=3) + 1j * rng.normal(size=3)
    neumann = VertexCoupling(from_first_row([1, 0, 0]))
    assert_allclose(boundary_residual(neumann, BoundaryData(psi, np.zeros(3))), np.zeros(3))
    dirichlet = VertexCoupling(from_first_row([-1, 0, 0]))
    assert_allclose(boundary_residual(dirichlet, BoundaryData(np.zeros(3), psi)), np.zeros(3))


def test_boundary_residual_dimension_check():
    with pytest.raises(DimensionMismatchError):
        boundary_residual(VertexCoupling(shift_matrix(3)), BoundaryData(np.zeros(4), np.zeros(4)))
    with pytest.raises(DimensionMismatchError):
        BoundaryData(np.zeros(3), np.zeros(2))


def test_plane_wave_solutions_satisfy_vertex_condition():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(2, 8))
        u, _ = random_circulant(n, rng)
        c = VertexCoupling(u, float(rng.uniform(0.2, 3.0)))
        k = float(rng.uniform(0.05, 20.0))
        s = s_matrix(c, k)
        for j in range(1, n + 1):
            assert np.max(np.abs(boundary_residual(c, plane_wave_boundary_data(s, j)))) < 1e-9


def test_s_matrix_trivial_cases():
    c = VertexCoupling(from_first_row([1, 0, 0, 0]), 2.0)
    assert_allclose(s_matrix(c, 3.7).s, np.eye(4), atol=1e-14)

    u = scaled_shift(5, 0.4)
    c = VertexCoupling(u, 2.5)
    assert_allclose(s_matrix(c, 1 / 2.5).s, u.matrix, atol=1e-13)


def test_s_matrix_minus_shift_closed_form():
    c = VertexCoupling(scaled_shift(3, sign=-1), 1.0)
    for k in np.logspace(-2, 2, 50):
        generic = s_matrix(c, float(k), fast=False).s
        closed = s_matrix_minus_shift_closed_form(float(k)).s
        assert np.max(np.abs(generic - closed)) < 1e-10
    assert np.max(np.abs(s_matrix(c, 1e6, fast=False).s - MINUS_R_HIGH_ENERGY)) < 1e-5


def test_s_matrix_shift_closed_form_grid():
    for n in (3, 4, 5):
        for mu in (0.0, 0.3, 0.7):
            if mu >= 2 * math.pi / n:
                continue
            c = VertexCoupling(scaled_shift(n, mu), 1.0)
            for k in np.logspace(-1, math.log10(50), 50):
                generic = s_matrix(c, float(k), fast=False).s
                closed = s_matrix_shift_closed_form(n, mu, 1.0, float(k)).s
                assert np.max(np.abs(generic - closed)) < 1e-10
            if mu > 0:
                # s_j - 1 = 2 (lambda_j - 1) / ((k + 1) + (k - 1) lambda_j): slow when lambda_j is near -1
                k = 1e6
                lam = np.exp(1j * eigenvalues(c.u).gamma)
                bound = np.max(np.abs(2 * (lam - 1) / ((k + 1) + (k - 1) * lam)))
                assert np.max(np.abs(s_matrix(c, k).s - np.eye(n))) <= bound * (1 + 1e-6) + 1e-12
                assert bound < 1e-4


def test_shift_closed_form_at_unit_eta_zero():
    s = s_matrix_shift_closed_form(4, 0.3, 2.0, 0.5).s
    assert_allclose(s, scaled_shift(4, 0.3).matrix, atol=1e-14)


def test_odd_degree_decouples_at_high_energy():
    odd = s_matrix_shift_closed_form(3, 0.0, 1.0, 1e7).s
    even = s_matrix_shift_closed_form(4, 0.0, 1.0, 1e7).s
    assert np.max(np.abs(odd - np.diag(np.diag(odd)))) < 1e-5
    assert np.max(np.abs(even - np.diag(np.diag(even)))) > 0.1
    # R has the Dirichlet eigenvalue -1 only for even n
    assert dnr_decomposition(shift_matrix(3)).dirichlet == 0
    assert_allclose(s_matrix_limit(VertexCoupling(shift_matrix(3)), "infinity"), np.eye(3), atol=1e-12)
    assert np.max(np.abs(s_matrix_limit(VertexCoupling(shift_matrix(4)), "infinity") - np.eye(4))) > 0.1


def test_fast_and_generic_paths_agree_and_stay_unitary():
    rng = np.random.default_rng(99)
    for _ in range(30):
        n = int(rng.integers(2, 9))
        u, _ = random_circulant(n, rng)
        c = VertexCoupling(u, float(rng.uniform(0.1, 5.0)))
        k = float(10 ** rng.uniform(-2, 2))
        fast = s_matrix(c, k)
        generic = s_matrix(c, k, fast=False)
        assert np.max(np.abs(fast.s - generic.s)) < 1e-10
        assert fast.is_unitary()
        theta = parity_operator(n)
        assert np.max(np.abs(theta @ fast.s @ theta - fast.s.T)) < 1e-9
        assert_allclose(transmission_probabilities(fast).sum(axis=1), np.ones(n), atol=1e-9)


def test_dense_coupling_uses_generic_path():
    rng = np.random.default_rng(4)
    z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    q, _ = np.linalg.qr(z)
    c = VertexCoupling(q, 1.3)
    assert s_matrix(c, 2.0).is_unitary()
    with pytest.raises(NonCirculantError):
        bound_states(c)
    with pytest.raises(NonUnitaryError):
        VertexCoupling(np.ones((3, 3)))


def test_s_matrix_rejects_non_positive_momentum():
    with pytest.raises(ParameterRangeError):
        s_matrix(VertexCoupling(shift_matrix(3)), 0.0)


def test_s_matrix_limits():
    minus_r = VertexCoupling(scaled_shift(3, sign=-1))
    assert_allclose(s_matrix_limit(minus_r, "infinity"), MINUS_R_HIGH_ENERGY, atol=1e-12)
    assert_allclose(s_matrix_limit(minus_r, "zero"), -np.eye(3), atol=1e-12)
    assert np.max(np.abs(s_matrix(minus_r, 1e-7).s + np.eye(3))) < 1e-5

    for n in (3, 4, 5):
        c = VertexCoupling(scaled_shift(n, 0.3))
        assert_allclose(s_matrix_limit(c, "infinity"), np.eye(n), atol=1e-12)


def test_bound_states_examples():
    assert bound_states(VertexCoupling(from_first_row([1, 0, 0]))).count == 0

    states = bound_states(VertexCoupling(shift_matrix(3)))
    assert states.count == 1
    assert states.kappas[0] == pytest.approx(math.sqrt(3))
    assert states.energies[0] == pytest.approx(-3.0)
    assert len(states.antibound_kappas) == 1

    states = bound_states(VertexCoupling(scaled_shift(4, 0.5)))
    assert_allclose(states.kappas, [math.tan(0.25), math.tan(0.25 + math.pi / 4)])
    assert len(states.antibound_kappas) == 2
    assert all(kappa < 0 for kappa in states.antibound_kappas)


def test_bound_states_scale_with_ell():
    states = bound_states(VertexCoupling(shift_matrix(3), 2.0))
    assert states.kappas[0] == pytest.approx(math.sqrt(3) / 2)


def test_bound_states_are_poles():
    rng = np.random.default_rng(123)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        u, _ = random_circulant(n, rng)
        c = VertexCoupling(u, float(rng.uniform(0.3, 3.0)))
        states = bound_states(c)
        gamma = eigenvalues(u).gamma
        upper = int(np.count_nonzero((gamma > 1e-12) & (gamma < math.pi - 1e-12)))
        assert states.count == upper
        for kappa in states.kappas:
            assert pole_singular_value(c, kappa) < 1e-8


def test_dirichlet_and_neumann_phases_give_no_states():
    states = bound_states(VertexCoupling(delta_coupling(4, 0.0)))
    assert states.count == 0
    assert states.antibound_kappas == ()


if __name__ == "__main__":
    pytest.main([__file__])
