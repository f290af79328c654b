from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.linalg import fractional_matrix_power, sqrtm

from bdmaps import (NotPD, NotPositiveType, PreconditionError, ValidationError, frac_power_neg,
                    positive_type_diagnostics, resolvent_region_margin, semigroup_check, spectral_oracle_power,
                    sqrt_op, sym_det_matrix, trace_formula_residual)
from bdmaps.positive_type import random_positive_type, trace_formula_sides

J = np.array([[2.0, 1.0], [0.0, 2.0]])
D14 = np.diag([1.0, 4.0])


def test_diagnostics_diagonal():
    d = positive_type_diagnostics(np.diag([1.0, 2.0]))
    assert d.neg_axis_in_resolvent
    assert d.M_A_estimate == pytest.approx(1.0)
    assert d.sector_angle_estimate == 0.0


def test_diagnostics_rejects_negative_eigenvalue():
    with pytest.raises(NotPositiveType):
        positive_type_diagnostics(np.diag([-1.0, 2.0]))


def test_diagnostics_nonnormal_amplification():
    d = positive_type_diagnostics(np.array([[1.0, 10.0], [0.0, 1.0]]))
    assert 1.0 < d.M_A_estimate < np.inf
    assert d.M_nonneg_estimate >= 1.0


def test_diagnostics_t_grid_must_reach_spectrum():
    with pytest.raises(ValidationError):
        positive_type_diagnostics(np.diag([1.0, 100.0]), np.logspace(-3, 2, 20))


def test_sector_bound_and_adjoint(rng):
    for _ in range(5):
        A = random_positive_type(5, rng)
        d = positive_type_diagnostics(A)
        assert d.M_A_estimate >= 1.0
        assert d.sector_angle_estimate <= math.pi - math.asin(1 / d.M_A_estimate) + 1e-6
        da = positive_type_diagnostics(A.conj().T)
        assert da.sector_angle_estimate == pytest.approx(d.sector_angle_estimate, abs=1e-9)
        di = positive_type_diagnostics(np.linalg.inv(A))
        assert di.sector_angle_estimate <= d.sector_angle_estimate + 1e-9


def test_resolvent_region_is_free_of_spectrum(rng):
    for _ in range(5):
        assert resolvent_region_margin(random_positive_type(4, rng)) > 0


@pytest.mark.parametrize("alpha,ref", [(0.5, [1, 0.5]), (1.5, [1, 0.125]), (1.0, [1, 0.25])])
def test_frac_power_diagonal(alpha, ref):
    assert np.allclose(frac_power_neg(D14, alpha), np.diag(ref), atol=1e-12)


def test_frac_power_jordan():
    ref = np.array([[1.0, -0.25], [0.0, 1.0]]) / math.sqrt(2)
    assert np.allclose(frac_power_neg(J, 0.5), ref, atol=1e-12)


def test_frac_power_range_enforced():
    with pytest.raises(ValidationError):
        frac_power_neg(D14, 2.0)
    with pytest.raises(NotPositiveType):
        frac_power_neg(np.diag([-1.0, 1.0]), 0.5)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.25, 1.5, 0.4 + 0.3j])
def test_frac_power_spectral_oracle(alpha, rng):
    for dim in (2, 5, 8):
        A = random_positive_type(dim, rng, hermitian=True)
        err = np.linalg.norm(frac_power_neg(A, alpha) - spectral_oracle_power(A, -alpha), 2)
        assert err <= 1e-8


def test_frac_power_nonnormal_against_scipy(rng):
    A = random_positive_type(5, rng)
    for alpha in (0.3, 1.7):
        ref = fractional_matrix_power(A, -alpha)
        assert np.linalg.norm(frac_power_neg(A, alpha) - ref, 2) <= 1e-8 * np.linalg.norm(ref, 2)


def test_sqrt_examples(rng):
    assert np.allclose(sqrt_op(D14), np.diag([1.0, 2.0]), atol=1e-12)
    R = sqrt_op(J)
    assert np.allclose(R, math.sqrt(2) * np.array([[1, 0.25], [0, 1]]), atol=1e-12)
    assert np.allclose(R @ R, J, atol=1e-12)
    A = random_positive_type(6, rng, hermitian=True)
    assert np.linalg.norm(sqrt_op(A) - spectral_oracle_power(A, 0.5), 2) <= 1e-8
    B = random_positive_type(6, rng)
    assert np.linalg.norm(sqrt_op(B) - sqrtm(B), 2) <= 1e-8 * np.linalg.norm(B, 2)


def test_spectral_oracle_examples(rng):
    assert np.allclose(spectral_oracle_power(D14, -0.5), np.diag([1, 0.5]))
    assert np.allclose(spectral_oracle_power(np.eye(3), 0.7 + 0.2j), np.eye(3))
    A = random_positive_type(4, rng, hermitian=True)
    assert np.allclose(spectral_oracle_power(A, 1.0), A, atol=1e-12)
    with pytest.raises(NotPD):
        spectral_oracle_power(np.diag([1.0, -1.0]), 0.5)
    with pytest.raises(PreconditionError):
        spectral_oracle_power(J, 0.5)


def test_sym_det_examples():
    assert sym_det_matrix(np.diag([2.0, 3.0]), np.diag([1.0, 2.0]), -1.0) == pytest.approx(2.0, rel=1e-12)
    assert sym_det_matrix(J, J, -1.0) == pytest.approx(1.0, rel=1e-12)


def test_sym_det_nonnormal_classical():
    A0 = np.array([[1.0, 1.0], [0.0, 2.0]])
    A = A0 + np.diag([1.0, 0.0])
    I = np.eye(2)
    ref = np.linalg.det((A + 2 * I) @ np.linalg.inv(A0 + 2 * I))
    assert abs(sym_det_matrix(A, A0, -2.0) - ref) <= 1e-8


def test_sym_det_random_classical(rng):
    for _ in range(3):
        A, A0 = random_positive_type(5, rng), random_positive_type(5, rng)
        I = np.eye(5)
        ref = np.linalg.det((A + I) @ np.linalg.inv(A0 + I))
        assert abs(sym_det_matrix(A, A0, -1.0) - ref) <= 1e-8 * abs(ref)


def test_trace_formula_anchor_and_order():
    A, A0 = np.diag([2.0, 3.0]), np.diag([1.0, 2.0])
    lhs, rhs = trace_formula_sides(A, A0, -1.0, 1e-3)
    assert rhs == pytest.approx(-0.25, abs=1e-14)
    assert lhs == pytest.approx(-0.25, abs=1e-6)
    r1 = trace_formula_residual(A, A0, -1.0, 0.02)
    r2 = trace_formula_residual(A, A0, -1.0, 0.01)
    assert 3.5 <= r1 / r2 <= 4.5


def test_trace_formula_identical_pair():
    assert trace_formula_residual(J, J, -1.0, 0.01) <= 1e-12


def test_trace_formula_random_hermitian(rng):
    A = random_positive_type(6, rng, hermitian=True)
    A0 = random_positive_type(6, rng, hermitian=True)
    r1 = trace_formula_residual(A, A0, -1.0, 0.04)
    r2 = trace_formula_residual(A, A0, -1.0, 0.02)
    assert 3.5 <= r1 / r2 <= 4.5


def test_semigroup_examples(rng):
    assert semigroup_check(D14, 0.25, 0.25) <= 1e-12
    assert np.allclose(frac_power_neg(D14, 0.25) @ frac_power_neg(D14, 0.25), np.diag([1, 0.5]))
    assert semigroup_check(J, 0.5, 0.5) <= 1e-8
    assert np.allclose(frac_power_neg(J, 1.0), [[0.5, -0.25], [0, 0.5]], atol=1e-12)
    A = random_positive_type(5, rng, hermitian=True)
    assert semigroup_check(A, 0.3 + 0.1j, 0.2 - 0.1j) <= 1e-8
    with pytest.raises(ValidationError):
        semigroup_check(A, 1.2, 0.9)
