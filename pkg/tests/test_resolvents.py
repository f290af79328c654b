from __future__ import annotations

import math

import numpy as np
import pytest

from bdmaps import (AtEigenvalue, BoundaryAngles, Potential, PreconditionError, apply_resolvent, boundary_rows,
                    greens_kernel, krein_resolvent, krein_trace, lambda_derivative_identity, trace_map,
                    trace_resolvent_diff)

from conftest import DIR, NEU, PI

X = np.linspace(0.0, 1.0, 101)
ONE = lambda x: np.ones_like(x)  # noqa: E731
SOURCES = {"one": ONE, "x": lambda x: x, "sin": lambda x: np.sin(PI * x)}
REGIMES = {
    "both": (BoundaryAngles(0.4, 1.1), BoundaryAngles(1.9, 2.6)),
    "left": (BoundaryAngles(0.4, 1.1), BoundaryAngles(2.0, 1.1)),
    "right": (BoundaryAngles(0.4, 1.1), BoundaryAngles(0.4, 0.0)),
}


def test_greens_examples():
    assert greens_kernel(Potential.zero(), 0.0, DIR, 0.75, 0.25) == pytest.approx(0.0625, abs=1e-12)
    ref = math.sinh(0.25) ** 2 / math.sinh(1)
    assert greens_kernel(Potential.zero(), -1.0, DIR, 0.75, 0.25) == pytest.approx(ref, rel=1e-10)


def test_greens_symmetry():
    tol = 1e-10
    pot = Potential.cosine(3.0)
    ang = BoundaryAngles(0.6, 2.3)
    for x, y in [(0.1, 0.8), (0.35, 0.36), (0.0, 1.0)]:
        a = greens_kernel(pot, -4.0, ang, x, y, tol)
        b = greens_kernel(pot, -4.0, ang, y, x, tol)
        assert abs(a - b) <= 100 * tol * abs(a)


def test_greens_at_eigenvalue():
    with pytest.raises(AtEigenvalue):
        greens_kernel(Potential.zero(), PI**2, DIR, 0.2, 0.4)


def test_apply_resolvent_quadratic():
    u, du = apply_resolvent(Potential.zero(), 0.0, DIR, ONE).at(X)
    assert np.allclose(u, X * (1 - X) / 2, atol=1e-11)
    assert np.allclose(du, 0.5 - X, atol=1e-10)


def test_apply_resolvent_eigenfunction():
    u, _ = apply_resolvent(Potential.zero(), -1.0, DIR, SOURCES["sin"]).at(X)
    assert np.allclose(u, np.sin(PI * X) / (PI**2 + 1), atol=1e-11)


def test_apply_resolvent_sampled_source_and_defect():
    pot = Potential.cosine(2.0)
    ang = BoundaryAngles(0.7, 2.0)
    z = -3.0 + 1j
    xs = np.linspace(0, 1, 201)
    f = (xs, np.exp(xs) * np.cos(3 * xs))
    p = apply_resolvent(pot, z, ang, f)
    assert np.abs(trace_map(ang, p)).max() <= 1e-9
    # defect: -u'' + (V - z) u = f through a difference of u'
    h = 1e-4
    xm = np.linspace(0.05, 0.95, 19) + 0.0025  # between the kinks of the interpolated source
    _, dp = p.at(xm + h)
    _, dm = p.at(xm - h)
    u, _ = p.at(xm)
    resid = -(dp - dm) / (2 * h) + (pot(xm) - z) * u - np.interp(xm, *f)
    assert np.abs(resid).max() <= 1e-6


def test_rows_vanish_for_equal_angles():
    rows = boundary_rows(Potential.cosine(), -2.0, NEU, NEU, ONE)
    assert np.all(rows == 0)


def test_rows_closed_form():
    rows = boundary_rows(Potential.zero(), 0.0, DIR, NEU, ONE)
    assert np.allclose(rows, [0.5, 0.5], atol=1e-12)


@pytest.mark.parametrize("base", [BoundaryAngles(0.5, 2.0), DIR, BoundaryAngles(0.0, 1.3)])
def test_rows_match_trace_of_resolvent(base, rng):
    tol = 1e-10
    pot = Potential.cosine(2.5)
    primed = BoundaryAngles(1.4, 0.9)
    xs = np.linspace(0, 1, 121)
    f = (xs, rng.normal(size=xs.size))
    a = boundary_rows(pot, -6.0, base, primed, f, tol)
    b = trace_map(primed, apply_resolvent(pot, -6.0, base, f, tol))
    assert np.abs(a - b).max() <= 100 * tol * max(1.0, np.abs(b).max())


def test_row_branches_agree():
    pot = Potential.cosine()
    base, primed = BoundaryAngles(0.9, 2.1), BoundaryAngles(0.3, 1.0)
    a = boundary_rows(pot, -2.0, base, primed, SOURCES["x"], branch="sin")
    b = boundary_rows(pot, -2.0, base, primed, SOURCES["x"], branch="cos")
    assert np.abs(a - b).max() <= 1e-11


def test_krein_equal_angles_is_base_resolvent():
    ang = BoundaryAngles(0.4, 1.1)
    a = krein_resolvent(Potential.cosine(), -2.0, ang, ang, ONE).at(X)[0]
    b = apply_resolvent(Potential.cosine(), -2.0, ang, ONE).at(X)[0]
    assert np.array_equal(a, b)


def test_krein_dirichlet_to_neumann_constant_source():
    u, _ = krein_resolvent(Potential.zero(), -1.0, DIR, NEU, ONE).at(X)
    # -u'' + u = 1 with Neumann ends is solved by u = 1
    assert np.allclose(u, 1.0, atol=1e-9)


@pytest.mark.parametrize("regime", list(REGIMES))
@pytest.mark.parametrize("src", list(SOURCES))
def test_krein_matches_direct(regime, src):
    tol = 1e-10
    base, primed = REGIMES[regime]
    pot = Potential.cosine(2.0)
    a, _ = krein_resolvent(pot, -3.0, base, primed, SOURCES[src], tol).at(X)
    b, _ = apply_resolvent(pot, -3.0, primed, SOURCES[src], tol).at(X)
    assert np.abs(a - b).max() <= 100 * tol


def test_krein_shared_dirichlet_left():
    pot = Potential.zero()
    a, _ = krein_resolvent(pot, -1.0, DIR, BoundaryAngles(0.0, PI / 2), ONE).at(X)
    b, _ = apply_resolvent(pot, -1.0, BoundaryAngles(0.0, PI / 2), ONE).at(X)
    assert np.abs(a - b).max() <= 1e-8


def test_krein_primed_eigenvalue():
    with pytest.raises(AtEigenvalue):
        krein_resolvent(Potential.zero(), PI**2, BoundaryAngles(0.3, 0.3), DIR, ONE)


def test_krein_rejects_complex_potential():
    pot = Potential.samples([0, 1], [1 + 1j, 1 + 1j])
    with pytest.raises(PreconditionError):
        krein_resolvent(pot, -1.0, DIR, NEU, ONE)


def test_derivative_identity_examples():
    assert lambda_derivative_identity(Potential.zero(), -1.0, DIR, NEU) <= 1e-6
    third = BoundaryAngles(PI / 3, PI / 3)
    assert lambda_derivative_identity(Potential.cosine(), -5.0, third, NEU) <= 1e-6


def test_derivative_identity_second_order():
    pot = Potential.cosine()
    base, primed = BoundaryAngles(PI / 3, PI / 3), NEU
    r1 = lambda_derivative_identity(pot, -5.0, base, primed, h=0.1)
    r2 = lambda_derivative_identity(pot, -5.0, base, primed, h=0.05)
    assert 3.0 <= r1 / r2 <= 5.0


def test_krein_trace_matches_eigen_sum():
    pot = Potential.zero()
    base, primed = NEU, BoundaryAngles(PI / 4, PI / 4)
    kt = krein_trace(pot, -9.0, base, primed)
    ts = trace_resolvent_diff(pot, base, primed, -9.0)
    assert abs(kt - ts.value) <= 1e-6
