"""Finite-dimensional checks for operators of positive type.

Fractional powers come from the real-line resolvent integrals
    A^{-a} = sin(pi a)/pi int_0^inf t^{-a} (A + t)^{-1} dt,             0 < Re a < 1,
    A^{-a} = sin(pi a)/(pi (1 - a)) int_0^inf t^{1-a} (A + t)^{-2} dt,  0 < Re a < 2,
evaluated with Gauss-Legendre panels in s = ln t on a middle range [tau, T] and
convergent Neumann series for the pieces [0, tau] and [T, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPD, NotPositiveType, PreconditionError, QuadratureNotConverged, SingularDeterminant, ValidationError

_GLX, _GLW = np.polynomial.legendre.leggauss(16)


def as_matrix(A) -> np.ndarray:
    M = np.array(A, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ValidationError("matrix must be square and non-empty")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix entries must be finite")
    return M


def _norm(M) -> float:
    return float(np.linalg.norm(M, 2))


def _check_positive_type(M: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(M)
    scale = max(1.0, float(np.max(np.abs(ev))))
    bad = (np.abs(ev.imag) <= 1e-12 * scale) & (ev.real <= 1e-14 * scale)
    if np.any(bad):
        raise NotPositiveType("an eigenvalue lies on (-inf, 0]")
    return ev


@dataclass
class PositiveTypeDiagnostics:
    neg_axis_in_resolvent: bool
    M_A_estimate: float
    sector_angle_estimate: float
    shift_t0: float
    M_nonneg_estimate: float
    sector_M_estimate: float

    def to_dict(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in self.__dict__.items()}


def default_t_grid(A, points: int = 200) -> np.ndarray:
    rho = max(1.0, float(np.max(np.abs(np.linalg.eigvals(as_matrix(A))))), _norm(as_matrix(A)))
    return np.logspace(-8, math.log10(100.0 * rho), points)


def positive_type_diagnostics(A, t_grid=None) -> PositiveTypeDiagnostics:
    """Sampled estimates of M_A, M(A) and the sector angle; eigenvalues decide the resolvent condition."""
    M = as_matrix(A)
    ev = _check_positive_type(M)
    if t_grid is None:
        t_grid = default_t_grid(M)
    t = np.asarray(t_grid, dtype=float)
    rho = float(np.max(np.abs(ev)))
    if np.any(t <= 0) or t.max() < 10.0 * rho:
        raise ValidationError("t_grid must be positive and reach 10 times the spectral radius")
    t = np.concatenate([[0.0], np.sort(t)])
    I = np.eye(M.shape[0])
    R = np.linalg.inv(M[None] + t[:, None, None] * I)
    norms = np.linalg.norm(R, 2, axis=(1, 2))
    M_A = float(np.max((1.0 + t) * norms))
    M_nn = float(np.max(t[1:] * norms[1:]))
    omega = float(np.max(np.abs(np.angle(ev))))
    # sup of |z| ||(A - z)^{-1}|| off a slightly wider sector, sampled on its boundary rays
    wp = min(omega + 0.5 * (math.pi - omega), omega + 0.1)
    r = np.concatenate([[0.0], t[1:]])
    zs = np.concatenate([r * np.exp(1j * wp), r * np.exp(-1j * wp)])
    Rz = np.linalg.inv(M[None] - zs[:, None, None] * I)
    sect = float(np.max(np.abs(zs) * np.linalg.norm(Rz, 2, axis=(1, 2))))
    return PositiveTypeDiagnostics(True, max(M_A, 1.0), omega, max(0.0, -float(ev.real.min())), M_nn, sect)


def resolvent_region_margin(A, M_A: float | None = None, samples: int = 400, seed: int = 0) -> float:
    """min over sampled points of the region {Re z <= 0, |Im z| < (|Re z|+1)/M_A} u {|z| < 1/M_A}
    of the smallest singular value of A - z; positive means every sample lies in the resolvent set."""
    M = as_matrix(A)
    if M_A is None:
        M_A = positive_type_diagnostics(M).M_A_estimate
    rng = np.random.default_rng(seed)
    re = -np.concatenate([[0.0], np.logspace(-3, 3, samples // 2 - 1)])
    im = (rng.uniform(-1, 1, re.size)) * (np.abs(re) + 1.0) / M_A
    rad = rng.uniform(0, 1, samples // 2) / M_A
    ang = rng.uniform(0, 2 * math.pi, samples // 2)
    zs = np.concatenate([re + 1j * im, rad * np.exp(1j * ang)])
    I = np.eye(M.shape[0])
    s = np.linalg.svd(M[None] - zs[:, None, None] * I, compute_uv=False)
    return float(s[:, -1].min())


def _powers(B: np.ndarray, K: int) -> np.ndarray:
    out = np.empty((K,) + B.shape, dtype=complex)
    out[0] = np.eye(B.shape[0])
    for k in range(1, K):
        out[k] = out[k - 1] @ B
    return out


def _series_terms(x: float, tol: float) -> int:
    # x is the contraction ratio (<= 1/2); coefficients grow at most linearly
    return int(math.ceil(math.log(tol / 64) / math.log(x))) + 4


def _resolvent_integral(M: np.ndarray, alpha: complex, order: int, tol: float, max_panels: int) -> np.ndarray:
    """int_0^inf t^{order-1-alpha} (M + t)^{-order} dt for order 1 or 2."""
    d = M.shape[0]
    I = np.eye(d)
    Minv = np.linalg.inv(M)
    tau = 0.5 / _norm(Minv)
    T = 2.0 * _norm(M)
    K = _series_terms(0.5, tol)
    p = order - alpha  # small-t exponent: t^{p-1} near 0
    # [0, tau]: (M+t)^{-order} = sum_k c_k (-t)^k M^{-k-order}
    Pinv = _powers(Minv, K + order)
    low = np.zeros((d, d), dtype=complex)
    for k in range(K):
        c = 1.0 if order == 1 else k + 1.0
        low += c * (-1) ** k * tau ** (k + p) / (k + p) * Pinv[k + order]
    # [T, inf): (M+t)^{-order} = sum_k c_k (-M)^k t^{-k-order}
    P = _powers(M, K)
    high = np.zeros((d, d), dtype=complex)
    for k in range(K):
        c = 1.0 if order == 1 else k + 1.0
        high += c * (-1) ** k * T ** (-alpha - k) / (alpha + k) * P[k]
    a, b = math.log(tau), math.log(T)
    prev = None
    panels = 4
    while panels <= max_panels:
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        s = ((edges[:-1] + half)[:, None] + half[:, None] * _GLX[None, :]).ravel()
        w = (half[:, None] * _GLW[None, :]).ravel()
        t = np.exp(s)
        R = np.linalg.inv(M[None] + t[:, None, None] * I)
        if order == 2:
            R = R @ R
        f = (w * np.exp(s * (order - alpha)))[:, None, None] * R
        mid = f.sum(axis=0)
        total = low + mid + high
        if prev is not None and _norm(total - prev) <= tol * max(1.0, _norm(total)):
            return total
        prev = total
        panels *= 2
    raise QuadratureNotConverged("panel doubling did not settle")


def frac_power_neg(A, alpha: complex, tol: float = 1e-13, max_panels: int = 4096) -> np.ndarray:
    """A^{-alpha} for 0 < Re alpha < 2 by resolvent quadrature."""
    M = as_matrix(A)
    alpha = complex(alpha)
    if not 0.0 < alpha.real < 2.0:
        raise ValidationError("need 0 < Re alpha < 2")
    _check_positive_type(M)
    if alpha.real < 1.0:
        c = np.sin(np.pi * alpha) / np.pi
        return c * _resolvent_integral(M, alpha, 1, tol, max_panels)
    c = np.sinc(1.0 - alpha)  # sin(pi a)/(pi (1 - a)), finite at a = 1
    return c * _resolvent_integral(M, alpha, 2, tol, max_panels)


def sqrt_op(A, tol: float = 1e-13) -> np.ndarray:
    """A^{1/2} = A A^{-1/2}."""
    M = as_matrix(A)
    return M @ frac_power_neg(M, 0.5, tol)


def spectral_oracle_power(A, alpha: complex) -> np.ndarray:
    """A^alpha through the eigendecomposition of a Hermitian positive definite matrix."""
    M = as_matrix(A)
    if _norm(M - M.conj().T) > 1e-12 * max(1.0, _norm(M)):
        raise PreconditionError("matrix is not Hermitian")
    ev, U = np.linalg.eigh(M)
    if ev.min() <= 0:
        raise NotPD("matrix is not positive definite")
    return (U * ev ** complex(alpha)) @ U.conj().T


def sym_det_matrix(A, A0, z: complex, tol: float = 1e-13) -> complex:
    """det((A - z)^{1/2} (A0 - z)^{-1} (A - z)^{1/2})."""
    M, M0 = as_matrix(A), as_matrix(A0)
    if M.shape != M0.shape:
        raise ValidationError("matrices must share a dimension")
    I = np.eye(M.shape[0])
    X = M - z * I
    X0 = M0 - z * I
    _check_positive_type(X)
    _check_positive_type(X0)
    root = sqrt_op(X, tol)
    return complex(np.linalg.det(root @ np.linalg.solve(X0, root)))


def trace_formula_sides(A, A0, z: float, h: float, tol: float = 1e-13):
    """(-d/dz ln symdet by central difference, tr((A-z)^{-1} - (A0-z)^{-1}))."""
    M, M0 = as_matrix(A), as_matrix(A0)
    vals = [sym_det_matrix(M, M0, z + s, tol) for s in (-h, h)]
    scale = max(abs(v) for v in vals)
    if min(abs(v) for v in vals) <= 1e-14 * max(scale, 1.0):
        raise SingularDeterminant("symmetrized determinant vanishes near z")
    lhs = -(np.log(vals[1]) - np.log(vals[0])) / (2 * h)
    I = np.eye(M.shape[0])
    rhs = np.trace(np.linalg.inv(M - z * I) - np.linalg.inv(M0 - z * I))
    return complex(lhs), complex(rhs)


def trace_formula_residual(A, A0, z: float, h: float, tol: float = 1e-13) -> float:
    lhs, rhs = trace_formula_sides(A, A0, z, h, tol)
    return abs(lhs - rhs)


def semigroup_check(A, alpha1: complex, alpha2: complex, tol: float = 1e-13) -> float:
    """|| A^{-a1} A^{-a2} - A^{-(a1+a2)} ||_2."""
    a1, a2 = complex(alpha1), complex(alpha2)
    if a1.real <= 0 or a2.real <= 0 or (a1 + a2).real >= 2:
        raise ValidationError("need Re a1, Re a2 > 0 and Re(a1 + a2) < 2")
    M = as_matrix(A)
    return _norm(frac_power_neg(M, a1, tol) @ frac_power_neg(M, a2, tol) - frac_power_neg(M, a1 + a2, tol))


def random_positive_type(dim: int, rng: np.random.Generator, hermitian: bool = False) -> np.ndarray:
    """A well-conditioned positive-type test matrix."""
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    if hermitian:
        H = G @ G.conj().T / dim
        return H + 0.5 * np.eye(dim)
    Q, _ = np.linalg.qr(G)
    ev = rng.uniform(0.5, 4.0, dim) * np.exp(1j * rng.uniform(-1.0, 1.0, dim))
    T = np.triu(0.3 * (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))), 1)
    return Q @ (np.diag(ev) + T) @ Q.conj().T
