"""Boundary traces, characteristic determinants and boundary data maps.

Matrices are plain 2x2 complex numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import AtEigenvalue, PreconditionError, SingularTransfer, UnsupportedCase
from .ode import DEFAULT_TOL, Basis, SolutionPath, Stepper, check_tol, eigen_floor, fundamental_batch
from .potential import BoundaryAngles, LogScaled, Potential, angle_diff_zero_mod_pi, is_multiple_of_pi

SINGULAR_FLOOR = 1e-12


def trace_map(angles: BoundaryAngles, p: SolutionPath) -> np.ndarray:
    """[cos th0 u(0) + sin th0 u'(0); cos thR u(R) - sin thR u'(R)]."""
    u0, d0, uR, dR = p.boundary()
    a = angles
    return np.array([a.c0 * u0 + a.s0 * d0, a.cR * uR - a.sR * dR], dtype=complex)


def _traces_R(Y, angles: BoundaryAngles):
    """(gamma_2(theta), gamma_2(phi)) from fundamental matrices Y (..., 2, 2)."""
    a = angles
    ta = a.cR * Y[..., 0, 0] - a.sR * Y[..., 1, 0]
    tb = a.cR * Y[..., 0, 1] - a.sR * Y[..., 1, 1]
    return ta, tb


def _delta(Y, angles: BoundaryAngles):
    a, b = _traces_R(Y, angles)
    return angles.c0 * b - angles.s0 * a, a, b


def char_det(pot: Potential, z: complex, angles: BoundaryAngles, tol: float = DEFAULT_TOL) -> LogScaled:
    """Delta(z, R, theta0, thetaR) as a log-scaled number."""
    check_tol(tol)
    Y, L = fundamental_batch(pot, [z], tol)
    d, _, _ = _delta(Y[0], angles)
    return LogScaled.make(d, float(L[0]))


def char_det_batch(pot: Potential, zs, angles: BoundaryAngles, tol: float = DEFAULT_TOL,
                   stepper: Stepper | None = None):
    """Delta for many z: returns (mantissas, log scales, relative sizes)."""
    Y, L = fundamental_batch(pot, zs, tol, stepper)
    d, a, b = _delta(Y, angles)
    rel = np.abs(d) / np.maximum(np.hypot(np.abs(a), np.abs(b)), 1e-300)
    return d, L, rel


def _lambda_from_Y(Y, frm: BoundaryAngles, to: BoundaryAngles, tol: float, check: bool = True):
    """Lambda_{frm}^{to} from fundamental matrices, using W(theta, phi) = 1 exactly."""
    d, a, b = _delta(Y, frm)
    ap, bp = _traces_R(Y, to)
    if check:
        rel = np.abs(d) / np.maximum(np.hypot(np.abs(a), np.abs(b)), 1e-300)
        if np.any(rel < eigen_floor(tol)):
            raise AtEigenvalue("z is an eigenvalue of the source operator")
    out = np.empty(d.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = (to.c0 * b - to.s0 * a) / d
    out[..., 0, 1] = np.sin(to.theta0 - frm.theta0) / d
    out[..., 1, 0] = np.sin(to.thetaR - frm.thetaR) / d
    out[..., 1, 1] = (bp * frm.c0 - ap * frm.s0) / d
    return out, d


def lambda_batch(pot: Potential, zs, frm: BoundaryAngles, to: BoundaryAngles, tol: float = DEFAULT_TOL,
                 stepper: Stepper | None = None) -> np.ndarray:
    Y, L = fundamental_batch(pot, zs, tol, stepper)
    lam, _ = _lambda_from_Y(Y, frm, to, tol)
    # off-diagonal entries carry 1/Delta, which owns the log scale
    f = np.exp(-L)
    lam[..., 0, 1] *= f
    lam[..., 1, 0] *= f
    return lam


def lambda_map(pot: Potential, z: complex, frm: BoundaryAngles, to: BoundaryAngles,
               tol: float = DEFAULT_TOL) -> np.ndarray:
    """The boundary data map Lambda_{frm}^{to}(z) sending frm-traces to to-traces."""
    check_tol(tol)
    return lambda_batch(pot, [z], frm, to, tol)[0]


def lambda_map_upm(pot: Potential, z: complex, frm: BoundaryAngles, to: BoundaryAngles,
                   tol: float = DEFAULT_TOL) -> np.ndarray:
    """Lambda built from the (u_+, u_-) basis instead of (theta, phi)."""
    B = Basis(pot, [z], frm, tol)
    B.check_resolvent()
    up, um = B.upm(0)
    G = np.column_stack([trace_map(frm, up), trace_map(frm, um)])
    Gp = np.column_stack([trace_map(to, up), trace_map(to, um)])
    return Gp @ np.linalg.inv(G)


def det2(M) -> complex:
    return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]


def inv2(M, floor: float = SINGULAR_FLOOR, exc=SingularTransfer) -> np.ndarray:
    """Inverse of a 2x2 matrix, refusing when |det| is below floor * row norms."""
    d = det2(M)
    rows = np.linalg.norm(M[..., 0, :], axis=-1) * np.linalg.norm(M[..., 1, :], axis=-1)
    if np.any(np.abs(d) <= floor * rows):
        raise exc("matrix is numerically singular")
    out = np.empty_like(M, dtype=complex)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    out[..., 1, 1] = M[..., 0, 0]
    return out / np.asarray(d)[..., None, None]


def lambda_det(pot: Potential, z: complex, frm: BoundaryAngles, to: BoundaryAngles,
               tol: float = DEFAULT_TOL) -> complex:
    return complex(det2(lambda_map(pot, z, frm, to, tol)))


def delta_ratio(pot: Potential, z: complex, frm: BoundaryAngles, to: BoundaryAngles,
                tol: float = DEFAULT_TOL) -> complex:
    """Delta_to / Delta_from from one propagation."""
    Y, _ = fundamental_batch(pot, [z], tol)
    d_to, _, _ = _delta(Y[0], to)
    d_from, _, _ = _delta(Y[0], frm)
    return complex(d_to / d_from)


def s_matrix(delta0, deltaR) -> np.ndarray:
    """diag(sin delta0, sin deltaR)."""
    s = [0.0 if not isinstance(d, complex) and is_multiple_of_pi(d, 1e-15) else np.sin(d)
         for d in (delta0, deltaR)]
    return np.diag(np.array(s, dtype=complex))


def _S(a: BoundaryAngles, b: BoundaryAngles) -> np.ndarray:
    """S_{a - b}."""
    return s_matrix(a.theta0 - b.theta0, a.thetaR - b.thetaR)


def lft_transfer(lambda_ref: np.ndarray, theta: BoundaryAngles, theta_p: BoundaryAngles,
                 delta: BoundaryAngles, delta_p: BoundaryAngles) -> np.ndarray:
    """Lambda_theta^{theta'} from Lambda_delta^{delta'} by the linear fractional transformation."""
    if angle_diff_zero_mod_pi(delta_p.theta0, delta.theta0) or angle_diff_zero_mod_pi(delta_p.thetaR, delta.thetaR):
        raise PreconditionError("delta' - delta must be nonzero mod pi in both entries")
    Sd = _S(delta_p, delta)
    Sd_inv = np.diag(1.0 / np.diag(Sd))
    top = _S(delta_p, theta_p) + _S(theta_p, delta) @ lambda_ref
    bot = _S(delta_p, theta) + _S(theta, delta) @ lambda_ref
    return Sd_inv @ top @ inv2(bot) @ Sd


def herglotz_check(pot: Potential, z: complex, frm: BoundaryAngles, to: BoundaryAngles,
                   tol: float = DEFAULT_TOL) -> float:
    """Smallest eigenvalue of Im(Lambda S) with S = S_{to - frm}."""
    z = complex(z)
    if z.imag <= 0:
        raise PreconditionError("Herglotz check needs Im z > 0")
    if not (pot.real_valued and frm.is_real and to.is_real):
        raise PreconditionError("Herglotz check needs a real potential and real angles")
    if angle_diff_zero_mod_pi(to.theta0, frm.theta0) or angle_diff_zero_mod_pi(to.thetaR, frm.thetaR):
        raise PreconditionError("angles must differ mod pi at both ends")
    M = lambda_map(pot, z, frm, to, tol) @ _S(to, frm)
    im = (M - M.conj().T) / 2j
    return float(np.min(np.linalg.eigvalsh(im)))


def lambda_asymptotic_leading(frm: BoundaryAngles, to: BoundaryAngles, z: float) -> float:
    """Leading term of det Lambda_{frm}^{to}(z) as z -> -infinity."""
    if isinstance(z, complex) and z.imag != 0:
        raise PreconditionError("asymptotic leading term is evaluated on the negative real axis")
    z = float(np.real(z))
    if z >= 0:
        raise PreconditionError("z must be negative")
    s0p, sRp = to.s0, to.sR
    if abs(s0p * sRp) < 1e-12:
        raise UnsupportedCase("target angles must have nonzero sines")
    k = math.sqrt(-z)
    d0, dR = frm.dirichlet0(), frm.dirichletR()
    c0, cR = frm.c0, frm.cR
    if not d0 and not dR:
        return s0p * sRp / (frm.s0 * frm.sR)
    if d0 and not dR:
        return -c0 * s0p * sRp * k / frm.sR
    if dR and not d0:
        return -cR * s0p * sRp * k / frm.s0
    return c0 * cR * s0p * sRp * k * k
