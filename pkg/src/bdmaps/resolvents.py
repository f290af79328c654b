"""Green's functions, resolvents, boundary rows and Krein-type corrections.

Boundary rows and the Krein correction are specialized to real potentials and
real angles, where the adjoint resolvent at conj(z) contributes the plain
(unconjugated) kernels at z.  All products against u_+ and u_- below are
therefore bilinear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import _S, inv2, lambda_batch, lambda_map
from .errors import AtEigenvalue, PreconditionError, SingularLambda
from .ode import DEFAULT_TOL, Basis, SolutionPath, Stepper, check_tol, gauss_nodes, wronskian
from .potential import BoundaryAngles, Potential, angle_diff_zero_mod_pi


def _as_callable(f):
    """A source term given as a callable or as (x, y) samples (linear interpolation)."""
    if callable(f):
        return f, np.array([])
    x, y = f
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if np.iscomplexobj(y):
        return (lambda t: np.interp(t, x, y.real) + 1j * np.interp(t, x, y.imag)), x
    return (lambda t: np.interp(t, x, y)), x


@dataclass
class _Kernels:
    """u_+, u_- for one z and their Wronskian."""

    up: SolutionPath
    um: SolutionPath
    W: complex


def _kernels(pot: Potential, z: complex, angles: BoundaryAngles, tol: float) -> _Kernels:
    B = Basis(pot, [z], angles, tol)
    B.check_resolvent()
    up, um = B.upm(0)
    return _Kernels(up, um, wronskian(up, um, 0.0))


def greens_kernel(pot: Potential, z: complex, angles: BoundaryAngles, x: float, x_prime: float,
                  tol: float = DEFAULT_TOL) -> complex:
    """G(z, x, x') = u_-(min) u_+(max) / W."""
    check_tol(tol)
    K = _kernels(pot, z, angles, tol)
    lo, hi = min(x, x_prime), max(x, x_prime)
    a, _ = K.um.at(np.array([lo]))
    b, _ = K.up.at(np.array([hi]))
    return complex(a[0] * b[0] / K.W)


def _quad_grid(K: _Kernels, fx: np.ndarray) -> np.ndarray:
    g = np.union1d(K.up.grid, K.um.grid)
    if fx.size:
        g = np.union1d(g, fx[(fx > 0) & (fx < g[-1])])
    return g


def bilinear(p: SolutionPath, f, extra: np.ndarray | None = None) -> complex:
    """int p(x) f(x) dx (no conjugation)."""
    fn, fx = _as_callable(f)
    g = p.grid if extra is None else np.union1d(p.grid, extra)
    if fx.size:
        g = np.union1d(g, fx[(fx > 0) & (fx < g[-1])])
    x, w = gauss_nodes(g)
    u, _ = p.at(x)
    return complex(np.sum(w * u * fn(x)))


def _resolvent_path(K: _Kernels, f) -> SolutionPath:
    fn, fx = _as_callable(f)
    g = _quad_grid(K, fx)
    x, w = gauss_nodes(g)
    upx, _ = K.up.at(x)
    umx, _ = K.um.at(x)
    fv = fn(x)
    seg_m = np.sum((w * umx * fv).reshape(-1, 10), axis=1)
    seg_p = np.sum((w * upx * fv).reshape(-1, 10), axis=1)
    Im = np.concatenate([[0.0], np.cumsum(seg_m)])          # int_0^x u_- f
    Ip = np.concatenate([np.cumsum(seg_p[::-1])[::-1], [0.0]])  # int_x^R u_+ f
    W = K.W

    def dense(t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        k = np.clip(np.searchsorted(g, flat, side="right") - 1, 0, len(g) - 2)
        # partial integrals over [g_k, t] by Gauss-Legendre on the sub-interval
        a = g[k]
        half = 0.5 * (flat - a)
        nodes = (a + half)[:, None] + half[:, None] * _GLX[None, :]
        ww = half[:, None] * _GLW[None, :]
        nv = nodes.ravel()
        um_n, _ = K.um.at(nv)
        up_n, _ = K.up.at(nv)
        fn_n = fn(nv)
        pm = np.sum(ww * (um_n * fn_n).reshape(nodes.shape), axis=1)
        pp = np.sum(ww * (up_n * fn_n).reshape(nodes.shape), axis=1)
        Jm = Im[k] + pm
        Jp = Ip[k] - pp
        u_p, d_p = K.up.at(flat)
        u_m, d_m = K.um.at(flat)
        u = (u_p * Jm + u_m * Jp) / W
        du = (d_p * Jm + d_m * Jp) / W
        return u.reshape(t.shape), du.reshape(t.shape)

    uu, dd = dense(g)
    return SolutionPath(g, uu, dd, 0.0, dense, K.up.z)


_GLX, _GLW = np.polynomial.legendre.leggauss(10)


def apply_resolvent(pot: Potential, z: complex, angles: BoundaryAngles, f,
                    tol: float = DEFAULT_TOL) -> SolutionPath:
    """(H_{theta0,thetaR} - z)^{-1} f via the Green's function."""
    check_tol(tol)
    return _resolvent_path(_kernels(pot, z, angles, tol), f)


def _row_coeffs(K: _Kernels, base: BoundaryAngles, primed: BoundaryAngles, branch: str = "auto"):
    """Coefficients c1, c2 with row_1 f = c1 int u_+ f and row_2 f = c2 int u_- f."""
    u0, d0, _, _ = K.um.boundary()
    _, _, uR, dR = K.up.boundary()
    s1 = math.sin(primed.theta0 - base.theta0) if not angle_diff_zero_mod_pi(primed.theta0, base.theta0) else 0.0
    s2 = math.sin(primed.thetaR - base.thetaR) if not angle_diff_zero_mod_pi(primed.thetaR, base.thetaR) else 0.0
    use_sin0 = branch == "sin" or (branch == "auto" and not base.dirichlet0())
    use_sinR = branch == "sin" or (branch == "auto" and not base.dirichletR())
    f0 = -u0 / base.s0 if use_sin0 else d0 / base.c0
    fR = uR / base.sR if use_sinR else dR / base.cR
    return s1 / K.W * f0, -s2 / K.W * fR


def _check_real(pot: Potential, *angles: BoundaryAngles):
    if not pot.real_valued or not all(a.is_real for a in angles):
        raise PreconditionError("boundary rows and Krein formulas assume a real potential and real angles")


def boundary_rows(pot: Potential, z: complex, base: BoundaryAngles, primed: BoundaryAngles, f,
                  tol: float = DEFAULT_TOL, branch: str = "auto") -> np.ndarray:
    """gamma_primed (H_base - z)^{-1} f from inner products against u_+ and u_-."""
    check_tol(tol)
    _check_real(pot, base, primed)
    K = _kernels(pot, z, base, tol)
    c1, c2 = _row_coeffs(K, base, primed, branch)
    r1 = c1 * bilinear(K.up, f) if c1 != 0 else 0j
    r2 = c2 * bilinear(K.um, f) if c2 != 0 else 0j
    return np.array([r1, r2], dtype=complex)


def krein_resolvent(pot: Potential, z: complex, base: BoundaryAngles, primed: BoundaryAngles, f,
                    tol: float = DEFAULT_TOL) -> SolutionPath:
    """(H_primed - z)^{-1} f as the base resolvent plus a rank <= 2 correction."""
    check_tol(tol)
    _check_real(pot, base, primed)
    K = _kernels(pot, z, base, tol)
    Bp = Basis(pot, [z], primed, tol)
    if np.any(Bp.delta_ratio() < max(1e-12, 100 * tol)):
        raise AtEigenvalue("z is an eigenvalue of the primed operator")
    base_path = _resolvent_path(K, f)
    same0 = angle_diff_zero_mod_pi(primed.theta0, base.theta0)
    sameR = angle_diff_zero_mod_pi(primed.thetaR, base.thetaR)
    if same0 and sameR:
        return base_path
    c1, c2 = _row_coeffs(K, base, primed)
    rows = np.array([c1 * bilinear(K.up, f) if not same0 else 0j,
                     c2 * bilinear(K.um, f) if not sameR else 0j])
    lam = lambda_map(pot, z, base, primed, tol)
    s = np.diag(_S(primed, base))
    if not same0 and not sameR:
        coef = (inv2(lam, exc=SingularLambda) @ rows) / s
    elif same0:
        # only the right angle moves: P2 Lambda^{-1} P2 with triangular Lambda
        if abs(lam[1, 1]) < 1e-12 * np.abs(lam).max():
            raise SingularLambda("Lambda_22 vanishes")
        coef = np.array([0j, rows[1] / lam[1, 1] / s[1]])
    else:
        if abs(lam[0, 0]) < 1e-12 * np.abs(lam).max():
            raise SingularLambda("Lambda_11 vanishes")
        coef = np.array([rows[0] / lam[0, 0] / s[0], 0j])
    out = base_path
    if coef[0] != 0:
        out = out.combine(1.0, K.up, -coef[0] * c1)
    if coef[1] != 0:
        out = out.combine(1.0, K.um, -coef[1] * c2)
    return out


def row_gram(pot: Potential, z: complex, base: BoundaryAngles, primed: BoundaryAngles,
             tol: float = DEFAULT_TOL) -> np.ndarray:
    """G_ij = int k_i k_j for the row kernels k_1 = c1 u_+, k_2 = c2 u_-.

    This is gamma'(H - z)^{-1} [gamma'(H* - conj z)^{-1}]* in the self-adjoint case.
    """
    _check_real(pot, base, primed)
    K = _kernels(pot, z, base, tol)
    c = np.array(_row_coeffs(K, base, primed), dtype=complex)
    g = np.union1d(K.up.grid, K.um.grid)
    x, w = gauss_nodes(g)
    up, _ = K.up.at(x)
    um, _ = K.um.at(x)
    U = np.stack([up, um])
    G = (U * w) @ U.T
    return G * np.outer(c, c)


def lambda_derivative_identity(pot: Potential, z: complex, base: BoundaryAngles, primed: BoundaryAngles,
                               h: float = 1e-3, tol: float = 1e-12, full: bool = False):
    """Max-norm residual between d/dz(Lambda S) (central difference) and the row Gram matrix."""
    check_tol(tol)
    _check_real(pot, base, primed)
    z = complex(z)
    st = Stepper(pot, [z - h, z, z + h], tol)
    lam = lambda_batch(pot, [z - h, z, z + h], base, primed, tol, st)
    S = _S(primed, base)
    dLS = (lam[2] @ S - lam[0] @ S) / (2 * h)
    G = row_gram(pot, z, base, primed, tol)
    res = float(np.max(np.abs(dLS - G)))
    if full:
        return res, dLS, G
    return res


def krein_trace(pot: Potential, z: complex, base: BoundaryAngles, primed: BoundaryAngles,
                tol: float = DEFAULT_TOL) -> complex:
    """Trace of the Krein correction kernel, -tr(S^{-1} Lambda^{-1} G), both angles moving."""
    _check_real(pot, base, primed)
    if angle_diff_zero_mod_pi(primed.theta0, base.theta0) or angle_diff_zero_mod_pi(primed.thetaR, base.thetaR):
        raise PreconditionError("krein_trace needs both angles to move")
    lam = lambda_map(pot, z, base, primed, tol)
    S = np.diag(_S(primed, base))
    G = row_gram(pot, z, base, primed, tol)
    return complex(-np.trace((inv2(lam, exc=SingularLambda) / S[:, None]) @ G))
