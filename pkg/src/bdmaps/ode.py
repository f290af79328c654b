"""Propagation of solutions of -u'' + V u = z u on [0, R].

The integrator is a fourth-order Magnus method with two Gauss nodes per step.
Steps are chosen by step doubling and the accepted propagator is the
Richardson combination of the one-step and two-half-step results.  One step
grid is shared by a whole batch of spectral parameters, which keeps finite
differences in z free of step-selection noise.

Every step propagator is stored as ``exp(ell) * M`` so that exponential growth
never overflows; running log scales are accumulated along the path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import AtEigenvalue, DomainViolation, GridMismatch, NonFinite, PreconditionError, ToleranceNotMet
from .potential import BoundaryAngles, Potential

DEFAULT_TOL = 1e-10
_G1 = 0.5 - math.sqrt(3.0) / 6.0
_G2 = 0.5 + math.sqrt(3.0) / 6.0
_C3 = math.sqrt(3.0) / 12.0
# the raw step-doubling estimate overstates the extrapolated error by orders of magnitude
_SLACK = 100.0
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def check_tol(tol: float) -> float:
    if not (0.0 < tol <= 1e-4):
        raise PreconditionError(f"tol must lie in (0, 1e-4], got {tol}")
    return float(tol)


def eigen_floor(tol: float) -> float:
    """Relative floor under which a characteristic determinant counts as zero."""
    return max(1e-12, 100.0 * tol)


def _magnus(pot: Potential, a: np.ndarray, b: np.ndarray, zs: np.ndarray):
    """Scaled Magnus propagators from a to b.

    a, b have shape (m,), zs shape (nz,).  Returns M with shape (m, nz, 2, 2)
    and ell with shape (m, nz); the propagator is exp(ell) * M.
    """
    h = (b - a)[:, None]
    v1 = pot(a + _G1 * (b - a))
    v2 = pot(a + _G2 * (b - a))
    c = _C3 * h * h * (v1 - v2)[:, None]
    qbar = (0.5 * (v1 + v2))[:, None] - zs[None, :]
    w = np.sqrt(c * c + h * h * qbar + 0j)
    small = np.abs(w) < 0.1
    ell = np.where(small, 0.0, w.real)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        e1 = np.exp(1j * w.imag)
        e2 = np.exp(-2.0 * w.real - 1j * w.imag)
        ch = 0.5 * (e1 + e2)
        sh = 0.5 * (e1 - e2) / np.where(small, 1.0, w)
    w2 = w * w
    ch_s = 1 + w2 / 2 * (1 + w2 / 12 * (1 + w2 / 30 * (1 + w2 / 56 * (1 + w2 / 90))))
    sh_s = 1 + w2 / 6 * (1 + w2 / 20 * (1 + w2 / 42 * (1 + w2 / 72 * (1 + w2 / 110))))
    ch = np.where(small, ch_s, ch)
    sh = np.where(small, sh_s, sh)
    c = np.broadcast_to(c, qbar.shape)
    hh = np.broadcast_to(h, qbar.shape)
    ell = np.broadcast_to(ell, qbar.shape)
    M = np.empty(qbar.shape + (2, 2), dtype=complex)
    M[..., 0, 0] = ch + sh * c
    M[..., 0, 1] = sh * hh
    M[..., 1, 0] = sh * hh * qbar
    M[..., 1, 1] = ch - sh * c
    return M, ell


def _mul(A, B):
    return np.einsum("...ij,...jk->...ik", A, B)


def _scaled_norm(M, s):
    """Max-entry norm of D M D^-1 with D = diag(1, 1/s)."""
    return np.maximum.reduce([np.abs(M[..., 0, 0]), np.abs(M[..., 0, 1]) * s,
                              np.abs(M[..., 1, 0]) / s, np.abs(M[..., 1, 1])])


def _richardson(pot, a, b, zs, s):
    """Extrapolated step propagator and a relative error estimate."""
    mid = 0.5 * (a + b)
    M1, l1 = _magnus(pot, a, b, zs)
    Ma, la = _magnus(pot, a, mid, zs)
    Mb, lb = _magnus(pot, mid, b, zs)
    M2 = _mul(Mb, Ma)
    l2 = la + lb
    with np.errstate(over="ignore", invalid="ignore"):
        M1r = M1 * np.exp(l1 - l2)[..., None, None]
        diff = M2 - M1r
        err = _scaled_norm(diff, s) / _scaled_norm(M2, s)
    Macc = M2 + diff / 15.0
    return Macc, l2, err


class Stepper:
    """Step propagators on a grid shared by a batch of spectral parameters."""

    def __init__(self, pot: Potential, zs, tol: float = DEFAULT_TOL, phase_limit: bool = False,
                 max_levels: int = 40):
        self.pot = pot
        self.zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        self.tol = tol
        R = pot.R
        vb = pot.bound()
        self.scale = np.maximum(1.0, np.sqrt(np.abs(self.zs)))
        kmax = float(np.max(np.sqrt(np.abs(self.zs) + vb)))
        # one step covers at most about one radian of phase or one e-fold of growth
        hmax = R / 4.0
        if kmax > 0:
            hmax = min(hmax, 1.0 / kmax)
        if phase_limit:
            hmax = min(hmax, 1.0 / (float(np.max(self.scale)) + vb + 1.0))
        bps = pot.breakpoints()
        pieces = []
        for x0, x1 in zip(bps[:-1], bps[1:]):
            k = max(1, int(math.ceil((x1 - x0) / hmax)))
            pieces.append(np.linspace(x0, x1, k + 1)[:-1])
        pieces.append(np.array([R]))
        nodes = np.concatenate(pieces)
        a, b = nodes[:-1], nodes[1:]
        s = self.scale[None, :]
        done_a, done_b, done_M, done_l = [], [], [], []
        for level in range(max_levels):
            M, ell, err = _richardson(pot, a, b, self.zs, s)
            h = b - a
            thr = np.maximum(_SLACK * tol * h / R, 4e-15)
            emax = np.max(np.where(np.isfinite(err), err, np.inf), axis=1)
            ok = emax <= thr
            if level == max_levels - 1 or np.all(h[~ok] < 1e-13 * R):
                if not np.all(np.isfinite(M)):
                    raise NonFinite("non-finite step propagator")
                if np.any(~ok & ~(emax < 1e-12)):
                    raise ToleranceNotMet("step control stalled")
                ok[:] = True
            done_a.append(a[ok]); done_b.append(b[ok]); done_M.append(M[ok]); done_l.append(ell[ok])
            if np.all(ok):
                break
            bad_a, bad_b = a[~ok], b[~ok]
            mid = 0.5 * (bad_a + bad_b)
            a = np.concatenate([bad_a, mid])
            b = np.concatenate([mid, bad_b])
        A = np.concatenate(done_a)
        order = np.argsort(A, kind="stable")
        self.a = A[order]
        self.b = np.concatenate(done_b)[order]
        self.M = np.concatenate(done_M)[order]
        self.ell = np.concatenate(done_l)[order]
        self.nodes = np.concatenate([self.a, [R]])
        if not np.all(np.isfinite(self.M)):
            raise NonFinite("non-finite step propagator")

    @property
    def nsteps(self) -> int:
        return len(self.a)

    def with_z(self, zs) -> "Stepper":
        """Same grid, new spectral parameters (no step control)."""
        new = object.__new__(Stepper)
        new.pot, new.tol = self.pot, self.tol
        new.zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        new.scale = np.maximum(1.0, np.sqrt(np.abs(new.zs)))
        new.a, new.b, new.nodes = self.a, self.b, self.nodes
        new.M, new.ell, _ = _richardson(self.pot, self.a, self.b, new.zs, new.scale[None, :])
        if not np.all(np.isfinite(new.M)):
            raise NonFinite("non-finite step propagator")
        return new

    def total(self):
        """Product of all step propagators as (M, log) by pairwise reduction."""
        M = self.M
        L = np.array(self.ell, dtype=float)
        while M.shape[0] > 1:
            if M.shape[0] % 2:
                eye = np.broadcast_to(np.eye(2, dtype=complex), (1,) + M.shape[1:])
                M = np.concatenate([M, eye])
                L = np.concatenate([L, np.zeros((1,) + L.shape[1:])])
            M = _mul(M[1::2], M[0::2])
            L = L[1::2] + L[0::2]
            nrm = np.max(np.abs(M), axis=(-2, -1))
            if not np.all(np.isfinite(nrm)) or np.any(nrm == 0):
                raise NonFinite("propagator product is not finite")
            M = M / nrm[..., None, None]
            L = L + np.log(nrm)
        return M[0], L[0]

    def forward(self, y0):
        """Propagate from 0.  y0 has shape (nz, 2) or (nz, 2, k).

        Returns normalized states (m+1, nz, 2[, k]) and log scales (m+1, nz).
        """
        y = np.array(np.broadcast_to(y0, (len(self.zs),) + np.shape(y0)[1:]), dtype=complex)
        return self._sweep(y, range(self.nsteps), lambda i: self.M[i], forward=True)

    def backward(self, yR):
        """Propagate from R towards 0 through inverse step propagators."""
        y = np.array(np.broadcast_to(yR, (len(self.zs),) + np.shape(yR)[1:]), dtype=complex)
        return self._sweep(y, range(self.nsteps - 1, -1, -1), lambda i: _adj(self.M[i]), forward=False)

    def _sweep(self, y, idx, mat, forward):
        m = self.nsteps
        states = np.empty((m + 1,) + y.shape, dtype=complex)
        logs = np.empty((m + 1, y.shape[0]))
        ax = tuple(range(1, y.ndim))
        nrm = np.max(np.abs(y), axis=ax)
        y = y / nrm.reshape((-1,) + (1,) * (y.ndim - 1))
        L = np.log(nrm)
        pos = 0 if forward else m
        states[pos], logs[pos] = y, L
        for i in idx:
            Mi = mat(i)
            if y.ndim == 2:
                y = np.einsum("zij,zj->zi", Mi, y)
            else:
                y = np.einsum("zij,zjk->zik", Mi, y)
            nrm = np.max(np.abs(y), axis=ax)
            if not np.all(np.isfinite(nrm)) or np.any(nrm == 0):
                raise NonFinite("solution became non-finite or vanished identically")
            y = y / nrm.reshape((-1,) + (1,) * (y.ndim - 1))
            L = L + self.ell[i] + np.log(nrm)
            pos = i + 1 if forward else i
            states[pos], logs[pos] = y, L
        return states, logs

    def dense(self, x, j: int, states, logs, forward: bool):
        """Evaluate (u, u') at points x for batch index j as log-scaled pairs.

        Returns (u, up, logs) with value = u * exp(logs).
        """
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, self.nsteps - 1)
        z = self.zs[j:j + 1]
        if forward:
            M, ell = _magnus(self.pot, self.a[k], x, z)
            y = np.einsum("mij,mj->mi", M[:, 0], states[k, j])
            L = logs[k, j] + ell[:, 0]
        else:
            M, ell = _magnus(self.pot, x, self.b[k], z)
            y = np.einsum("mij,mj->mi", _adj(M[:, 0]), states[k + 1, j])
            L = logs[k + 1, j] + ell[:, 0]
        return y[:, 0], y[:, 1], L


def _adj(M):
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    out[..., 1, 1] = M[..., 0, 0]
    return out


@dataclass(frozen=True)
class FundamentalValues:
    """theta, theta', phi, phi' at x = R; true values are these times exp(log_scale)."""

    theta_R: complex
    theta_prime_R: complex
    phi_R: complex
    phi_prime_R: complex
    log_scale: float = 0.0

    def values(self) -> tuple:
        f = math.exp(self.log_scale)
        return (self.theta_R * f, self.theta_prime_R * f, self.phi_R * f, self.phi_prime_R * f)

    def wronskian(self) -> complex:
        f = math.exp(2.0 * self.log_scale)
        return (self.theta_R * self.phi_prime_R - self.theta_prime_R * self.phi_R) * f


def fundamental_batch(pot: Potential, zs, tol: float = DEFAULT_TOL, stepper: Stepper | None = None):
    """Fundamental matrices at R for a batch of z.

    Returns (Y, L): Y[j] = [[theta, phi], [theta', phi']] up to the factor exp(L[j]).
    """
    st = stepper if stepper is not None else Stepper(pot, zs, tol)
    return st.total()


def propagate_fundamental(pot: Potential, z: complex, tol: float = DEFAULT_TOL,
                          method: str = "magnus") -> FundamentalValues:
    """theta(z, R), theta'(z, R), phi(z, R), phi'(z, R)."""
    check_tol(tol)
    if method == "dop853":
        return _fundamental_dop853(pot, complex(z), tol)
    Y, L = fundamental_batch(pot, [z], tol)
    Y, L = Y[0], float(L[0])
    fv = FundamentalValues(Y[0, 0], Y[1, 0], Y[0, 1], Y[1, 1], L)
    if not all(np.isfinite(v) for v in (fv.theta_R, fv.phi_R, fv.theta_prime_R, fv.phi_prime_R)):
        raise NonFinite("fundamental system is not finite")
    return fv


def _fundamental_dop853(pot: Potential, z: complex, tol: float) -> FundamentalValues:
    """Reference propagation with an explicit embedded Runge-Kutta pair."""

    def rhs(x, y):
        q = pot(x) - z
        return np.array([y[1], q * y[0], y[3], q * y[2]])

    bps = pot.breakpoints()
    y = np.array([1, 0, 0, 1], dtype=complex)
    for x0, x1 in zip(bps[:-1], bps[1:]):
        sol = solve_ivp(rhs, (x0, x1), y, method="DOP853", rtol=tol, atol=tol * 1e-3)
        if not sol.success:
            raise ToleranceNotMet(sol.message)
        y = sol.y[:, -1]
    return FundamentalValues(y[0], y[1], y[2], y[3], 0.0)


@dataclass
class SolutionPath:
    """A solution sampled on a grid, true values = arrays * exp(log_scale).

    ``_dense`` evaluates (u, u') at arbitrary points in the same scaling.
    """

    grid: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    log_scale: float = 0.0
    _dense: Callable | None = field(default=None, repr=False)
    z: complex | None = field(default=None, repr=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.u = np.asarray(self.u, dtype=complex)
        self.u_prime = np.asarray(self.u_prime, dtype=complex)
        if not (len(self.grid) == len(self.u) == len(self.u_prime)):
            raise GridMismatch("grid and value arrays differ in length")
        if self._dense is None:
            # plain samples are interpolated by cubic Hermite splines
            fu = CubicHermiteSpline(self.grid, self.u, self.u_prime)
            fd = fu.derivative()
            self._dense = lambda x: (fu(x), fd(x))

    @property
    def R(self) -> float:
        return float(self.grid[-1])

    @classmethod
    def from_callable(cls, u: Callable, du: Callable, R: float = 1.0, n: int = 65) -> "SolutionPath":
        g = np.linspace(0.0, R, n)
        return cls(g, u(g) + 0j, du(g) + 0j, 0.0,
                   lambda x: (np.asarray(u(x), dtype=complex), np.asarray(du(x), dtype=complex)))

    def at(self, x):
        """True values (u(x), u'(x))."""
        uu, dd = self._dense(np.asarray(x, dtype=float))
        f = math.exp(self.log_scale)
        return uu * f, dd * f

    def boundary(self):
        """(u(0), u'(0), u(R), u'(R)) with the log scale applied."""
        f = math.exp(self.log_scale)
        return self.u[0] * f, self.u_prime[0] * f, self.u[-1] * f, self.u_prime[-1] * f

    def scaled(self, c: complex) -> "SolutionPath":
        d = self._dense
        return SolutionPath(self.grid, self.u * c, self.u_prime * c, self.log_scale,
                            lambda x: tuple(v * c for v in d(x)), self.z)

    def combine(self, a: complex, other: "SolutionPath", b: complex) -> "SolutionPath":
        """a * self + b * other on the union grid."""
        L = max(self.log_scale, other.log_scale)
        fa = a * math.exp(self.log_scale - L)
        fb = b * math.exp(other.log_scale - L)
        d1, d2 = self._dense, other._dense

        def dense(x):
            u1, p1 = d1(x)
            u2, p2 = d2(x)
            return fa * u1 + fb * u2, fa * p1 + fb * p2

        g = np.union1d(self.grid, other.grid)
        uu, pp = dense(g)
        return SolutionPath(g, uu, pp, L, dense, self.z)


def _path_from_states(st: Stepper, j: int, states, logs, forward: bool) -> SolutionPath:
    Lg = float(np.max(logs[:, j] + np.log(np.max(np.abs(states[:, j]), axis=-1))))
    f = np.exp(logs[:, j] - Lg)
    u = states[:, j, 0] * f
    up = states[:, j, 1] * f

    def dense(x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        uu, pp, L = st.dense(flat, j, states, logs, forward)
        g = np.exp(L - Lg)
        return (uu * g).reshape(x.shape), (pp * g).reshape(x.shape)

    return SolutionPath(st.nodes.copy(), u, up, Lg, dense, complex(st.zs[j]))


class Basis:
    """Unnormalized v+ (right condition, swept from R) and v- (left condition,
    swept from 0) for a batch of z on one shared grid."""

    def __init__(self, pot: Potential, zs, angles: BoundaryAngles, tol: float = DEFAULT_TOL,
                 stepper: Stepper | None = None):
        self.pot, self.angles, self.tol = pot, angles, tol
        self.st = stepper if stepper is not None else Stepper(pot, zs, tol)
        self.zs = self.st.zs
        a = angles
        self.plus, self.plus_log = self.st.backward(np.array([[a.sR, a.cR]]))
        self.minus, self.minus_log = self.st.forward(np.array([[a.s0, -a.c0]]))

    def vplus(self, j: int) -> SolutionPath:
        return _path_from_states(self.st, j, self.plus, self.plus_log, forward=False)

    def vminus(self, j: int) -> SolutionPath:
        return _path_from_states(self.st, j, self.minus, self.minus_log, forward=True)

    def delta_ratio(self):
        """|gamma_1(v+)| relative to the size of v+ at 0, per z; small means eigenvalue."""
        a = self.angles
        y = self.plus[0]
        g = a.c0 * y[:, 0] + a.s0 * y[:, 1]
        return np.abs(g) / np.max(np.abs(y), axis=1)

    def check_resolvent(self):
        bad = self.delta_ratio() < eigen_floor(self.tol)
        if np.any(bad):
            raise AtEigenvalue(f"z = {self.zs[np.argmax(bad)]} is (numerically) an eigenvalue")

    def upm(self, j: int) -> tuple[SolutionPath, SolutionPath]:
        """(u_+, u_-) normalized by u_+(0) = 1 and u_-(R) = 1."""
        vp, vm = self.vplus(j), self.vminus(j)
        fl = eigen_floor(self.tol)
        if abs(vp.u[0]) < fl * max(abs(vp.u[0]), abs(vp.u_prime[0])):
            raise AtEigenvalue("u_+ vanishes at 0 (z is an eigenvalue with a Dirichlet left end)")
        if abs(vm.u[-1]) < fl * max(abs(vm.u[-1]), abs(vm.u_prime[-1])):
            raise AtEigenvalue("u_- vanishes at R (z is an eigenvalue with a Dirichlet right end)")
        return _normalize(vp, vp.u[0]), _normalize(vm, vm.u[-1])


def _normalize(p: SolutionPath, pivot: complex) -> SolutionPath:
    d = p._dense
    return SolutionPath(p.grid, p.u / pivot, p.u_prime / pivot, 0.0,
                        lambda x: tuple(v / pivot for v in d(x)), p.z)


def solve_with_boundary_data(pot: Potential, z: complex, angles: BoundaryAngles, c0: complex,
                             cR: complex, tol: float = DEFAULT_TOL) -> SolutionPath:
    """The solution with gamma_{theta0,thetaR}(u) = [c0; cR]."""
    check_tol(tol)
    B = Basis(pot, [z], angles, tol)
    B.check_resolvent()
    vp, vm = B.vplus(0), B.vminus(0)
    a = angles
    g1 = a.c0 * vp.u[0] + a.s0 * vp.u_prime[0]
    g2 = a.cR * vm.u[-1] - a.sR * vm.u_prime[-1]
    # dividing by the scaled traces removes the path scale exactly, so the result carries none
    return _normalize(vp, g1 / c0 if c0 != 0 else np.inf).combine(
        1.0, _normalize(vm, g2 / cR if cR != 0 else np.inf), 1.0)


def u_plus_minus(pot: Potential, z: complex, angles: BoundaryAngles,
                 tol: float = DEFAULT_TOL) -> tuple[SolutionPath, SolutionPath]:
    """(u_{+,thetaR}, u_{-,theta0}) with u_+(0) = 1 and u_-(R) = 1."""
    check_tol(tol)
    B = Basis(pot, [z], angles, tol)
    B.check_resolvent()
    return B.upm(0)


def wronskian(p1: SolutionPath, p2: SolutionPath, x: float) -> complex:
    """f g' - f' g at x."""
    for p in (p1, p2):
        if x < p.grid[0] - 1e-14 or x > p.grid[-1] + 1e-14:
            raise GridMismatch(f"x = {x} lies outside the path grid")
    if p1.z is not None and p2.z is not None and abs(p1.z - p2.z) > 1e-14 * max(1.0, abs(p1.z)):
        raise GridMismatch("paths belong to different spectral parameters")
    f, fp = p1._dense(np.array([x]))
    g, gp = p2._dense(np.array([x]))
    w = f[0] * gp[0] - fp[0] * g[0]
    return complex(w * math.exp(p1.log_scale + p2.log_scale))


def gauss_nodes(grid):
    """10-point Gauss-Legendre nodes and weights on every grid interval."""
    grid = np.asarray(grid, dtype=float)
    a, b = grid[:-1], grid[1:]
    half = 0.5 * (b - a)
    x = (0.5 * (a + b))[:, None] + half[:, None] * _GL_X[None, :]
    w = half[:, None] * _GL_W[None, :]
    return x.ravel(), w.ravel()


def _common_grid(p1: SolutionPath, p2: SolutionPath):
    if abs(p1.grid[0] - p2.grid[0]) > 1e-12 or abs(p1.R - p2.R) > 1e-12 * max(1.0, p1.R):
        raise GridMismatch("paths cover different intervals")
    return np.union1d(p1.grid, p2.grid)


def l2_inner(p1: SolutionPath, p2: SolutionPath, conjugate: bool = True) -> complex:
    """(p1, p2) = int conj(p1) p2 dx; the bilinear product when conjugate=False."""
    x, w = gauss_nodes(_common_grid(p1, p2))
    u1, _ = p1._dense(x)
    u2, _ = p2._dense(x)
    if conjugate:
        u1 = np.conj(u1)
    s = np.sum(w * u1 * u2)
    L = p1.log_scale + p2.log_scale
    return complex(s * math.exp(L))


def form_eval(pot: Potential, angles: BoundaryAngles, f: SolutionPath, g: SolutionPath,
              z: complex, tol: float = DEFAULT_TOL) -> complex:
    """Q(f, g) - z (f, g) for the form of H_{theta0,thetaR}."""
    x, w = gauss_nodes(_common_grid(f, g))
    fu, fd = f.at(x)
    gu, gd = g.at(x)
    val = np.sum(w * (np.conj(fd) * gd + (pot(x) - z) * np.conj(fu) * gu))
    f0, _, fR, _ = f.boundary()
    g0, _, gR, _ = g.boundary()
    scale = max(1.0, np.max(np.abs(fu)), np.max(np.abs(gu)))
    for dirichlet, a, b, theta, sign in ((angles.dirichlet0(), f0, g0, angles.theta0, 1),
                                         (angles.dirichletR(), fR, gR, angles.thetaR, 1)):
        if dirichlet:
            if max(abs(a), abs(b)) > 1e3 * tol * scale:
                raise DomainViolation("form argument does not vanish at a Dirichlet endpoint")
            continue
        cot = np.cos(theta) / np.sin(theta)
        val -= sign * cot * np.conj(a) * b
    return complex(val)
