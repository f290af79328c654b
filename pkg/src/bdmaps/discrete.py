"""Finite-difference laboratory for the symmetrized perturbation determinant.

Nodes x_i = i h, h = R/(n+1), i = 0..n+1.  A Robin endpoint keeps its node with
quadrature weight 1/2 (ghost-point elimination of cos th u + sin th u' = 0),
a Dirichlet endpoint drops it.  Matrices are stored in the symmetric form
W^{-1/2} K W^{-1/2}, so coordinates are orthonormal for the discrete L^2 product.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal, solve_banded, svdvals

from .boundary import _S, det2, lambda_map
from .errors import GridMismatch, NotBelowSpectrum, PreconditionError, ValidationError
from .ode import DEFAULT_TOL, Basis, check_tol, wronskian
from .potential import BoundaryAngles, Potential


@dataclass
class DiscreteHamiltonian:
    n: int
    h: float
    diag: np.ndarray
    offdiag: np.ndarray
    angles: BoundaryAngles
    pot: Potential
    nodes: np.ndarray = field(repr=False)  # indices into 0..n+1 of the kept nodes

    @property
    def dim(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def lowest(self) -> float:
        return float(eigh_tridiagonal(self.diag, self.offdiag, eigvals_only=True,
                                      select="i", select_range=(0, 0))[0])

    def eigenvalues(self) -> np.ndarray:
        return eigh_tridiagonal(self.diag, self.offdiag, eigvals_only=True)


def discretize(pot: Potential, angles: BoundaryAngles, n: int) -> DiscreteHamiltonian:
    """Second-difference stencil with symmetric Robin rows and dropped Dirichlet nodes."""
    if not (pot.real_valued and angles.is_real):
        raise ValidationError("discretization needs a real potential and real angles")
    if int(n) != n or n < 1:
        raise ValidationError("n must be a positive integer")
    n = int(n)
    h = pot.R / (n + 1)
    x = np.arange(n + 2) * h
    v = np.real(pot(x))
    d = 2.0 / h**2 + v
    off = np.full(n + 1, -1.0 / h**2)
    keep = np.ones(n + 2, dtype=bool)
    for i, dirichlet, cot in ((0, angles.dirichlet0(), None), (n + 1, angles.dirichletR(), None)):
        if dirichlet:
            keep[i] = False
            continue
        th = angles.theta0 if i == 0 else angles.thetaR
        cot = math.cos(th) / math.sin(th)
        # weight-1/2 row (u_i - u_nb)/h^2 - cot u_i/h + v_i u_i/2, then scaled by W^{-1/2} on both sides
        d[i] = 2.0 / h**2 - 2.0 * cot / h + v[i]
        j = 0 if i == 0 else n
        off[j] = -math.sqrt(2.0) / h**2
    idx = np.flatnonzero(keep)
    lo, hi = idx[0], idx[-1]
    return DiscreteHamiltonian(n, h, d[lo:hi + 1].copy(), off[lo:hi].copy(), angles, pot, idx)


def _check_pair(Hb: DiscreteHamiltonian, Hp: DiscreteHamiltonian, z) -> float:
    if Hb.n != Hp.n or not math.isclose(Hb.pot.R, Hp.pot.R, rel_tol=0, abs_tol=1e-15):
        raise GridMismatch("discrete operators live on different grids")
    if isinstance(z, complex) or np.iscomplexobj(z):
        if complex(z).imag != 0:
            raise PreconditionError("z must be real")
        z = complex(z).real
    z = float(z)
    if z >= Hb.lowest() or z >= Hp.lowest():
        raise NotBelowSpectrum("z is not below both discrete spectra")
    return z


def _logdet_shifted(H: DiscreteHamiltonian, z: float) -> float:
    return float(np.sum(np.log(H.eigenvalues() - z)))


def _resolvent_cols(H: DiscreteHamiltonian, z: float, cols) -> np.ndarray:
    ab = np.zeros((3, H.dim))
    ab[0, 1:] = H.offdiag
    ab[1] = H.diag - z
    ab[2, :-1] = H.offdiag
    rhs = np.zeros((H.dim, len(cols)))
    rhs[cols, np.arange(len(cols))] = 1.0
    return solve_banded((1, 1), ab, rhs)


def sym_det_discrete(Hb: DiscreteHamiltonian, Hp: DiscreteHamiltonian, z: float,
                     tol: float = DEFAULT_TOL) -> float:
    """det((H'-z)^{1/2}(H-z)^{-1}(H'-z)^{1/2}) for the discrete pair (H = Hb, H' = Hp)."""
    check_tol(tol)
    z = _check_pair(Hb, Hp, z)
    kb, kp = set(Hb.nodes.tolist()), set(Hp.nodes.tolist())
    if not kp <= kb:
        # a primed node on which the padded base resolvent vanishes: exact kernel
        return 0.0
    if kb != kp:
        # compression of (Hb - z)^{-1} to the primed nodes, by Jacobi's complementary minor rule
        drop = [i for i, k in enumerate(Hb.nodes) if k not in kp]
        minor = float(np.prod(Hb.diag[drop] - z))  # dropped nodes are the two ends, never adjacent when n >= 2
        if len(drop) == 2 and Hb.dim == 2:
            minor = float((Hb.diag[0] - z) * (Hb.diag[1] - z) - Hb.offdiag[0] ** 2)
        return float(np.exp(_logdet_shifted(Hp, z) - _logdet_shifted(Hb, z)) * minor)
    if not np.array_equal(Hb.offdiag, Hp.offdiag):
        return float(np.exp(_logdet_shifted(Hp, z) - _logdet_shifted(Hb, z)))
    d = Hp.diag - Hb.diag
    J = np.flatnonzero(d != 0)
    if J.size == 0:
        return 1.0
    if J.size > 2:
        return float(np.exp(_logdet_shifted(Hp, z) - _logdet_shifted(Hb, z)))
    # H' - H = sum_j d_j e_j e_j^T: det(I + (H'-H)(H-z)^{-1}) reduces to |J| x |J|
    G = _resolvent_cols(Hb, z, J)[J]
    return float(np.linalg.det(np.eye(J.size) + d[J][:, None] * G))


def _padded(H: DiscreteHamiltonian) -> np.ndarray:
    N = H.n + 2
    P = np.zeros((N, H.dim))
    P[H.nodes, np.arange(H.dim)] = 1.0
    return P


def symmetrized_matrix(Hb: DiscreteHamiltonian, Hp: DiscreteHamiltonian, z: float) -> np.ndarray:
    """(H'-z)^{1/2}(H-z)^{-1}(H'-z)^{1/2} on the full node space, square roots by eigendecomposition."""
    z = _check_pair(Hb, Hp, z)
    ev, U = eigh(Hp.dense() - z * np.eye(Hp.dim))
    root = (U * np.sqrt(ev)) @ U.T
    Pb, Pp = _padded(Hb), _padded(Hp)
    Rb = np.linalg.inv(Hb.dense() - z * np.eye(Hb.dim))
    Sp = Pp @ root @ Pp.T
    return Sp @ (Pb @ Rb @ Pb.T) @ Sp


def kernel_dimension_probe(Hb: DiscreteHamiltonian, Hp: DiscreteHamiltonian, z: float, k: int = 3) -> np.ndarray:
    """The k smallest singular values, ascending, of the symmetrized matrix restricted to the primed space."""
    X = symmetrized_matrix(Hb, Hp, z)
    P = _padded(Hp)
    s = np.sort(svdvals(P.T @ X @ P))
    return s[:k]


def count_decaying(sig_coarse: np.ndarray, sig_fine: np.ndarray, scale: float = 1.0,
                   factor: float = 4.0, machine: float = 1e-12) -> int:
    """Singular values that drop by at least `factor` on refinement or already sit at machine level."""
    sig_coarse = np.asarray(sig_coarse)
    sig_fine = np.asarray(sig_fine)
    tiny = sig_fine <= machine * scale
    shrink = sig_fine * factor <= sig_coarse
    return int(np.sum(tiny | shrink))


@dataclass
class FormGram:
    """B(z)^* B(z) from primed-operator boundary data."""

    c11: complex
    c12: complex
    c21: complex
    c22: complex
    wronskian_right: complex
    wronskian_left: complex
    wronskian: complex

    def matrix(self) -> np.ndarray:
        return np.array([[self.c11, self.c12], [self.c21, self.c22]], dtype=complex)


def _check_closed_form(pot: Potential, base: BoundaryAngles, primed: BoundaryAngles):
    if not (pot.real_valued and base.is_real and primed.is_real):
        raise PreconditionError("closed form needs a real potential and real angles")
    if primed.dirichlet0() or primed.dirichletR():
        raise PreconditionError("primed angles must avoid 0 and pi")


def _check_below(pot: Potential, z, base: BoundaryAngles, primed: BoundaryAngles, tol: float):
    z = complex(z)
    if z.imag != 0:
        return
    from .spectral import eigenvalues

    e0 = min(eigenvalues(pot, a, 1, tol=max(tol, 1e-10)).values[0] for a in (base, primed))
    if z.real >= e0:
        raise NotBelowSpectrum("z must lie below both spectra")


def _primed_data(pot: Potential, z, primed: BoundaryAngles, tol: float):
    B = Basis(pot, [z], primed, tol)
    B.check_resolvent()
    up, um = B.upm(0)
    up0, dup0, upR, dupR = up.boundary()
    um0, dum0, umR, dumR = um.boundary()
    return up, um, (up0, dup0, upR, dupR), (um0, dum0, umR, dumR)


def _scaled_gram(pot, z, base, primed, tol):
    """C_hat with C = S C_hat S, S = S_{base - primed}, plus the Wronskian expressions."""
    up, um, (up0, dup0, upR, _), (um0, _, _, dumR) = _primed_data(pot, z, primed, tol)
    s0p, sRp = primed.s0, primed.sR
    a0 = dup0 + primed.c0 / s0p
    aR = dumR - primed.cR / sRp
    c11 = -1.0 / (s0p**2 * a0)
    c12 = um0 / (s0p * sRp * aR)
    c21 = -upR / (s0p * sRp * a0)
    c22 = 1.0 / (sRp**2 * aR)
    W = wronskian(up, um, 0.0)
    return np.array([[c11, c12], [c21, c22]], dtype=complex), upR * aR, -um0 * a0, W


def form_gram(pot: Potential, z, base: BoundaryAngles, primed: BoundaryAngles,
              tol: float = DEFAULT_TOL) -> FormGram:
    check_tol(tol)
    _check_closed_form(pot, base, primed)
    Ch, wr, wl, W = _scaled_gram(pot, z, base, primed, tol)
    s = np.diag(_S(base, primed))
    C = Ch * np.outer(s, s)
    return FormGram(C[0, 0], C[0, 1], C[1, 0], C[1, 1], wr, wl, W)


def sym_det_closed_form(pot: Potential, z, base: BoundaryAngles, primed: BoundaryAngles,
                        tol: float = DEFAULT_TOL) -> complex:
    """det(I - S^{-1} Lambda B^*B), S = S_{base - primed}, Lambda from base to primed.

    Writing B^*B = S C_hat S turns this into det(I - Lambda S C_hat) by cyclicity,
    which stays defined when an angle is shared and S is singular.
    """
    check_tol(tol)
    _check_closed_form(pot, base, primed)
    _check_below(pot, z, base, primed, tol)
    Ch, _, _, _ = _scaled_gram(pot, z, base, primed, tol)
    S = _S(base, primed)
    lam = lambda_map(pot, z, base, primed, tol)
    return complex(det2(np.eye(2) - lam @ S @ Ch))


def sym_det_rhs(pot: Potential, z, base: BoundaryAngles, primed: BoundaryAngles,
                tol: float = DEFAULT_TOL) -> complex:
    """(sin th0 sin thR / (sin th0' sin thR')) det Lambda_base^primed."""
    _check_closed_form(pot, base, primed)
    f = base.s0 * base.sR / (primed.s0 * primed.sR)
    if f == 0:
        return 0j
    return complex(f * det2(lambda_map(pot, z, base, primed, tol)))


def gram_identity_residual(pot: Potential, z, base: BoundaryAngles, primed: BoundaryAngles,
                           tol: float = DEFAULT_TOL) -> float:
    """|| Lambda_primed^base S - (B^*B + diag(...)) ||_max with S = S_{base - primed}."""
    _check_closed_form(pot, base, primed)
    G = form_gram(pot, z, base, primed, tol).matrix()
    S = _S(base, primed)
    lam = lambda_map(pot, z, primed, base, tol)
    D = np.diag([np.sin(base.theta0 - primed.theta0) * base.s0 / primed.s0,
                 np.sin(base.thetaR - primed.thetaR) * base.sR / primed.sR])
    return float(np.max(np.abs(lam @ S - (G + D))))


@dataclass
class ConvergenceTable:
    n: list
    values: list
    errors: list
    target: complex
    order: float | None

    def rows(self):
        return list(zip(self.n, self.values, self.errors))


def fitted_order(n_list, errors) -> float | None:
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0) or len(e) < 2:
        return None
    slope = np.polyfit(np.log(np.asarray(n_list, dtype=float)), np.log(e), 1)[0]
    return float(-slope)


def convergence_study(pot: Potential, z: float, base: BoundaryAngles, primed: BoundaryAngles,
                      n_list, tol: float = DEFAULT_TOL, workers: int = 1) -> ConvergenceTable:
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be ascending with at least 3 entries")
    target = sym_det_closed_form(pot, z, base, primed, tol)

    def one(n):
        return sym_det_discrete(discretize(pot, base, n), discretize(pot, primed, n), z, tol)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(one, n_list))
    else:
        vals = [one(n) for n in n_list]
    errs = [abs(v - target) for v in vals]
    return ConvergenceTable(n_list, vals, errs, target, fitted_order(n_list, errs))
