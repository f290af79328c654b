"""Eigenvalues, resolvent-difference traces and the spectral shift function."""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .boundary import char_det_batch, det2, lambda_batch
from .errors import AtEigenvalue, BracketingFailure, PhaseTrackingLost, PreconditionError, TailTooLarge
from .ode import DEFAULT_TOL, Stepper, check_tol, eigen_floor
from .potential import BoundaryAngles, Potential, is_multiple_of_pi

_COUNT_TOL = 1e-8


def _require_self_adjoint(pot: Potential, *angles: BoundaryAngles):
    if not pot.real_valued:
        raise PreconditionError("spectral operations need a real potential")
    for a in angles:
        if not a.is_real:
            raise PreconditionError("spectral operations need real boundary angles")


def _reduce(angles: BoundaryAngles) -> BoundaryAngles:
    """Angles mod pi describe the same operator."""
    return BoundaryAngles(math.fmod(angles.theta0, math.pi), math.fmod(angles.thetaR, math.pi))


def dirichlet_offset(angles: BoundaryAngles) -> float:
    """Index shift s in lambda_k ~ (pi (k + s) / R)^2, k = 0, 1, ..."""
    return 0.5 * (int(angles.dirichlet0()) + int(angles.dirichletR()))


def count_eigenvalues(pot: Potential, angles: BoundaryAngles, lams, tol: float = _COUNT_TOL) -> np.ndarray:
    """Number of eigenvalues <= lam, by the scaled Pruefer angle of the left solution."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    a = _reduce(angles)
    st = Stepper(pot, lams, max(tol, 1e-12), phase_limit=True)
    states, _ = st.forward(np.array([[a.s0, -a.c0]]))
    s = st.scale
    ang = np.arctan2(s[None, :] * states[..., 0].real, states[..., 1].real)
    ang = np.unwrap(ang, axis=0)
    # put the starting angle into [0, pi)
    shift = np.floor(ang[0] / math.pi + 1e-12) * math.pi
    end = ang[-1] - shift
    beta = np.arctan2(s * a.sR, a.cR)
    beta = np.where(beta <= 1e-15, math.pi, beta)
    n = np.floor((end - beta) / math.pi + 1e-12) + 1
    return np.maximum(n, 0).astype(int)


@dataclass
class EigenvalueList:
    values: np.ndarray
    angles: BoundaryAngles
    pot: Potential = field(repr=False)
    count_requested: int = 0

    @property
    def offset(self) -> float:
        return dirichlet_offset(_reduce(self.angles))

    def asymptotic_constant(self) -> float:
        """max_k (k+s) |sqrt(lambda_k) - (k+s) pi / R| over k >= 1."""
        k = np.arange(len(self.values)) + self.offset
        sel = k >= 1
        r = k[sel] * np.abs(np.sqrt(np.maximum(self.values[sel], 0.0)) - k[sel] * math.pi / self.pot.R)
        return float(np.max(r)) if r.size else 0.0


def _delta_real(st: Stepper, angles, lams):
    d, L, rel = char_det_batch(st.pot, lams, angles, st.tol, st.with_z(lams))
    return d.real * np.exp(L), rel


_CACHE: OrderedDict = OrderedDict()
_CACHE_SIZE = 64
_CACHE_LOCK = threading.Lock()


def eigenvalues(pot: Potential, angles: BoundaryAngles, n: int, tol: float = DEFAULT_TOL,
                ceiling: float = 1e9) -> EigenvalueList:
    """The lowest n eigenvalues, bracketed by counting and refined on sign changes of Delta."""
    check_tol(tol)
    key = (pot.key(), angles.as_tuple(), int(n), float(tol), float(ceiling))
    with _CACHE_LOCK:
        hit = _CACHE.get(key)
        if hit is not None:
            _CACHE.move_to_end(key)
            return EigenvalueList(hit.copy(), angles, pot, n)
    out = _eigenvalues(pot, angles, n, tol, ceiling)
    with _CACHE_LOCK:
        _CACHE[key] = out.values.copy()
        if len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return out


def _eigenvalues(pot, angles, n, tol, ceiling):
    _require_self_adjoint(pot)
    if not angles.is_real:
        raise PreconditionError("eigenvalues need real boundary angles")
    a = _reduce(angles)
    R = pot.R
    vlo, vhi = pot.lower_bound(), pot.bound()
    lo = vlo - 1.0
    while count_eigenvalues(pot, a, [lo])[0] > 0:
        lo = 2.0 * lo - 10.0
        if lo < -ceiling:
            raise BracketingFailure("no lower bound for the spectrum found")
    hi = (math.pi * (n + 1) / R) ** 2 + vhi + 10.0
    while count_eigenvalues(pot, a, [hi])[0] < n:
        hi = 2.0 * hi
        if hi > ceiling:
            raise BracketingFailure(f"cannot isolate {n} eigenvalues below {ceiling}")
    # scan uniform in sqrt(lambda - lo), then bisect counts until every index is isolated
    m = 4 * n + 20
    grid = lo + np.linspace(0.0, math.sqrt(hi - lo), m) ** 2
    cnt = count_eigenvalues(pot, a, grid)
    left = np.empty(n)
    right = np.empty(n)
    for k in range(n):
        left[k] = grid[np.nonzero(cnt <= k)[0][-1]]
        right[k] = grid[np.nonzero(cnt >= k + 1)[0][0]]
    cl = count_eigenvalues(pot, a, left)
    cr = count_eigenvalues(pot, a, right)
    for _ in range(200):
        todo = np.nonzero((cl != np.arange(n)) | (cr != np.arange(n) + 1))[0]
        if todo.size == 0:
            break
        mid = 0.5 * (left[todo] + right[todo])
        cm = count_eigenvalues(pot, a, mid)
        k = todo
        go_right = cm <= k
        left[k[go_right]] = mid[go_right]
        cl[k[go_right]] = cm[go_right]
        right[k[~go_right]] = mid[~go_right]
        cr[k[~go_right]] = cm[~go_right]
        if np.max(right[todo] - left[todo]) < 1e-14 * max(1.0, np.max(np.abs(right[todo]))):
            raise BracketingFailure("eigenvalues could not be isolated (near-degenerate roots)")
    else:
        raise BracketingFailure("eigenvalue isolation did not converge")
    vals = _refine(pot, a, left, right, tol)
    return EigenvalueList(vals, angles, pot, n)


def _refine(pot, angles, left, right, tol):
    """Illinois iteration on the sign change of Delta inside each bracket."""
    # one step grid, built for the bracket ends, serves every iterate
    st = Stepper(pot, np.concatenate([left, right]), tol)
    fa, _ = _delta_real(st, angles, left)
    fb, _ = _delta_real(st, angles, right)
    a, b = left.copy(), right.copy()
    x = 0.5 * (a + b)
    side = np.zeros(len(a), dtype=int)
    for it in range(200):
        width = b - a
        active = width > tol * np.maximum(1.0, np.abs(x))
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        with np.errstate(invalid="ignore", divide="ignore"):
            xs = (a[idx] * fb[idx] - b[idx] * fa[idx]) / (fb[idx] - fa[idx])
        bad = ~np.isfinite(xs) | (xs <= a[idx]) | (xs >= b[idx])
        xs[bad] = 0.5 * (a[idx][bad] + b[idx][bad])
        fx, _ = _delta_real(st, angles, xs)
        step = np.abs(xs - x[idx])
        x[idx] = xs
        conv = step < 0.1 * tol * np.maximum(1.0, np.abs(xs))
        for j, i in enumerate(idx):
            if fx[j] == 0 or (conv[j] and it > 0):
                a[i] = b[i] = xs[j]
                continue
            if fx[j] == 0:
                a[i] = b[i] = xs[j]
                continue
            if np.sign(fx[j]) == np.sign(fa[i]):
                a[i], fa[i] = xs[j], fx[j]
                if side[i] == -1:
                    fb[i] *= 0.5
                side[i] = -1
            else:
                b[i], fb[i] = xs[j], fx[j]
                if side[i] == 1:
                    fa[i] *= 0.5
                side[i] = 1
    with np.errstate(invalid="ignore", divide="ignore"):
        xs = (a * fb - b * fa) / (fb - fa)
    ok = np.isfinite(xs) & (xs >= a) & (xs <= b) & (b > a)
    return np.where(ok, xs, np.where(a == b, a, 0.5 * (a + b)))


@dataclass
class TraceSum:
    value: complex
    tail_bound: float
    n_terms: int


def _tail(vals: np.ndarray, s: float, R: float, z: complex, K: int = 200000):
    """Asymptotic-model tail sum over k >= len(vals) of 1/(lambda_k - z), and a spread estimate."""
    n = len(vals)
    m = min(20, max(4, n // 3))
    k = np.arange(n - m, n) + s
    base = (math.pi * k / R) ** 2
    r = vals[n - m:] - base
    tails = []
    kk = np.arange(n, n + K) + s
    for cols in ([np.ones_like(k)], [np.ones_like(k), 1.0 / k ** 2]):
        A = np.column_stack(cols)
        coef, *_ = np.linalg.lstsq(A, r, rcond=None)
        mu = (math.pi * kk / R) ** 2 + coef[0] + (coef[1] / kk ** 2 if len(coef) > 1 else 0.0)
        t = np.sum(1.0 / (mu - z)) + R ** 2 / (math.pi ** 2 * (n + K + s - 0.5))
        tails.append(t)
    return tails[1], abs(tails[1] - tails[0])


def trace_resolvent_diff(pot: Potential, base: BoundaryAngles, primed: BoundaryAngles, z: complex,
                         n_terms: int = 100, tol: float = 1e-6, eig_tol: float = DEFAULT_TOL) -> TraceSum:
    """sum_k [1/(lambda'_k - z) - 1/(lambda_k - z)] with an asymptotic tail model."""
    _require_self_adjoint(pot, base, primed)
    z = complex(z)
    if _reduce(base) == _reduce(primed):
        return TraceSum(0j, 0.0, n_terms)
    ev = eigenvalues(pot, base, n_terms, eig_tol).values
    evp = eigenvalues(pot, primed, n_terms, eig_tol).values
    for v in (ev, evp):
        if np.min(np.abs(v - z)) < 1e-12 * max(1.0, abs(z)):
            raise AtEigenvalue("z coincides with an eigenvalue")
    head = np.sum(1.0 / (evp - z)) - np.sum(1.0 / (ev - z))
    tp, bp = _tail(evp, dirichlet_offset(_reduce(primed)), pot.R, z)
    tb, bb = _tail(ev, dirichlet_offset(_reduce(base)), pot.R, z)
    bound = bp + bb
    if bound > tol:
        raise TailTooLarge(f"tail bound {bound:.3e} exceeds {tol:.1e}; raise n_terms")
    return TraceSum(complex(head + tp - tb), float(bound), n_terms)


def _log_det_lambda(pot, zs, base, primed, tol):
    lam = lambda_batch(pot, zs, base, primed, tol)
    return det2(lam)


def log_det_derivative(pot: Potential, base: BoundaryAngles, primed: BoundaryAngles, z: complex,
                       h: float | None = None, tol: float = DEFAULT_TOL) -> tuple[complex, float]:
    """-d/dz ln det Lambda_base^primed(z) by central differences with one Richardson level.

    Returns (value, error estimate).
    """
    check_tol(tol)
    z = complex(z)
    if h is None:
        h = 1e-2 * max(1.0, abs(z)) ** 0.5
    if _reduce(base) == _reduce(primed) and base == primed:
        return 0j, 0.0
    pts = z + np.array([-h, -h / 2, 0.0, h / 2, h])
    d = _log_det_lambda(pot, pts, base, primed, tol)
    ln = np.log(d / d[2])
    D1 = (ln[4] - ln[0]) / (2 * h)
    D2 = (ln[3] - ln[1]) / h
    val = (4 * D2 - D1) / 3
    return complex(-val), float(abs(val - D2))


def eta(base: BoundaryAngles) -> int:
    d0, dR = base.dirichlet0(), base.dirichletR()
    return -1 if d0 != dR else 1


@dataclass
class SpectralShift:
    grid: np.ndarray
    values: np.ndarray
    residuals: np.ndarray
    eta: int
    pair: tuple
    breakpoints: np.ndarray

    def value_at(self, lam: float) -> int:
        """Piecewise-constant evaluation from the detected breakpoints."""
        i = int(np.argmin(np.abs(self.grid - lam)))
        return int(self.values[i])


def _check_ssf_angles(base: BoundaryAngles, primed: BoundaryAngles):
    for t in base.as_tuple():
        if not (0.0 <= t < math.pi):
            raise PreconditionError("base angles must lie in [0, pi)")
    for t in primed.as_tuple():
        if not (0.0 < t < math.pi) or is_multiple_of_pi(t):
            raise PreconditionError("primed angles must lie in (0, pi)")


def _track_phase(pot, base, primed, xs, eps, tol, ev0, max_levels=48):
    """Continuous phase of eta det Lambda(x + i eps) along ascending real points xs."""
    et = eta(base)

    def g(x):
        return et * det2(lambda_batch(pot, x + 1j * eps, base, primed, tol))

    pts = np.asarray(xs, dtype=float)
    vals = g(pts)
    for _ in range(max_levels):
        dph = np.angle(vals[1:] / vals[:-1])
        bad = np.nonzero(np.abs(dph) > math.pi / 4)[0]
        if bad.size == 0:
            break
        mids = 0.5 * (pts[bad] + pts[bad + 1])
        gm = g(mids)
        pts = np.insert(pts, bad + 1, mids)
        vals = np.insert(vals, bad + 1, gm)
    dph = np.angle(vals[1:] / vals[:-1])
    if np.any(np.abs(dph) > math.pi / 2):
        raise PhaseTrackingLost("adjacent phases differ by more than pi/2 after refinement")
    phase = np.concatenate([[np.angle(vals[0])], np.angle(vals[0]) + np.cumsum(dph)])
    return pts, phase


def spectral_shift(pot: Potential, base: BoundaryAngles, primed: BoundaryAngles, lambda_grid,
                   eps_schedule=(1e-2, 1e-3, 1e-4), tol: float = DEFAULT_TOL) -> SpectralShift:
    """xi(lambda; H_primed, H_base) from boundary values of det Lambda, tracked from below e0."""
    check_tol(tol)
    _require_self_adjoint(pot, base, primed)
    _check_ssf_angles(base, primed)
    grid = np.sort(np.asarray(lambda_grid, dtype=float))
    e0 = min(eigenvalues(pot, base, 1, tol).values[0], eigenvalues(pot, primed, 1, tol).values[0])
    anchor = min(grid[0], e0) - max(1.0, 0.1 * abs(e0))
    xs = np.concatenate([[anchor], grid])
    eps_schedule = sorted(eps_schedule, reverse=True)
    per_eps = []
    finest = None
    for eps in eps_schedule:
        pts, phase = _track_phase(pot, base, primed, xs, eps, tol, e0)
        pos = np.searchsorted(pts, grid)
        per_eps.append(phase[pos] / math.pi)
        finest = (pts, phase)
    if len(eps_schedule) >= 2:
        e1, e2 = eps_schedule[-2], eps_schedule[-1]
        x1, x2 = per_eps[-2], per_eps[-1]
        xi = x2 + (x2 - x1) * e2 / (e1 - e2)
    else:
        xi = per_eps[-1]
    rounded = np.rint(xi).astype(int)
    resid = np.abs(xi - rounded)
    pts, phase = finest
    half = phase / math.pi - 0.5
    bp = []
    fl = np.floor(half)
    for i in np.nonzero(fl[1:] != fl[:-1])[0]:
        t = (np.ceil(min(half[i], half[i + 1])) - half[i]) / (half[i + 1] - half[i])
        bp.append(pts[i] + t * (pts[i + 1] - pts[i]))
    return SpectralShift(grid, rounded, resid, eta(base), (primed, base), np.array(bp))


def ssf_counting_oracle(pot: Potential, base: BoundaryAngles, primed: BoundaryAngles, lam: float,
                        tol: float = DEFAULT_TOL) -> int:
    """N(lam; H_base) - N(lam; H_primed), counting eigenvalues <= lam."""
    _require_self_adjoint(pot, base, primed)
    for a in (base, primed):
        _, _, rel = char_det_batch(pot, [lam], _reduce(a), tol)
        if rel[0] < eigen_floor(tol):
            raise AtEigenvalue(f"lambda = {lam} is an eigenvalue")
    nb = count_eigenvalues(pot, base, [lam])[0]
    npr = count_eigenvalues(pot, primed, [lam])[0]
    return int(nb - npr)
