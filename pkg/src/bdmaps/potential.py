"""Potentials, boundary angles and log-scaled scalars."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * math.pi
ANGLE_EPS = 1e-9


@dataclass(frozen=True)
class Potential:
    """A potential V on [0, R].

    ``kind`` is one of ``zero``, ``constant``, ``cosine`` or ``samples``.
    The cosine family is ``amplitude * cos(2*pi*frequency*x/R + phase)``.
    Sampled data is interpolated linearly and may be complex.
    """

    R: float
    kind: str = "zero"
    params: tuple = ()
    xs: np.ndarray | None = field(default=None, repr=False, compare=False)
    vs: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.R) and self.R > 0):
            raise ValidationError(f"R must be positive and finite, got {self.R}")
        if self.kind not in ("zero", "constant", "cosine", "samples"):
            raise ValidationError(f"unknown potential kind {self.kind!r}")
        if self.kind == "samples":
            x, v = self.xs, self.vs
            if x is None or v is None or len(x) != len(v) or len(x) < 2:
                raise ValidationError("samples need matching x and v arrays of length >= 2")
            if np.any(np.diff(x) <= 0):
                raise ValidationError("sample abscissae must be strictly increasing")
            if abs(x[0]) > 1e-14 * self.R or abs(x[-1] - self.R) > 1e-12 * self.R:
                raise ValidationError("sample abscissae must start at 0 and end at R")
            if not np.all(np.isfinite(v)):
                raise ValidationError("sample values must be finite")

    @classmethod
    def zero(cls, R: float = 1.0) -> "Potential":
        return cls(float(R), "zero")

    @classmethod
    def constant(cls, c: float, R: float = 1.0) -> "Potential":
        return cls(float(R), "constant", (float(c),))

    @classmethod
    def cosine(cls, amplitude: float = 1.0, frequency: float = 1.0, phase: float = 0.0,
               R: float = 1.0) -> "Potential":
        return cls(float(R), "cosine", (float(amplitude), float(frequency), float(phase)))

    @classmethod
    def samples(cls, x, v) -> "Potential":
        x = np.asarray(x, dtype=float)
        v = np.asarray(v)
        v = v.astype(complex) if np.iscomplexobj(v) else v.astype(float)
        x = x.copy()
        R = float(x[-1])
        x[0], x[-1] = 0.0, R
        return cls(R, "samples", (), x, v)

    def key(self) -> tuple:
        """Hashable identity including sample data."""
        if self.kind == "samples":
            return (self.R, self.kind, self.xs.tobytes(), self.vs.tobytes())
        return (self.R, self.kind, self.params)

    @property
    def real_valued(self) -> bool:
        if self.kind == "samples":
            return not np.iscomplexobj(self.vs) or bool(np.all(self.vs.imag == 0))
        return True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "constant":
            return np.full_like(x, self.params[0])
        if self.kind == "cosine":
            a, f, ph = self.params
            return a * np.cos(TWO_PI * f * x / self.R + ph)
        if np.iscomplexobj(self.vs):
            return np.interp(x, self.xs, self.vs.real) + 1j * np.interp(x, self.xs, self.vs.imag)
        return np.interp(x, self.xs, self.vs)

    def breakpoints(self) -> np.ndarray:
        """Points where V may have kinks; integration steps align with them."""
        if self.kind == "samples":
            return self.xs.copy()
        return np.array([0.0, self.R])

    def bound(self) -> float:
        """An upper bound for sup |V|."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.params[0])
        if self.kind == "cosine":
            return abs(self.params[0])
        return float(np.max(np.abs(self.vs)))

    def lower_bound(self) -> float:
        """A lower bound for inf Re V."""
        if self.kind == "samples":
            return float(np.min(np.real(self.vs)))
        if self.kind == "constant":
            return self.params[0]
        return -self.bound()

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "constant":
            return {"kind": "constant", "c": self.params[0]}
        if self.kind == "cosine":
            a, f, ph = self.params
            return {"kind": "cosine", "amplitude": a, "frequency": f, "phase": ph}
        d = {"kind": "samples", "x": self.xs.tolist(), "interpolation": "linear"}
        if np.iscomplexobj(self.vs):
            d["v"] = self.vs.real.tolist()
            d["v_imag"] = self.vs.imag.tolist()
        else:
            d["v"] = self.vs.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict, R: float) -> "Potential":
        kind = d.get("kind")
        if kind == "zero":
            return cls.zero(R)
        if kind == "constant":
            return cls.constant(d["c"], R)
        if kind == "cosine":
            return cls.cosine(d.get("amplitude", 1.0), d.get("frequency", 1.0),
                              d.get("phase", 0.0), R)
        if kind == "samples":
            x = np.asarray(d["x"], dtype=float)
            v = np.asarray(d["v"], dtype=float)
            if "v_imag" in d:
                v = v + 1j * np.asarray(d["v_imag"], dtype=float)
            if abs(x[-1] - R) > 1e-12 * R:
                raise ValidationError("last sample abscissa must equal R")
            return cls.samples(x, v)
        raise ValidationError(f"unknown potential kind {kind!r}")


def normalize_angle(theta):
    """Reduce the real part of an angle into [0, 2*pi)."""
    if isinstance(theta, complex) or np.iscomplexobj(theta):
        t = complex(theta)
        return complex(math.fmod(t.real, TWO_PI) % TWO_PI, t.imag)
    t = math.fmod(float(theta), TWO_PI) % TWO_PI
    if t >= TWO_PI - 1e-15:
        t = 0.0
    return t


@dataclass(frozen=True)
class BoundaryAngles:
    """Separated boundary condition angles (theta0, thetaR)."""

    theta0: float | complex
    thetaR: float | complex

    def __post_init__(self):
        object.__setattr__(self, "theta0", normalize_angle(self.theta0))
        object.__setattr__(self, "thetaR", normalize_angle(self.thetaR))

    @property
    def is_real(self) -> bool:
        return not isinstance(self.theta0, complex) and not isinstance(self.thetaR, complex)

    @property
    def c0(self):
        return _cos(self.theta0)

    @property
    def s0(self):
        return _sin(self.theta0)

    @property
    def cR(self):
        return _cos(self.thetaR)

    @property
    def sR(self):
        return _sin(self.thetaR)

    def dirichlet0(self) -> bool:
        return is_multiple_of_pi(self.theta0)

    def dirichletR(self) -> bool:
        return is_multiple_of_pi(self.thetaR)

    def as_tuple(self) -> tuple:
        return (self.theta0, self.thetaR)


def _cos(t):
    return complex(np.cos(t)) if isinstance(t, complex) else math.cos(t)


def _sin(t):
    if isinstance(t, complex):
        return complex(np.sin(t))
    # exact zeros at multiples of pi keep Dirichlet branches clean
    if is_multiple_of_pi(t, 1e-15):
        return 0.0
    return math.sin(t)


def is_multiple_of_pi(t, eps: float = ANGLE_EPS) -> bool:
    if isinstance(t, complex):
        if abs(t.imag) > eps:
            return False
        t = t.real
    r = math.fmod(t, math.pi)
    return min(abs(r), math.pi - abs(r)) < eps


def angle_diff_zero_mod_pi(a, b, eps: float = ANGLE_EPS) -> bool:
    return is_multiple_of_pi(a - b, eps)


@dataclass(frozen=True)
class LogScaled:
    """value = mantissa * exp(log_scale), with |mantissa| in [1, e) unless zero."""

    mantissa: complex
    log_scale: float

    @classmethod
    def make(cls, mantissa, log_scale: float = 0.0) -> "LogScaled":
        m = complex(mantissa)
        if m == 0 or not np.isfinite(abs(m)):
            return cls(0j if m == 0 else m, 0.0 if m == 0 else float(log_scale))
        k = math.floor(math.log(abs(m)))
        return cls(m * math.exp(-k), float(log_scale) + k)

    @property
    def value(self) -> complex:
        return self.mantissa * math.exp(self.log_scale) if self.mantissa != 0 else 0j

    def log(self) -> complex:
        return np.log(self.mantissa) + self.log_scale

    def __truediv__(self, other: "LogScaled") -> "LogScaled":
        return LogScaled.make(self.mantissa / other.mantissa, self.log_scale - other.log_scale)

    def __mul__(self, other: "LogScaled") -> "LogScaled":
        return LogScaled.make(self.mantissa * other.mantissa, self.log_scale + other.log_scale)

    def __abs__(self) -> float:
        return abs(self.mantissa) * math.exp(self.log_scale) if self.mantissa != 0 else 0.0
