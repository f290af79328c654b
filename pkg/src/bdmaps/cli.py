"""Command-line front end: JSON problem in, JSON (or CSV) result envelope out."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .boundary import char_det, delta_ratio, det2, lambda_map
from .discrete import (convergence_study, discretize, gram_identity_residual, kernel_dimension_probe,
                       sym_det_closed_form, sym_det_rhs)
from .errors import BDMapError, ParseError, ValidationError
from .ode import check_tol
from .positive_type import (frac_power_neg, random_positive_type, semigroup_check, spectral_oracle_power,
                            sqrt_op, sym_det_matrix, trace_formula_sides)
from .potential import BoundaryAngles, Potential, normalize_angle
from .resolvents import apply_resolvent, krein_resolvent
from .spectral import eigenvalues, log_det_derivative, spectral_shift, ssf_counting_oracle, trace_resolvent_diff

SCHEMA_VERSION = "1"
COMMANDS = ("eigs", "bdmap", "dets", "trace-check", "ssf", "krein-check", "det-identity", "abstract-check")
_FIELDS = {"R", "potential", "theta0", "thetaR", "theta0p", "thetaRp", "tolerance", "z",
           "lambda_min", "lambda_max", "n", "n_list", "seed", "dim"}


@dataclass
class ProblemSpec:
    R: float = 1.0
    potential: Potential = field(default_factory=Potential.zero)
    theta0: float | None = None
    thetaR: float | None = None
    theta0p: float | None = None
    thetaRp: float | None = None
    tolerance: float = 1e-10
    z: list = field(default_factory=list)
    lambda_min: float | None = None
    lambda_max: float | None = None
    n: int | None = None
    n_list: list | None = None
    seed: int | None = None
    dim: int | None = None

    def base(self) -> BoundaryAngles:
        if self.theta0 is None or self.thetaR is None:
            raise ValidationError("theta0 and thetaR are required")
        return BoundaryAngles(self.theta0, self.thetaR)

    def primed(self) -> BoundaryAngles:
        if self.theta0p is None or self.thetaRp is None:
            raise ValidationError("theta0p and thetaRp are required")
        return BoundaryAngles(self.theta0p, self.thetaRp)

    def to_dict(self) -> dict:
        d = {"R": self.R, "potential": self.potential.to_dict(), "tolerance": self.tolerance,
             "z": [[v.real, v.imag] for v in self.z]}
        for k in ("theta0", "thetaR", "theta0p", "thetaRp", "lambda_min", "lambda_max", "n", "n_list", "seed", "dim"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d


def _number(d: dict, key: str, errors: list, integer: bool = False):
    v = d.get(key)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        errors.append(f"{key}: expected a finite number")
        return None
    if integer:
        if int(v) != v:
            errors.append(f"{key}: expected an integer")
            return None
        return int(v)
    return float(v)


def _parse_z(v, errors: list) -> list:
    if not isinstance(v, list):
        errors.append("z: expected a list")
        return []
    out = []
    for i, e in enumerate(v):
        if isinstance(e, (int, float)) and not isinstance(e, bool):
            out.append(complex(e, 0.0))
        elif isinstance(e, list) and len(e) == 2 and all(isinstance(t, (int, float)) for t in e):
            out.append(complex(e[0], e[1]))
        elif isinstance(e, dict) and set(e) <= {"re", "im"}:
            out.append(complex(e.get("re", 0.0), e.get("im", 0.0)))
        else:
            errors.append(f"z[{i}]: expected a number, [re, im] or {{re, im}}")
    return out


def parse_problem(data: bytes | str, degrees: bool = False) -> ProblemSpec:
    """Parse and validate a JSON problem description."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"input is not UTF-8: {e}") from None
    try:
        d = json.loads(data) if data.strip() else {}
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(d, dict):
        raise ParseError("top-level JSON value must be an object")
    errors = [f"{k}: unknown field" for k in sorted(set(d) - _FIELDS)]
    spec = ProblemSpec()
    R = _number(d, "R", errors)
    if R is not None:
        if R <= 0:
            errors.append("R: must be positive")
        else:
            spec.R = R
    for k in ("theta0", "thetaR", "theta0p", "thetaRp"):
        v = _number(d, k, errors)
        if v is not None:
            setattr(spec, k, normalize_angle(math.radians(v) if degrees else v))
    tol = _number(d, "tolerance", errors)
    if tol is not None:
        if not 0 < tol <= 1e-4:
            errors.append("tolerance: must lie in (0, 1e-4]")
        else:
            spec.tolerance = tol
    if "z" in d:
        spec.z = _parse_z(d["z"], errors)
    spec.lambda_min = _number(d, "lambda_min", errors)
    spec.lambda_max = _number(d, "lambda_max", errors)
    for k in ("n", "seed", "dim"):
        setattr(spec, k, _number(d, k, errors, integer=True))
    if spec.n is not None and spec.n < 1:
        errors.append("n: must be positive")
    if spec.dim is not None and spec.dim < 1:
        errors.append("dim: must be positive")
    if "n_list" in d:
        nl = d["n_list"]
        if not (isinstance(nl, list) and all(isinstance(t, int) and not isinstance(t, bool) and t > 0 for t in nl)):
            errors.append("n_list: expected a list of positive integers")
        else:
            spec.n_list = nl
    if "potential" in d:
        p = d["potential"]
        if not isinstance(p, dict):
            errors.append("potential: expected an object")
        elif spec.R > 0:
            try:
                spec.potential = Potential.from_dict(p, spec.R)
            except KeyError as e:
                errors.append(f"potential: missing field {e.args[0]}")
            except (ValidationError, ValueError, TypeError) as e:
                errors.append(f"potential: {e}")
    else:
        spec.potential = Potential.zero(spec.R)
    if errors:
        raise ValidationError("; ".join(errors))
    return spec


def _c(v) -> list:
    v = complex(v)
    return [_f(v.real), _f(v.imag)]


def _f(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _mat(M) -> list:
    return [[_c(x) for x in row] for row in np.asarray(M)]


def _zs(spec: ProblemSpec, default) -> list:
    return spec.z if spec.z else [complex(v) for v in default]


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _cmd_eigs(spec, args):
    n = spec.n or 10
    ev = eigenvalues(spec.potential, spec.base(), n, spec.tolerance)
    table = [[k, float(v)] for k, v in enumerate(ev.values)]
    out = {"eigenvalues": [float(v) for v in ev.values]}
    return out, {"asymptotic_constant": ev.asymptotic_constant()}, (["index", "eigenvalue"], table)


def _cmd_bdmap(spec, args):
    b, p = spec.base(), spec.primed()

    def one(z):
        lam = lambda_map(spec.potential, z, b, p, spec.tolerance)
        return {"z": _c(z), "lambda": _mat(lam), "det": _c(det2(lam))}

    res = _map(one, _zs(spec, [-1.0]), args.threads)
    return {"results": res}, {}, None


def _cmd_dets(spec, args):
    b, p = spec.base(), spec.primed()

    def one(z):
        db = char_det(spec.potential, z, b, spec.tolerance)
        dp = char_det(spec.potential, z, p, spec.tolerance)
        dl = det2(lambda_map(spec.potential, z, b, p, spec.tolerance))
        ratio = delta_ratio(spec.potential, z, b, p, spec.tolerance)
        return {"z": _c(z),
                "delta_base": {"mantissa": _c(db.mantissa), "log_scale": _f(db.log_scale)},
                "delta_primed": {"mantissa": _c(dp.mantissa), "log_scale": _f(dp.log_scale)},
                "det_lambda": _c(dl), "delta_ratio": _c(ratio),
                "relative_residual": _f(abs(dl - ratio) / max(abs(ratio), 1e-300))}

    res = _map(one, _zs(spec, [-1.0]), args.threads)
    return {"results": res}, {"max_relative_residual": max(r["relative_residual"] for r in res)}, None


def _cmd_trace(spec, args):
    b, p = spec.base(), spec.primed()
    n = spec.n or 100

    def one(z):
        tr = trace_resolvent_diff(spec.potential, b, p, z, n_terms=n, tol=1e-6)
        ld, err = log_det_derivative(spec.potential, b, p, z, tol=spec.tolerance)
        return {"z": _c(z), "trace_sum": _c(tr.value), "tail_bound": _f(tr.tail_bound),
                "log_det_derivative": _c(ld), "difference_error": _f(err), "residual": _f(abs(tr.value - ld))}

    res = _map(one, _zs(spec, [-1.0, -5.0, -25.0]), args.threads)
    diag = {"max_residual": max(r["residual"] for r in res), "max_tail_bound": max(r["tail_bound"] for r in res),
            "n_terms": n}
    return {"results": res}, diag, None


def _cmd_ssf(spec, args):
    b, p = spec.base(), spec.primed()
    lo = spec.lambda_min if spec.lambda_min is not None else -10.0
    hi = spec.lambda_max if spec.lambda_max is not None else 100.0
    if not hi > lo:
        raise ValidationError("lambda_max must exceed lambda_min")
    grid = np.linspace(lo, hi, spec.n or 201)
    s = spectral_shift(spec.potential, b, p, grid, tol=spec.tolerance)
    oracle = [ssf_counting_oracle(spec.potential, b, p, float(x), spec.tolerance) for x in grid]
    out = {"grid": [float(x) for x in grid], "xi": [int(v) for v in s.values],
           "breakpoints": [float(x) for x in s.breakpoints], "eta": s.eta}
    diag = {"max_integer_residual": float(np.max(s.residuals)),
            "oracle_mismatches": int(sum(int(a) != int(o) for a, o in zip(s.values, oracle)))}
    table = [[k, float(x)] for k, x in enumerate(s.breakpoints)]
    return out, diag, (["index", "breakpoint"], table)


def _cmd_krein(spec, args):
    b, p = spec.base(), spec.primed()
    R = spec.R
    sources = {"one": lambda x: np.ones_like(x), "x": lambda x: np.asarray(x, dtype=float),
               "sin_pi_x": lambda x: np.sin(math.pi * np.asarray(x) / R)}
    xs = np.linspace(0.0, R, 201)
    res = []
    for z in _zs(spec, [-1.0]):
        for name, f in sources.items():
            k = krein_resolvent(spec.potential, z, b, p, f, spec.tolerance)
            d = apply_resolvent(spec.potential, z, p, f, spec.tolerance)
            res.append({"z": _c(z), "source": name,
                        "max_difference": _f(np.max(np.abs(k.at(xs)[0] - d.at(xs)[0])))})
    return {"results": res}, {"max_difference": max(r["max_difference"] for r in res)}, None


def _cmd_det_identity(spec, args):
    b, p = spec.base(), spec.primed()
    res = []
    for z in _zs(spec, [-9.0]):
        cf = sym_det_closed_form(spec.potential, z, b, p, spec.tolerance)
        rhs = sym_det_rhs(spec.potential, z, b, p, spec.tolerance)
        res.append({"z": _c(z), "closed_form": _c(cf), "rhs": _c(rhs), "residual": _f(abs(cf - rhs)),
                    "gram_identity_residual": _f(gram_identity_residual(spec.potential, z, b, p, spec.tolerance))})
    out = {"results": res}
    diag = {"max_residual": max(r["residual"] for r in res)}
    table = None
    z0 = _zs(spec, [-9.0])[0]
    if z0.imag == 0:
        nl = spec.n_list or [200, 400, 800]
        conv = convergence_study(spec.potential, z0.real, b, p, nl, spec.tolerance, workers=args.threads)
        out["convergence"] = {"n": conv.n, "values": [_f(v) for v in conv.values],
                              "errors": [_f(e) for e in conv.errors], "target": _c(conv.target)}
        diag["fitted_order"] = conv.order
        sv = [kernel_dimension_probe(discretize(spec.potential, b, n), discretize(spec.potential, p, n), z0.real, 3)
              for n in nl[:2]]
        out["kernel_probe"] = {"n": nl[:2], "singular_values": [[float(x) for x in s] for s in sv]}
        table = (["n", "value", "error"], [[n, v, e] for n, v, e in conv.rows()])
    return out, diag, table


def abstract_check(dim: int = 6, seed: int = 42) -> tuple[dict, dict]:
    """Residuals of the finite-dimensional positive-type identities on seeded random matrices."""
    rng = np.random.default_rng(seed)
    H = random_positive_type(dim, rng, hermitian=True)
    H0 = random_positive_type(dim, rng, hermitian=True)
    N = random_positive_type(dim, rng)
    N0 = random_positive_type(dim, rng)
    alphas = (0.25, 0.5, 0.75, 1.25, 1.5)
    oracle = max(float(np.max(np.abs(frac_power_neg(H, a) - spectral_oracle_power(H, -a)))) for a in alphas)
    anchor = np.array([[math.sqrt(2), math.sqrt(2) / 4], [0, math.sqrt(2)]])
    sqrt_err = float(np.max(np.abs(sqrt_op([[2, 1], [0, 2]]) - anchor)))
    semi = max(semigroup_check(H, 0.3 + 0.1j, 0.2 - 0.1j), semigroup_check(N, 0.5, 0.7))
    z = -1.0 - float(max(np.abs(np.linalg.eigvals(N)).max(), np.abs(np.linalg.eigvals(N0)).max()))
    sd = sym_det_matrix(N, N0, z)
    I = np.eye(dim)
    classical = np.linalg.det((N - z * I) @ np.linalg.inv(N0 - z * I))
    det_err = float(abs(sd - classical) / abs(classical))
    h = 1e-2
    r1 = abs(complex.__sub__(*trace_formula_sides(H, H0, -1.0, h)))
    r2 = abs(complex.__sub__(*trace_formula_sides(H, H0, -1.0, h / 2)))
    lhs, rhs = trace_formula_sides(np.diag([2.0, 3.0]), np.diag([1.0, 2.0]), -1.0, 1e-3)
    out = {"frac_power_oracle_error": oracle, "sqrt_anchor_error": sqrt_err, "semigroup_residual": semi,
           "symdet_vs_classical_relative": det_err, "trace_residual_h": r1, "trace_residual_h2": r2,
           "trace_halving_ratio": r1 / r2 if r2 > 0 else None, "trace_anchor": _c(lhs), "trace_anchor_exact": _c(rhs)}
    thresholds = {"frac_power_oracle_error": 1e-8, "sqrt_anchor_error": 1e-8, "semigroup_residual": 1e-8,
                  "symdet_vs_classical_relative": 1e-8}
    passed = {k: bool(out[k] <= v) for k, v in thresholds.items()}
    passed["trace_halving_ratio"] = bool(out["trace_halving_ratio"] and 3.5 <= out["trace_halving_ratio"] <= 4.5)
    return out, {"thresholds": thresholds, "passed": passed, "dim": dim, "seed": seed}


def _cmd_abstract(spec, args):
    out, diag = abstract_check(spec.dim or 6, 42 if spec.seed is None else spec.seed)
    return out, diag, None


_DISPATCH = {"eigs": _cmd_eigs, "bdmap": _cmd_bdmap, "dets": _cmd_dets, "trace-check": _cmd_trace,
             "ssf": _cmd_ssf, "krein-check": _cmd_krein, "det-identity": _cmd_det_identity,
             "abstract-check": _cmd_abstract}


def run(command: str, spec: ProblemSpec, args: argparse.Namespace | None = None) -> tuple[dict, tuple | None]:
    """Execute a subcommand; returns the result envelope and an optional CSV table."""
    if command not in _DISPATCH:
        raise ValidationError(f"unknown command {command!r}")
    if args is None:
        args = argparse.Namespace(threads=1)
    check_tol(spec.tolerance)
    outputs, diag, table = _DISPATCH[command](spec, args)
    diag = dict(diag)
    diag["tolerance"] = spec.tolerance
    env = {"command": command, "schema_version": SCHEMA_VERSION, "version": __version__,
           "inputs": spec.to_dict(), "outputs": outputs, "diagnostics": diag}
    return _clean(env), table


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return _f(v)
    if isinstance(v, complex):
        return _c(v)
    return v


def dumps(env: dict) -> str:
    return json.dumps(env, sort_keys=True, indent=2, allow_nan=False) + "\n"


def to_csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([("%.17g" % x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bdmaps", description="Boundary data maps and trace formulas for 1D Schrodinger operators.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", help="problem JSON file (default: stdin)")
        p.add_argument("--tol", type=float)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--dim", type=int)
        p.add_argument("--z-re", type=float, action="append", dest="z_re")
        p.add_argument("--z-im", type=float, action="append", dest="z_im")
        p.add_argument("--lambda-min", type=float)
        p.add_argument("--lambda-max", type=float)
        p.add_argument("--degrees", action="store_true", help="angles in the input are in degrees")
        p.add_argument("--csv", action="store_true", help="emit tabular payloads as CSV")
    return ap


def _read_input(args) -> bytes:
    if args.input:
        try:
            with open(args.input, "rb") as fh:
                return fh.read()
        except OSError as e:
            raise ValidationError(f"cannot read {args.input}: {e.strerror}") from None
    if args.command == "abstract-check" and sys.stdin.isatty():
        return b""
    return sys.stdin.buffer.read()


def _apply_flags(spec: ProblemSpec, args) -> ProblemSpec:
    if args.tol is not None:
        if not 0 < args.tol <= 1e-4:
            raise ValidationError("--tol must lie in (0, 1e-4]")
        spec.tolerance = args.tol
    for k in ("seed", "n", "dim", "lambda_min", "lambda_max"):
        v = getattr(args, k)
        if v is not None:
            setattr(spec, k, v)
    if args.threads < 1:
        raise ValidationError("--threads must be positive")
    if args.z_re or args.z_im:
        re = args.z_re or []
        im = args.z_im or []
        if im and len(im) != len(re):
            raise ValidationError("--z-re and --z-im must be given the same number of times")
        spec.z = [complex(r, im[i] if im else 0.0) for i, r in enumerate(re)]
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _apply_flags(parse_problem(_read_input(args), degrees=args.degrees), args)
        env, table = run(args.command, spec, args)
    except BDMapError as e:
        err = e.to_dict()
        code = 3 if e.numerical else 2
        err["exit_code"] = code
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return code
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as e:
        sys.stderr.write(json.dumps({"error": "NumericalFailure", "message": str(e), "exit_code": 3}, sort_keys=True) + "\n")
        return 3
    if args.csv and table is not None:
        sys.stdout.write(to_csv(*table))
    else:
        sys.stdout.write(dumps(env))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
