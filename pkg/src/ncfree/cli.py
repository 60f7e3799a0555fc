"""Command-line pipeline: parse, linearize, convolve, invert, validate.

Subcommands
-----------
density   density of a selfadjoint expression on a grid (CSV + JSON report)
validate  density plus a random-matrix histogram and its KS distance
moments   exact moments from the non-crossing oracle

Exit codes: 0 success, 1 validation or oracle check failed, 2 config error,
3 convergence failure, 4 singular rational evaluation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Optional

import numpy as np

from . import ncexpr, rmt
from .cauchy import Atomic, Semicircular, spec_from_dict
from .convolve import evaluator_for_pencil
from .density import SpectralDensity, contour_scalar_moments, invert_stieltjes
from .errors import CapacityError, ContractError, DimensionError, NCFreeError, ParseError, SingularMatrixError
from .freeness_oracle import polynomial_moments, scalar_free_cumulants, scalar_mixed_moment
from .linearize import pencil_for
from .rmt import EnsembleSpec, assemble_and_spectrum, ks_distance

__all__ = ["JobConfig", "run_density", "run_validate", "run_moments", "build_parser", "main"]

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_SINGULAR = 4

KS_THRESHOLD = 0.05
ORACLE_RTOL = 1e-4
ORACLE_ORDER = 6
MAX_WORD = 24
DEFAULT_POINTS = 2001
GRID_MARGIN = 1.1
PROBE_N = 64


@dataclass
class JobConfig:
    """Everything needed to reproduce one run."""

    mode: str = "density"
    expr: str = ""
    vars: dict = field(default_factory=dict)
    grid: Optional[list] = None
    eps_z: float = 1e-3
    eps_pencil: float = 1e-7
    richardson: bool = False
    oracle_check: bool = False
    workers: int = 0
    rmt_n: int = 1000
    trials: int = 1
    seed: int = 0
    word: str = ""
    order: int = 0
    out: Optional[str] = None
    report: Optional[str] = None

    def __post_init__(self):
        if self.mode not in ("density", "validate", "moments"):
            raise ContractError(f"unknown mode {self.mode!r}")
        if self.grid is not None:
            if len(self.grid) != 3:
                raise ContractError("grid must be min,max,points")
            lo, hi, n = float(self.grid[0]), float(self.grid[1]), int(self.grid[2])
            if not lo < hi:
                raise ContractError("grid min must be below grid max")
            if n < 3:
                raise ContractError("grid needs at least 3 points")
            self.grid = [lo, hi, n]
        if not self.eps_z > 0 or not self.eps_pencil > 0:
            raise ContractError("eps values must be positive")
        if self.rmt_n < 1 or self.trials < 1:
            raise ContractError("rmt size and trial count must be positive")

    @property
    def num_vars(self):
        return len(self.vars)

    def specs(self):
        """Variable specs in order ``x1..xd``; exactly one per variable."""
        names = [f"x{i}" for i in range(1, len(self.vars) + 1)]
        if sorted(self.vars) != sorted(names):
            raise ContractError(f"variables must be named {', '.join(names)}; got {sorted(self.vars)}")
        return [spec_from_dict(self.vars[n]) for n in names]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = d.get("config", d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


def _load_vars(text):
    if os.path.exists(text):
        with open(text) as fh:
            return json.load(fh)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ContractError(f"--vars is neither a file nor JSON: {exc}") from None


def _parse_grid(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise ContractError("--grid expects a,b,n")
    return [float(parts[0]), float(parts[1]), int(parts[2])]


def _workers(cfg):
    return cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)


def _parse_expr(cfg):
    if not cfg.expr:
        raise ContractError("an expression is required (--expr)")
    return ncexpr.parse(cfg.expr, cfg.num_vars)


def _poly_bound(poly, specs):
    return sum(abs(c) * np.prod([specs[i - 1].support_radius for i in w]) for w, c in poly.terms)


def _default_grid(cfg, expr, specs):
    if cfg.grid is not None:
        return cfg.grid
    if not ncexpr.is_polynomial(expr):
        raise ContractError("rational expressions need an explicit --grid")
    bound = _poly_bound(ncexpr.to_polynomial(expr, cfg.num_vars), specs)
    r = GRID_MARGIN * max(bound, 1.0)
    return [-r, r, DEFAULT_POINTS]


def _exact(x):
    return Fraction(repr(float(x)))


def _kappas(specs, order, exact=True):
    """Free cumulants of each variable up to ``order`` keyed by 1-based label."""
    out = {}
    for i, s in enumerate(specs, start=1):
        if isinstance(s, Semicircular):
            v = _exact(s.variance) if exact else s.variance
            out[i] = [0, v] + [0] * max(order - 2, 0)
        elif isinstance(s, Atomic):
            cast = _exact if exact else float
            w = [cast(x) for x in s.weights]
            a = [cast(x) for x in s.atoms]
            m = [sum(wi * ai**k for wi, ai in zip(w, a)) for k in range(order + 1)]
            out[i] = scalar_free_cumulants(m)
        else:
            raise ContractError(f"no oracle for spec {s!r}")
    return out


def _real(x):
    x = complex(x)
    if abs(x.imag) > 1e-12 * max(1.0, abs(x.real)):
        raise ContractError("expression has non-real coefficients")
    return x.real


def _exact_terms(poly):
    return [(w, _exact(_real(c))) for w, c in poly.terms]


def _oracle_check(cfg, expr, specs, ev, grid):
    """Solver moments from a contour vs the oracle's ``phi(p^k)``."""
    if not ncexpr.is_polynomial(expr):
        return {"available": False, "reason": "no moment oracle for rational expressions"}
    poly = ncexpr.to_polynomial(expr, cfg.num_vars)
    exact = polynomial_moments(_exact_terms(poly), _kappas(specs, ORACLE_ORDER * poly.degree), ORACLE_ORDER)
    radius = GRID_MARGIN * max(_poly_bound(poly, specs), abs(grid[0]), abs(grid[1]), 1.0)
    solver = contour_scalar_moments(ev, ORACLE_ORDER, radius, points=256, eps_pencil=cfg.eps_pencil)
    rows = []
    ok = True
    for k, (m, s) in enumerate(zip(exact, solver)):
        scale = max(abs(float(m)), 1.0)
        err = abs(s - float(m)) / scale
        ok = ok and err < ORACLE_RTOL
        rows.append({"order": k, "oracle": str(m), "oracle_float": float(m), "solver": float(s), "rel_error": err})
    return {"available": True, "passed": ok, "rtol": ORACLE_RTOL, "moments": rows}


def _delta_density(grid, eps, center=0.0):
    ts = np.linspace(*grid[:2], int(grid[2]))
    rho = eps / np.pi / ((ts - center) ** 2 + eps**2)
    return SpectralDensity(ts, rho, eps)


def _probe_rational(expr, specs, cfg):
    """Evaluate a rational expression on one small matrix draw; raises if it is singular there."""
    draw = [rmt.sample(e, rmt.make_rng(cfg.seed, k)) for k, e in enumerate(_ensembles(specs, cfg, PROBE_N))]
    ncexpr.evaluate(expr, draw)


def _compute_density(cfg):
    expr = _parse_expr(cfg)
    if not ncexpr.is_selfadjoint(expr):
        raise ContractError(f"expression {cfg.expr!r} is not selfadjoint")
    specs = cfg.specs()
    if not ncexpr.is_polynomial(expr):
        _probe_rational(expr, specs, cfg)
    grid = _default_grid(cfg, expr, specs)
    if ncexpr.is_polynomial(expr):
        poly = ncexpr.to_polynomial(expr, cfg.num_vars)
        if poly.degree == 0:
            c = _real(dict(poly.terms).get((), 0))
            return expr, specs, grid, None, _delta_density(grid, cfg.eps_z, c)
    ev = evaluator_for_pencil(pencil_for(expr, cfg.num_vars), specs)
    ts = np.linspace(grid[0], grid[1], int(grid[2]))
    d = invert_stieltjes(ev, ts, cfg.eps_z, cfg.eps_pencil, workers=_workers(cfg), richardson=cfg.richardson)
    return expr, specs, grid, ev, d


def _density_code(d):
    if any(s == "singular" for s in d.status):
        return EXIT_SINGULAR
    if not d.converged:
        return EXIT_CONVERGENCE
    return EXIT_OK


def _stats(d):
    ok = np.array([s == "ok" for s in d.status])
    res = d.residuals[ok]
    return {
        "points": int(len(d.grid)),
        "failed_points": int((~ok).sum()),
        "total_iterations": int(np.sum(d.iterations)),
        "max_iterations": int(np.max(d.iterations)) if len(d.iterations) else 0,
        "max_residual": float(np.max(res)) if res.size else None,
        "warm_start_hits": int(d.warm_starts),
        "mass": d.mass,
    }


def run_density(cfg: JobConfig):
    """Compute the density; returns ``(report, density, exit_code)``."""
    t0 = time.perf_counter()
    expr, specs, grid, ev, d = _compute_density(cfg)
    code = _density_code(d)
    report = {"config": cfg.to_dict(), "mode": cfg.mode, "grid": grid, "solver": _stats(d)}
    if ev is None:
        report["note"] = "constant expression: point mass, density is its Cauchy broadening"
    if cfg.oracle_check:
        check = _oracle_check(cfg, expr, specs, ev, grid) if ev is not None else {"available": False}
        report["oracle_check"] = check
        if check.get("available") and not check["passed"] and code == EXIT_OK:
            code = EXIT_CHECK
    report["runtime_s"] = time.perf_counter() - t0
    report["exit_code"] = code
    return report, d, code


def _ensembles(specs, cfg, size=None):
    n = cfg.rmt_n if size is None else size
    out = []
    for s in specs:
        if isinstance(s, Semicircular):
            out.append(EnsembleSpec("gue", n, cfg.seed, scale=float(np.sqrt(s.variance))))
        else:
            out.append(EnsembleSpec("haar_diagonal", n, cfg.seed, tuple(zip(s.weights, s.atoms))))
    return out


def run_validate(cfg: JobConfig):
    """Density plus random-matrix comparison; returns ``(report, density, histogram, exit_code)``."""
    report, d, code = run_density(cfg)
    expr = _parse_expr(cfg)
    t0 = time.perf_counter()
    h = assemble_and_spectrum(expr, _ensembles(cfg.specs(), cfg), cfg.trials, cfg.seed, workers=_workers(cfg))
    ks = ks_distance(h, d) if h.samples.size else float("nan")
    edges = h.bin_edges
    model = np.diff(d.cdf(edges)) / np.diff(edges)
    report["rmt"] = {
        "generator": "Philox",
        "seed": cfg.seed,
        "N": cfg.rmt_n,
        "trials": cfg.trials,
        "singular_trials": h.singular_trials,
        "ks_distance": ks,
        "ks_threshold": KS_THRESHOLD,
        "bin_edges": edges.tolist(),
        "bin_residuals": (h.normalization - model).tolist(),
        "runtime_s": time.perf_counter() - t0,
    }
    if h.singular_trials == cfg.trials:
        code = EXIT_SINGULAR
    elif ks >= KS_THRESHOLD and code == EXIT_OK:
        code = EXIT_CHECK
    report["exit_code"] = code
    return report, d, h, code


def run_moments(cfg: JobConfig):
    """Exact oracle moments; returns ``(report, exit_code)``.

    With ``word`` the single moment ``phi(word)`` is reported; with
    ``order`` the moments ``phi(p^k)`` of ``expr`` for ``k <= order``.
    """
    specs = cfg.specs()
    report = {"config": cfg.to_dict(), "mode": "moments"}
    code = EXIT_OK
    if cfg.word:
        poly = ncexpr.to_polynomial(ncexpr.parse(cfg.word, cfg.num_vars), cfg.num_vars)
        if poly.degree > MAX_WORD:
            raise CapacityError(f"word length capped at {MAX_WORD}")
        kap = _kappas(specs, max(poly.degree, 1))
        val = sum(_exact(_real(c)) * scalar_mixed_moment(kap, w) for w, c in poly.terms)
        report["word"] = {"word": cfg.word, "exact": str(val), "value": float(val)}
    if cfg.order:
        expr = _parse_expr(cfg)
        poly = ncexpr.to_polynomial(expr, cfg.num_vars)
        if poly.degree * cfg.order > MAX_WORD:
            raise CapacityError(f"word length capped at {MAX_WORD}")
        exact = polynomial_moments(_exact_terms(poly), _kappas(specs, max(poly.degree * cfg.order, 1)), cfg.order)
        rows = [{"order": k, "exact": str(m), "value": float(m)} for k, m in enumerate(exact)]
        if cfg.oracle_check and ncexpr.is_selfadjoint(expr) and poly.degree > 0:
            ev = evaluator_for_pencil(pencil_for(expr, cfg.num_vars), specs)
            radius = GRID_MARGIN * max(_poly_bound(poly, specs), 1.0)
            solver = contour_scalar_moments(ev, cfg.order, radius, points=256, eps_pencil=cfg.eps_pencil)
            for row, s in zip(rows, solver):
                row["solver"] = float(s)
                row["rel_error"] = abs(s - row["value"]) / max(abs(row["value"]), 1.0)
                if row["rel_error"] >= ORACLE_RTOL:
                    code = EXIT_CHECK
        report["moments"] = rows
    if not cfg.word and not cfg.order:
        raise ContractError("moments mode needs --word or --order")
    report["exit_code"] = code
    return report, code


def write_density_csv(d, path):
    """CSV with header ``t,rho,status,iterations,residual``; failed points leave ``rho`` empty."""
    with open(path, "w") as fh:
        fh.write("t,rho,status,iterations,residual\n")
        for t, r, s, it, res in d.rows():
            rho = "" if s != "ok" or not np.isfinite(r) else f"{r:.17g}"
            resid = "" if not np.isfinite(res) else f"{res:.17g}"
            fh.write(f"{t:.17g},{rho},{s},{it},{resid}\n")


def build_parser():
    p = argparse.ArgumentParser(prog="ncfree", description="Distributions of polynomials and rational "
                                "functions in free random variables.")
    sub = p.add_subparsers(dest="mode", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config (or a previous report); flags override it")
        sp.add_argument("--expr", help="expression in x1..xd, e.g. 'x1*x2+x2*x1'")
        sp.add_argument("--vars", help="variable specs: JSON file or inline JSON")
        sp.add_argument("--eps", dest="eps_z", type=float, help="height above the real axis (default 1e-3)")
        sp.add_argument("--eps-pencil", type=float, help="filler of diag(z, i eps, ...) (default 1e-7)")
        sp.add_argument("--oracle-check", action="store_true", default=None,
                        help="compare solver moments with the exact oracle")
        sp.add_argument("--workers", type=int, help="threads (default: all cores)")
        sp.add_argument("--report", help="JSON report path (default: stdout)")

    for name in ("density", "validate"):
        sp = sub.add_parser(name, help=f"{name} mode")
        common(sp)
        sp.add_argument("--grid", type=_parse_grid, help="a,b,n")
        sp.add_argument("--out", help="density CSV path")
        sp.add_argument("--richardson", action="store_true", default=None,
                        help="extrapolate 2 rho(eps/2) - rho(eps)")
        if name == "validate":
            sp.add_argument("--rmt-n", type=int, help="matrix size (default 1000)")
            sp.add_argument("--trials", type=int, help="random trials (default 1)")
            sp.add_argument("--seed", type=int, help="Philox seed (default 0)")
    sp = sub.add_parser("moments", help="exact moments from the oracle")
    common(sp)
    sp.add_argument("--word", help="monomial or polynomial, e.g. 'x1*x2*x1*x2'")
    sp.add_argument("--order", type=int, help="report phi(p^k) for k <= order")
    return p


def config_from_args(args):
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
        base = dict(base.get("config", base))
    base["mode"] = args.mode
    for key, val in vars(args).items():
        if key in ("config", "mode") or val is None:
            continue
        base[key] = _load_vars(val) if key == "vars" else val
    return JobConfig.from_dict(base)


def _emit(report, path):
    text = json.dumps(report, indent=2, default=str)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _glue_negative(argv):
    # "--grid -2,2,101" would otherwise be read as an unknown option
    out = []
    for a in argv:
        if out and out[-1] == "--grid" and a.startswith("-"):
            out[-1] = f"--grid={a}"
        else:
            out.append(a)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_negative(argv))
    try:
        cfg = config_from_args(args)
        if cfg.mode == "moments":
            report, code = run_moments(cfg)
        elif cfg.mode == "validate":
            report, d, _, code = run_validate(cfg)
        else:
            report, d, code = run_density(cfg)
        if cfg.mode != "moments" and cfg.out:
            write_density_csv(d, cfg.out)
    except (ContractError, ParseError, DimensionError, CapacityError, ValueError, OSError, KeyError) as exc:
        print(f"ncfree: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularMatrixError as exc:
        print(f"ncfree: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except NCFreeError as exc:
        print(f"ncfree: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    _emit(report, cfg.report)
    return code


if __name__ == "__main__":
    sys.exit(main())
