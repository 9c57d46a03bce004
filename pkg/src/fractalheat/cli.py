"""Command-line front end.

Subcommands: dim, measure, q2, shc, law, verify, renewal eval, sample,
mc2d.  Exit codes: 0 success, 1 validation error, 2 convergence failure
(partial results are still emitted on stderr as JSON where available).

t grids are given as "start:stop:points" and are log-spaced: every law in
scope is a log-scale phenomenon.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .asymptotics import (
    Tolerances,
    classify_regime,
    critical_alpha,
    critical_law,
    subcritical_constant,
    supercritical_law,
    verify_law,
)
from .brownian_heat import FractalCurve1D, IntervalCurve, brownian_law
from .errors import ConvergenceError, FractalHeatError, ValidationError
from .geometry import (
    classify_log_ratios,
    load_domain,
    minkowski_dimension,
    total_measure,
    validate_domain,
)
from .mc2d import PathConfig, estimate_q2_2d, estimate_shc_2d
from .renewal import RenewalProblem, limit_arithmetic, limit_nonarithmetic, solve_series
from .subordinated_heat import (
    quadrature_curve,
    subordinated_heat_content,
    subordinated_heat_content_mc,
)
from .subordinator import StableParams, sample as stable_sample


def parse_t_grid(spec: str):
    """"start:stop:points" -> log-spaced grid; a single number -> [t]."""
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ValidationError(f"bad t grid {spec!r}; expected start:stop:points")
    start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
    if start <= 0 or stop <= 0 or n < 1:
        raise ValidationError("t grid must be positive with points >= 1")
    if n == 1:
        return [start]
    return list(np.exp(np.linspace(math.log(start), math.log(stop), n)))


def _out(args):
    if args.out and args.out != "-":
        return open(args.out, "w", newline="")
    return sys.stdout


def _emit(args, text):
    fh = _out(args)
    fh.write(text)
    if not text.endswith("\n"):
        fh.write("\n")
    if fh is not sys.stdout:
        fh.close()


def _write_csv_rows(args, header, rows):
    fh = _out(args)
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(repr(float(v)) for v in row) + "\n")
    if fh is not sys.stdout:
        fh.close()


def cmd_dim(args):
    dom = load_domain(args.domain)
    validate_domain(dom).raise_for_failure()
    res = minkowski_dimension(dom)
    cls = classify_log_ratios(dom)
    out = {"b": res.b, "residual": res.residual, "class": cls.tag}
    if cls.arithmetic:
        out["span"] = cls.span
        out["multipliers"] = list(cls.multipliers)
    out["critical_alpha"] = dom.dim - res.b
    _emit(args, json.dumps(out))
    return 0


def cmd_measure(args):
    dom = load_domain(args.domain)
    validate_domain(dom).raise_for_failure()
    m = total_measure(dom)
    _emit(args, json.dumps({"measure": float(m), "exact": repr(m)}))
    return 0


def cmd_q2(args):
    dom = load_domain(args.domain)
    validate_domain(dom).raise_for_failure()
    if dom.dim != 1:
        raise ValidationError("q2 curves are exact only for d=1; use mc2d for d=2")
    curve = FractalCurve1D(dom)
    ts = parse_t_grid(args.t)
    q, e = curve.value_vec(np.asarray(ts), rel_tol=0.0, abs_tol=args.tol)
    _write_csv_rows(args, ["t", "Q", "err"], zip(ts, q, e))
    return 0


def cmd_shc(args):
    dom = load_domain(args.domain)
    validate_domain(dom).raise_for_failure()
    ts = parse_t_grid(args.t)
    if args.mc:
        rows = []
        for t in ts:
            est, se = subordinated_heat_content_mc(
                dom, args.alpha, t, args.n, args.seed
            )
            rows.append((t, est, se, args.n, args.seed))
        _write_csv_rows(args, ["t", "estimate", "stderr", "n", "seed"], rows)
        return 0
    curve = quadrature_curve(dom, args.alpha, tol=args.tol)
    rows = []
    for t in ts:
        v, e = curve.evaluate(t)
        rows.append((t, v, e))
    _write_csv_rows(args, ["t", "Qtilde", "err"], rows)
    return 0


def cmd_law(args):
    dom = load_domain(args.domain)
    validate_domain(dom).raise_for_failure()
    regime = classify_regime(dom, args.alpha, args.regime)
    out = {"regime": regime}
    if regime == "supercritical":
        law = supercritical_law(dom, args.alpha, regime_mode=args.regime)
        out.update(
            {
                "exponent": law.exponent,
                "arithmetic": law.arithmetic,
                "meta": law.meta,
            }
        )
        if law.arithmetic:
            zs = np.linspace(0.0, law.period, args.grid_points, endpoint=False)
            vals, _ = law.profile.eval_vec(zs)
            out["period"] = law.period
            out["profile_z"] = zs.tolist()
            out["profile_f"] = vals.tolist()
        else:
            out["C1"] = law.constant
    elif regime == "critical":
        law = critical_law(dom)
        out.update({"alpha": critical_alpha(dom), "arithmetic": law.arithmetic})
        if law.arithmetic:
            out["A_prime"] = law.band[1]
            out["B_prime"] = law.band[0]
        else:
            out["limit_constant"] = law.constant
    else:
        k, ke = subcritical_constant(dom, args.alpha)
        out.update({"K": k, "K_bound": ke})
    _emit(args, json.dumps(out))
    return 0


def cmd_verify(args):
    dom = load_domain(args.domain)
    validate_domain(dom).raise_for_failure()
    ts = parse_t_grid(args.t)
    report = verify_law(dom, args.alpha, ts, regime=args.regime)
    if args.format == "csv":
        fh = _out(args)
        report.to_csv(fh)
        if fh is not sys.stdout:
            fh.close()
    else:
        _emit(args, report.to_json())
    return 0 if report.passed else 2


_FIXTURES = {
    "geom2": dict(
        weights=(1.0,),
        shift_bases=("1/2",),
        phi=lambda z: np.exp(-np.abs(z)),
        decay=(1.0, 1.0),
    ),
    "gauss34": dict(
        weights=(0.5, 0.5),
        shift_bases=("1/3", "1/4"),
        phi=lambda z: np.exp(-np.asarray(z) ** 2),
        decay=(math.exp(0.25), 1.0),
    ),
}


def cmd_renewal(args):
    from fractions import Fraction

    spec = _FIXTURES[args.fixture]
    problem = RenewalProblem(
        weights=spec["weights"],
        shift_bases=tuple(Fraction(q) for q in spec["shift_bases"]),
        phi=spec["phi"],
        decay=spec["decay"],
    )
    val, bound = solve_series(problem, args.z, tol=args.tol)
    out = {
        "fixture": args.fixture,
        "z": args.z,
        "series": val,
        "series_bound": bound,
        "class": problem.classification.tag,
    }
    if problem.classification.arithmetic:
        out["limit"] = limit_arithmetic(problem, args.z)
    else:
        out["limit"] = limit_nonarithmetic(problem)
    _emit(args, json.dumps(out))
    return 0


def cmd_sample(args):
    vals = stable_sample(StableParams(args.alpha), args.seed, args.n)
    fh = _out(args)
    for v in vals:
        fh.write(repr(float(v)) + "\n")
    if fh is not sys.stdout:
        fh.close()
    return 0


def cmd_mc2d(args):
    dom = load_domain(args.domain)
    ts = parse_t_grid(args.t)
    config = PathConfig(
        depth=args.depth, dt=args.dt, seed=args.seed, n_paths=args.n,
        bridge_correction=not args.no_bridge,
    )
    if args.alpha is not None:
        curve, info = estimate_shc_2d(dom, args.alpha, config, ts)
    else:
        curve, info = estimate_q2_2d(dom, config, ts)
    fh = _out(args)
    fh.write("# " + json.dumps(info) + "\n")
    fh.write("t,Q,err\n")
    for t, q, e in zip(curve.t, curve.q, curve.err):
        fh.write(f"{t!r},{q!r},{e!r}\n")
    if fh is not sys.stdout:
        fh.close()
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="fractalheat",
        description="Spectral heat content of subordinate killed Brownian motion "
        "on self-similar fractal domains",
    )
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=1, help="worker cap (results unaffected)")
    sub = p.add_subparsers(dest="cmd", required=True)

    def add_common(sp, domain=True, tol=1e-10):
        if domain:
            sp.add_argument("domain", help="domain JSON path or bundled name")
        sp.add_argument("--out", default="-", help="output path (default stdout)")
        sp.add_argument("--tol", type=float, default=tol)
        sp.add_argument("--format", choices=("csv", "json"), default="json")

    sp = sub.add_parser("dim", help="Minkowski dimension and log-ratio class")
    add_common(sp)
    sp.set_defaults(fn=cmd_dim)

    sp = sub.add_parser("measure", help="total measure |G|")
    add_common(sp)
    sp.set_defaults(fn=cmd_measure)

    sp = sub.add_parser("q2", help="Brownian heat content curve (CSV)")
    add_common(sp)
    sp.add_argument("--t", required=True, help="t or start:stop:points (log-spaced)")
    sp.set_defaults(fn=cmd_q2)

    sp = sub.add_parser("shc", help="subordinated heat content (quadrature or --mc)")
    add_common(sp, tol=1e-8)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--t", required=True)
    sp.add_argument("--mc", action="store_true")
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=1)
    sp.set_defaults(fn=cmd_shc)

    sp = sub.add_parser("law", help="asymptotic law constants / evaluators")
    add_common(sp)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--regime", default="auto",
                    choices=("auto", "supercritical", "critical", "subcritical"))
    sp.add_argument("--grid-points", type=int, default=64)
    sp.set_defaults(fn=cmd_law)

    sp = sub.add_parser("verify", help="verification report for a regime law")
    add_common(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--t", required=True)
    sp.add_argument("--regime", default="auto",
                    choices=("auto", "supercritical", "critical", "subcritical"))
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("renewal", help="renewal solver fixtures")
    rsub = sp.add_subparsers(dest="rcmd", required=True)
    spe = rsub.add_parser("eval")
    spe.add_argument("fixture", choices=sorted(_FIXTURES))
    spe.add_argument("--z", type=float, default=20.0)
    spe.add_argument("--tol", type=float, default=1e-10)
    spe.add_argument("--out", default="-")
    spe.set_defaults(fn=cmd_renewal)

    sp = sub.add_parser("sample", help="stable subordinator samples, one per line")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", default="-")
    sp.set_defaults(fn=cmd_sample)

    sp = sub.add_parser("mc2d", help="2D Monte Carlo curves (experimental)")
    add_common(sp)
    sp.add_argument("--alpha", type=float, default=None,
                    help="if set, estimate the subordinated content")
    sp.add_argument("--t", required=True)
    sp.add_argument("--depth", type=int, default=4)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--no-bridge", action="store_true")
    sp.set_defaults(fn=cmd_mc2d)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 1
    except ConvergenceError as e:
        payload = {"error": type(e).__name__, "message": str(e)}
        if e.value is not None:
            payload["value"] = e.value
            payload["bound"] = e.bound
        sys.stderr.write(json.dumps(payload) + "\n")
        return 2
    except FractalHeatError as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
