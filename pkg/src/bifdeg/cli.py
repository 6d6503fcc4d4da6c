"""Command-line front end.

    bifdeg degree FILE       symbol checks, quotient, d(σ) and the index degree
    bifdeg verdict FILE      the above plus the global divisibility verdict
    bifdeg local FILE        local degree at λ₀ of a [finite_family] and the local verdict
    bifdeg oracle parity FILE | winding FILE | jgroup Q | mtable A..B

Exit codes: 0 success (any verdict), 2 input error, 3 numerical failure,
4 internal inconsistency.  ``--output json`` prints one JSON document with
sorted keys; it contains every field of the text report.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .degree import IndexParityError, IntegralityError, fedosov_degree, index_degree, local_degree
from .exprlang import EvaluationError, ExprSyntaxError
from .familyfile import FamilyFileError, parse_vector, read_family_file
from .findim import (
    NonIsolatedError,
    NotSingularError,
    RankAmbiguityError,
    bifurcation_search,
    det_winding,
    ls_reduce,
    parity,
)
from .forms import SingularMatrixError
from .numtheory import UnsupportedDimensionError, j_group, m_function, n_of_q, verdict_global, verdict_local
from .quadrature import NonFiniteIntegrandError, QuadratureSpec, default_threads
from .symbol import check_ellipticity, check_infinity, check_reality, quotient_symbol

__all__ = ["main", "build_parser", "ExitCode"]

LOG = logging.getLogger("bifdeg")


class ExitCode:
    OK = 0
    INPUT = 2
    NUMERICAL = 3
    INCONSISTENT = 4


class CliError(Exception):
    def __init__(self, message: str, code: int, stage: str):
        super().__init__(message)
        self.code = code
        self.stage = stage


# --------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--quad-order", type=int, default=None, help="Gauss nodes per polar angle (even, >= 4)")
    p.add_argument("--mc-samples", type=int, default=None, help="use Monte Carlo with this many samples")
    p.add_argument("--seed", type=int, default=0, help="seed for sampling checks, Monte Carlo and search")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: BIFDEG_THREADS or 1)")
    p.add_argument("--output", choices=("text", "json"), default="text")
    p.add_argument("--skip-checks", action="store_true", help="skip ellipticity/reality/infinity checks")
    p.add_argument("--refine-max", type=int, default=None, help="maximum quadrature refinements")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bifdeg", description="Degree invariants and bifurcation verdicts.")
    parser.add_argument("--version", action="version", version=f"bifdeg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (("degree", "symbol degree d(sigma) and index degree"),
                       ("verdict", "global bifurcation verdict from d(sigma)")):
        p = sub.add_parser(name, help=text)
        p.add_argument("file")
        _common(p)

    p = sub.add_parser("local", help="local degree at an isolated singular parameter")
    p.add_argument("file")
    p.add_argument("--lambda0", default=None, help="comma separated singular parameter (default from file)")
    p.add_argument("--radius", type=float, default=None, help="radius of the isolating sphere")
    p.add_argument("--d-sigma", type=int, default=None, help="known symbol degree, enables the second-point test")
    p.add_argument("--confirm", action="store_true", help="search for nontrivial solutions near lambda0")
    p.add_argument("--radii", default="0.1,0.05,0.02,0.01", help="annulus radii for --confirm")
    p.add_argument("--budget", type=int, default=8, help="Newton starts per annulus")
    p.add_argument("--tol", type=float, default=1e-10, help="witness residual bound")
    _common(p)

    p = sub.add_parser("oracle", help="number-theory and finite-dimensional oracles")
    osub = p.add_subparsers(dest="oracle", required=True)
    for name, meta in (("parity", "file"), ("winding", "file"), ("jgroup", "q"), ("mtable", "range")):
        op = osub.add_parser(name)
        op.add_argument(meta)
        op.add_argument("--output", choices=("text", "json"), default="text")
        op.add_argument("--samples", type=int, default=256)
        op.add_argument("-v", "--verbose", action="store_true")
    return parser


def _spec(args, ff) -> QuadratureSpec:
    threads = args.threads if args.threads is not None else default_threads()
    spec = ff.quadrature_spec(QuadratureSpec(threads=threads, seed=args.seed))
    if args.quad_order is not None:
        spec = replace(spec, scheme="gauss", order=args.quad_order)
    if args.mc_samples is not None:
        spec = replace(spec, scheme="montecarlo", samples=args.mc_samples)
    if args.seed:
        spec = replace(spec, seed=args.seed)
    return spec


# --------------------------------------------------------------------------
# commands


def _run_checks(fam, args, report) -> bool:
    """Run the symbol checks; returns whether the reality check passed."""
    if args.skip_checks:
        report["checks"] = {"skipped": True}
        return False
    reps = [check_ellipticity(fam, seed=args.seed), check_reality(fam, seed=args.seed),
            check_infinity(fam, seed=args.seed)]
    report["checks"] = {r.name: r.to_dict() for r in reps}
    for r in reps:
        if not r.passed:
            raise CliError(f"{r.name} check failed: {r.value:.3g} vs threshold {r.threshold:.3g}",
                           ExitCode.INPUT, "checks")
    return fam.mode == "principal"


def _symbol_degree(args, report):
    ff = read_family_file(args.file)
    fam = ff.symbol_family()
    report["inputs"]["problem"] = {"q": fam.q, "n": fam.n, "m": fam.m, "k": fam.k, "mode": fam.mode,
                                   "support_radius": fam.support_radius, "lambda_radius": fam.lambda_radius}
    reality_ok = _run_checks(fam, args, report)
    sigma = quotient_symbol(fam, check=False)
    if fam.q % 2:
        raise CliError(f"odd q={fam.q}: the symbol degree is defined for even q only", ExitCode.INPUT, "degree")
    spec = _spec(args, ff)
    report["quadrature"] = spec.describe()
    try:
        res = fedosov_degree(sigma, spec, refine_max=args.refine_max)
    except IntegralityError as exc:
        report["degree"] = exc.result.to_dict()
        raise CliError(str(exc), ExitCode.NUMERICAL, "degree") from None
    report["degree"] = res.to_dict()
    d = res.rounded
    if fam.q % 8 in (0, 4):
        try:
            report["index_degree"] = index_degree(d, fam.q)
        except IndexParityError as exc:
            report["index_degree"] = None
            if reality_ok:
                raise CliError(str(exc), ExitCode.INCONSISTENT, "index_degree") from None
            report["notes"].append(f"index degree: {exc}; reality not established, so this is not an inconsistency")
    else:
        report["index_degree"] = None
    return fam, d


def cmd_degree(args, report):
    _symbol_degree(args, report)


def cmd_verdict(args, report):
    fam, d = _symbol_degree(args, report)
    try:
        report["verdict"] = verdict_global(d, fam.q).to_dict()
    except UnsupportedDimensionError:
        report["verdict"] = {"kind": "TheoremNotApplicable", "residue": None, "threshold": None,
                             "global_residue": None}
        report["notes"].append(f"the divisibility criterion needs q = 0 or 4 mod 8 (q={fam.q})")


def cmd_local(args, report):
    ff = read_family_file(args.file)
    fam = ff.finite_family()
    lam0 = parse_vector(args.lambda0) if args.lambda0 is not None else ff.lambda0()
    if lam0 is None:
        lam0 = np.zeros(fam.q)
    if lam0.size != fam.q:
        raise CliError(f"lambda0 needs {fam.q} components", ExitCode.INPUT, "inputs")
    radius = args.radius if args.radius is not None else ff.disk_radius()
    report["inputs"].update({"q": fam.q, "N": fam.N, "lambda0": [float(v) for v in lam0], "radius": radius,
                             "d_sigma": args.d_sigma})
    if args.confirm:
        radii = [float(v) for v in parse_vector(args.radii)]
        search = bifurcation_search(fam, lam0, radii, budget=args.budget, seed=args.seed, tol=args.tol)
        report["search"] = search.to_dict()
    red = ls_reduce(fam, lam0, radius, seed=args.seed)
    report["reduction"] = red.to_dict()
    if fam.q % 4:
        report["verdict"] = {"kind": "TheoremNotApplicable", "residue": None, "threshold": None,
                             "global_residue": None}
        report["notes"].append(f"the local degree needs q = 0 mod 4 (q={fam.q})")
        return
    spec = _spec(args, ff)
    report["quadrature"] = spec.describe()
    try:
        res = local_degree(red.R_field(), fam.q // 4, spec, refine_max=args.refine_max)
    except IntegralityError as exc:
        report["local_degree"] = exc.result.to_dict()
        raise CliError(str(exc), ExitCode.NUMERICAL, "local") from None
    report["local_degree"] = res.to_dict()
    try:
        report["verdict"] = verdict_local(res.rounded, args.d_sigma, fam.q).to_dict()
    except UnsupportedDimensionError as exc:
        raise CliError(str(exc), ExitCode.INPUT, "verdict") from None


def cmd_oracle(args, report):
    kind = args.oracle
    if kind == "jgroup":
        try:
            q = int(args.q)
        except ValueError:
            raise CliError(f"not an integer: {args.q!r}", ExitCode.INPUT, "inputs") from None
        if q < 1:
            raise CliError("q must be positive", ExitCode.INPUT, "inputs")
        g = j_group(q)
        out = {"q": q, "group": str(g), "structure": g.structure.value, "order": g.order}
        out["n_of_q"] = n_of_q(q) if q % 4 == 0 else None
        report["result"] = out
    elif kind == "mtable":
        m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.|-|:)\s*(\d+)\s*", args.range)
        if not m or int(m.group(1)) < 1 or int(m.group(1)) > int(m.group(2)):
            raise CliError(f"expected a range like 1..6, got {args.range!r}", ExitCode.INPUT, "inputs")
        lo, hi = int(m.group(1)), int(m.group(2))
        report["result"] = {"s": list(range(lo, hi + 1)), "m": [m_function(s) for s in range(lo, hi + 1)]}
    elif kind == "parity":
        ff = read_family_file(args.file)
        report["result"] = parity(ff.path_matrix(), samples=args.samples).to_dict()
    elif kind == "winding":
        ff = read_family_file(args.file)
        report["result"] = {"winding": det_winding(ff.loop_matrix(), samples=args.samples)}


COMMANDS = {"degree": cmd_degree, "verdict": cmd_verdict, "local": cmd_local, "oracle": cmd_oracle}


# --------------------------------------------------------------------------
# output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def _text(report: dict) -> str:
    lines = []

    def walk(obj, indent):
        pad = "  " * indent
        for key in sorted(obj):
            val = obj[key]
            if isinstance(val, dict):
                lines.append(f"{pad}{key}:")
                walk(val, indent + 1)
            elif isinstance(val, list) and val and isinstance(val[0], dict):
                lines.append(f"{pad}{key}:")
                for i, item in enumerate(val):
                    lines.append(f"{pad}  - [{i}]")
                    walk(item, indent + 2)
            else:
                lines.append(f"{pad}{key}: {val}")

    walk(report, 0)
    return "\n".join(lines)


def _summary(report: dict) -> str | None:
    if report.get("status") != "ok":
        err = report.get("error", {})
        return f"error [{err.get('stage')}]: {err.get('message')}"
    res = report.get("result")
    cmd = report.get("command")
    if cmd == "oracle jgroup":
        tail = f", n({res['q']})={res['n_of_q']}" if res["n_of_q"] is not None else ""
        return f"{res['group']}{tail}"
    if cmd == "oracle mtable":
        return ", ".join(str(v) for v in res["m"])
    if cmd == "oracle parity":
        return f"parity {res['parity']:+d} ({res['crossings']} crossings)"
    if cmd == "oracle winding":
        return f"winding {res['winding']}"
    parts = []
    if "degree" in report:
        parts.append(f"d(sigma) = {report['degree']['rounded']}")
    if "local_degree" in report:
        parts.append(f"d(lambda0) = {report['local_degree']['rounded']}")
    if "verdict" in report:
        parts.append(f"verdict: {report['verdict']['kind']}")
    if "search" in report:
        parts.append(f"witnesses: {len(report['search']['witnesses'])}")
    return ", ".join(parts) if parts else None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ExitCode.INPUT if exc.code else ExitCode.OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    report = {"command": args.command if args.command != "oracle" else f"oracle {args.oracle}",
              "inputs": {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "oracle", "verbose", "output")},
              "notes": [], "seed": getattr(args, "seed", None)}
    code = ExitCode.OK
    start = time.perf_counter()
    try:
        COMMANDS[args.command](args, report)
        report["status"] = "ok"
    except CliError as exc:
        code = exc.code
        report["status"] = "error"
        report["error"] = {"stage": exc.stage, "message": str(exc)}
    except (FamilyFileError, ExprSyntaxError) as exc:
        code = ExitCode.INPUT
        report["status"] = "error"
        report["error"] = {"stage": "parse", "message": str(exc)}
    except (RankAmbiguityError, SingularMatrixError, NonFiniteIntegrandError, EvaluationError,
            ArithmeticError, np.linalg.LinAlgError) as exc:
        code = ExitCode.NUMERICAL
        report["status"] = "error"
        report["error"] = {"stage": "numerics", "message": f"{type(exc).__name__}: {exc}"}
    except (NotSingularError, NonIsolatedError, UnsupportedDimensionError, ValueError) as exc:
        code = ExitCode.INPUT
        report["status"] = "error"
        report["error"] = {"stage": "inputs", "message": f"{type(exc).__name__}: {exc}"}
    report["exit_code"] = code
    report["wall_clock"] = round(time.perf_counter() - start, 3)
    report = _jsonable(report)
    if args.output == "json":
        sys.stdout.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    else:
        summary = _summary(report)
        if summary:
            print(summary)
        print(_text(report))
    if code:
        print(f"bifdeg: {report['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
