"""Command-line interface: ``rickwarp construct|verify|kappa|propcheck|plan``.

Exit codes: 0 pass, 1 rejected input or failed check, 2 infeasible ``rho/N``,
3 search did not converge, 64 malformed file or usage.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .construction import ConstructionParams, compute_kappa, construct, find_parameters
from .curvature import TAU_MARGIN, verify_metric
from .errors import (ConstructionError, InfeasibleError, InputError, NonConvergenceError, SmoothingError,
                     StepSizeError)
from .io import MetricFileError, dumps, read_json, read_metric, write_json, write_metric
from .planner import plan_connected_sum
from .propcheck import run_propcheck

EXIT_OK, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_NONCONVERGENCE, EXIT_USAGE = 0, 1, 2, 3, 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _err(msg):
    print(f"rickwarp: {msg}", file=sys.stderr)


def _construction_params(args) -> ConstructionParams:
    cfg = {}
    if args.config:
        cfg.update(read_json(args.config))
    if args.plan:
        plan = read_json(args.plan)
        try:
            cfg.update(p=plan["p"], q=plan["q"], k=plan["k_min"], ratio=plan["ratio"])
        except KeyError as exc:
            raise MetricFileError(f"{args.plan}: plan is missing {exc}") from None
        if plan.get("rho") is not None:
            cfg["rho_over_n"] = plan["rho"]
    for key in ("p", "q", "k", "ratio", "step"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    rho = getattr(args, "rho_over_n", None)
    if rho is not None:
        cfg["rho_over_n"] = None if rho == "auto" else float(rho)
    if getattr(args, "no_smooth", False):
        cfg["smooth"] = False
    missing = [k for k in ("p", "q", "k") if k not in cfg]
    if missing:
        raise InputError(f"missing {', '.join('--' + m for m in missing)}")
    return ConstructionParams.from_dict(cfg)


def _rho_arg(text):
    if text == "auto":
        return text
    try:
        float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number or 'auto'") from None
    return text


def cmd_construct(args) -> int:
    params = _construction_params(args)
    result = construct(params)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    csv = out.with_suffix(".csv")
    write_metric(csv, result.metric)
    report = result.to_dict()
    report["verdict"] = result.report.verdict
    report["files"] = {"metric": str(csv), "sidecar": str(csv.with_suffix(".json"))}
    report_path = out.with_name(out.name + ".report.json") if out.suffix != ".csv" else out.with_suffix(".report.json")
    write_json(report_path, report)
    print(dumps({"verdict": report["verdict"], "kappa": result.kappa, "rho_over_n": result.rho_over_n,
                 "margin_minima": report["report"]["margin_minima"], "boundary": result.boundary,
                 "report": str(report_path), **report["files"]}))
    return EXIT_OK if report["verdict"] == "pass" else EXIT_FAIL


def cmd_verify(args) -> int:
    start = time.perf_counter()
    metric = read_metric(args.metric)
    report = verify_metric(metric, args.k, tau_margin=args.tau, midpoints=not args.no_midpoints)
    doc = report.to_dict()
    doc["kappa"] = metric.provenance.get("kappa")
    doc["params"] = metric.provenance.get("params")
    doc["timing"] = {"verify": time.perf_counter() - start}
    doc["metric"] = str(args.metric)
    if args.report:
        write_json(args.report, doc)
    print(dumps(doc))
    return EXIT_OK if doc["verdict"] == "pass" else EXIT_FAIL


def cmd_kappa(args) -> int:
    params = _construction_params(args)
    core = find_parameters(params)
    kappa = compute_kappa(params, core)
    print(dumps({"p": params.p, "q": params.q, "k": params.k, "ratio": params.ratio,
                 "collar_ratio": params.collar_ratio, "kappa": kappa, "a": core.a, "b": core.b,
                 "C": core.C, "t2": core.t2, "target_slope": core.target_slope, "step": params.step,
                 "version": __version__}))
    return EXIT_OK


def cmd_propcheck(args) -> int:
    fixtures = []
    if args.fixture:
        doc = read_json(args.fixture)
        fixtures = doc if isinstance(doc, list) else doc.get("cases", [])
        if not isinstance(fixtures, list):
            raise MetricFileError(f"{args.fixture}: expected a list of cases")
    dims = [int(x) for x in args.dims.split(",") if x.strip()]
    summary = run_propcheck(args.trials, args.seed, dims, args.samples, fixtures)
    summary["version"] = __version__
    print(dumps(summary))
    return EXIT_OK if not summary["violations"] else EXIT_FAIL


def cmd_plan(args) -> int:
    kappa = None
    plan = plan_connected_sum(args.n, args.m, args.r)
    if args.with_kappa:
        kappa = compute_kappa(plan.construction_params())
        plan = plan_connected_sum(args.n, args.m, args.r, kappa=kappa)
    doc = plan.to_dict()
    if args.out:
        write_json(args.out, doc)
    print(dumps(doc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rickwarp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def pqk(sp, required=True):
        sp.add_argument("--p", type=int, help="dimension of the sphere that is capped off")
        sp.add_argument("--q", type=int, help="dimension of the sphere kept by the surgery")
        sp.add_argument("--k", type=int, help="curvature index of Ric_k")
        sp.add_argument("--ratio", type=float, help="tube radius ratio R/N (default 1.0)")
        sp.add_argument("--step", type=float, help="ODE step size (default 1e-4)")
        sp.add_argument("--config", help="JSON file with construction parameters")
        sp.add_argument("--plan", help="plan JSON written by 'rickwarp plan'")

    sp = sub.add_parser("construct", help="build and verify a surgery metric")
    pqk(sp)
    sp.add_argument("--rho-over-n", type=_rho_arg, help="rho/N, or 'auto' for kappa/2 (default auto)")
    sp.add_argument("--out", default="metric", help="output prefix (default: metric)")
    sp.add_argument("--no-smooth", action="store_true", help="skip junction smoothing")
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("verify", help="check Ric_k > 0 on a metric file")
    sp.add_argument("metric", help="metric CSV with its JSON sidecar")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--tau", type=float, default=TAU_MARGIN, help="margin threshold (default 1e-8)")
    sp.add_argument("--no-midpoints", action="store_true", help="skip Hermite midpoints")
    sp.add_argument("--report", help="write the report JSON here")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("kappa", help="print kappa and the chosen parameters")
    pqk(sp)
    sp.set_defaults(func=cmd_kappa)

    sp = sub.add_parser("propcheck", help="randomized soundness check of the profile criterion")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dims", default="2,3,4", help="comma-separated block dimensions")
    sp.add_argument("--samples", type=int, default=10_000, help="base vectors per trial")
    sp.add_argument("--fixture", help="JSON list of extra cases {dims, lambda, k}")
    sp.set_defaults(func=cmd_propcheck)

    sp = sub.add_parser("plan", help="surgery plan for a connected sum of S^n x S^m")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--with-kappa", action="store_true", help="also compute kappa and rho")
    sp.add_argument("--out", help="write the plan JSON here")
    sp.set_defaults(func=cmd_plan)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MetricFileError as exc:
        _err(exc)
        return EXIT_USAGE
    except InfeasibleError as exc:
        _err(f"infeasible: {exc} (kappa = {exc.kappa!r}, rho/N = {exc.rho_over_n!r})")
        return EXIT_INFEASIBLE
    except NonConvergenceError as exc:
        _err(f"search did not converge ({exc.binding}): {exc}")
        return EXIT_NONCONVERGENCE
    except InputError as exc:
        _err(exc)
        return EXIT_FAIL
    except (ConstructionError, SmoothingError, StepSizeError) as exc:
        _err(exc)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
