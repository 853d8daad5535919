"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 a checked property failed.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .boxdim import PointCloud, minkowski_dim
from .dde import (
    DelaySystem,
    integrate,
    rescale_time,
    restricted_norm_estimate,
    variational_solve,
)
from .growth import (
    CompactnessLadder,
    SearchFailure,
    ladder_from_delay,
    minkowski_bound,
    rho_infinity,
    search_mp,
)
from .pipeline import (
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VIOLATION,
    SpecError,
    _system_for_ladder,
    bound_table,
    dumps,
    load_schema,
    parse_spec,
    run_pipeline,
    validate,
    write_artifacts,
)

MODULE_OF = {
    "ladder": "growth", "bound": "growth", "simulate": "dde", "rescale": "dde", "restricted-norm": "dde",
    "variational": "dde", "boxdim": "boxdim", "verify": "verify", "run": "pipeline", "schema": "cli",
}


class Usage(Exception):
    pass


def _read(path: str, schema: str | None = None) -> dict:
    p = Path(path)
    if not p.exists():
        raise SpecError(f"file not found: {p}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{p}: invalid JSON ({exc})") from None
    if schema:
        validate(obj, schema)
    return obj


def _vector(text: str, d: int) -> np.ndarray:
    vals = [float(x) for x in text.split(",")]
    if len(vals) == 1:
        vals = vals * d
    if len(vals) != d:
        raise Usage(f"expected {d} comma-separated values, got {len(vals)}")
    return np.array(vals)


def _emit(args, name: str, text: str) -> None:
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
        print(f"wrote {out / name}")
    else:
        sys.stdout.write(text)


def _schema_epilog(name: str) -> str:
    return f"{name} schema:\n" + json.dumps(load_schema(name), indent=1)


# ---------------------------------------------------------------- commands


def cmd_ladder(args) -> int:
    if args.system:
        system = DelaySystem.from_json(_read(args.system, "delay_system"))
        lsys, _ = _system_for_ladder(system, args.tolerance)
        tau, d = lsys.tau, lsys.d
    else:
        if args.tau is None or args.d is None:
            raise Usage("give --tau and --d, or --system")
        tau, d = args.tau, args.d
    _emit(args, "ladder.json", dumps(ladder_from_delay(tau, d, args.rungs).to_json()))
    return EXIT_OK


def cmd_bound(args) -> int:
    obj = _read(args.ladder, "ladder")
    ladder = CompactnessLadder.from_json({"rungs": args.s_max + 2, **obj})
    rinf = rho_infinity(ladder, args.s_max)
    try:
        res = search_mp(ladder, args.varpi, args.p_max, args.s_max, args.varrho, args.kappa, args.c,
                        args.include_top, args.prefer)
    except SearchFailure as exc:
        print(f"growth: {exc}", file=sys.stderr)
        _emit(args, "bound.csv", bound_table(rinf, exc.grid, None, None))
        return EXIT_VIOLATION
    cert = res.certificate
    bound = minkowski_bound(cert)
    _emit(args, "certificate.json", dumps(cert.to_json()))
    _emit(args, "bound.csv", bound_table(rinf, res.grid, cert, bound))
    print(f"m={cert.m} p={cert.p} chi*={cert.chi_star:.6g} bound={bound:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    system = DelaySystem.from_json(_read(args.system, "delay_system"))
    traj = integrate(system, _vector(args.initial, system.d), 0.0, args.horizon, args.step)
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        traj.to_csv(out / "trajectory.csv")
        print(f"wrote {out / 'trajectory.csv'}")
    else:
        traj.to_csv(sys.stdout)
    return EXIT_OK


def cmd_rescale(args) -> int:
    system = DelaySystem.from_json(_read(args.system, "delay_system"))
    R = rescale_time(system)
    out = {"r": R.r, "majorant_max": R.majorant_max,
           "f_knots": {"t": R.f.knots_t.tolist(), "f": R.f.knots_f.tolist()},
           "slopes": [R.f.slope_left, R.f.slope_right]}
    if args.horizon:
        phi = _vector(args.initial, system.d)
        x = integrate(system, phi, 0.0, args.horizon, args.step)
        S = float(R.f(args.horizon))
        h_new = R.r / math.ceil(R.r / args.step - 1e-9)  # the new delay need not be a multiple of the step
        xt = integrate(R.system, R.initial_function(phi, system.tau, system.d), 0.0, S, h_new)
        ss = np.linspace(0.0, S, 1001)
        out["composition_error"] = max(float(np.abs(xt(s) - x(min(R.g(s), x.T))).max()) for s in ss)
    _emit(args, "rescale.json", dumps(out))
    return EXIT_VIOLATION if R.majorant_max > 1 + args.tolerance else EXIT_OK


def cmd_restricted_norm(args) -> int:
    system = DelaySystem.from_json(_read(args.system, "delay_system"))
    est = restricted_norm_estimate(system, args.level, args.samples, args.step, seed=args.seed,
                                   allowance=args.allowance)
    _emit(args, "restricted_norm.json", dumps({
        "level": est.level, "estimate": est.estimate, "sampled": est.sampled, "lp": est.lp, "rho": est.rho,
        "constraint_rank": est.codim, "samples": est.samples, "allowance": est.allowance, "within": est.within}))
    return EXIT_OK if est.within else EXIT_VIOLATION


def cmd_variational(args) -> int:
    system = DelaySystem.from_json(_read(args.system, "delay_system"))
    phi = _vector(args.initial, system.d)
    xi = _vector(args.direction, system.d)
    if args.convergence:
        hs = (1e-2, 1e-3, 1e-4)
        base = integrate(system, phi, 0.0, args.horizon, args.step)
        V = variational_solve(system, phi, xi, args.horizon, args.step, base)
        errs = []
        for eps in hs:
            xe = integrate(system, phi + eps * xi, 0.0, args.horizon, args.step)
            errs.append(float(np.abs(xe.x - base.x - eps * V.x).max()) / eps)
        slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        # linear systems: the difference quotient is exact up to roundoff
        exact = max(errs) <= 1e-9 * max(1.0, float(np.abs(V.x).max()))
        _emit(args, "variational.json", dumps({"h": list(hs), "errors": errs, "slope": slope, "roundoff_only": exact}))
        return EXIT_OK if exact or slope >= 0.9 else EXIT_VIOLATION
    V = variational_solve(system, phi, xi, args.horizon, args.step)
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        V.to_csv(out / "variational.csv")
        print(f"wrote {out / 'variational.csv'}")
    else:
        V.to_csv(sys.stdout)
    return EXIT_OK


def cmd_boxdim(args) -> int:
    p = Path(args.cloud)
    if not p.exists():
        raise SpecError(f"file not found: {p}")
    cloud = PointCloud.from_csv(p, args.metric)
    fit = minkowski_dim(cloud, args.eps_min, args.eps_max)
    _emit(args, "boxdim.json", dumps(fit.to_json()))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_all

    checks = run_all(args.jobs)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VIOLATION


def cmd_run(args) -> int:
    from dataclasses import replace

    spec = parse_spec(args.spec)
    if args.seed_given:
        spec = replace(spec, seed=args.seed)
    if args.tolerance_given:
        spec = replace(spec, tolerances=replace(spec.tolerances, majorant=args.tolerance))
    res = run_pipeline(spec)
    out = Path(args.output_dir or ".")
    for p in write_artifacts(res, out):
        print(f"wrote {p}")
    if res.exit_code:
        for v in res.report.get("invariants", {}).get("violations", []):
            print(f"pipeline: {v}", file=sys.stderr)
        if res.report.get("search", {}).get("status") == "failed":
            print(f"growth: {res.report['search']['diagnostic']}", file=sys.stderr)
    return res.exit_code


def cmd_schema(args) -> int:
    print(json.dumps(load_schema(args.name), indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for all sampling (default 0)")
    g.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker cap (default 1)")
    g.add_argument("--tolerance", type=float, default=argparse.SUPPRESS,
                   help="slack for invariant comparisons (default 1e-12)")
    g.add_argument("--output-dir", default=argparse.SUPPRESS, help="write artifacts here instead of stdout")

    ap = argparse.ArgumentParser(prog="nadim", parents=[common],
                                 description="Growth certificates, dimension bounds and delay-equation checks.")
    sub = ap.add_subparsers(dest="command", required=True)
    fmt = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("ladder", parents=[common], help="dyadic ladder of a delay equation")
    p.add_argument("--tau", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--system", help="delay-system JSON (rescaled first if its majorant exceeds 1)")
    p.add_argument("--rungs", type=int, default=14)
    p.set_defaults(fn=cmd_ladder)

    p = sub.add_parser("bound", parents=[common], help="(m, p) search, certificate and dimension bound",
                       formatter_class=fmt, epilog=_schema_epilog("ladder"))
    p.add_argument("ladder", help="ladder JSON")
    p.add_argument("--varpi", type=float, required=True)
    p.add_argument("--varrho", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--p-max", type=int, default=8)
    p.add_argument("--s-max", type=int, default=12)
    p.add_argument("--include-top", action="store_true", help="charge the first k_1 directions with rho_0")
    p.add_argument("--prefer", choices=("ratio", "dimension"), default="ratio")
    p.set_defaults(fn=cmd_bound)

    p = sub.add_parser("simulate", parents=[common], help="integrate a delay system to CSV",
                       formatter_class=fmt, epilog=_schema_epilog("delay_system"))
    p.add_argument("system")
    p.add_argument("--initial", default="1", help="constant initial function, comma-separated per component")
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("rescale", parents=[common], help="rescale time so the majorant is at most 1")
    p.add_argument("system")
    p.add_argument("--horizon", type=float, default=0.0, help="also compare simulations up to this time")
    p.add_argument("--initial", default="1")
    p.add_argument("--step", type=float, default=1e-3)
    p.set_defaults(fn=cmd_rescale)

    p = sub.add_parser("restricted-norm", parents=[common], help="estimate the level-i restricted norm")
    p.add_argument("system")
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--step", type=float, default=1 / 64)
    p.add_argument("--allowance", type=float, default=0.1)
    p.set_defaults(fn=cmd_restricted_norm)

    p = sub.add_parser("variational", parents=[common], help="solve the variational equation")
    p.add_argument("system")
    p.add_argument("--initial", default="0.5")
    p.add_argument("--direction", default="1")
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--step", type=float, default=1e-2)
    p.add_argument("--convergence", action="store_true", help="fit the finite-difference error slope")
    p.set_defaults(fn=cmd_variational)

    p = sub.add_parser("boxdim", parents=[common], help="box-counting dimension of a CSV point cloud")
    p.add_argument("cloud")
    p.add_argument("--eps-min", type=float, required=True)
    p.add_argument("--eps-max", type=float, required=True)
    p.add_argument("--metric", choices=("sup", "euclidean"), default="sup")
    p.set_defaults(fn=cmd_boxdim)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance property suite")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("run", parents=[common], help="full pipeline from a spec file",
                       formatter_class=fmt, epilog=_schema_epilog("pipeline"))
    p.add_argument("spec")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("schema", parents=[common], help="print a JSON schema")
    p.add_argument("name", choices=("pipeline", "ladder", "delay_system"))
    p.set_defaults(fn=cmd_schema)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    args.seed_given = hasattr(args, "seed")
    args.tolerance_given = hasattr(args, "tolerance")
    for name, default in (("seed", 0), ("jobs", 1), ("tolerance", 1e-12), ("output_dir", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    tag = MODULE_OF.get(args.command, "cli")
    try:
        return args.fn(args)
    except (SpecError, Usage) as exc:
        print(f"{tag}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, IndexError) as exc:
        print(f"{tag}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
