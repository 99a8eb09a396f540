"""
Command-line front end.

Subcommands: simulate, transform, fluctuation, classify, verify-duality,
verify-lyapunov, oracle.  Every run writes a manifest JSON next to its
outputs carrying the resolved argument vector, the configuration echo, seed,
worker count, and output list; `mapflux --from-manifest FILE` replays the
recorded arguments, which reproduces every output file byte for byte.

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure,
3 verification-suite failure.  Worker pool size comes from MAPFLUX_WORKERS
(default 1); outputs are written in path-index order whatever the pool size.
"""

from __future__ import annotations

import argparse
import datetime
import json
import multiprocessing
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import (MapfluxError, NumericalError, SimulationConfig, UnitVector,
                   ValidationError, read_map_path_csv, read_ssmp_path_csv,
                   seed_stream, write_map_path_csv, write_sidecar,
                   write_ssmp_path_csv)
from .classify import ClassifyThresholds, trichotomy
from .duality import reversal_check
from .fluctuation import (final_excursion_mass_estimate, fluctuation_summary,
                          laplace_estimate, sample_g_at_exponential)
from .lamperti import map_to_ssmp, ssmp_to_map
from .models import (FreeBessel2D, RadialDunkl, RootSystem, arc_midpoint,
                     model_name, simulate_dunkl_ssmp, simulate_free_bessel_ssmp,
                     simulate_map, verify_lyapunov)
from .oracle import (OracleSpec, enumerate_discrete_map, exact_g_table,
                     exact_laplace, sample_g_at_geometric,
                     simulate_discrete_map, simulate_walk)
from .stats import tv_distance

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY = 3

CONTINUOUS_MODELS = ("free-bessel", "dunkl-a1", "dunkl-b2", "dunkl-c2", "dunkl-d2")


def build_model(name, k=1.0):
    if name == "free-bessel":
        return FreeBessel2D()
    if name.startswith("dunkl-"):
        kind = name.split("-", 1)[1].upper()
        return RadialDunkl(RootSystem.from_name(kind), k)
    raise ValidationError(f"unknown model {name!r}")


def worker_count():
    raw = os.environ.get("MAPFLUX_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValidationError(f"MAPFLUX_WORKERS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValidationError("MAPFLUX_WORKERS must be >= 1")
    return n


def write_manifest(out_dir, command, argv, config_echo, seed, outputs,
                   wall_rejections=0, extra=None):
    manifest = {
        "tool": "mapflux",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "config": config_echo,
        "master_seed": seed,
        "workers": worker_count(),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": sorted(str(o) for o in outputs),
        "wall_rejection_count": wall_rejections,
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_floats(text):
    return [float(tok) for tok in text.split(",") if tok.strip()]


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate_one(task):
    """Worker entry: simulate one path and return it keyed by index."""
    (model_key, k, dt, t_max, seed, stride, wall_delta, kind, theta0_angle,
     x0, negate, index) = task
    model = build_model(model_key, k)
    config = SimulationConfig(model=model, dt=dt, t_max=t_max, master_seed=seed,
                              store_stride=stride, wall_delta=wall_delta)
    if kind == "map":
        theta0 = None if theta0_angle is None else UnitVector.from_angle(theta0_angle)
        path = simulate_map(config, theta0, path_index=index)
        if negate:
            path = path.negated()
        return index, path
    if model_key == "free-bessel":
        return index, simulate_free_bessel_ssmp(config, np.asarray(x0), path_index=index)
    return index, simulate_dunkl_ssmp(config, np.asarray(x0), path_index=index)


def cmd_simulate(args, argv):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    x0 = tuple(_parse_floats(args.x0)) if args.x0 else (1.0, 1.0)
    if args.kind == "ssmp" and args.model != "free-bessel" and args.x0 is None:
        x0 = (2.0, 1.0)
    tasks = [(args.model, args.k, args.dt, args.t_max, args.seed, args.stride,
              args.wall_delta, args.kind, args.theta0_angle, x0, args.negate, i)
             for i in range(args.paths)]
    workers = worker_count()
    if workers > 1 and len(tasks) > 1:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            results = dict(pool.imap_unordered(_simulate_one, tasks))
    else:
        results = dict(map(_simulate_one, tasks))
    outputs = []
    rejections = 0
    for i in range(args.paths):
        path = results[i]
        fname = out_dir / f"path_{i:05d}.csv"
        if args.kind == "map":
            write_map_path_csv(path, fname)
            rejections += path.wall_rejections
        else:
            write_ssmp_path_csv(path, fname)
        outputs.append(fname)
    sidecar = out_dir / "sidecar.json"
    write_sidecar(sidecar, args.model, args.alpha, args.dt, args.t_max, args.seed)
    outputs.append(sidecar)
    config_echo = {
        "model": args.model, "kind": args.kind, "k": args.k, "dt": args.dt,
        "t_max": args.t_max, "n_paths": args.paths, "alpha": args.alpha,
        "stride": args.stride, "wall_delta": args.wall_delta,
        "negate": args.negate, "theta0_angle": args.theta0_angle, "x0": list(x0),
    }
    write_manifest(out_dir, "simulate", argv, config_echo, args.seed, outputs,
                   rejections)
    return EXIT_OK


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------

def cmd_transform(args, argv):
    out_path = Path(args.output)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if args.direction == "map-to-ssmp":
        path = read_map_path_csv(args.input)
        result = map_to_ssmp(path, args.alpha)
        write_ssmp_path_csv(result, out_path)
    else:
        path = read_ssmp_path_csv(args.input)
        result = ssmp_to_map(path, args.alpha)
        write_map_path_csv(result, out_path)
    config_echo = {"direction": args.direction, "alpha": args.alpha,
                   "input": str(args.input)}
    write_manifest(out_path.parent, "transform", argv, config_echo, 0, [out_path])
    return EXIT_OK


# ---------------------------------------------------------------------------
# fluctuation
# ---------------------------------------------------------------------------

def cmd_fluctuation(args, argv):
    in_dir = Path(args.input_dir)
    files = sorted(in_dir.glob("path_*.csv"))
    if not files:
        raise ValidationError(f"no path_*.csv files under {in_dir}")
    paths = [read_map_path_csv(f) for f in files]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    horizon = min(p.grid.horizon for p in paths)
    horizons = _parse_floats(args.horizons) if args.horizons else [horizon]
    lambdas = _parse_floats(args.lambda_grid)
    mass = final_excursion_mass_estimate(paths, lambdas, horizons, args.epsilon)
    summary = {
        "lambda_grid": lambdas,
        "horizons": horizons,
        "laplace_matrix": mass.matrix.tolist(),
        "stderr_matrix": mass.stderr.tolist(),
        "proxy_value": mass.proxy,
        "diagnostics": {"lambda_monotone": mass.lambda_monotone,
                        "horizon_monotone": mass.horizon_monotone},
        "epsilon": args.epsilon,
        "n_paths": len(paths),
    }
    if args.q is not None:
        rng = seed_stream(args.seed, 1 << 41)
        samples = sample_g_at_exponential(paths, args.q, rng, args.epsilon)
        summary["q"] = args.q
        summary["rejection_count"] = samples.rejection_count
        summary["laplace_at_eq"] = [
            {"lambda": lam,
             "gbar": laplace_estimate(samples, lam, "gbar").estimate,
             "gunder": laplace_estimate(samples, lam, "gunder").estimate}
            for lam in lambdas
        ]
    summary_path = out_dir / "fluctuation_summary.json"
    _write_json(summary_path, summary)
    csv_path = out_dir / "fluctuation_summary.csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("path_index,horizon,g_bar,g_under,sup,inf\n")
        for i, p in enumerate(paths):
            s = fluctuation_summary(p, min(horizon, p.grid.horizon), args.epsilon)
            fh.write(f"{i},{s.horizon:.17g},{s.g_bar:.17g},{s.g_under:.17g},"
                     f"{s.sup:.17g},{s.inf:.17g}\n")
    config_echo = {"input_dir": str(in_dir), "q": args.q, "epsilon": args.epsilon,
                   "lambda_grid": lambdas, "horizons": horizons}
    write_manifest(out_dir, "fluctuation", argv, config_echo, args.seed,
                   [summary_path, csv_path])
    return EXIT_OK


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def cmd_classify(args, argv):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = seed_stream(args.seed, 1 << 42)
    if args.model == "oracle":
        paths = simulate_walk(args.oracle_steps, args.flip_prob,
                              (args.up0, args.up1), args.paths, rng)
        if args.negate:
            paths = [p.negated() for p in paths]
        epsilon = 1e-9
    else:
        model = build_model(args.model, args.k)
        config = SimulationConfig(model=model, dt=args.dt, t_max=args.t_max,
                                  master_seed=args.seed, store_stride=args.stride,
                                  burn_in=args.burn_in)
        paths = []
        for i in range(args.paths):
            p = simulate_map(config, None, path_index=i)
            paths.append(p.negated() if args.negate else p)
        epsilon = args.epsilon
    lambdas = _parse_floats(args.lambda_grid) if args.lambda_grid else None
    horizons = _parse_floats(args.horizons) if args.horizons else None
    result = trichotomy(paths, ClassifyThresholds(), lambdas, horizons,
                        args.burn_in, epsilon)
    verdict_path = out_dir / "verdict.json"
    _write_json(verdict_path, result.as_dict())
    config_echo = {"model": args.model, "negate": args.negate,
                   "n_paths": args.paths, "dt": args.dt, "t_max": args.t_max,
                   "burn_in": args.burn_in}
    write_manifest(out_dir, "classify", argv, config_echo, args.seed,
                   [verdict_path])
    print(result.verdict.value)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-duality
# ---------------------------------------------------------------------------

def cmd_verify_duality(args, argv):
    model = build_model(args.model, args.k)
    t_max = args.t if args.t_max is None else args.t_max
    config = SimulationConfig(model=model, dt=args.dt, t_max=t_max,
                              master_seed=args.seed, burn_in=args.burn_in,
                              store_stride=args.stride)
    report = reversal_check(config, args.t, args.n)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"model": args.model, "t": report.t, "n": report.n,
               "ks_stat": report.ks_stat, "threshold": report.threshold,
               "pass": report.passed}
    report_path = out_dir / "reversal_report.json"
    _write_json(report_path, payload)
    write_manifest(out_dir, "verify-duality", argv,
                   {"model": args.model, "t": args.t, "n": args.n,
                    "dt": args.dt, "burn_in": args.burn_in},
                   args.seed, [report_path])
    print(f"ks={report.ks_stat:.5f} threshold={report.threshold:.5f} "
          f"pass={report.passed}")
    return EXIT_OK if report.passed else EXIT_VERIFY


# ---------------------------------------------------------------------------
# verify-lyapunov
# ---------------------------------------------------------------------------

def cmd_verify_lyapunov(args, argv):
    model = build_model(args.model, args.k)
    report = verify_lyapunov(model, args.points, args.h, args.tolerance,
                             source=args.source)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "model": report.model,
        "source": report.source,
        "n_points": report.n_points,
        "max_rel_err": report.max_rel_err,
        "worst_angle": report.worst_angle,
        "tolerance": report.tolerance,
        "agrees": report.agrees,
        "closed_form_at_worst": float(np.interp(report.worst_angle,
                                                report.angles,
                                                report.values_closed)),
        "finite_difference_at_worst": float(np.interp(report.worst_angle,
                                                      report.angles,
                                                      report.values_fd)),
    }
    report_path = out_dir / "lyapunov_report.json"
    _write_json(report_path, payload)
    write_manifest(out_dir, "verify-lyapunov", argv,
                   {"model": args.model, "k": args.k, "points": args.points,
                    "h": args.h, "source": args.source}, 0, [report_path])
    print(f"source={args.source} max_rel_err={report.max_rel_err:.3e} "
          f"agrees={report.agrees}")
    return EXIT_OK if report.agrees else EXIT_VERIFY


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def cmd_oracle(args, argv):
    spec = OracleSpec(args.flip_prob, (args.up0, args.up1), args.horizon,
                      args.kill_prob)
    tables = enumerate_discrete_map(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    def dump_table(name, values, probs):
        fname = out_dir / f"exact_{name}.csv"
        with open(fname, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("value,probability\n")
            for v, p in zip(values, probs):
                fh.write(f"{v:.17g},{p:.17g}\n")
        outputs.append(fname)

    n = spec.horizon
    dump_table("gbar", np.arange(n + 1), tables.gbar)
    dump_table("gunder", np.arange(n + 1), tables.gunder)
    dump_table("sup", np.arange(n + 1), tables.sup_table)
    dump_table("inf", -np.arange(n + 1), tables.inf_table)
    dump_table("ladder_count", np.arange(n + 1), tables.ladder_table)

    rng = seed_stream(args.seed, 0)
    sim_paths = simulate_discrete_map(spec, args.samples, rng)
    gbar_emp = np.zeros(n + 1)
    for p in sim_paths:
        run_max = np.maximum.accumulate(p.xi)
        g = int(np.flatnonzero(p.xi >= run_max - 1e-12)[-1])
        gbar_emp[g] += 1
    tv_gbar = tv_distance(gbar_emp, tables.gbar)

    lam_checks = []
    suite_ok = tv_gbar < args.tv_tol
    if spec.kill_prob > 0:
        samples, rejected = sample_g_at_geometric(spec, args.samples, rng)
        for lam in _parse_floats(args.lambdas):
            exact = exact_laplace(spec, lam, tables=tables)
            est = laplace_estimate(samples, lam)
            z = abs(est.estimate - exact) / max(est.stderr, 1e-300)
            lam_checks.append({"lambda": lam, "exact": exact,
                               "estimate": est.estimate, "stderr": est.stderr,
                               "z": z, "pass": z < 3.0})
            suite_ok = suite_ok and z < 3.0
    payload = {
        "spec": {"flip_prob": spec.flip_prob,
                 "up_prob_by_state": list(spec.up_prob_by_state),
                 "horizon": spec.horizon, "kill_prob": spec.kill_prob},
        "samples": args.samples,
        "tv_gbar": tv_gbar,
        "tv_tolerance": args.tv_tol,
        "laplace_checks": lam_checks,
        "pass": suite_ok,
    }
    report_path = out_dir / "oracle_equivalence.json"
    _write_json(report_path, payload)
    outputs.append(report_path)
    write_manifest(out_dir, "oracle", argv, payload["spec"], args.seed, outputs)
    print(f"tv_gbar={tv_gbar:.5f} pass={suite_ok}")
    return EXIT_OK if suite_ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="mapflux",
        description="Monte Carlo toolkit for modulated additive processes")
    parser.add_argument("--from-manifest", metavar="FILE",
                        help="replay the argument vector recorded in a manifest")
    sub = parser.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="simulate paths to CSV")
    sim.add_argument("--model", required=True, choices=CONTINUOUS_MODELS)
    sim.add_argument("--kind", choices=("map", "ssmp"), default="map")
    sim.add_argument("--k", type=float, default=1.0)
    sim.add_argument("--dt", type=float, required=True)
    sim.add_argument("--t-max", type=float, required=True)
    sim.add_argument("--paths", type=int, default=1)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--alpha", type=float, default=2.0)
    sim.add_argument("--stride", type=int, default=1)
    sim.add_argument("--wall-delta", type=float, default=1e-6)
    sim.add_argument("--theta0-angle", type=float, default=None)
    sim.add_argument("--x0", type=str, default=None)
    sim.add_argument("--negate", action="store_true")
    sim.add_argument("--out-dir", required=True)
    sim.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("transform", help="apply the time-change transform")
    tr.add_argument("--direction", required=True,
                    choices=("map-to-ssmp", "ssmp-to-map"))
    tr.add_argument("--alpha", type=float, required=True)
    tr.add_argument("--input", required=True)
    tr.add_argument("--output", required=True)
    tr.set_defaults(func=cmd_transform)

    fl = sub.add_parser("fluctuation", help="fluctuation functionals of stored paths")
    fl.add_argument("--input-dir", required=True)
    fl.add_argument("--q", type=float, default=None)
    fl.add_argument("--lambda-grid", default="0.1,0.01,0.001")
    fl.add_argument("--epsilon", type=float, default=1e-9)
    fl.add_argument("--horizons", default=None)
    fl.add_argument("--seed", type=int, default=0)
    fl.add_argument("--out-dir", required=True)
    fl.set_defaults(func=cmd_fluctuation)

    cl = sub.add_parser("classify", help="long-horizon trichotomy verdict")
    cl.add_argument("--model", required=True,
                    choices=CONTINUOUS_MODELS + ("oracle",))
    cl.add_argument("--k", type=float, default=1.0)
    cl.add_argument("--dt", type=float, default=1e-3)
    cl.add_argument("--t-max", type=float, default=200.0)
    cl.add_argument("--paths", type=int, default=200)
    cl.add_argument("--seed", type=int, default=0)
    cl.add_argument("--stride", type=int, default=10)
    cl.add_argument("--burn-in", type=float, default=0.0)
    cl.add_argument("--epsilon", type=float, default=1e-9)
    cl.add_argument("--negate", action="store_true")
    cl.add_argument("--lambda-grid", default=None)
    cl.add_argument("--horizons", default=None)
    cl.add_argument("--oracle-steps", type=int, default=4000)
    cl.add_argument("--flip-prob", type=float, default=0.0)
    cl.add_argument("--up0", type=float, default=0.5)
    cl.add_argument("--up1", type=float, default=0.5)
    cl.add_argument("--out-dir", required=True)
    cl.set_defaults(func=cmd_classify)

    vd = sub.add_parser("verify-duality", help="stationary reversal KS check")
    vd.add_argument("--model", required=True, choices=CONTINUOUS_MODELS)
    vd.add_argument("--k", type=float, default=1.0)
    vd.add_argument("--t", type=float, default=5.0)
    vd.add_argument("--n", type=int, default=2000)
    vd.add_argument("--dt", type=float, default=1e-3)
    vd.add_argument("--t-max", type=float, default=None)
    vd.add_argument("--burn-in", type=float, default=50.0)
    vd.add_argument("--stride", type=int, default=1)
    vd.add_argument("--seed", type=int, default=0)
    vd.add_argument("--out-dir", required=True)
    vd.set_defaults(func=cmd_verify_duality)

    vl = sub.add_parser("verify-lyapunov",
                        help="closed-form vs finite-difference generator")
    vl.add_argument("--model", required=True, choices=CONTINUOUS_MODELS)
    vl.add_argument("--k", type=float, default=0.5)
    vl.add_argument("--points", type=int, default=100)
    vl.add_argument("--h", type=float, default=1e-5)
    vl.add_argument("--tolerance", type=float, default=1e-5)
    vl.add_argument("--source", choices=("analytic", "coeffs"), default="analytic")
    vl.add_argument("--out-dir", required=True)
    vl.set_defaults(func=cmd_verify_lyapunov)

    orc = sub.add_parser("oracle", help="exact tables and equivalence suite")
    orc.add_argument("--horizon", type=int, default=12)
    orc.add_argument("--flip-prob", type=float, default=0.0)
    orc.add_argument("--up0", type=float, default=0.5)
    orc.add_argument("--up1", type=float, default=0.5)
    orc.add_argument("--kill-prob", type=float, default=0.0)
    orc.add_argument("--samples", type=int, default=100000)
    orc.add_argument("--lambdas", default="0.1,0.5,1.0")
    orc.add_argument("--tv-tol", type=float, default=0.02)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--out-dir", required=True)
    orc.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.from_manifest:
        with open(args.from_manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        return main(manifest["argv"])
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MapfluxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
