"""Command-line front end.

Subcommands
-----------
coeffs     build the coefficient table for the configured model, write it as
           CSV together with an admissibility report
simulate   Monte-Carlo runs; mean-path CSVs, optional raw paths, and the
           stacked scenario file for the standard position sets
sweep      position sweeps; the generic sweep CSV plus the figure-data files
verify     run the verification oracles (quick or full suite)
rerun      re-execute a previous run from its manifest

Every command writes ``manifest.json`` next to its outputs; re-running from
the manifest reproduces the CSVs byte for byte. Exit codes: 0 success,
1 usage/config error, 2 inadmissible parameters, 3 verification failure.
All randomness derives from --seed. The default output directory comes from
$MANIPLAB_OUT (falling back to ./out).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict, replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .coeffs import SingularityError, build_coeffs, model1_riccati_table
from .ode import CoefficientTable, DivergenceError, TimeGrid
from .params import (
    ConfigError,
    ModelKind,
    ModelParams,
    ParamError,
    admissibility_report,
    config_text,
    load_config,
    parse_config,
)
from .policy import AdmissibilityError, check_admissible
from .pricing import (
    default_lambda_grid,
    sweep_csv_text,
    sweep_lambda,
    sweep_power_cost,
)
from .simulate import Measure, SimConfig, paths_csv_text, simulate
from .verify import Perturbation, cross_simulator_check, hjb_residual, perturbation_test

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INADMISSIBLE = 2
EXIT_VERIFY_FAIL = 3

# Standard per-model position scenarios (the zero-position baseline plus the
# long and short cases used throughout the figure data).
FIG1_LAMBDAS = {
    ModelKind.MODEL1: (-0.1, 0.0, 1.0),
    ModelKind.MODEL2: (-0.1, 0.0, 1.0),
    ModelKind.MODEL3: (-0.05, 0.0, 0.1),
}


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(out_dir: str, command: str, params: ModelParams,
                    config_path: str, options: dict) -> None:
    manifest = {
        "tool": "maniplab",
        "version": __version__,
        "command": command,
        "config_path": os.path.abspath(config_path) if config_path else None,
        "config_text": config_text(params),
        "options": options,
        "out_dir": os.path.abspath(out_dir),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _mean_paths_csv(ens) -> str:
    lines = ["t,q_mean,q_lo,q_hi,S_mean,S_lo,S_hi,h_mean,h_lo,h_hi,sigma_eff"]
    p = ens.params
    for k, t in enumerate(ens.t):
        if ens.mean_S is None:
            s_cols = (p.s0, p.s0, p.s0)
        else:
            s_cols = (ens.mean_S[k], ens.mean_S[k] - 1.96 * ens.se_S[k],
                      ens.mean_S[k] + 1.96 * ens.se_S[k])
        vals = (
            t,
            ens.mean_q[k], ens.mean_q[k] - 1.96 * ens.se_q[k],
            ens.mean_q[k] + 1.96 * ens.se_q[k],
            *s_cols,
            ens.mean_h[k], ens.mean_h[k] - 1.96 * ens.se_h[k],
            ens.mean_h[k] + 1.96 * ens.se_h[k],
            ens.sigma_eff[k],
        )
        lines.append(",".join(f"{v:.17g}" for v in vals))
    return "\n".join(lines) + "\n"


def _admissibility_csv(params: ModelParams, coeffs) -> str:
    rep = admissibility_report(params)
    grid_rep = check_admissible(params, coeffs)
    rows = [
        ("theta", f"{rep.theta:.17g}"),
        ("H", f"{rep.H:.17g}"),
        ("t_max", f"{rep.t_max:.17g}"),
        ("horizon_admissible", str(rep.admissible)),
        ("z_min", f"{grid_rep.z_min:.17g}"),
        ("z_margin", f"{grid_rep.margin:.17g}"),
        ("grid_admissible", str(grid_rep.admissible)),
    ]
    if params.kind is ModelKind.MODEL3:
        rows.append(("bw_margin", f"{coeffs.bw_margin:.17g}"))
        rows.append(("equilibrium_valid", str(coeffs.equilibrium_valid)))
    return "quantity,value\n" + "\n".join(f"{k},{v}" for k, v in rows) + "\n"


# --- subcommands ---------------------------------------------------------------


def cmd_coeffs(params: ModelParams, out_dir: str, config_path: str, args) -> int:
    grid = TimeGrid(T=params.T, n_steps=args.grid_steps)
    coeffs = build_coeffs(params, grid)
    name = f"coeffs_model{params.kind.value}.csv"
    _atomic_write(os.path.join(out_dir, name), coeffs.table.to_csv_text())
    _atomic_write(os.path.join(out_dir, "admissibility.csv"),
                  _admissibility_csv(params, coeffs))
    options = {"grid_steps": args.grid_steps}
    if params.kind is ModelKind.MODEL3:
        options["bw_margin"] = coeffs.bw_margin
    _write_manifest(out_dir, "coeffs", params, config_path, options)
    print(f"wrote {name} ({grid.n_steps + 1} rows) to {out_dir}")
    return EXIT_OK


def _simulate_once(params: ModelParams, args, lam: float | None = None):
    p = params if lam is None else params.with_lambda(lam)
    grid = TimeGrid(T=p.T, n_steps=args.steps)
    coeffs = build_coeffs(p, grid)
    config = SimConfig(n_paths=args.paths, n_steps=args.steps, seed=args.seed,
                       measure=Measure(args.measure))
    ens = simulate(p, coeffs, config, store_paths=args.emit_paths)
    return p, ens


def cmd_simulate(params: ModelParams, out_dir: str, config_path: str, args) -> int:
    options = {
        "paths": args.paths, "steps": args.steps, "measure": args.measure,
        "seed": args.seed, "emit_paths": args.emit_paths,
        "scenarios": args.scenarios,
    }
    if args.scenarios == "fig1":
        stacked = ["model,lambda,t,q_mean,q_lo,q_hi,S_mean,S_lo,S_hi,"
                   "h_mean,h_lo,h_hi,sigma_eff"]
        for lam in FIG1_LAMBDAS[params.kind]:
            p, ens = _simulate_once(params, args, lam)
            text = _mean_paths_csv(ens)
            fname = f"mean_paths_lambda_{lam:g}.csv"
            _atomic_write(os.path.join(out_dir, fname), text)
            for line in text.splitlines()[1:]:
                stacked.append(f"{p.kind.value},{lam:.17g},{line}")
            print(f"wrote {fname}")
        _atomic_write(os.path.join(out_dir, "fig_sim.csv"),
                      "\n".join(stacked) + "\n")
        print("wrote fig_sim.csv")
    else:
        _, ens = _simulate_once(params, args)
        _atomic_write(os.path.join(out_dir, "mean_paths.csv"), _mean_paths_csv(ens))
        print("wrote mean_paths.csv")
        if args.emit_paths > 0:
            _atomic_write(os.path.join(out_dir, "paths.csv"),
                          paths_csv_text(ens, args.emit_paths))
            print("wrote paths.csv")
    _write_manifest(out_dir, "simulate", params, config_path, options)
    return EXIT_OK


def cmd_sweep(params: ModelParams, out_dir: str, config_path: str, args) -> int:
    if args.lambda_min is not None or args.lambda_max is not None or args.points:
        lo = args.lambda_min if args.lambda_min is not None else -0.2
        hi = args.lambda_max if args.lambda_max is not None else 1.2
        lambdas = np.linspace(lo, hi, args.points or 57)
    else:
        lambdas = default_lambda_grid(params.kind)
    simcfg = None
    if args.mc:
        simcfg = SimConfig(n_paths=args.paths, n_steps=args.steps,
                           seed=args.seed, measure=Measure.P)
    reports = sweep_lambda(params, lambdas, simcfg,
                           n_steps_coeffs=args.grid_steps)
    _atomic_write(os.path.join(out_dir, "sweep.csv"), sweep_csv_text(reports))
    print(f"wrote sweep.csv ({len(reports)} positions)")

    if args.figures:
        live = [r for r in reports if not r.skipped]
        v_lines = ["model,lambda,v0,w0"]
        h_lines = ["model,lambda,h0,h0_z0,E_hT_P,E_hT_se"]
        for r in live:
            w0 = f"{r.w0:.17g}" if r.w0 is not None else ""
            v_lines.append(f"{params.kind.value},{r.lam:.17g},{r.v0:.17g},{w0}")
            mc = (f"{r.E_hT_P.mean:.17g},{r.E_hT_P.std_error:.17g}"
                  if r.E_hT_P is not None else ",")
            h_lines.append(f"{params.kind.value},{r.lam:.17g},{r.h0:.17g},"
                           f"{r.h0_no_manip:.17g},{mc}")
        _atomic_write(os.path.join(out_dir, "fig_v0w0.csv"), "\n".join(v_lines) + "\n")
        _atomic_write(os.path.join(out_dir, "fig_h0.csv"), "\n".join(h_lines) + "\n")
        print("wrote fig_v0w0.csv, fig_h0.csv")
        if params.kind is ModelKind.MODEL3:
            rows = sweep_power_cost(params, lambdas=lambdas,
                                    n_steps_coeffs=args.grid_steps)
            a_lines = ["a,g,lambda,v0,w0"]
            for a, g, r in rows:
                if r.skipped:
                    continue
                a_lines.append(f"{a:.17g},{g:.17g},{r.lam:.17g},"
                               f"{r.v0:.17g},{r.w0:.17g}")
            _atomic_write(os.path.join(out_dir, "fig_ana.csv"),
                          "\n".join(a_lines) + "\n")
            print("wrote fig_ana.csv")

    options = {
        "lambda_min": args.lambda_min, "lambda_max": args.lambda_max,
        "points": args.points, "mc": args.mc, "figures": args.figures,
        "paths": args.paths, "steps": args.steps, "seed": args.seed,
        "grid_steps": args.grid_steps,
    }
    _write_manifest(out_dir, "sweep", params, config_path, options)
    return EXIT_OK


def cmd_verify(params: ModelParams, out_dir: str, config_path: str, args) -> int:
    grid = TimeGrid(T=params.T, n_steps=args.grid_steps)
    coeffs = build_coeffs(params, grid)
    if args.self_test_corrupt:
        # negative control: negate the quadratic coefficient column
        name = "D" if params.kind is ModelKind.MODEL1 else (
            "A" if params.kind is ModelKind.MODEL2 else "Av")
        values = coeffs.table.values.copy()
        values[:, coeffs.table.names.index(name)] *= -1.0
        table = CoefficientTable(grid=coeffs.table.grid,
                                 names=coeffs.table.names, values=values)
        coeffs = replace(coeffs, table=table)

    rows = [("check", "statistic", "threshold", "status")]
    failed = False

    res = hjb_residual(params, coeffs)
    ok = res.max_abs_residual <= 1e-6
    failed |= not ok
    rows.append(("hjb_residual", f"{res.max_abs_residual:.6g}", "1e-06",
                 "PASS" if ok else "FAIL"))

    if params.kind is ModelKind.MODEL1:
        d_rk4 = model1_riccati_table(params, grid)
        gap = float(np.max(np.abs(d_rk4 - coeffs.table.col("D"))))
        ok = gap <= 1e-6
        failed |= not ok
        rows.append(("closed_form_vs_rk4", f"{gap:.6g}", "1e-06",
                     "PASS" if ok else "FAIL"))

    if args.suite == "full":
        simcfg = SimConfig(n_paths=args.paths, n_steps=args.steps,
                           seed=args.seed, measure=Measure.P)
        perts = [Perturbation("u", "add", 0.5), Perturbation("z", "add", 0.25)]
        for pert in perts:
            try:
                rep = perturbation_test(params, coeffs, pert, simcfg)
            except AdmissibilityError as exc:
                rows.append((f"perturbation_{pert.channel}_{pert.epsilon:g}",
                             "skipped", "-", f"SKIPPED ({exc})"))
                continue
            failed |= rep.verdict == "FAIL"
            rows.append((f"perturbation_{pert.channel}_{pert.epsilon:g}",
                         f"{rep.diff.mean:.6g}", "drop beyond 3 SE", rep.verdict))
        if params.kind is ModelKind.MODEL1:
            xrep = cross_simulator_check(params, coeffs, simcfg)
            failed |= not xrep.passed
            rows.append(("cross_simulator",
                         f"mean {xrep.mean_gap_sigma:.2f} / var {xrep.var_gap_sigma:.2f} sigma",
                         "3 sigma", "PASS" if xrep.passed else "FAIL"))

    text = "\n".join(",".join(r) for r in rows) + "\n"
    _atomic_write(os.path.join(out_dir, "verify_report.csv"), text)
    print(text, end="")
    _write_manifest(out_dir, "verify", params, config_path, {
        "suite": args.suite, "paths": args.paths, "steps": args.steps,
        "seed": args.seed, "grid_steps": args.grid_steps,
        "self_test_corrupt": args.self_test_corrupt,
    })
    return EXIT_VERIFY_FAIL if failed else EXIT_OK


def cmd_rerun(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    params = parse_config(manifest["config_text"])
    out_dir = args.out or manifest["out_dir"]
    opts = manifest["options"]
    ns = argparse.Namespace(**{k.replace("-", "_"): v for k, v in opts.items()})
    command = manifest["command"]
    os.makedirs(out_dir, exist_ok=True)
    if command == "coeffs":
        return cmd_coeffs(params, out_dir, manifest.get("config_path") or "", ns)
    if command == "simulate":
        return cmd_simulate(params, out_dir, manifest.get("config_path") or "", ns)
    if command == "sweep":
        return cmd_sweep(params, out_dir, manifest.get("config_path") or "", ns)
    if command == "verify":
        return cmd_verify(params, out_dir, manifest.get("config_path") or "", ns)
    print(f"unknown command in manifest: {command}", file=sys.stderr)
    return EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maniplab",
        description="price-manipulation model laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="flat key=value config file")
        sp.add_argument("--out", default=None, help="output directory "
                        "(default: $MANIPLAB_OUT or ./out)")
        sp.add_argument("--grid-steps", type=int, default=10_000,
                        help="coefficient grid resolution")
        sp.add_argument("--seed", type=int, default=12345)

    sp = sub.add_parser("coeffs", help="build and export coefficient tables")
    common(sp)

    sp = sub.add_parser("simulate", help="Monte-Carlo closed-loop simulation")
    common(sp)
    sp.add_argument("--paths", type=int, default=10_000)
    sp.add_argument("--steps", type=int, default=1_000)
    sp.add_argument("--measure", choices=("P", "Q"), default="P")
    sp.add_argument("--emit-paths", type=int, default=0,
                    help="also write this many raw paths")
    sp.add_argument("--scenarios", choices=("single", "fig1"), default="single",
                    help="'fig1' runs the standard position set for the model")

    sp = sub.add_parser("sweep", help="position sweeps and figure data")
    common(sp)
    sp.set_defaults(grid_steps=2000)  # one table per sweep point
    sp.add_argument("--lambda-min", type=float, default=None)
    sp.add_argument("--lambda-max", type=float, default=None)
    sp.add_argument("--points", type=int, default=None)
    sp.add_argument("--mc", action="store_true",
                    help="attach Monte-Carlo expected-payoff columns")
    sp.add_argument("--figures", action="store_true",
                    help="also emit the figure-data CSVs")
    sp.add_argument("--paths", type=int, default=10_000)
    sp.add_argument("--steps", type=int, default=500)

    sp = sub.add_parser("verify", help="run verification oracles")
    common(sp)
    sp.add_argument("--suite", choices=("quick", "full"), default="quick")
    sp.add_argument("--paths", type=int, default=100_000)
    sp.add_argument("--steps", type=int, default=1_000)
    sp.add_argument("--self-test-corrupt", action="store_true",
                    help=argparse.SUPPRESS)

    sp = sub.add_parser("rerun", help="re-execute a run from its manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    if args.command == "rerun":
        try:
            return cmd_rerun(args)
        except (OSError, json.JSONDecodeError, ConfigError, ParamError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE

    out_dir = args.out or os.environ.get("MANIPLAB_OUT", "out")
    try:
        params = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParamError as exc:
        print(f"error: inadmissible parameters: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE

    os.makedirs(out_dir, exist_ok=True)
    try:
        if args.command == "coeffs":
            return cmd_coeffs(params, out_dir, args.config, args)
        if args.command == "simulate":
            return cmd_simulate(params, out_dir, args.config, args)
        if args.command == "sweep":
            return cmd_sweep(params, out_dir, args.config, args)
        if args.command == "verify":
            return cmd_verify(params, out_dir, args.config, args)
    except (ParamError, AdmissibilityError, DivergenceError, SingularityError) as exc:
        print(f"error: inadmissible parameters: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    print(f"unknown command {args.command}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
