#!/usr/bin/env python3
"""Regenerate every figure-data CSV into one output tree.

Produces, under --out (default out/figures):

  sim_model{1,2,3}/fig_sim.csv      mean paths for the standard position set
  value_model{1,2,3}/fig_v0w0.csv   time-zero values vs position (q0 = 0)
  price_model{1,2,3}/fig_h0.csv     prices vs position from the stationary
                                    rate (q0 = s0/2a), with Monte-Carlo
                                    expected-payoff columns
  game_model3/fig_ana.csv           game values across market power and
                                    intervention cost
  fig_sim.csv / fig_v0w0.csv / fig_h0.csv   concatenations across models

Use --fast for a quick smoke run (smaller Monte-Carlo sizes).
"""

import argparse
import os
import sys

from maniplab.cli import main as cli_main

BASE = {"s0": 10, "a": 0.5, "g": 0.1, "kappa": 0.01, "sigma": 1, "T": 1, "mu": 0}


def write_config(path, model, lam=0.0, q0=0.0):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in BASE.items():
            fh.write(f"{key} = {value}\n")
        fh.write(f"lambda = {lam}\nq0 = {q0}\nmodel = {model}\n")
    return path


def concat(sources, target, extra_col=None):
    header_written = False
    with open(target, "w", encoding="utf-8") as out:
        for tag, src in sources:
            with open(src, "r", encoding="utf-8") as fh:
                lines = fh.read().splitlines()
            if not header_written:
                out.write((f"{extra_col}," if extra_col else "") + lines[0] + "\n")
                header_written = True
            for line in lines[1:]:
                out.write((f"{tag}," if extra_col else "") + line + "\n")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join("out", "figures"))
    ap.add_argument("--seed", type=int, default=20240501)
    ap.add_argument("--fast", action="store_true")
    args = ap.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    paths = str(2000 if args.fast else 20000)
    steps = str(200 if args.fast else 1000)
    grid = str(500 if args.fast else 2000)
    mc_paths = str(1000 if args.fast else 10000)
    mc_steps = str(100 if args.fast else 500)

    cfg_dir = os.path.join(args.out, "configs")
    os.makedirs(cfg_dir, exist_ok=True)

    sim_files, value_files, price_files = [], [], []
    for model in (1, 2, 3):
        cfg = write_config(os.path.join(cfg_dir, f"m{model}_origin.cfg"), model)
        out = os.path.join(args.out, f"sim_model{model}")
        rc = cli_main(["simulate", "--config", cfg, "--out", out,
                       "--paths", paths, "--steps", steps,
                       "--grid-steps", steps, "--seed", str(args.seed),
                       "--scenarios", "fig1"])
        if rc:
            return rc
        sim_files.append((str(model), os.path.join(out, "fig_sim.csv")))

        out = os.path.join(args.out, f"value_model{model}")
        rc = cli_main(["sweep", "--config", cfg, "--out", out,
                       "--grid-steps", grid, "--figures",
                       "--seed", str(args.seed)])
        if rc:
            return rc
        value_files.append((str(model), os.path.join(out, "fig_v0w0.csv")))

        cfg_star = write_config(os.path.join(cfg_dir, f"m{model}_stationary.cfg"),
                                model, q0=10.0)
        out = os.path.join(args.out, f"price_model{model}")
        rc = cli_main(["sweep", "--config", cfg_star, "--out", out,
                       "--grid-steps", grid, "--figures", "--mc",
                       "--paths", mc_paths, "--steps", mc_steps,
                       "--seed", str(args.seed)])
        if rc:
            return rc
        price_files.append((str(model), os.path.join(out, "fig_h0.csv")))
        if model == 3:
            src = os.path.join(out, "fig_ana.csv")
            game_dir = os.path.join(args.out, "game_model3")
            os.makedirs(game_dir, exist_ok=True)
            concat([("3", src)], os.path.join(game_dir, "fig_ana.csv"))

    # fig_sim/fig_v0w0/fig_h0 already carry a model column per file
    concat(sim_files, os.path.join(args.out, "fig_sim.csv"))
    concat(value_files, os.path.join(args.out, "fig_v0w0.csv"))
    concat(price_files, os.path.join(args.out, "fig_h0.csv"))
    print(f"figure data written under {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
