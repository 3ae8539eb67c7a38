"""Command-line entry point.

Subcommands: simulate (run the configured ensemble), hydro (solve and export
the density), oracle (covariance oracle values), verify (acceptance suites),
replacement-scan (mollifier-width scan of the occupation-time gap).

All outputs land in out/<config-hash>/ under the current directory, or under
$WASEP_OUT_DIR when set.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .acceptance import SUITES, AcceptanceContext, run_suites
from .config import SUITE_NAMES, ConfigError, ExperimentConfig, config_hash, parse_config
from .harness import scaling_regression
from .output import run_dir, write_json, write_manifest, write_table
from .pipeline import estimate_events, hydro_run, oracle_run, simulate_run

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wasep", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="path to the TOML experiment config")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")

    sp = sub.add_parser("simulate", help="run the configured particle ensemble")
    common(sp)
    sp.add_argument("--dump-trajectories", action="store_true",
                    help="write one CSV per replica")

    sp = sub.add_parser("hydro", help="solve the density equation and export the field")
    common(sp)

    sp = sub.add_parser("oracle", help="evaluate the covariance oracle")
    common(sp)

    sp = sub.add_parser("verify", help="run acceptance suites")
    common(sp)
    sp.add_argument("--suite", default=None,
                    help="comma-separated suite names (default: config's verify.suites)")

    sp = sub.add_parser("replacement-scan", help="scan the Z-vs-occupation gap over widths")
    common(sp)
    return p


def _load(args) -> ExperimentConfig:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "jobs", None):
        cfg.jobs = args.jobs
    if getattr(args, "dump_trajectories", False):
        cfg.dump_trajectories = True
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    directory = run_dir(cfg)
    simulate_run(cfg, directory=directory, jobs=cfg.jobs or None)
    print(f"wrote {directory}/summary.json (config {config_hash(cfg)})")
    return 0


def _cmd_hydro(args) -> int:
    cfg = _load(args)
    directory = run_dir(cfg)
    field = hydro_run(cfg, directory=directory)
    print(
        f"density solved on m={field.grid_m}: mass drift {field.mass_drift:.2e}, "
        f"gradient bound {field.grad_bound:.3g}, min gap {field.min_gap:.3g}"
    )
    print(f"wrote {directory}/fields/density.csv")
    return 0


def _cmd_oracle(args) -> int:
    cfg = _load(args)
    directory = run_dir(cfg)
    payload = oracle_run(cfg, directory=directory)
    for name, entry in payload["variances"].items():
        print(f"Var X_T({name}) = {entry['variance']:.6f}")
    vz = payload["var_z"]
    print(f"Var Z_T extrapolated = {vz['extrapolated']:.6f} (ladder {vz['per_eps']})")
    if payload.get("spde"):
        print(f"SPDE cross-check = {payload['spde']['extrapolated']:.6f}")
    print(f"wrote {directory}/oracle.json")
    return 0


def _cmd_verify(args) -> int:
    cfg = _load(args)
    names = list(cfg.suites)
    if args.suite:
        names = [s.strip() for s in args.suite.split(",") if s.strip()]
    for name in names:
        if name not in SUITE_NAMES:
            print(f"error: unknown suite {name!r}; expected one of {', '.join(SUITE_NAMES)}",
                  file=sys.stderr)
            return 2
    if not names:
        print("warning: no suites selected; nothing to verify", file=sys.stderr)
        return 0
    heavy = {"field-clt", "occupation-gauss", "variance-id", "replacement-scan", "holder",
             "hydro-limit", "dynkin"}
    if heavy & set(names):
        from .acceptance import E1_CONFIG, E2_CONFIG
        from .config import config_from_dict

        budget = sum(
            estimate_events(config_from_dict(c)) for c in (E1_CONFIG, E2_CONFIG)
        )
        if budget > cfg.max_events:
            print(
                f"error: estimated {budget:.2e} events exceeds verify.max_events "
                f"= {cfg.max_events:.2e}; raise the budget to proceed",
                file=sys.stderr,
            )
            return 2
    ctx = AcceptanceContext(jobs=cfg.jobs or None)
    results = run_suites(names, ctx=ctx)
    directory = run_dir(cfg)
    write_manifest(directory, cfg, extra={"stage": "verify"})
    write_json(directory / "verify.json", {r.name: r.as_dict() for r in results})
    ok = True
    for r in results:
        for line in r.lines:
            print(line)
        print(f"{r.name}: {'PASS' if r.passed else 'FAIL'} ({r.runtime:.1f}s)")
        ok = ok and r.passed
    print(f"report: {directory}/verify.json")
    return 0 if ok else 1


def _cmd_replacement_scan(args) -> int:
    cfg = _load(args)
    from .harness import run_ensemble
    from .kmc import EventSchedule
    from .observables import build_plan
    from .pipeline import density_for

    spec = cfg.build_model()
    directory = run_dir(cfg)
    density = density_for(cfg, cache_dir=directory / "cache")
    schedule = EventSchedule.uniform(cfg.horizon, cfg.snapshot_dt)
    plan = build_plan(
        spec, density, schedule.times,
        functions=cfg.test_functions(),
        eps_ladder=tuple(cfg.eps_ladder),
        gamma_times=(cfg.horizon,),
        z_times=(cfg.horizon,),
    )
    result = run_ensemble(spec, cfg.replicas, cfg.seed, schedule, plan,
                          jobs=cfg.jobs or None)
    gam = result.column(f"Gamma@{cfg.horizon:g}")
    eps_grid = sorted(cfg.eps_ladder)
    rows = []
    ys = []
    for e in eps_grid:
        diff = result.column(f"Z[{e:g}]@{cfg.horizon:g}") - gam
        y = float(np.mean(np.abs(diff) ** cfg.moment_order))
        ys.append(y)
        rows.append((e, y, float(diff.mean()), float(diff.var(ddof=1))))
    fit = scaling_regression(eps_grid, ys) if len(eps_grid) >= 3 else None
    write_manifest(directory, cfg, extra={"stage": "replacement-scan"})
    write_table(directory / "tables" / "replacement_scan.csv",
                ["eps", f"moment_{cfg.moment_order:g}", "gap_mean", "gap_variance"], rows)
    write_json(directory / "replacement_scan.json",
               {"eps": eps_grid, "moments": ys, "fit": fit, "moment_order": cfg.moment_order})
    if fit is not None:
        print(f"slope {fit['slope']:.3f} over eps {eps_grid}")
    else:
        print(f"ladder of {len(eps_grid)} width(s): table written, no slope fit")
    print(f"wrote {directory}/tables/replacement_scan.csv")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "hydro":
            return _cmd_hydro(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "replacement-scan":
            return _cmd_replacement_scan(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
