"""Command line entry point.

Exit codes: 0 success, 1 bound or assertion violation, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time

from .config import ConfigError, build_problem, derived_quantities, load_config
from .diagnostics import CSV_COLUMNS, StepMonitor
from .experiments import RUNNERS, default_plan, experiment_passed
from .grid import Grid, ProfileError
from .kernel import KernelError, KernelSpec, PeriodizationParams, build_smoothed_kernel
from .output import resolve_dir, save_state, write_csv, write_json, write_snapshot
from .scheme import BoundViolation, CFLViolation, FixedPointError, Recorder, advance

log = logging.getLogger("nonlocal_eikonal")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def _load(path):
    cfg = load_config(path)
    return cfg, build_problem(cfg)


class _SnapshotWriter:
    def __init__(self, directory, grid, every):
        self.directory, self.grid, self.every = directory, grid, every
        self.written = []

    def __call__(self, prev, new, stats):
        if not self.written:
            self.written.append(write_snapshot(self.directory, prev, self.grid).name)
        if new.n % self.every == 0:
            self.written.append(write_snapshot(self.directory, new, self.grid).name)


def cmd_simulate(args) -> int:
    cfg, (spec, grid, kernel, initial, scheme_cfg, _) = _load(args.config)
    out = resolve_dir(args.out or cfg.output.dir)
    writer = _SnapshotWriter(out, grid, cfg.output.every_k_steps)
    t0 = time.perf_counter()
    final = advance(initial, kernel, grid, scheme_cfg, hooks=[writer])
    wall = time.perf_counter() - t0
    if final.n % cfg.output.every_k_steps:
        writer.written.append(write_snapshot(out, final, grid).name)
    save_state(out / "final_state.npz", final)
    write_json(out / "manifest.json", {
        "command": "simulate", "config": cfg.to_dict(),
        "derived": derived_quantities(cfg, grid, kernel, initial),
        "final": {"n": final.n, "t": final.t, "sup_norm": final.sup_norm},
        "snapshots": writer.written, "wall_time": wall, "seed": args.seed})
    log.info("simulate: %d steps in %.2fs -> %s", final.n, wall, out)
    return EXIT_OK


def cmd_kernel_inspect(args) -> int:
    spec = KernelSpec(args.amplitude, args.zeta)
    grid = Grid(args.P, args.N)
    params = PeriodizationParams.for_kernel(spec, args.P, args.M)
    kernel = build_smoothed_kernel(spec, params, grid, args.mode)
    out = resolve_dir(args.out)
    report = {"P": args.P, "M": args.M, "N": args.N, "mode": args.mode,
              "coeffs": kernel.coeffs, "samples": kernel.samples,
              "l1_discrete": kernel.l1_discrete, "max_coeff": kernel.max_coeff,
              "tail_integral": kernel.tail_integral}
    write_json(out / "kernel.json", report)
    write_csv(out / "kernel_samples.csv", ("x_j", "sigma_j"), zip(kernel.lags, kernel.samples))
    print(out / "kernel.json")
    return EXIT_OK


def cmd_entropy_report(args) -> int:
    cfg, (spec, grid, kernel, initial, scheme_cfg, _) = _load(args.config)
    out = resolve_dir(args.out or cfg.output.dir)
    monitor = StepMonitor(initial, grid, kernel, scheme_cfg.T, strict=False,
                          fixed_point_tol=scheme_cfg.fixed_point_tol)
    try:
        advance(initial, kernel, grid, scheme_cfg, hooks=[monitor])
    finally:
        write_csv(out / "entropy_report.csv", CSV_COLUMNS,
                  ([getattr(r, c) for c in CSV_COLUMNS] for r in monitor.records))
    violations = monitor.violations
    write_json(out / "manifest.json", {
        "command": "entropy-report", "config": cfg.to_dict(),
        "derived": derived_quantities(cfg, grid, kernel, initial),
        "max_identity_residual": monitor.max_identity, "max_tau_residual": monitor.max_tau,
        "max_scheme_residual": monitor.max_scheme_residual,
        "violations": violations[:100], "n_violations": len(violations), "seed": args.seed})
    if violations:
        log.error("entropy-report: %d bound violations, first %s", len(violations), violations[0])
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_experiment(args) -> int:
    subset = [float(s) for s in args.subset.split(",")] if args.subset else None
    plan = default_plan(args.name, outputs=args.out or f"runs/{args.name}",
                        subset=subset, workers=args.threads)
    result = RUNNERS[args.name](plan)
    passed = experiment_passed(args.name, result)
    out = resolve_dir(plan.outputs)
    write_json(out / "pass_fail.json", {"experiment": args.name, "passed": passed, "seed": args.seed})
    print(f"{args.name}: {'PASS' if passed else 'FAIL'} ({out})")
    return EXIT_OK if passed else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonlocal-eikonal",
                                description="IMEX upwind solver for the periodic nonlocal eikonal equation")
    p.add_argument("--threads", type=int, default=1, help="parallel width for experiment sweeps")
    p.add_argument("--seed", type=int, default=None, help="recorded in manifests; the solver is deterministic")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a configured simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("kernel-inspect", help="report the smoothed kernel")
    k.add_argument("--P", type=float, required=True)
    k.add_argument("--M", type=int, required=True)
    k.add_argument("--N", type=int, required=True)
    k.add_argument("--mode", choices=("cesaro", "cell_average"), default="cesaro")
    k.add_argument("--amplitude", type=float, default=1.0)
    k.add_argument("--zeta", type=float, default=1.0)
    k.add_argument("--out", default="runs/kernel")
    k.set_defaults(func=cmd_kernel_inspect)

    e = sub.add_parser("entropy-report", help="per-step diagnostics CSV")
    e.add_argument("--config", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_entropy_report)

    x = sub.add_parser("experiment", help="canned experiments")
    xs = x.add_subparsers(dest="action", required=True)
    run = xs.add_parser("run")
    run.add_argument("name", choices=sorted(RUNNERS))
    run.add_argument("--subset", help="comma separated P values (table2)")
    run.add_argument("--out")
    run.set_defaults(func=cmd_experiment)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except (KernelError, ProfileError, CFLViolation, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BoundViolation, FixedPointError) as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


def main():
    sys.exit(dispatch())
