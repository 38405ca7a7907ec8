"""Command-line entry point: offline synthesis, simulation, comparison.

Exit codes: 0 success; 2 infeasible synthesis or bad configuration;
3 artifact/config hash mismatch; 4 metrics schema mismatch.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

log = logging.getLogger("tsdrive")

EXIT_OK = 0
EXIT_SYNTHESIS = 2
EXIT_ARTIFACT = 3
EXIT_SCHEMA = 4


def _setup_logging():
    level = os.environ.get("TSDRIVE_LOG_LEVEL", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_synthesize(args) -> int:
    from . import synthesis
    from .config import ConfigError, RunConfig

    try:
        config = RunConfig.from_file(args.config) if args.config else RunConfig.from_dict({})
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_SYNTHESIS

    try:
        result = synthesis.synthesize_from_config(config)
    except synthesis.SynthesisError as e:
        print(f"synthesis failed: {e}", file=sys.stderr)
        return EXIT_SYNTHESIS

    synthesis.save_artifact(
        args.out, result["config_hash"],
        (result["kinematic"], result["terminal"], result["kinematic_certification"]),
        (result["dynamic"], result["dynamic_certification"]),
        result["dynamic_meta"])
    print(f"artifact written to {args.out}")
    for name in ("kinematic", "dynamic"):
        rep = result[f"{name}_certification"]
        print(f"  {name}: vertex rho {rep.max_vertex_rho:.4f}, "
              f"blend rho {rep.max_blend_rho:.4f}, certified {rep.passed}")
    print(f"  terminal S diag: {np.diag(result['terminal'].S).round(3).tolist()}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .config import ConfigError
    from .simulate import run_from_files
    from .synthesis import ArtifactError

    try:
        metrics = run_from_files(args.config, args.artifact, args.out,
                                 mode=args.mode, seed=args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_SYNTHESIS
    except ArtifactError as e:
        print(f"artifact error: {e}", file=sys.stderr)
        return EXIT_ARTIFACT

    print(f"outputs in {args.out}")
    print("RMSE  x        y        theta    v        omega")
    print("      {rmse_x:<8.3f} {rmse_y:<8.3f} {rmse_theta:<8.4f} "
          "{rmse_v:<8.3f} {rmse_omega:<8.4f}".format(**metrics.to_dict()))
    for name, t in metrics.timing.items():
        print(f"{name} solve ms: p50 {t['p50_ms']:.2f}  p95 {t['p95_ms']:.2f}  max {t['max_ms']:.2f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .simulate import Metrics, compare

    try:
        metrics = [Metrics.from_file(p) for p in args.metrics]
    except (ValueError, KeyError, TypeError) as e:
        print(f"metrics schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as e:
        print(f"metrics file missing: {e}", file=sys.stderr)
        return EXIT_SCHEMA

    labels = [os.path.splitext(os.path.basename(p))[0] if len(set(args.metrics)) == len(args.metrics)
              else f"run{i}" for i, p in enumerate(args.metrics)]
    if len(set(labels)) != len(labels):
        labels = [f"run{i}" for i in range(len(labels))]
    table = compare(metrics, labels)
    print(table.to_text())
    if args.out:
        table.save_csv(args.out)
        print(f"comparison written to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="tsdrive",
        description="TS guidance stack: offline synthesis, closed-loop simulation, comparison")
    sub = parser.add_subparsers(dest="command", required=True)

    p_syn = sub.add_parser("synthesize", help="solve the offline LMI problems, write the artifact")
    p_syn.add_argument("--config", default=None, help="JSON config (defaults when omitted)")
    p_syn.add_argument("--out", required=True, help="artifact JSON output path")
    p_syn.set_defaults(func=cmd_synthesize)

    p_sim = sub.add_parser("simulate", help="run the closed-loop simulation")
    p_sim.add_argument("--config", default=None, help="JSON config (defaults when omitted)")
    p_sim.add_argument("--artifact", required=True, help="synthesis artifact JSON")
    p_sim.add_argument("--mode", choices=["frozen", "reference"], default=None,
                       help="override the MPC scheduling mode")
    p_sim.add_argument("--seed", type=int, default=None, help="override the noise seed")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_cmp = sub.add_parser("compare", help="tabulate metrics files")
    p_cmp.add_argument("metrics", nargs="+", help="metrics JSON files (>= 2)")
    p_cmp.add_argument("--out", default=None, help="comparison CSV output path")
    p_cmp.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    if args.command == "compare" and len(args.metrics) < 2:
        print("need at least two metrics files", file=sys.stderr)
        return EXIT_SCHEMA
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
