"""Command-line entry point: run scenarios, verify fixtures, compute bounds."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bench import run_scenario, verify_fixtures, write_table
from .config import SCENARIOS, ConfigError, load_config
from .fisher import inverse_bound, qfi_matrix
from .probes import (
    CoherentBenchmark,
    GeneralizedNoonSpec,
    ReferenceLayout,
    coherent_qfi_matrix,
    make_generalized_noon,
    make_noon,
    make_separate_noon,
    optimal_alpha_sq,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--format", choices=["csv", "jsonl"], default=argparse.SUPPRESS,
                        help="output format (default: both)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="multiphase", parents=[common],
                                     description="Multiphase estimation benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run one scenario config")
    run.add_argument("config", help="YAML scenario file")

    verify = sub.add_parser("verify", parents=[common], help="rerun fixtures against golden tables")
    verify.add_argument("fixtures", help="directory with <name>.yaml and <name>.csv pairs")

    sub.add_parser("list-scenarios", parents=[common], help="list available scenarios")

    qfi = sub.add_parser("qfi", parents=[common], help="QFI matrix and Tr(Q^-1) of a probe")
    qfi.add_argument("family", choices=["generalized-noon", "noon", "separate-noon", "coherent"])
    qfi.add_argument("--d", type=int, default=2, help="number of phases")
    qfi.add_argument("--N", type=int, default=2, help="photon number")
    qfi.add_argument("--alpha-sq", type=float, default=None,
                     help="probing weight for generalized NOON (default: optimal)")
    qfi.add_argument("--energy", type=float, default=1.0, help="total probing energy for coherent probes")
    qfi.add_argument("--reference-energy", type=float, default=float("inf"))
    qfi.add_argument("--layout", choices=[e.value for e in ReferenceLayout], default="Infinite")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if hasattr(args, "seed"):
        cfg = cfg.model_copy(update={"seed": args.seed})
    table = run_scenario(cfg)
    out_dir = getattr(args, "out_dir", cfg.output.dir)
    stem = cfg.output.stem or f"{cfg.scenario}-{cfg.config_hash()}"
    formats = (args.format,) if hasattr(args, "format") else ("csv", "jsonl")
    for path in write_table(table, out_dir, stem, formats):
        print(path)
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = verify_fixtures(args.fixtures)
    if not results:
        print(f"no fixtures found in {args.fixtures}")
        return EXIT_FAIL
    for res in results:
        print(f"{'PASS' if res.passed else 'FAIL'} {res.name}")
        for msg in res.messages:
            print(f"    {msg}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _cmd_list(args) -> int:
    width = max(map(len, SCENARIOS))
    for name, text in SCENARIOS.items():
        print(f"{name:<{width}}  {text}")
    return EXIT_OK


def _cmd_qfi(args) -> int:
    if args.family == "coherent":
        bench = CoherentBenchmark.equal(args.d, args.energy, args.reference_energy, args.layout)
        q = coherent_qfi_matrix(bench)
    elif args.family == "noon":
        q = qfi_matrix(make_noon(args.N))
    elif args.family == "separate-noon":
        state, modes = make_separate_noon([args.N] * args.d)
        q = qfi_matrix(state, modes)
    else:
        alpha_sq = args.alpha_sq if args.alpha_sq is not None else optimal_alpha_sq(args.d)
        q = qfi_matrix(make_generalized_noon(GeneralizedNoonSpec(args.d, args.N, alpha_sq)))
    inv = inverse_bound(q)
    with np.printoptions(precision=10, suppress=True):
        print("QFI =")
        print(q.matrix)
    print(f"Tr(Q^-1) = {inv.trace()!r}")
    if inv.singular:
        print(f"note: {inv.note}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "verify": _cmd_verify, "list-scenarios": _cmd_list, "qfi": _cmd_qfi}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
