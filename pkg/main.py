import argparse
import logging
import sys

import pandas as pd

from config import (
    EXIT_CONFIG_ERROR,
    EXIT_DIVERGED,
    EXIT_OK,
    EXIT_VERIFICATION_FAILED,
    LOG_LEVEL,
)
from langgraph_workflow import run_training
from models.problems import build_problem
from utils.bench_utils import bench_congruence
from utils.config_utils import load_run_config
from utils.errors import ConfigError
from utils.memory_utils import ALL_OPTIMIZERS, memory_report, memory_totals
from utils.verification_utils import SUITES, verify

logger = logging.getLogger(__name__)


def _print_table(frame: pd.DataFrame) -> None:
    sys.stdout.write(frame.to_csv(sep="\t", index=False, lineterminator="\n"))


def cmd_train(args) -> int:
    config = load_run_config(args.config)
    result = run_training(config, output_dir=args.out)
    if result["status"] == "failed":
        for error in result["errors"]:
            logger.error(error)
        raise OSError(f"Training run failed: {'; '.join(result['errors'])}")
    print(f"{result['status']}\t{result['output_dir']}")
    return EXIT_DIVERGED if result["status"] == "diverged" else EXIT_OK


def cmd_verify(args) -> int:
    report = verify(args.suite)
    _print_table(report)
    failed = int((~report["passed"]).sum())
    if failed:
        logger.error(f"{failed} verification properties failed")
        return EXIT_VERIFICATION_FAILED
    return EXIT_OK


def cmd_bench(args) -> int:
    dims = [int(d) for d in args.dims.split(",") if d.strip()]
    _print_table(bench_congruence(args.structure, dims, repeats=args.repeats))
    return EXIT_OK


def cmd_report_memory(args) -> int:
    config = load_run_config(args.config)
    shapes = build_problem(config).layer_shapes
    optimizers = ALL_OPTIMIZERS if args.all else None
    report = memory_report(shapes, config.optimizer, optimizers)
    _print_table(report)
    _print_table(memory_totals(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singd-kit",
        description="Kronecker-factored optimizers (KFAC, IKFAC, SINGD) with structured factors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Run one seeded training run")
    train.add_argument("--config", required=True, help="Path to a section.key = value config file")
    train.add_argument("--out", default=None, help="Output directory (default: timestamped under output.dir)")
    train.set_defaults(handler=cmd_train)

    check = sub.add_parser("verify", help="Run a named verification suite")
    check.add_argument("--suite", required=True, choices=list(SUITES) + ["all"])
    check.set_defaults(handler=cmd_verify)

    bench = sub.add_parser("bench", help="Time the structured congruence K^T U K")
    bench.add_argument("--structure", required=True, help="e.g. dense, diagonal, block_diagonal(k=4)")
    bench.add_argument("--dims", required=True, help="Comma-separated dimensions, e.g. 64,128,256")
    bench.add_argument("--repeats", type=int, default=5)
    bench.set_defaults(handler=cmd_bench)

    memory = sub.add_parser("report-memory", help="Itemized stored-scalar counts per layer")
    memory.add_argument("--config", required=True)
    memory.add_argument("--all", action="store_true", help="Report every optimizer, not just the configured one")
    memory.set_defaults(handler=cmd_report_memory)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
