"""
Command-line interface: list, run, decode and config subcommands

Exit codes: 0 success, 1 user error (bad names, config, data), 2 internal error.
"""

import argparse
import contextlib
import sys
from typing import IO, List, Optional, Sequence

from pydantic import ValidationError

from app import __version__
from app.config import (
    apply_overrides, default_output_dir, dump_experiment, get_settings, load_experiment_file
)
from app.models.schemas import ExperimentConfig, FunctionSetName
from app.services.benchmarks import BenchmarkSpec, list_benchmarks
from app.services.experiment import run_suite, write_results
from app.services.kexpression import alphabet_for_gene_text, decode, effective_length, parse_gene
from app.utils.errors import InvariantViolation, NeepError, UsageError
from app.utils.logger import get_progress_logger, set_log_level, setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage as UsageError instead of exiting"""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _split(values: Optional[List[str]]) -> Optional[List[str]]:
    if not values:
        return None
    return [item.strip() for value in values for item in value.split(",") if item.strip()]


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_list(name_filter: Optional[str] = None, out: Optional[IO[str]] = None) -> List[BenchmarkSpec]:
    """Print the benchmark catalog, optionally filtered by name"""
    out = out or sys.stdout
    specs = list_benchmarks(name_filter)
    out.write(f"{'name':<10} {'vars':>4}  {'set':<3}  {'train':<32} test\n")
    for spec in specs:
        info = spec.info()
        out.write(
            f"{info.name:<10} {info.n_vars:>4}  {info.function_set.value:<3}  "
            f"{info.train_sampler:<32} {info.test_sampler}\n"
        )
    return specs


def build_run_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (or defaults) with command-line overrides on top"""
    base = load_experiment_file(args.config) if args.config else ExperimentConfig()
    return apply_overrides(
        base,
        methods=_split(args.method),
        problems=_split(args.problem),
        trials=args.trials,
        seed=args.seed,
        pop=args.pop,
        generations=args.generations,
        data=args.data,
    )


def cmd_run(args: argparse.Namespace, out: Optional[IO[str]] = None) -> int:
    """Run the suite and write the result directory"""
    out = out or sys.stdout
    settings = get_settings()
    config = build_run_config(args)
    workers = args.workers if args.workers is not None else settings.workers
    out_dir = args.out or default_output_dir(config, settings.output_root)

    progress_logger = get_progress_logger()
    with contextlib.ExitStack() as stack:
        if args.progress_stream:
            stream = stack.enter_context(open(args.progress_stream, "w", newline="", encoding="utf-8"))
            progress_logger.attach_stream(stream)
            stack.callback(progress_logger.detach_stream)
        result = run_suite(config.run_configs(), workers=workers, data_dir=settings.data_dir,
                           progress_logger=progress_logger)
    path = write_results(result, out_dir, dump_experiment(config))

    for row in result.summary:
        out.write(
            f"{row.method:<11} {row.benchmark:<10} median={row.median:.4g} std={row.std:.4g} "
            f"rank={row.rank} {row.verdict}\n"
        )
    for failure in result.failures:
        out.write(f"FAILED {failure.method} {failure.benchmark}: {failure.error}\n")
    out.write(f"results: {path}\n")
    return EXIT_USER_ERROR if result.failures else EXIT_OK


def cmd_decode(gene_text: str, terminals: Optional[List[str]] = None,
               function_set: FunctionSetName = FunctionSetName.C, head_len: Optional[int] = None,
               out: Optional[IO[str]] = None) -> str:
    """Print the infix form and effective length of a gene string"""
    out = out or sys.stdout
    alphabet = alphabet_for_gene_text(gene_text, function_set, terminals)
    gene = parse_gene(gene_text, alphabet, head_len)
    expression = str(decode(gene))
    out.write(f"{expression}\n")
    out.write(f"effective length: {effective_length(gene)}\n")
    return expression


def cmd_config(args: argparse.Namespace, out: Optional[IO[str]] = None) -> str:
    """Print the effective configuration as INI"""
    out = out or sys.stdout
    text = dump_experiment(build_run_config(args))
    out.write(text)
    return text


# ============================================================================
# PARSER
# ============================================================================

def _add_run_options(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="INI experiment file")
    parser.add_argument("--method", action="append", help="Method(s): ga-neep, pso-neep, cmaes-neep, gep")
    parser.add_argument("--problem", action="append", help="Benchmark name(s), comma-separated or repeated")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--pop", type=int, help="Population size")
    parser.add_argument("--generations", type=int)
    parser.add_argument("--data", help="CSV file for Energy/Concrete")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neep", description="Neuro-encoded expression programming experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    list_parser = sub.add_parser("list", help="List benchmark problems")
    list_parser.add_argument("--filter", dest="name_filter", help="Case-insensitive name substring")

    run_parser = sub.add_parser("run", help="Run an experiment suite")
    _add_run_options(run_parser)
    run_parser.add_argument("--workers", type=int, help="Trial worker processes")
    run_parser.add_argument("--out", help="Output directory")
    run_parser.add_argument("--progress-stream", help="CSV file receiving progress rows as each cell finishes")

    decode_parser = sub.add_parser("decode", help="Decode a gene string")
    decode_parser.add_argument("gene", nargs="+", help="Gene symbols")
    decode_parser.add_argument("--terminals", help="Comma-separated terminal names")
    decode_parser.add_argument("--function-set", default=FunctionSetName.C.value,
                               choices=[f.value for f in FunctionSetName])
    decode_parser.add_argument("--head", type=int, help="Head length (inferred by default)")

    config_parser = sub.add_parser("config", help="Print the effective configuration")
    _add_run_options(config_parser)
    return parser


def main(argv: Optional[Sequence[str]] = None, out: Optional[IO[str]] = None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        set_log_level(args.log_level or get_settings().log_level)
        if args.command == "list":
            cmd_list(args.name_filter, out)
        elif args.command == "run":
            return cmd_run(args, out)
        elif args.command == "decode":
            cmd_decode(" ".join(args.gene), _split([args.terminals]) if args.terminals else None,
                       FunctionSetName(args.function_set), args.head, out)
        elif args.command == "config":
            cmd_config(args, out)
        else:
            raise UsageError("missing command: choose one of list, run, decode, config")
        return EXIT_OK
    except InvariantViolation as e:
        logger.error(f"Internal error: {e}")
        return EXIT_INTERNAL_ERROR
    except (NeepError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER_ERROR
    except Exception as e:  # noqa: BLE001
        logger.exception(f"Internal error: {e}")
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
