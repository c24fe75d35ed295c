"""
Command-line entry point: python -m src.harness.cli {run,oracle,validate}

Exit codes: 0 success, 2 configuration error, 3 numeric or oracle failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from src.harness.experiment import load_config, run_experiment
from src.harness.results import compare_against_oracle, emit_csv, summarize
from src.harness.validation import run_invariant_suite
from src.models.catalog import load_model, reference_values
from src.utils.config import RESULTS_DIR
from src.utils.errors import (
    ConfigurationError,
    DecorrelationTimeout,
    DomainError,
    ExtinctionError,
    NumericError,
    OracleError,
    PreconditionError,
    RejectionBudgetError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# Bad inputs (files, keys, states, output paths) exit 2; failed computations exit 3
CONFIG_ERRORS = (ConfigurationError, DomainError, PreconditionError, OSError)
NUMERIC_ERRORS = (NumericError, OracleError, RejectionBudgetError, ExtinctionError, DecorrelationTimeout)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='python -m src.harness.cli',
        description="ParRep experiments, exact oracles and invariant checks",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', action='store_true', help="Debug logging")
    subparsers = parser.add_subparsers(dest='command', required=True)

    run_parser = subparsers.add_parser('run', parents=[common], help="Run an experiment config")
    run_parser.add_argument('config', type=Path, help="KEY=VALUE experiment file")
    run_parser.add_argument('--quiet', action='store_true', help="Disable the progress bar")
    run_parser.add_argument(
        '--check-oracle', action='store_true', help="Exit 3 if any sweep point misses the oracle by more than 3 sigma"
    )

    oracle_parser = subparsers.add_parser('oracle', parents=[common], help="Write exact reference values for a model")
    oracle_parser.add_argument('model', choices=['entropic', 'biased', 'custom'])
    oracle_parser.add_argument('--matrix-path', help="Matrix file for custom models")
    oracle_parser.add_argument('--sets', help="Set declaration for custom models, e.g. A:0-4;B:10-14")
    oracle_parser.add_argument('--output', type=Path, help="Output CSV (default results/<model>_reference.csv)")

    validate_parser = subparsers.add_parser('validate', parents=[common], help="Run the invariant suite")
    validate_parser.add_argument('--full', action='store_true', help="Include the 40,000-state QSD solve")
    return parser


def command_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.check_oracle and config.trials < 2:
        raise ConfigurationError(f"--check-oracle needs at least 2 trials per sweep value, got {config.trials}")
    model, records = run_experiment(config, progress=not args.quiet)

    output = config.output
    emit_csv(records, output, observables=list(model.select(config.observables)))
    summary = summarize(records)
    summary.to_csv(output.with_name(f'{output.stem}_summary.csv'), index=False)
    print(summary.to_string(index=False))

    if model.oracle:
        report = compare_against_oracle(records, model.oracle)
        report.to_csv(output.with_name(f'{output.stem}_oracle.csv'), index=False)
        print(report.to_string(index=False))
        if args.check_oracle and not report['passed'].all():
            raise OracleError(f"{int((~report['passed']).sum())} sweep point(s) failed the oracle check")
    elif args.check_oracle:
        raise OracleError(f"No oracle values for model '{model.name}'")
    return EXIT_OK


def command_oracle(args: argparse.Namespace) -> int:
    model = load_model(args.model, matrix_path=args.matrix_path, sets=args.sets)
    table = reference_values(model)
    output = args.output or RESULTS_DIR / f'{model.name}_reference.csv'
    output.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(output, index=False)
    print(table.to_string(index=False))
    logger.info("Wrote reference values to %s", output)
    return EXIT_OK


def command_validate(args: argparse.Namespace) -> int:
    table = run_invariant_suite(full=args.full)
    print(table.to_string(index=False))
    return EXIT_OK if table['passed'].all() else EXIT_NUMERIC


COMMANDS = {
    'run': command_run,
    'oracle': command_oracle,
    'validate': command_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    try:
        return COMMANDS[args.command](args)
    except CONFIG_ERRORS as e:
        logger.error("Configuration error (%s): %s", type(e).__name__, e)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_NUMERIC


if __name__ == '__main__':
    sys.exit(main())
