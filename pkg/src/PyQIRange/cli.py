"""
Command-Line Interface for PyQIRange

Entry point for running PyQIRange from the command line.
It parses command-line arguments and delegates to the WorkflowManager.

Exit codes: 0 success, 1 unexpected failure, 2 usage error, 3 no probe-idler peak
(object absent), 4 undefined correlation, 5 invalid configuration or input file.
"""
import logging
import sys
from typing import Optional, Sequence

from PyQIRange.core.config.config_manager import load_config
from PyQIRange.core.constants import ExitCode
from PyQIRange.core.extractors.chsh_estimator import UndefinedCorrelationError
from PyQIRange.core.utils.argument_parser import parse_arguments
from PyQIRange.core.workflow.workflow_manager import WorkflowManager


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_arguments(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else int(ExitCode.USAGE)

    numeric_level = getattr(logging, args.log.upper(), logging.INFO)
    logging.basicConfig(level=numeric_level, format="%(asctime)s - %(levelname)s - %(message)s")

    try:
        config_manager = None
        if args.config is not None:
            config_manager = load_config(args.config, seed=args.seed, output_dir=args.out, workers=args.workers,
                                         bin_width=args.bin_width, k_sigma=args.k_sigma)
        workflow = WorkflowManager(config_manager, args)

        if args.command == "linkbudget":
            code = workflow.linkbudget()
        elif args.command == "simulate":
            code = workflow.simulate()
        elif args.command == "analyze":
            code = workflow.analyze(args.run_dir)
        elif args.command == "range":
            code = workflow.range(args.run_dir)
        elif args.command == "chsh":
            code = workflow.chsh()
        else:
            code = workflow.sweep()
    except UndefinedCorrelationError as e:
        logging.error(f"Undefined correlation: {e}")
        return int(ExitCode.UNDEFINED_CORRELATION)
    except (ValueError, FileNotFoundError) as e:
        logging.error(str(e))
        return int(ExitCode.INPUT_ERROR)
    except Exception as e:
        logging.exception(f"Unexpected failure: {e}")
        return int(ExitCode.FAILURE)
    return int(code)


if __name__ == '__main__':
    sys.exit(main())
