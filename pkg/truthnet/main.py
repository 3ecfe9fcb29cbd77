"""Command-line entry point: ``truthnet generate|infer|evaluate|experiment``."""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from truthnet.config import get_settings
from truthnet.errors import (
    EXIT_RUNTIME,
    EXIT_VALIDATION,
    CliUsageError,
    TruthDiscoveryError,
    create_error_payload,
    format_validation_errors,
    log_general_exception,
    log_validation_exception,
    render_error_payload,
)
from truthnet.routers import evaluate, experiment, generate, infer

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors share the error payload."""

    def error(self, message):
        raise CliUsageError(message)


def build_parser() -> CliParser:
    settings = get_settings()
    parser = CliParser(prog="truthnet", description="Community-aware Bayesian truth discovery")
    parser.add_argument("--log-level", default=settings.log_level,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper)
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
    for router in (generate, infer, evaluate, experiment):
        router.register(subparsers)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    logging.getLogger().setLevel(level)


def _fail(exit_code: int, message: str, command: str, details=None) -> int:
    print(render_error_payload(create_error_payload(exit_code, message, command, details)), file=sys.stderr)
    return exit_code


def run(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, dispatch to a command handler and map failures to exit codes."""
    command = "truthnet"
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        configure_logging(args.log_level)
        return args.handler(args)
    except ValidationError as exc:
        log_validation_exception(exc, command)
        return _fail(EXIT_VALIDATION, "Invalid run settings", command, format_validation_errors(exc))
    except TruthDiscoveryError as exc:
        if exc.exit_code == EXIT_VALIDATION:
            log_validation_exception(exc, command)
        else:
            log_general_exception(exc, command)
        return _fail(exc.exit_code, str(exc), command)
    except Exception as exc:  # pylint: disable=broad-except
        log_general_exception(exc, command)
        return _fail(EXIT_RUNTIME, f"{type(exc).__name__}: {exc}", command)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
