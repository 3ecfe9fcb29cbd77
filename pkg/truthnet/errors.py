"""Exception hierarchy and error reporting helpers shared by every command."""
import json
import logging
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class TruthDiscoveryError(Exception):
    """Base class for every error raised by the toolkit."""
    exit_code = EXIT_RUNTIME


class InputValidationError(TruthDiscoveryError):
    """Invalid inputs: flags, files, dimensions or parameter domains."""
    exit_code = EXIT_VALIDATION


class DomainError(InputValidationError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DimensionMismatchError(InputValidationError):
    """Arrays or models whose shapes do not agree."""


class EmptyEventError(InputValidationError):
    """An event has no report, so its state cannot be estimated."""

    def __init__(self, events: List[int]):
        self.events = list(events)
        preview = ", ".join(str(e) for e in self.events[:10])
        super().__init__(f"{len(self.events)} event(s) have no reports: {preview}")


class DatasetFormatError(InputValidationError):
    """A dataset file violates its schema."""

    def __init__(self, path: str, line: Optional[int], message: str):
        self.path = path
        self.line = line
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: {message}")


class CliUsageError(InputValidationError):
    """Invalid flag combination."""


class InferenceRuntimeError(TruthDiscoveryError):
    """Failure while running an inference or experiment."""
    exit_code = EXIT_RUNTIME


class MonteCarloRunError(InferenceRuntimeError):
    """A Monte Carlo run failed; carries the run index."""

    def __init__(self, run: int, cause):
        self.run = run
        self.cause = str(cause)
        super().__init__(f"Monte Carlo run {run} failed: {cause}")

    def __reduce__(self):
        return type(self), (self.run, self.cause)


def create_error_payload(exit_code: int, message: str, command: str, details=None) -> Dict[str, Any]:
    """Helper function to create consistent error payloads"""
    content: Dict[str, Any] = {
        "error": True,
        "message": message,
        "exit_code": exit_code,
        "command": command,
    }
    if details:
        content["details"] = details
    return content


def render_error_payload(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, default=str)


def log_validation_exception(exc: Exception, command: str):
    """Log validation exceptions"""
    logger.warning(f"Validation Error: {exc} - Command: {command}")


def log_general_exception(exc: Exception, command: str):
    """Log general exceptions with full stack trace"""
    logger.exception(f"Unexpected error in {command}: {exc}")


FLAG_NAMES = {
    ("GenConfig", "num_agents"): "--n",
    ("GenConfig", "num_events"): "--l",
    ("GenConfig", "num_communities"): "--k",
    ("GenConfig", "num_states"): "--r",
    ("GenConfig", "diag_values"): "--diag",
    ("GenConfig", "epsilon"): "--gen-epsilon",
    ("LaplaceOptions", "max_steps"): "--laplace-steps",
    ("SvisitOptions", "unbiased_pair_scaling"): "--unbiased-scaling",
    ("RunConfig", "output_dir"): "--out",
}


def flag_for(model: str, field: str) -> str:
    """Command-line flag that sets ``model.field``."""
    return FLAG_NAMES.get((model, field), "--" + field.replace("_", "-"))


def format_validation_errors(exc: ValidationError) -> List[Dict[str, Any]]:
    """One entry per rejected setting: where it lives, its flag, what is wrong and the value given.

    Model-level checks (for example a pi row off the simplex) have no single
    field, so their entry carries no flag.
    """
    model = exc.title
    problems = []
    for error in exc.errors():
        fields = [str(x) for x in error["loc"]]
        problems.append({
            "setting": ".".join([model, *fields]),
            "flag": flag_for(model, fields[-1]) if fields else None,
            "problem": error["msg"],
            "given": error.get("input"),
        })
    return problems
