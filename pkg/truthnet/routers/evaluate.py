"""``evaluate``: score a report against ground truth."""
import argparse
import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from truthnet.config import get_settings
from truthnet.dependencies import add_output_arguments, resolve_output_dir
from truthnet.errors import EXIT_OK, CliUsageError, InputValidationError
from truthnet.experiments.evalkit import accuracy, fixed_mse_from_estimates, switching_mse_from_estimates
from truthnet.models.reports import InferenceReport, MetricsDocument
from truthnet.models.state import GroundTruth
from truthnet.repositories.dataset_repository import read_gen_meta, read_truth
from truthnet.repositories.report_repository import ReportRepository

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="accuracy and confusion-matrix MSE of a report")
    parser.add_argument("--report", type=Path, required=True)
    parser.add_argument("--truth", type=Path, required=True, help="truth.csv")
    parser.add_argument("--gen-meta", type=Path, default=None, help="gen_meta.json, enables the MSE")
    add_output_arguments(parser)
    parser.set_defaults(handler=cmd_evaluate)


def scored_events(report: InferenceReport, truth: dict) -> Tuple[np.ndarray, np.ndarray]:
    """Estimated and true states on the events present in both documents."""
    common = [e for e in report.events if e.event_id in truth]
    if not common:
        raise InputValidationError("report and truth share no event IDs")
    if len(common) < len(report.events) or len(common) < len(truth):
        logger.warning(
            f"Scoring {len(common)} events: report has {len(report.events)}, truth has {len(truth)}"
        )
    return np.array([e.state for e in common]), np.array([truth[e.event_id] for e in common])


def _index(raw: str, kind: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise CliUsageError(f"--gen-meta needs integer {kind} IDs, got {raw!r}") from exc


def report_mse(report: InferenceReport, truth: GroundTruth) -> Tuple[Optional[float], Optional[float]]:
    """(switching MSE, fixed-community MSE) of the confusion matrices in ``report``."""
    if not report.agents or not report.reports:
        return None, None
    agents = {a.agent_id: a for a in report.agents}
    n_agents, n_events = truth.s.shape
    estimated, reference = [], []
    for entry in report.reports:
        n, l = _index(entry.agent_id, "agent"), _index(entry.event_id, "event")
        if not (0 <= n < n_agents and 0 <= l < n_events):
            raise InputValidationError(f"report entry ({entry.agent_id}, {entry.event_id}) is outside gen_meta")
        estimated.append(agents[entry.agent_id].confusions[entry.community])
        reference.append(truth.agent_omega[n, truth.s[n, l]])
    switching = switching_mse_from_estimates(np.array(estimated), np.array(reference))

    per_agent = truth.agent_confusions()
    fixed_est = [a.confusions[a.dominant_community] for a in report.agents]
    fixed_ref = [per_agent[_index(a.agent_id, "agent")] for a in report.agents]
    return switching, fixed_mse_from_estimates(np.array(fixed_est), np.array(fixed_ref))


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Write metrics.json."""
    report = ReportRepository.load_report(args.report)
    estimated, true_states = scored_events(report, read_truth(args.truth))
    mse = mse_fixed = None
    if args.gen_meta is not None:
        mse, mse_fixed = report_mse(report, read_gen_meta(args.gen_meta))
        if mse is None:
            logger.warning(f"{report.method} reports carry no confusion matrices; MSE skipped")
    metrics = MetricsDocument(
        schema_version=get_settings().schema_version,
        method=report.method,
        accuracy=accuracy(estimated, true_states),
        mse=mse,
        mse_fixed=mse_fixed,
        runs=1,
        events_scored=int(estimated.size),
    )
    logger.info(f"{report.method}: accuracy {metrics.accuracy:.4f} on {metrics.events_scored} events")
    ReportRepository(resolve_output_dir(args), metrics.schema_version).save_metrics(metrics)
    return EXIT_OK
