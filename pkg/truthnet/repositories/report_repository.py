"""Report, metrics and sweep files."""
import csv
import logging
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from truthnet.errors import DatasetFormatError
from truthnet.experiments.evalkit import MethodOutcome, SweepPoint, dominant_communities
from truthnet.models.dataset import ObservationSet
from truthnet.models.hyperparameters import Hyperparameters
from truthnet.models.reports import (
    AgentEstimate,
    EventEstimate,
    InferenceReport,
    MetricsDocument,
    ReportMembership,
    TraceSummary,
)
from truthnet.repositories.dataset_repository import IdMap, read_json, write_json

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
METRICS_FILE = "metrics.json"
SWEEP_FILE = "sweep.csv"
SWEEP_HEADER = ["method", "sparsity", "run", "accuracy", "mse", "seconds", "accuracy_std", "mse_std"]


class ReportRepository:
    """Reads and writes the JSON documents of ``infer`` and ``evaluate``."""

    def __init__(self, out_dir: Path, schema_version: int, timing: bool = False):
        self.out_dir = out_dir
        self.schema_version = schema_version
        self.timing = timing

    def build_report(self, method: str, outcome: MethodOutcome, obs: ObservationSet, id_map: IdMap,
                     hyper: Optional[Hyperparameters] = None) -> InferenceReport:
        event_ids = id_map.event_ids()
        agent_ids = id_map.agent_ids()
        events = []
        for l, event_id in enumerate(event_ids):
            events.append(EventEstimate(
                event_id=event_id,
                state=int(outcome.states[l]),
                nu=outcome.state.nu[l].tolist() if outcome.state is not None else None,
                votes=outcome.histogram[l].tolist() if outcome.histogram is not None else None,
            ))
        report = InferenceReport(
            schema_version=self.schema_version,
            method=method,
            num_states=obs.num_states,
            events=events,
            hyperparameters=hyper.to_summary() if hyper is not None and outcome.state is not None else None,
            seconds=outcome.seconds if self.timing else None,
        )
        state = outcome.state
        if state is None:
            return report

        omega = state.expected_omega()
        dominant = dominant_communities(state, obs)
        report.agents = [
            AgentEstimate(
                agent_id=agent_id,
                gamma=state.gamma[n].tolist(),
                dominant_community=int(dominant[n]),
                confusions=omega[n].tolist(),
            )
            for n, agent_id in enumerate(agent_ids)
        ]
        communities = np.argmax(state.psi, axis=1)
        report.reports = [
            ReportMembership(agent_id=agent_ids[a], event_id=event_ids[e], community=int(c))
            for a, e, c in zip(obs.agents.tolist(), obs.events.tolist(), communities.tolist())
        ]
        report.link_parameters = state.lam.tolist()
        if outcome.trace is not None:
            exclude = None if self.timing else {"seconds"}
            report.trace = TraceSummary(
                converged=outcome.trace.converged,
                iterations=outcome.trace.iterations,
                records=[r.model_dump(exclude=exclude) for r in outcome.trace.records],
                seconds=outcome.trace.seconds if self.timing else None,
            )
        return report

    def save_report(self, report: InferenceReport) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / REPORT_FILE
        write_json(path, report.model_dump(exclude_none=True))
        logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def load_report(path: Path) -> InferenceReport:
        try:
            return InferenceReport.model_validate(read_json(path))
        except ValidationError as exc:
            raise DatasetFormatError(str(path), None, f"not a report document: {exc.error_count()} error(s)") from exc

    def save_metrics(self, metrics: MetricsDocument) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / METRICS_FILE
        write_json(path, metrics.model_dump())
        logger.info(f"Wrote {path}")
        return path


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def sweep_rows(points: Sequence[SweepPoint], methods: Sequence[str], timing: bool = False) -> List[List[str]]:
    """Data rows sorted by (method, value, run), then one ``run=mean`` row per (method, value)."""
    data, summary = [], []
    for method in sorted(methods):
        for point in sorted(points, key=lambda p: p.value):
            for result in sorted((r for r in point.results if r.method == method), key=lambda r: r.run):
                data.append([
                    method, _fmt(point.value), str(result.run), _fmt(result.accuracy), _fmt(result.mse),
                    _fmt(result.seconds) if timing else "", "", "",
                ])
            report = point.reports[method]
            mean_seconds = float(np.mean(report.run_seconds)) if timing and report.run_seconds else None
            summary.append([
                method, _fmt(point.value), "mean", _fmt(report.accuracy), _fmt(report.mse),
                _fmt(mean_seconds), _fmt(report.accuracy_std), _fmt(report.mse_std),
            ])
    return data + summary


def write_sweep(path: Path, points: Sequence[SweepPoint], methods: Sequence[str], timing: bool = False,
                field: str = "sparsity") -> Path:
    """The second column is named after the swept generator field."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([SWEEP_HEADER[0], field] + SWEEP_HEADER[2:])
        writer.writerows(sweep_rows(points, methods, timing))
    logger.info(f"Wrote {path}")
    return path
