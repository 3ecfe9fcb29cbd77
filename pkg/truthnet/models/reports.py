"""Run traces and evaluation reports."""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class IterationRecord(BaseModel):
    iteration: int
    nu_change: float
    gamma_change: float
    smoothed_nu_change: Optional[float] = None
    step_size: Optional[float] = None
    mu_stalls: int = 0
    seconds: float = 0.0


class Trace(BaseModel):
    """Per-iteration convergence diagnostics of one solver run."""
    method: str
    records: List[IterationRecord] = []
    converged: bool = False
    seconds: float = 0.0

    def deltas(self) -> List[tuple]:
        """The deterministic part of the trace (no wall-clock fields)."""
        return [
            (r.iteration, r.nu_change, r.gamma_change, r.smoothed_nu_change, r.step_size, r.mu_stalls)
            for r in self.records
        ]

    @property
    def iterations(self) -> int:
        return len(self.records)


class RunResult(BaseModel):
    """Scores of one method on one Monte Carlo dataset."""
    method: str
    run: int
    accuracy: float
    mse: Optional[float] = None
    mse_fixed: Optional[float] = None
    seconds: float = 0.0
    iterations: int = 0
    correct: List[bool] = []


class EvalReport(BaseModel):
    """Accuracy and MSE of one method, possibly aggregated over Monte Carlo runs.

    ``per_event_correct`` concatenates the runs, so ``accuracy`` is its mean.
    """
    method: str
    accuracy: float = Field(ge=0, le=1)
    accuracy_std: float = 0.0
    mse: Optional[float] = None
    mse_std: Optional[float] = None
    per_event_correct: List[bool] = []
    mc_runs: int = 1
    run_accuracies: List[float] = []
    run_mses: List[Optional[float]] = []
    run_seconds: List[float] = []


class EventEstimate(BaseModel):
    event_id: str
    state: int
    nu: Optional[List[float]] = None
    votes: Optional[List[int]] = None


class AgentEstimate(BaseModel):
    """Posterior summary of one agent; ``confusions`` holds E_q[omega_{n,k}] for every k."""
    agent_id: str
    gamma: List[float]
    dominant_community: int
    confusions: List[List[List[float]]]


class ReportMembership(BaseModel):
    agent_id: str
    event_id: str
    community: int


class TraceSummary(BaseModel):
    converged: bool
    iterations: int
    records: List[Dict[str, Any]] = []
    seconds: Optional[float] = None


class InferenceReport(BaseModel):
    """Everything ``infer`` writes to report.json."""
    schema_version: int
    method: str
    num_states: int
    events: List[EventEstimate]
    agents: List[AgentEstimate] = []
    reports: List[ReportMembership] = []
    link_parameters: Optional[List[List[float]]] = None
    trace: Optional[TraceSummary] = None
    hyperparameters: Optional[Dict[str, Any]] = None
    seconds: Optional[float] = None


class MetricsDocument(BaseModel):
    schema_version: int
    method: str
    accuracy: float
    mse: Optional[float] = None
    mse_fixed: Optional[float] = None
    runs: int = 1
    events_scored: int
