"""Accuracy, confusion-matrix MSE and Monte Carlo aggregation."""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from numpy.random import SeedSequence
from pydantic import BaseModel, Field

from truthnet.errors import DimensionMismatchError, DomainError, MonteCarloRunError
from truthnet.experiments.generator import GenConfig, generate
from truthnet.inference.baselines import majority_vote
from truthnet.inference.mathkernels import RngStream
from truthnet.inference.svisit import run_svisit
from truthnet.inference.visit import estimate_states, run_visit
from truthnet.models.dataset import ObservationSet, SocialGraph
from truthnet.models.hyperparameters import Hyperparameters
from truthnet.models.options import Method, SvisitOptions, VisitOptions
from truthnet.models.reports import EvalReport, RunResult, Trace
from truthnet.models.state import GroundTruth, VariationalState

logger = logging.getLogger(__name__)

SWEEPABLE = ("sparsity", "epsilon", "concentration", "num_events")


def accuracy(estimated, truth) -> float:
    """Fraction of events whose estimated state equals the true one."""
    est = np.asarray(estimated)
    ref = np.asarray(truth)
    if est.shape != ref.shape:
        raise DimensionMismatchError(f"estimated states {est.shape} and truth {ref.shape} differ in length")
    if est.size == 0:
        raise DomainError("accuracy needs at least one event")
    return float(np.mean(est == ref))


def switching_mse_from_estimates(estimated: np.ndarray, reference: np.ndarray) -> float:
    """Mean squared entry error over stacked (M, R, R) per-report matrices."""
    est = np.asarray(estimated, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if est.shape != ref.shape:
        raise DimensionMismatchError(f"confusion stacks {est.shape} and {ref.shape} differ")
    if est.shape[0] == 0:
        raise DomainError("MSE needs at least one matrix")
    return float(np.sum((est - ref) ** 2) / est.size)


fixed_mse_from_estimates = switching_mse_from_estimates


def dominant_communities(state: VariationalState, obs: ObservationSet) -> np.ndarray:
    """k(n) = argmax_k sum_l psi_{n,k}^l; agents without reports get community 0."""
    totals = np.zeros((obs.num_agents, state.num_communities))
    np.add.at(totals, obs.agents, state.psi)
    return np.argmax(totals, axis=1)


def report_communities(state: VariationalState) -> np.ndarray:
    return np.argmax(state.psi, axis=1)


def switching_confusions(state: VariationalState, obs: ObservationSet) -> np.ndarray:
    """E_q[omega_{n, s}] with s = argmax psi, one matrix per report."""
    return state.expected_omega()[obs.agents, report_communities(state)]


def fixed_confusions(state: VariationalState, obs: ObservationSet) -> np.ndarray:
    """E_q[omega_{n, k(n)}] per agent, shape (N, R, R)."""
    return state.expected_omega()[np.arange(obs.num_agents), dominant_communities(state, obs)]


def mse_switching(state: VariationalState, obs: ObservationSet, truth: Optional[GroundTruth]) -> float:
    """Sum over reports of |omega_hat_{n,s} - omega*_{n,s*}|^2 divided by |reports| R^2."""
    if truth is None:
        raise DomainError("confusion-matrix MSE needs ground truth")
    return switching_mse_from_estimates(
        switching_confusions(state, obs), truth.report_confusions(obs.agents, obs.events)
    )


def mse_fixed(omega_hat: np.ndarray, truth: Optional[GroundTruth]) -> float:
    """Per-agent MSE against each agent's most frequent true community matrix."""
    if truth is None:
        raise DomainError("confusion-matrix MSE needs ground truth")
    return fixed_mse_from_estimates(omega_hat, truth.agent_confusions())


class MethodOutcome(NamedTuple):
    states: np.ndarray
    state: Optional[VariationalState]
    trace: Optional[Trace]
    histogram: Optional[np.ndarray]
    seconds: float


def run_method(method: Method, obs: ObservationSet, graph: SocialGraph, hyper: Hyperparameters,
               visit_opts: Optional[VisitOptions] = None,
               svisit_opts: Optional[SvisitOptions] = None) -> MethodOutcome:
    """Run one estimator and return its point estimates."""
    started = time.perf_counter()
    if method == "majority":
        states, histogram = majority_vote(obs)
        return MethodOutcome(states, None, None, histogram, time.perf_counter() - started)
    if method == "visit":
        state, trace = run_visit(obs, graph, hyper, visit_opts)
    elif method == "svisit":
        state, trace = run_svisit(obs, graph, hyper, svisit_opts)
    else:
        raise DomainError(f"unknown method {method!r}")
    return MethodOutcome(estimate_states(state.nu), state, trace, None, time.perf_counter() - started)


class TrialSpec(BaseModel):
    """Everything one Monte Carlo run needs apart from its seed."""
    generator: GenConfig
    methods: List[Method] = Field(min_length=1)
    hyper: Hyperparameters
    visit: VisitOptions = Field(default_factory=VisitOptions)
    svisit: SvisitOptions = Field(default_factory=SvisitOptions)

    class Config:
        arbitrary_types_allowed = True


def run_seeds(seed: int, n_runs: int) -> List[int]:
    """Per-run seeds spawned from the master seed."""
    return [int(child.generate_state(1)[0]) for child in SeedSequence(seed).spawn(n_runs)]


def score_outcome(method: str, run: int, outcome: MethodOutcome, obs: ObservationSet,
                  truth: GroundTruth) -> RunResult:
    correct = outcome.states == truth.theta
    mse = mse_fix = None
    if outcome.state is not None:
        mse = mse_switching(outcome.state, obs, truth)
        mse_fix = mse_fixed(fixed_confusions(outcome.state, obs), truth)
    return RunResult(
        method=method,
        run=run,
        accuracy=float(np.mean(correct)),
        mse=mse,
        mse_fixed=mse_fix,
        seconds=outcome.seconds,
        iterations=outcome.trace.iterations if outcome.trace is not None else 0,
        correct=correct.tolist(),
    )


def run_trial(spec: TrialSpec, run: int, seed: int) -> List[RunResult]:
    """Generate one dataset and score every method on it."""
    obs, graph, truth = generate(spec.generator, RngStream(seed))
    results = []
    for method in spec.methods:
        outcome = run_method(
            method, obs, graph, spec.hyper,
            spec.visit.model_copy(update={"seed": seed}),
            spec.svisit.model_copy(update={"seed": seed}),
        )
        results.append(score_outcome(method, run, outcome, obs, truth))
    return results


def _guarded_trial(spec: TrialSpec, run: int, seed: int) -> List[RunResult]:
    try:
        return run_trial(spec, run, seed)
    except Exception as exc:
        raise MonteCarloRunError(run, exc) from exc


def _spread(values: Sequence[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def aggregate(method: str, results: Sequence[RunResult]) -> EvalReport:
    """Mean and standard deviation over the runs of one method."""
    ordered = sorted(results, key=lambda r: r.run)
    accuracies = [r.accuracy for r in ordered]
    mses = [r.mse for r in ordered]
    known = [m for m in mses if m is not None]
    complete = len(known) == len(mses)
    return EvalReport(
        method=method,
        accuracy=float(np.mean(accuracies)),
        accuracy_std=_spread(accuracies),
        mse=float(np.mean(known)) if complete else None,
        mse_std=_spread(known) if complete else None,
        per_event_correct=[c for r in ordered for c in r.correct],
        mc_runs=len(ordered),
        run_accuracies=accuracies,
        run_mses=mses,
        run_seconds=[r.seconds for r in ordered],
    )


def monte_carlo_runs(spec: TrialSpec, n_runs: int, seed: int, workers: int = 1) -> List[RunResult]:
    """Run results sorted by (method, run); each run gets a fresh generator seed."""
    if n_runs < 1:
        raise DomainError(f"n_runs must be at least 1, got {n_runs}")
    seeds = run_seeds(seed, n_runs)
    results: List[RunResult] = []
    if workers <= 1:
        for run, run_seed in enumerate(seeds):
            results.extend(_guarded_trial(spec, run, run_seed))
            logger.debug(f"Monte Carlo run {run + 1}/{n_runs} done")
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_guarded_trial, spec, run, run_seed) for run, run_seed in enumerate(seeds)]
            for future in futures:
                results.extend(future.result())
    for run, run_seed in enumerate(seeds):
        scored = ", ".join(f"{r.method} {r.accuracy:.4f}" for r in results if r.run == run)
        logger.info(f"Run {run} (seed {run_seed}): {scored}")
    return sorted(results, key=lambda r: (r.method, r.run))


def monte_carlo(spec: TrialSpec, n_runs: int, seed: int, workers: int = 1) -> Dict[str, EvalReport]:
    """One EvalReport per method, all methods scored on the same datasets."""
    results = monte_carlo_runs(spec, n_runs, seed, workers)
    reports = {method: aggregate(method, [r for r in results if r.method == method]) for method in spec.methods}
    for method, report in reports.items():
        logger.info(
            f"{method}: accuracy {report.accuracy:.4f} +/- {report.accuracy_std:.4f} over {n_runs} run(s)"
        )
    return reports


class SweepPoint(NamedTuple):
    value: float
    results: List[RunResult]
    reports: Dict[str, EvalReport]


def sweep(spec: TrialSpec, field: str, values: Sequence[float], n_runs: int, seed: int,
          workers: int = 1) -> List[SweepPoint]:
    """Monte Carlo over each value of one generator field."""
    if field not in SWEEPABLE:
        raise DomainError(f"cannot sweep {field!r}; choose from {', '.join(SWEEPABLE)}")
    points = []
    for value in values:
        generator = GenConfig(**{**spec.generator.model_dump(), field: value})
        point_spec = spec.model_copy(update={"generator": generator})
        results = monte_carlo_runs(point_spec, n_runs, seed, workers)
        reports = {m: aggregate(m, [r for r in results if r.method == m]) for m in spec.methods}
        logger.info(f"Sweep {field}={value}: " + ", ".join(
            f"{m} {rep.accuracy:.4f}" for m, rep in reports.items()
        ))
        points.append(SweepPoint(value, results, reports))
    return points
