"""Monte Carlo acceptance runs on the benchmark preset (``pytest -m slow``)"""
import os

import pytest

from truthnet.config import get_settings
from truthnet.experiments.evalkit import TrialSpec, monte_carlo, sweep
from truthnet.experiments.generator import GenConfig
from truthnet.models.hyperparameters import Hyperparameters
from truthnet.models.options import SvisitOptions, VisitOptions

pytestmark = pytest.mark.slow

RUNS = 10
SWEEP_RUNS = 4
SPARSITIES = [0.7, 0.75, 0.8, 0.85, 0.9]
WORKERS = get_settings().workers if get_settings().workers > 1 else max(1, min(RUNS, os.cpu_count() or 1))


def benchmark_spec(methods, switching=False):
    return TrialSpec(
        generator=GenConfig.preset("paper", sparsity=0.7, switching=switching),
        methods=methods,
        hyper=Hyperparameters.from_scalars(num_states=6),
        visit=VisitOptions(),
        svisit=SvisitOptions(),
    )


@pytest.fixture(scope="module")
def benchmark_reports():
    """All three methods scored on the same ten benchmark datasets"""
    return monte_carlo(benchmark_spec(["visit", "svisit", "majority"]), RUNS, seed=0, workers=WORKERS)


def test_visit_beats_majority_on_benchmark_preset(benchmark_reports):
    """Mean VISIT accuracy exceeds majority voting by at least 0.05"""
    gap = benchmark_reports["visit"].accuracy - benchmark_reports["majority"].accuracy
    assert gap >= 0.05, (
        f"visit {benchmark_reports['visit'].run_accuracies} vs majority {benchmark_reports['majority'].run_accuracies}"
    )


def test_svisit_close_to_visit(benchmark_reports):
    """S-VISIT is within 0.05 of VISIT and not above it on the mean"""
    gap = benchmark_reports["visit"].accuracy - benchmark_reports["svisit"].accuracy
    assert 0.0 <= gap <= 0.05


def test_accuracy_and_mse_trends_over_sparsity():
    """Accuracy does not rise with sparsity (0.03 slack); MSE is lower at 0.7 than at 0.9"""
    points = sweep(benchmark_spec(["visit"]), "sparsity", SPARSITIES, SWEEP_RUNS, seed=1, workers=WORKERS)
    accuracies = [p.reports["visit"].accuracy for p in points]
    assert all(later <= earlier + 0.03 for earlier, later in zip(accuracies, accuracies[1:]))
    assert points[0].reports["visit"].mse < points[-1].reports["visit"].mse


def test_switching_communities_beat_majority():
    """Both solvers beat majority voting by 0.03 when communities switch per event"""
    reports = monte_carlo(benchmark_spec(["visit", "svisit", "majority"], switching=True), RUNS, seed=2,
                          workers=WORKERS)
    assert reports["visit"].accuracy - reports["majority"].accuracy >= 0.03
    assert reports["svisit"].accuracy - reports["majority"].accuracy >= 0.03
