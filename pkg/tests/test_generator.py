"""Synthetic dataset generator"""
import logging

import numpy as np
import pytest
from scipy import stats

from truthnet.errors import DimensionMismatchError, DomainError
from truthnet.experiments.generator import (
    PRESET_DIAGONALS,
    GenConfig,
    block_pi,
    community_confusions,
    generate,
    mask_statistics,
)
from truthnet.inference.mathkernels import RngStream


def test_benchmark_preset_dimensions():
    """80 agents, 200 events, 4 communities, 6 states, blocks of 20 agents"""
    config = GenConfig.preset("paper", sparsity=0.7, seed=1)
    assert (config.num_agents, config.num_events, config.num_communities, config.num_states) == (80, 200, 4, 6)
    assert config.beta == [0.9] * 4
    pi = np.asarray(config.pi_rows)
    assert np.allclose(pi[0], [0.9, 1 / 30, 1 / 30, 1 / 30])
    assert np.allclose(pi[79], [0.0, 0.3, 0.7, 0.0])
    obs, graph, truth = generate(config, RngStream(1))
    assert obs.num_reports == 80 * 200 - config.masked_cells
    assert truth.theta.shape == (200,)
    assert graph.num_agents == 80


def test_benchmark_preset_ignores_structural_overrides(caplog):
    """Only sparsity-style fields can be changed on the benchmark preset; the rest are named in a warning"""
    with caplog.at_level(logging.WARNING, logger="truthnet.experiments.generator"):
        config = GenConfig.preset("paper", num_agents=10, num_states=3, sparsity=0.8)
    assert config.num_agents == 80
    assert config.num_states == 6
    assert config.sparsity == 0.8
    warnings = [r.getMessage() for r in caplog.records if r.levelno == logging.WARNING]
    assert len(warnings) == 1
    assert "num_agents" in warnings[0] and "num_states" in warnings[0]
    assert "sparsity" not in warnings[0]


def test_benchmark_preset_accepts_allowed_overrides_quietly(caplog):
    """Overridable fields and unset values raise no warning"""
    with caplog.at_level(logging.WARNING, logger="truthnet.experiments.generator"):
        GenConfig.preset("paper", sparsity=0.75, switching=True, num_agents=None)
    assert not [r for r in caplog.records if r.levelno == logging.WARNING]


def test_unknown_preset():
    """Preset names are validated"""
    with pytest.raises(DomainError):
        GenConfig.preset("nope")


def test_community_confusions_diagonal():
    """d_k on the diagonal, (1 - d_k)/(R - 1) elsewhere"""
    omega = community_confusions(PRESET_DIAGONALS, 6)
    assert omega.shape == (4, 6, 6)
    assert np.allclose(omega.sum(axis=-1), 1.0)
    assert omega[2, 3, 3] == pytest.approx(0.5)
    assert omega[2, 3, 0] == pytest.approx(0.1)


def test_block_pi_rows():
    """Contiguous groups putting 9/10 on their own community"""
    rows = np.asarray(block_pi(6, 3))
    assert rows.shape == (6, 3)
    assert np.allclose(rows.sum(axis=1), 1.0)
    assert rows[0, 0] == pytest.approx(0.9) and rows[5, 2] == pytest.approx(0.9)
    assert block_pi(2, 1) == [[1.0], [1.0]]


def test_zero_sparsity_observes_everything():
    """Every agent reports every event"""
    config = GenConfig(num_agents=5, num_events=4, num_communities=1, num_states=2,
                       diag_values=[0.9], sparsity=0.0)
    obs, _, _ = generate(config, RngStream(0))
    assert obs.num_reports == 20
    assert mask_statistics(obs, 5, 4) == 0.0


def test_sparsity_is_exact():
    """floor(sparsity * N * L) masked cells, every event observed"""
    config = GenConfig(num_agents=20, num_events=30, num_communities=2, num_states=3,
                       diag_values=[0.6, 0.3], sparsity=0.75)
    obs, _, _ = generate(config, RngStream(3))
    assert obs.num_reports == 600 - 450
    assert mask_statistics(obs, 20, 30) == pytest.approx(0.75)
    assert np.all(obs.observer_counts >= 1)


def test_noiseless_reports_equal_truth():
    """K = 1 with d = 1 copies the true state into every report"""
    config = GenConfig(num_agents=6, num_events=10, num_communities=1, num_states=4,
                       diag_values=[1.0], sparsity=0.3)
    obs, _, truth = generate(config, RngStream(7))
    assert np.array_equal(obs.labels, truth.theta[obs.events])


def test_fixed_communities_do_not_switch():
    """Without switching each agent keeps one community"""
    config = GenConfig(num_agents=12, num_events=8, num_communities=3, num_states=3,
                       diag_values=[0.2, 0.5, 0.8], sparsity=0.5)
    _, _, truth = generate(config, RngStream(2))
    assert np.all(truth.s == truth.s[:, :1])


def test_switching_communities_vary():
    """With switching, memberships change across events"""
    config = GenConfig(num_agents=12, num_events=40, num_communities=3, num_states=3,
                       diag_values=[0.2, 0.5, 0.8], sparsity=0.5, switching=True)
    _, _, truth = generate(config, RngStream(2))
    assert np.any(truth.s != truth.s[:, :1])


def test_network_follows_memberships():
    """Edges only join agents with matching memberships when epsilon is tiny"""
    config = GenConfig(num_agents=30, num_events=5, num_communities=3, num_states=2,
                       diag_values=[0.9, 0.7, 0.5], beta=0.95, epsilon=1e-9, sparsity=0.0)
    _, graph, truth = generate(config, RngStream(4))
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    assert graph.num_edges > 0
    assert np.all(truth.z[a, b] == truth.z[b, a])
    assert np.all(np.diag(truth.z) == -1)


def test_perturbed_agent_confusions():
    """Perturbed agent matrices stay row-stochastic and differ from the community ones"""
    config = GenConfig(num_agents=8, num_events=5, num_communities=2, num_states=3,
                       diag_values=[0.8, 0.4], sparsity=0.0, perturb=True, concentration=50)
    _, _, truth = generate(config, RngStream(5))
    assert np.allclose(truth.agent_omega.sum(axis=-1), 1.0)
    assert not np.allclose(truth.agent_omega[0], truth.community_omega)


def test_generation_is_deterministic():
    """Same seed, same dataset"""
    config = GenConfig(num_agents=10, num_events=12, num_communities=2, num_states=3,
                       diag_values=[0.7, 0.3], sparsity=0.6)
    first = generate(config, RngStream(11))
    second = generate(config, RngStream(11))
    assert np.array_equal(first[0].labels, second[0].labels)
    assert np.array_equal(first[1].edges, second[1].edges)
    assert np.array_equal(first[2].theta, second[2].theta)


def test_config_validation():
    """Structural mismatches are rejected"""
    with pytest.raises(ValueError):
        GenConfig(num_communities=2, diag_values=[0.5])
    with pytest.raises(ValueError):
        GenConfig(num_agents=2, num_communities=3, diag_values=[0.5, 0.5, 0.5])
    with pytest.raises(DimensionMismatchError):
        GenConfig(num_agents=3, num_communities=1, diag_values=[0.5], pi_rows=[[1.0], [1.0]])
    with pytest.raises(ValueError):
        GenConfig(sparsity=1.0)


def test_impossible_sparsity():
    """A mask that must leave an event unobserved fails after the retries"""
    config = GenConfig(num_agents=2, num_events=10, num_communities=1, num_states=2,
                       diag_values=[0.9], sparsity=0.95)
    with pytest.raises(DomainError):
        generate(config, RngStream(0))


def test_reports_follow_community_confusion_rows():
    """Reports given each true state match omega(r, .) under a chi-square test"""
    config = GenConfig(num_agents=100, num_events=100, num_communities=1, num_states=3,
                       diag_values=[0.6], sparsity=0.0)
    obs, _, truth = generate(config, RngStream(21))
    assert obs.num_reports == 10**4
    true_states = truth.theta[obs.events]
    for r in range(config.num_states):
        labels = obs.labels[true_states == r]
        observed = np.bincount(labels, minlength=config.num_states)
        expected = truth.community_omega[0, r] * labels.size
        assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_edge_density_by_membership_agreement():
    """Pairs whose memberships agree link with probability beta, the rest with epsilon"""
    pi_rows = [[1.0, 0.0]] * 60 + [[0.0, 1.0]] * 60
    config = GenConfig(num_agents=120, num_events=2, num_communities=2, num_states=2,
                       diag_values=[0.8, 0.6], beta=0.6, epsilon=0.05, pi_rows=pi_rows, sparsity=0.0)
    _, graph, truth = generate(config, RngStream(8))
    a, b = np.triu_indices(120, k=1)
    linked = graph.adjacency[a, b] > 0
    agree = truth.z[a, b] == truth.z[b, a]
    assert np.mean(linked[agree]) == pytest.approx(0.6, abs=0.05)
    assert np.mean(linked[~agree]) == pytest.approx(0.05, abs=0.02)
