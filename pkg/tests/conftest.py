"""Test configuration and fixtures"""
import numpy as np
import pytest

from truthnet.inference.mathkernels import RngStream
from truthnet.inference.visit import init_state
from truthnet.models.dataset import ObservationSet, SocialGraph
from truthnet.models.hyperparameters import Hyperparameters


@pytest.fixture
def rng():
    """Seeded random stream"""
    return RngStream(0)


@pytest.fixture
def tiny_hyper():
    """Binary states, two candidate communities, default priors"""
    return Hyperparameters.from_scalars(
        num_states=2, alpha=0.1, g0=1.0, h0=1.0, log_mean=2.0, log_var=0.7, epsilon=0.01, max_communities=2
    )


@pytest.fixture
def tiny_obs():
    """Three agents reporting on two binary events"""
    return ObservationSet.from_reports(3, 2, 2, [
        (0, 0, 0), (0, 1, 1),
        (1, 0, 0), (1, 1, 0),
        (2, 1, 1),
    ])


@pytest.fixture
def tiny_graph():
    """Path graph 0 - 1 - 2"""
    return SocialGraph.from_pairs(3, [(0, 1), (1, 2)])


@pytest.fixture
def tiny_state(tiny_obs, tiny_graph, tiny_hyper):
    """Initial variational state of the tiny dataset"""
    return init_state(tiny_obs, tiny_graph, tiny_hyper, RngStream(0))


@pytest.fixture
def random_instance():
    """Factory for random small (obs, graph) pairs with every event observed"""
    def build(seed, num_agents=6, num_events=5, num_states=3, density=0.6):
        gen = np.random.default_rng(seed)
        mask = gen.random((num_agents, num_events)) < density
        mask[gen.integers(0, num_agents, size=num_events), np.arange(num_events)] = True
        agents, events = np.nonzero(mask)
        labels = gen.integers(0, num_states, size=agents.size)
        obs = ObservationSet(
            num_agents=num_agents, num_events=num_events, num_states=num_states,
            agents=agents, events=events, labels=labels,
        )
        upper = np.triu(gen.random((num_agents, num_agents)) < 0.4, k=1)
        return obs, SocialGraph.from_adjacency(upper | upper.T)
    return build
