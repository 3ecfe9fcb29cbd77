"""Synthetic truth-discovery datasets with planted communities.

Agents follow community confusion matrices with ``d_k`` on the diagonal,
link to each other through a mixed-membership blockmodel and observe a
uniformly random subset of events whose size is fixed by the sparsity.
"""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from truthnet.errors import DimensionMismatchError, DomainError
from truthnet.inference.mathkernels import POSITIVITY_FLOOR, RngStream, sample_categorical_rows, sample_dirichlet
from truthnet.models.dataset import ObservationSet, SocialGraph
from truthnet.models.state import GroundTruth

logger = logging.getLogger(__name__)

MASK_RETRIES = 100

PRESET_PI_BLOCKS = [
    (9 / 10, 1 / 30, 1 / 30, 1 / 30),
    (1 / 30, 9 / 10, 1 / 30, 1 / 30),
    (1 / 30, 1 / 30, 9 / 10, 1 / 30),
    (0.0, 3 / 10, 7 / 10, 0.0),
]
PRESET_DIAGONALS = [0.05, 0.1, 0.5, 0.2]
PRESETS = ("paper", "custom")
PRESET_OVERRIDABLE = ("sparsity", "switching", "epsilon", "perturb", "concentration", "seed")


def block_pi(num_agents: int, num_communities: int) -> List[List[float]]:
    """Contiguous agent groups, group g putting 9/10 of its weight on community g."""
    if num_communities == 1:
        return [[1.0] for _ in range(num_agents)]
    rows = []
    for group, members in enumerate(np.array_split(np.arange(num_agents), num_communities)):
        row = [1 / (10 * (num_communities - 1))] * num_communities
        row[group] = 9 / 10
        rows.extend([list(row)] * members.size)
    return rows


class GenConfig(BaseModel):
    """Dimensions, planted structure and sparsity of one synthetic dataset."""
    num_agents: int = Field(default=80, ge=1)
    num_events: int = Field(default=200, ge=1)
    num_communities: int = Field(default=4, ge=1)
    num_states: int = Field(default=6, ge=2)
    beta: List[float] = Field(default_factory=lambda: [0.9])
    epsilon: float = Field(default=0.05, gt=0, lt=1)
    pi_rows: Optional[List[List[float]]] = None
    diag_values: List[float] = Field(default_factory=lambda: list(PRESET_DIAGONALS))
    sparsity: float = Field(default=0.7, ge=0, lt=1)
    switching: bool = False
    perturb: bool = False
    concentration: float = Field(default=100.0, gt=0)
    seed: int = Field(default=0, ge=0)

    @field_validator("beta", mode="before")
    @classmethod
    def listify_beta(cls, v):
        return [v] if isinstance(v, (int, float)) else v

    @model_validator(mode="after")
    def check_structure(self):
        k = self.num_communities
        if k > self.num_agents:
            raise DomainError(f"{k} communities need at least as many agents, got {self.num_agents}")
        if len(self.beta) == 1:
            self.beta = self.beta * k
        if len(self.beta) != k or any(not 0 < b < 1 for b in self.beta):
            raise DomainError(f"beta needs {k} values in (0, 1)")
        if len(self.diag_values) != k or any(not 0 < d <= 1 for d in self.diag_values):
            raise DomainError(f"diag_values needs {k} values in (0, 1]")
        if self.pi_rows is None:
            self.pi_rows = block_pi(self.num_agents, k)
        pi = np.asarray(self.pi_rows, dtype=float)
        if pi.shape != (self.num_agents, k):
            raise DimensionMismatchError(f"pi_rows must be {self.num_agents}x{k}, got {pi.shape}")
        if np.any(pi < 0) or np.max(np.abs(pi.sum(axis=1) - 1.0)) > 1e-12:
            raise DomainError("every pi row must lie on the simplex")
        return self

    @classmethod
    def preset(cls, name: str, **overrides) -> "GenConfig":
        """"paper" fixes the planted structure and takes only the fields in
        ``PRESET_OVERRIDABLE`` from ``overrides``, warning about the rest; "custom" builds from ``overrides``."""
        if name not in PRESETS:
            raise DomainError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        given = {key: value for key, value in overrides.items() if value is not None}
        if name == "custom":
            return cls(**given)
        pi_rows = [list(row) for row in PRESET_PI_BLOCKS for _ in range(20)]
        base = dict(
            num_agents=80, num_events=200, num_communities=4, num_states=6,
            beta=[0.9], pi_rows=pi_rows, diag_values=list(PRESET_DIAGONALS),
        )
        ignored = sorted(key for key in given if key not in PRESET_OVERRIDABLE)
        if ignored:
            logger.warning(f"Preset {name!r} fixes {', '.join(ignored)}; ignoring the given value(s)")
        base.update({key: value for key, value in given.items() if key in PRESET_OVERRIDABLE})
        return cls(**base)

    @property
    def masked_cells(self) -> int:
        return int(math.floor(self.sparsity * self.num_agents * self.num_events + 1e-9))


def community_confusions(diag_values, num_states: int) -> np.ndarray:
    """omega_k with d_k on the diagonal and (1 - d_k)/(R - 1) elsewhere, shape (K, R, R)."""
    d = np.asarray(diag_values, dtype=float)[:, None, None]
    eye = np.eye(num_states)
    return d * eye + (1.0 - d) / (num_states - 1) * (1.0 - eye)


def _agent_confusions(config: GenConfig, community_omega: np.ndarray, rng: RngStream) -> np.ndarray:
    n = config.num_agents
    omega = np.broadcast_to(community_omega, (n,) + community_omega.shape).copy()
    if not config.perturb:
        return omega
    for k in range(config.num_communities):
        for r in range(config.num_states):
            params = np.maximum(config.concentration * community_omega[k, r], POSITIVITY_FLOOR)
            omega[:, k, r] = sample_dirichlet(params, rng, size=n)
    return omega / omega.sum(axis=-1, keepdims=True)


def _sample_mask(config: GenConfig, rng: RngStream) -> np.ndarray:
    n, l = config.num_agents, config.num_events
    zeros = config.masked_cells
    for attempt in range(1, MASK_RETRIES + 1):
        mask = np.ones(n * l, dtype=bool)
        mask[rng.generator.permutation(n * l)[:zeros]] = False
        mask = mask.reshape(n, l)
        if np.all(mask.any(axis=0)):
            if attempt > 1:
                logger.debug(f"Observation mask accepted on attempt {attempt}")
            return mask
    raise DomainError(
        f"sparsity {config.sparsity} leaves an event without observers after {MASK_RETRIES} mask draws"
    )


def _sample_network(config: GenConfig, pi: np.ndarray, rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    n = config.num_agents
    z = sample_categorical_rows(np.repeat(pi, n, axis=0), rng).reshape(n, n)
    np.fill_diagonal(z, -1)
    a, b = np.triu_indices(n, k=1)
    forward, backward = z[a, b], z[b, a]
    beta = np.asarray(config.beta)
    p = np.where(forward == backward, beta[forward], config.epsilon)
    linked = rng.generator.random(a.size) < p
    return z, np.stack([a[linked], b[linked]], axis=1)


def generate(config: GenConfig, rng: RngStream) -> Tuple[ObservationSet, SocialGraph, GroundTruth]:
    """Sample one dataset; each latent block draws from its own substream of ``rng``."""
    n, l, r = config.num_agents, config.num_events, config.num_states
    pi = np.asarray(config.pi_rows, dtype=float)

    theta = rng.substream(0).generator.integers(0, r, size=l)
    community_omega = community_confusions(config.diag_values, r)
    agent_omega = _agent_confusions(config, community_omega, rng.substream(5))

    if config.switching:
        s = sample_categorical_rows(np.repeat(pi, l, axis=0), rng.substream(1)).reshape(n, l)
    else:
        s = np.repeat(sample_categorical_rows(pi, rng.substream(1))[:, None], l, axis=1)

    z, edges = _sample_network(config, pi, rng.substream(2))
    mask = _sample_mask(config, rng.substream(3))

    agents, events = np.nonzero(mask)
    probs = agent_omega[agents, s[agents, events], theta[events]]
    labels = sample_categorical_rows(probs, rng.substream(4))

    obs = ObservationSet(num_agents=n, num_events=l, num_states=r, agents=agents, events=events, labels=labels)
    graph = SocialGraph(num_agents=n, edges=edges)
    truth = GroundTruth(theta=theta, s=s, pi=pi, community_omega=community_omega, agent_omega=agent_omega, z=z)
    logger.info(
        f"Generated {obs.num_reports} reports from {n} agents on {l} events "
        f"(sparsity {mask_statistics(obs, n, l):.3f}, {graph.num_edges} edges, "
        f"{'switching' if config.switching else 'fixed'} communities)"
    )
    return obs, graph, truth


def mask_statistics(obs: ObservationSet, num_agents: int, num_events: int) -> float:
    """Proportion of unobserved (agent, event) cells."""
    return 1.0 - obs.num_reports / (num_agents * num_events)
