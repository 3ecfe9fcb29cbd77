"""Observed data: agents' categorical reports and the social graph."""
from functools import cached_property
from typing import Iterable, List, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from truthnet.errors import DimensionMismatchError, DomainError, EmptyEventError


class ObservationSet(BaseModel):
    """Sparse agent x event reports; report ``i`` is agent ``agents[i]`` saying
    ``labels[i]`` about event ``events[i]``."""
    num_agents: int = Field(ge=1)
    num_events: int = Field(ge=1)
    num_states: int = Field(ge=2)
    agents: np.ndarray
    events: np.ndarray
    labels: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def check_reports(self):
        self.agents = np.asarray(self.agents, dtype=np.int64)
        self.events = np.asarray(self.events, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not (self.agents.shape == self.events.shape == self.labels.shape) or self.agents.ndim != 1:
            raise DimensionMismatchError("agents, events and labels must be 1-D arrays of equal length")
        if self.agents.size:
            if self.agents.min() < 0 or self.agents.max() >= self.num_agents:
                raise DomainError("agent index out of range")
            if self.events.min() < 0 or self.events.max() >= self.num_events:
                raise DomainError("event index out of range")
            if self.labels.min() < 0 or self.labels.max() >= self.num_states:
                raise DomainError(f"labels must lie in 0..{self.num_states - 1}")
        keys = self.agents * self.num_events + self.events
        if np.unique(keys).size != keys.size:
            raise DomainError("duplicate (agent, event) report")
        silent = np.flatnonzero(self.observer_counts == 0)
        if silent.size:
            raise EmptyEventError(silent.tolist())
        return self

    @classmethod
    def from_reports(cls, num_agents: int, num_events: int, num_states: int,
                     reports: Iterable[Tuple[int, int, int]]) -> "ObservationSet":
        rows = np.asarray(list(reports), dtype=np.int64).reshape(-1, 3)
        return cls(
            num_agents=num_agents,
            num_events=num_events,
            num_states=num_states,
            agents=rows[:, 0],
            events=rows[:, 1],
            labels=rows[:, 2],
        )

    @property
    def num_reports(self) -> int:
        return int(self.agents.size)

    @cached_property
    def observer_counts(self) -> np.ndarray:
        return np.bincount(np.asarray(self.events, dtype=np.int64), minlength=self.num_events)

    @cached_property
    def reports_per_agent(self) -> np.ndarray:
        return np.bincount(self.agents, minlength=self.num_agents)

    @cached_property
    def reports_by_agent(self) -> List[np.ndarray]:
        order = np.argsort(self.agents, kind="stable")
        bounds = np.cumsum(self.reports_per_agent)[:-1]
        return np.split(order, bounds)

    @cached_property
    def reports_by_event(self) -> List[np.ndarray]:
        order = np.argsort(self.events, kind="stable")
        bounds = np.cumsum(self.observer_counts)[:-1]
        return np.split(order, bounds)

    def report_index(self, agent: int, event: int) -> int:
        """Position of the (agent, event) report, or -1."""
        hits = self.reports_by_agent[agent]
        match = hits[self.events[hits] == event]
        return int(match[0]) if match.size else -1


class SocialGraph(BaseModel):
    """Undirected, unweighted social graph stored as sorted unique pairs a < b."""
    num_agents: int = Field(ge=1)
    edges: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def check_edges(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if np.any(edges[:, 0] == edges[:, 1]):
                raise DomainError("self-loops are not allowed")
            if edges.min() < 0 or edges.max() >= self.num_agents:
                raise DomainError("edge endpoint out of range")
            edges = np.unique(np.sort(edges, axis=1), axis=0)
        self.edges = edges
        return self

    @classmethod
    def from_pairs(cls, num_agents: int, pairs: Iterable[Tuple[int, int]]) -> "SocialGraph":
        return cls(num_agents=num_agents, edges=np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2))

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray) -> "SocialGraph":
        a, b = np.nonzero(np.triu(np.asarray(adjacency), k=1))
        return cls(num_agents=adjacency.shape[0], edges=np.stack([a, b], axis=1))

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 matrix D with a zero diagonal."""
        d = np.zeros((self.num_agents, self.num_agents))
        if self.edges.size:
            d[self.edges[:, 0], self.edges[:, 1]] = 1.0
            d[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return d

    def connected(self, n: int, m: int) -> int:
        return int(self.adjacency[n, m])
