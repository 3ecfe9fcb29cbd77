"""Majority voting: every agent is trusted equally."""
import logging
from typing import Tuple

import numpy as np

from truthnet.models.dataset import ObservationSet

logger = logging.getLogger(__name__)


def vote_histogram(obs: ObservationSet) -> np.ndarray:
    """Report counts per (event, state), shape (L, R)."""
    counts = np.zeros((obs.num_events, obs.num_states), dtype=np.int64)
    np.add.at(counts, (obs.events, obs.labels), 1)
    return counts


def majority_vote(obs: ObservationSet) -> Tuple[np.ndarray, np.ndarray]:
    """Modal label per event (lowest state on ties) and the vote histogram."""
    counts = vote_histogram(obs)
    states = np.argmax(counts, axis=1)
    ties = int(np.sum((counts == counts.max(axis=1, keepdims=True)).sum(axis=1) > 1))
    logger.debug(f"Majority vote over {obs.num_events} events, {ties} tie(s) broken to the lowest state")
    return states, counts
