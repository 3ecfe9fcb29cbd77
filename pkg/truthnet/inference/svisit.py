"""Three-level stochastic variational inference.

Each iteration samples a batch of agents and, for every sampled agent, a
batch of partner agents. Local parameters of the sampled agents get their
exact coordinate updates; the community weights, link probabilities, event
beliefs and community confusion modes take a natural-gradient step of size
rho(i) toward a noisy estimate built from the batch.

Unless the caller hands in a state that stores every pair membership, the
memberships of a sampled pair exist only for the iteration that samples
it: phi_{m->n} starts from the normalized E ln pi_m and both directions
are refreshed once, as in the batch pair update.
"""
import logging
import math
import time
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from truthnet.errors import DomainError
from truthnet.inference.mathkernels import RngStream, apply_floor, log_normalize
from truthnet.inference.visit import (
    check_dimensions,
    gamma_target,
    init_state,
    pair_memberships,
    phi_link_weights,
    report_evidence,
    update_mu_all,
    update_phi_agent,
    update_psi_agent,
    update_xi_agent,
)
from truthnet.models.dataset import ObservationSet, SocialGraph
from truthnet.models.expectations import expected_log_pi
from truthnet.models.hyperparameters import Hyperparameters
from truthnet.models.options import StepSchedule, SvisitOptions
from truthnet.models.reports import IterationRecord, Trace
from truthnet.models.state import VariationalState

logger = logging.getLogger(__name__)


class PairBatch(NamedTuple):
    """Partners sampled for one agent, with their memberships when the state does not store them."""
    agent: int
    partners: np.ndarray
    forward: Optional[np.ndarray] = None    # phi_{n->m}, (P, K)
    backward: Optional[np.ndarray] = None   # phi_{m->n}, (P, K)


SampledPairs = List[PairBatch]


def step_size(i: int, schedule: StepSchedule) -> float:
    """rho(i) = (i + tau)^(-kappa)."""
    if i < 1:
        raise DomainError(f"iterations are numbered from 1, got {i}")
    return float((i + schedule.tau) ** (-schedule.kappa))


def batch_sizes(num_agents: int, opts: SvisitOptions) -> Tuple[int, int]:
    """Resolve (|S_n|, |S_p|); the defaults are ceil(N/8), capped at the population."""
    default = max(1, math.ceil(num_agents / 8))
    agent_batch = opts.agent_batch if opts.agent_batch is not None else default
    pair_batch = opts.pair_batch if opts.pair_batch is not None else min(default, num_agents - 1)
    if agent_batch > num_agents:
        raise DomainError(f"agent batch {agent_batch} exceeds the {num_agents} agents")
    if pair_batch > num_agents - 1:
        raise DomainError(f"pair batch {pair_batch} exceeds the {num_agents - 1} partners per agent")
    return agent_batch, pair_batch


def sample_agents(num_agents: int, batch: int, rng: RngStream) -> np.ndarray:
    return np.sort(rng.generator.choice(num_agents, size=batch, replace=False))


def sample_pairs(n: int, num_agents: int, batch: int, rng: RngStream) -> np.ndarray:
    """Sorted partners m != n drawn without replacement."""
    others = np.delete(np.arange(num_agents), n)
    return np.sort(rng.generator.choice(others, size=batch, replace=False))


def pair_scale(num_agents: int, batch: int, opts: SvisitOptions) -> float:
    if batch == 0:
        return 0.0
    population = num_agents - 1 if opts.unbiased_pair_scaling else num_agents
    return population / batch


def _convex_step(old: np.ndarray, target: np.ndarray, rho: float) -> np.ndarray:
    return (1.0 - rho) * old + rho * target


def svisit_update_gamma(n: int, sampled_pairs: np.ndarray, state: VariationalState, hyper: Hyperparameters,
                        rho: float, opts: SvisitOptions, obs: ObservationSet,
                        pair_rows: Optional[np.ndarray] = None) -> np.ndarray:
    scale = pair_scale(state.num_agents, sampled_pairs.size, opts)
    target = gamma_target(n, state, hyper, obs, partners=sampled_pairs, pair_scale=scale, pair_rows=pair_rows)
    state.gamma[n] = apply_floor(_convex_step(state.gamma[n], target, rho))
    return state.gamma[n]


def svisit_update_lambda(sampled: SampledPairs, state: VariationalState, graph: SocialGraph,
                         hyper: Hyperparameters, rho: float, opts: SvisitOptions) -> np.ndarray:
    """Step (G_k, H_k) toward the batch estimate over the sampled ordered pairs.

    Entries of ``sampled`` may be plain (agent, partners) tuples; pairs without
    carried memberships are read from the stored ``phi``.
    """
    num_agents = state.num_agents
    k = state.num_communities
    linked_sum = np.zeros(k)
    unlinked_sum = np.zeros(k)
    pair_batch = 0
    for entry in sampled:
        n, partners, forward, backward = PairBatch(*entry)
        pair_batch = max(pair_batch, partners.size)
        if partners.size == 0:
            continue
        if forward is None:
            forward, backward = state.phi[n, partners], state.phi[partners, n]
        agreement = forward * backward                                     # (P, K)
        links = graph.adjacency[n, partners]
        linked_sum += links @ agreement
        unlinked_sum += (1.0 - links) @ agreement
    scale = num_agents / len(sampled) * pair_scale(num_agents, pair_batch, opts) if sampled else 0.0
    target = np.column_stack([hyper.g0 + scale * linked_sum, hyper.h0 + scale * unlinked_sum])
    state.lam[:] = apply_floor(_convex_step(state.lam, target, rho))
    return state.lam


def svisit_update_nu(sampled_agents: np.ndarray, state: VariationalState, obs: ObservationSet,
                     rho: float, opts: SvisitOptions) -> np.ndarray:
    """Step every event belief toward the estimate from the sampled agents' reports.

    An event no sampled agent observed gets a uniform estimate.
    """
    pieces = [obs.reports_by_agent[n] for n in sampled_agents]
    reports = np.sort(np.concatenate(pieces)) if pieces else np.zeros(0, dtype=int)
    logits = np.zeros((obs.num_events, obs.num_states))
    if reports.size:
        np.add.at(logits, obs.events[reports], report_evidence(state, obs, reports))
    if opts.unbiased_pair_scaling:
        sampled_observers = np.bincount(obs.events[reports], minlength=obs.num_events)
        scale = np.where(sampled_observers > 0, obs.observer_counts / np.maximum(sampled_observers, 1), 0.0)
    else:
        scale = np.full(obs.num_events, obs.num_agents / sampled_agents.size)
    estimate = log_normalize(scale[:, None] * logits)
    state.nu[:] = _convex_step(state.nu, estimate, rho)
    return state.nu


def svisit_update_mu(sampled_agents: np.ndarray, state: VariationalState, hyper: Hyperparameters,
                     opts: SvisitOptions) -> int:
    """``opts.inner_mu_steps`` ascent steps on the batch-scaled objective of every row.

    Warm-starts from the current modes; returns the number of stalled searches.
    """
    scale = state.num_agents / sampled_agents.size if sampled_agents.size else 0.0
    return update_mu_all(
        state, hyper, opts.laplace, max_steps=opts.inner_mu_steps, agents=sampled_agents, scale=scale
    )


def svisit_iteration(i: int, state: VariationalState, obs: ObservationSet, graph: SocialGraph,
                     hyper: Hyperparameters, opts: SvisitOptions, rng: RngStream) -> Tuple[float, int]:
    """One stochastic iteration; returns (rho, stalled Laplace searches).

    During the first ``opts.warmup_iters`` iterations the event beliefs are
    left unchanged.
    """
    num_agents = obs.num_agents
    agent_batch, pair_batch = batch_sizes(num_agents, opts)
    rho = step_size(i, opts.schedule)
    adjacency = graph.adjacency
    link = phi_link_weights(state.lam, hyper)

    agents = sample_agents(num_agents, agent_batch, rng)
    sampled: SampledPairs = []
    for n in agents:
        n = int(n)
        partners = sample_pairs(n, num_agents, pair_batch, rng)
        if state.phi is None:
            reverse = log_normalize(expected_log_pi(state.gamma[partners]))
            forward, backward = pair_memberships(n, partners, reverse, state.gamma, adjacency, link)
            sampled.append(PairBatch(n, partners, forward, backward))
        else:
            update_phi_agent(n, partners, state, hyper, adjacency, link=link)
            forward = None
            sampled.append(PairBatch(n, partners))
        update_psi_agent(n, state, obs)
        svisit_update_gamma(n, partners, state, hyper, rho, opts, obs, pair_rows=forward)
        update_xi_agent(n, state, obs)

    svisit_update_lambda(sampled, state, graph, hyper, rho, opts)
    if i > opts.warmup_iters:
        svisit_update_nu(agents, state, obs, rho, opts)
    stalls = svisit_update_mu(agents, state, hyper, opts)
    return rho, stalls


def run_svisit(obs: ObservationSet, graph: SocialGraph, hyper: Hyperparameters,
               opts: Optional[SvisitOptions] = None,
               state: Optional[VariationalState] = None) -> Tuple[VariationalState, Trace]:
    """Iterate until the smoothed max |delta nu| drops below tol or ``max_iters``.

    A fresh state stores no pair memberships; pass a state with ``phi`` to
    keep them for every pair. Warm-up iterations are traced without a
    smoothed change and never stop the run.
    """
    opts = opts or SvisitOptions()
    check_dimensions(obs, graph, hyper)
    batch_sizes(obs.num_agents, opts)
    root = RngStream(opts.seed)
    if state is None:
        state = init_state(obs, graph, hyper, root.substream(0), dense_phi=False)
    batches = root.substream(1)
    trace = Trace(method="svisit")
    smoothed: Optional[float] = None
    started = time.perf_counter()

    for iteration in range(1, opts.max_iters + 1):
        tick = time.perf_counter()
        nu_before = state.nu.copy()
        gamma_before = state.gamma.copy()

        rho, stalls = svisit_iteration(iteration, state, obs, graph, hyper, opts, batches)

        nu_change = float(np.max(np.abs(state.nu - nu_before)))
        gamma_change = float(np.max(np.abs(state.gamma - gamma_before)))
        if iteration > opts.warmup_iters:
            smoothed = nu_change if smoothed is None else opts.smoothing * smoothed + (1 - opts.smoothing) * nu_change
        trace.records.append(IterationRecord(
            iteration=iteration,
            nu_change=nu_change,
            gamma_change=gamma_change,
            smoothed_nu_change=smoothed,
            step_size=rho,
            mu_stalls=stalls,
            seconds=time.perf_counter() - tick,
        ))
        logger.debug(
            f"S-VISIT iteration {iteration}: rho={rho:.4f}, max dnu={nu_change:.3e}, smoothed={smoothed}"
        )
        if smoothed is not None and smoothed < opts.tol:
            trace.converged = True
            break

    trace.seconds = time.perf_counter() - started
    status = "converged" if trace.converged else "stopped at max_iters"
    logger.info(f"S-VISIT {status} after {trace.iterations} iterations ({trace.seconds:.2f}s)")
    return state, trace
