"""Batch Laplace variational inference.

One outer iteration visits every agent in order (pair memberships in both
directions, then report memberships, community weights and confusion
parameters of that agent), and then refreshes the global link
probabilities, event beliefs and community confusion modes. Warm-up sweeps
before the first iteration run the same updates with the event beliefs
frozen at their vote-count start.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

import numpy as np

from truthnet.errors import DimensionMismatchError, DomainError, EmptyEventError
from truthnet.inference.laplace import (  # noqa: F401  re-exported solver ops
    LaplaceBatchFit,
    LaplaceFit,
    LaplaceRowObjective,
    laplace_covariance,
    laplace_gradient,
    laplace_hessian,
    laplace_objective,
)
from truthnet.inference.mathkernels import RngStream, apply_floor, log_normalize, sample_dirichlet
from truthnet.models.dataset import ObservationSet, SocialGraph
from truthnet.models.expectations import expected_log_beta_rows, expected_log_omega, expected_log_pi
from truthnet.models.hyperparameters import Hyperparameters
from truthnet.models.options import LaplaceOptions, VisitOptions
from truthnet.models.reports import IterationRecord, Trace
from truthnet.models.state import VariationalState

logger = logging.getLogger(__name__)


def check_dimensions(obs: ObservationSet, graph: SocialGraph, hyper: Hyperparameters) -> None:
    if obs.num_agents != graph.num_agents:
        raise DimensionMismatchError(
            f"observations cover {obs.num_agents} agents but the graph has {graph.num_agents}"
        )
    if obs.num_states != hyper.num_states:
        raise DimensionMismatchError(
            f"observations use {obs.num_states} states but hyperparameters assume {hyper.num_states}"
        )


def init_state(obs: ObservationSet, graph: SocialGraph, hyper: Hyperparameters, rng: RngStream,
               dense_phi: bool = True) -> VariationalState:
    """Vote-count event beliefs, Dir(1) memberships and prior-mean confusions.

    Without ``dense_phi`` no pair memberships are drawn (``phi`` is None),
    so the report memberships come from the first draws of ``rng``.
    """
    check_dimensions(obs, graph, hyper)
    n, l, r = obs.num_agents, obs.num_events, obs.num_states
    k = hyper.max_communities

    votes = np.zeros((l, r))
    np.add.at(votes, (obs.events, obs.labels), 1.0)
    nu = (1.0 + votes) / (1.0 + votes).sum(axis=1, keepdims=True)

    gamma = np.repeat(
        (hyper.alpha / k + (n - 1 + obs.reports_per_agent.astype(float)) / k)[:, None], k, axis=1
    )

    phi = None
    if dense_phi:
        phi = sample_dirichlet(np.ones(k), rng, size=(n, n))
        phi[np.arange(n), np.arange(n)] = 0.0
    psi = sample_dirichlet(np.ones(k), rng, size=obs.num_reports)

    lam = np.tile([hyper.g0, hyper.h0], (k, 1)).astype(float)
    prior_mean = np.exp(hyper.log_mean + 0.5 * np.diag(hyper.log_cov.entries))
    mu = np.broadcast_to(prior_mean, (k, r, r)).copy()
    xi = np.broadcast_to(mu, (n, k, r, r)).copy()

    return VariationalState(phi=phi, psi=psi, gamma=gamma, nu=nu, xi=xi, lam=lam, mu=mu)


def phi_link_weights(lam: np.ndarray, hyper: Hyperparameters) -> Tuple[np.ndarray, np.ndarray]:
    """Per-community coefficients of phi_{m->n} in the phi_{n->m} exponent.

    Returns (linked, unlinked): E ln beta - ln eps and
    E ln(1 - beta) - ln(1 - eps).
    """
    e_log_beta, e_log_not_beta = expected_log_beta_rows(lam)
    return e_log_beta - np.log(hyper.epsilon), e_log_not_beta - np.log1p(-hyper.epsilon)


def update_phi_pair(n: int, m: int, d: int, state: VariationalState,
                    hyper: Hyperparameters) -> Tuple[np.ndarray, np.ndarray]:
    """phi_{n->m} from the current phi_{m->n}, then phi_{m->n} from the fresh one."""
    linked, unlinked = phi_link_weights(state.lam, hyper)
    weight = linked if d else unlinked
    forward = log_normalize(state.phi[m, n] * weight + expected_log_pi(state.gamma[n]))
    state.phi[n, m] = forward
    backward = log_normalize(forward * weight + expected_log_pi(state.gamma[m]))
    state.phi[m, n] = backward
    return forward, backward


def pair_memberships(n: int, partners: np.ndarray, reverse: np.ndarray, gamma: np.ndarray,
                     adjacency: np.ndarray, link: Tuple[np.ndarray, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """(phi_{n->m}, phi_{m->n}) for every partner m given the current phi_{m->n} rows in ``reverse``."""
    linked, unlinked = link
    weights = np.where(adjacency[n, partners][:, None] > 0, linked, unlinked)
    forward = log_normalize(reverse * weights + expected_log_pi(gamma[n]))
    backward = log_normalize(forward * weights + expected_log_pi(gamma[partners]))
    return forward, backward


def update_phi_agent(n: int, partners: np.ndarray, state: VariationalState, hyper: Hyperparameters,
                     adjacency: np.ndarray, source: Optional[VariationalState] = None,
                     link: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                     write_reverse: bool = True) -> None:
    """``update_phi_pair`` for (n, m) over all ``partners`` at once.

    The pairs touch disjoint entries, so the batched form equals the loop.
    ``source`` supplies the values read (defaults to ``state``); with
    ``write_reverse`` off only phi_{n->.} is written.
    """
    if partners.size == 0:
        return
    source = state if source is None else source
    link = link if link is not None else phi_link_weights(source.lam, hyper)
    forward, backward = pair_memberships(n, partners, source.phi[partners, n], source.gamma, adjacency, link)
    state.phi[n, partners] = forward
    if write_reverse:
        state.phi[partners, n] = backward


def update_psi(n: int, l: int, y: int, state: VariationalState) -> np.ndarray:
    """Membership row of the report (n, l, y); not written back."""
    elog_omega = expected_log_omega(state.xi[n])           # (K, R, R)
    logits = elog_omega[:, :, y] @ state.nu[l] + expected_log_pi(state.gamma[n])
    return log_normalize(logits)


def update_psi_agent(n: int, state: VariationalState, obs: ObservationSet,
                     source: Optional[VariationalState] = None) -> None:
    """Write the membership rows of every report of agent n."""
    idx = obs.reports_by_agent[n]
    if idx.size == 0:
        return
    source = state if source is None else source
    elog_omega = expected_log_omega(source.xi[n])[:, :, obs.labels[idx]]   # (K, R, Mn)
    logits = np.einsum("mr,krm->mk", source.nu[obs.events[idx]], elog_omega)
    state.psi[idx] = log_normalize(logits + expected_log_pi(source.gamma[n]))


def gamma_target(n: int, state: VariationalState, hyper: Hyperparameters, obs: ObservationSet,
                 partners: Optional[np.ndarray] = None, pair_scale: float = 1.0,
                 pair_rows: Optional[np.ndarray] = None) -> np.ndarray:
    """alpha/K + pair_scale * sum over partners of phi_{n->m} + sum of n's psi rows.

    With no ``partners`` the sum runs over every other agent. ``pair_rows``
    supplies the phi_{n->m} rows directly when they are not stored in the state.
    """
    k = state.num_communities
    if pair_rows is not None:
        pair_term = pair_rows.sum(axis=0)
    elif partners is None:
        pair_term = state.phi[n].sum(axis=0)
    else:
        pair_term = state.phi[n, partners].sum(axis=0)
    report_term = state.psi[obs.reports_by_agent[n]].sum(axis=0)
    return hyper.alpha / k + pair_scale * pair_term + report_term


def update_gamma(n: int, state: VariationalState, hyper: Hyperparameters, obs: ObservationSet) -> np.ndarray:
    state.gamma[n] = apply_floor(gamma_target(n, state, hyper, obs))
    return state.gamma[n]


def update_xi(n: int, k: int, state: VariationalState, obs: ObservationSet) -> np.ndarray:
    """mu_k plus the soft counts of agent n's reports attributed to community k."""
    idx = obs.reports_by_agent[n]
    r = state.num_states
    counts = np.zeros((r, r))
    if idx.size:
        weighted = state.psi[idx, k][:, None] * state.nu[obs.events[idx]]     # (Mn, R)
        np.add.at(counts.T, obs.labels[idx], weighted)
    state.xi[n, k] = apply_floor(state.mu[k] + counts)
    return state.xi[n, k]


def update_xi_agent(n: int, state: VariationalState, obs: ObservationSet,
                    source: Optional[VariationalState] = None) -> None:
    """``update_xi`` for every community of agent n."""
    source = state if source is None else source
    idx = obs.reports_by_agent[n]
    r = state.num_states
    if idx.size:
        onehot = np.eye(r)[obs.labels[idx]]
        counts = np.einsum("mk,mr,mq->krq", state.psi[idx], source.nu[obs.events[idx]], onehot)
    else:
        counts = 0.0
    state.xi[n] = apply_floor(source.mu + counts)


def update_lambda(state: VariationalState, graph: SocialGraph, hyper: Hyperparameters) -> np.ndarray:
    """(G_k, H_k) summed over ordered pairs n != m."""
    agreement = state.phi * state.phi.transpose(1, 0, 2)       # phi_{n->m,k} phi_{m->n,k}
    linked = graph.adjacency
    unlinked = 1.0 - linked - np.eye(graph.num_agents)
    state.lam[:, 0] = hyper.g0 + np.einsum("nm,nmk->k", linked, agreement)
    state.lam[:, 1] = hyper.h0 + np.einsum("nm,nmk->k", unlinked, agreement)
    return apply_floor(state.lam)


def report_evidence(state: VariationalState, obs: ObservationSet,
                    reports: Optional[np.ndarray] = None) -> np.ndarray:
    """sum_k psi_{n,k}^l E ln omega_{n,k}(., y) per report, shape (len(reports), R)."""
    reports = np.arange(obs.num_reports) if reports is None else reports
    agents, rows = np.unique(obs.agents[reports], return_inverse=True)
    elog_omega = expected_log_omega(state.xi[agents])                 # only the reporting agents
    per_report = elog_omega[rows.reshape(-1), :, :, obs.labels[reports]]     # (M, K, R)
    return np.einsum("mk,mkr->mr", state.psi[reports], per_report)


def update_nu(l: int, state: VariationalState, obs: ObservationSet) -> np.ndarray:
    idx = obs.reports_by_event[l]
    if idx.size == 0:
        raise EmptyEventError([l])
    elog_omega = expected_log_omega(state.xi[obs.agents[idx]])   # (Nl, K, R, R)
    evidence = np.einsum("mk,mkr->r", state.psi[idx], elog_omega[np.arange(idx.size), :, :, obs.labels[idx]])
    state.nu[l] = log_normalize(evidence)
    return state.nu[l]


def update_nu_all(state: VariationalState, obs: ObservationSet) -> None:
    """``update_nu`` for every event from one evidence pass."""
    logits = np.zeros((obs.num_events, obs.num_states))
    np.add.at(logits, obs.events, report_evidence(state, obs))
    state.nu[:] = log_normalize(logits)


def mu_objective(k: int, r: int, state: VariationalState, hyper: Hyperparameters) -> LaplaceRowObjective:
    return LaplaceRowObjective.from_xi_rows(state.xi[:, k, r], hyper.log_mean, hyper.log_cov)


def update_mu(k: int, r: int, state: VariationalState, hyper: Hyperparameters,
              opts: Optional[LaplaceOptions] = None) -> LaplaceFit:
    """Laplace mode of community row (k, r), warm-started at the current mu."""
    opts = opts or LaplaceOptions()
    fit = mu_objective(k, r, state, hyper).maximize(state.mu[k, r], opts)
    if fit.stalled:
        logger.warning(f"Laplace search for community {k} row {r} stalled after {fit.steps} steps")
    state.mu[k, r] = apply_floor(fit.mode.copy())
    return fit


def update_mu_all(state: VariationalState, hyper: Hyperparameters, opts: LaplaceOptions,
                  max_steps: Optional[int] = None, agents: Optional[np.ndarray] = None,
                  scale: float = 1.0) -> int:
    """Refit every community row; returns the number of stalled searches.

    ``agents``/``scale`` restrict the agent sum to a subset and rescale it.
    """
    xi = state.xi if agents is None else state.xi[agents]
    elog_sum = expected_log_omega(xi).sum(axis=0) if xi.shape[0] else np.zeros_like(state.mu)
    r = state.num_states
    objective = LaplaceRowObjective(
        scale * xi.shape[0], scale * elog_sum.reshape(-1, r), hyper.log_mean, hyper.log_cov
    )
    fit = objective.maximize_rows(state.mu.reshape(-1, r), opts, max_steps=max_steps)
    state.mu[:] = fit.modes.reshape(state.mu.shape)
    apply_floor(state.mu)
    stalls = int(fit.stalled.sum())
    if stalls:
        logger.warning(f"{stalls} Laplace searches stalled")
    return stalls


def refresh_xi(state: VariationalState, obs: ObservationSet) -> None:
    """``update_xi_agent`` for every agent."""
    for n in range(obs.num_agents):
        update_xi_agent(n, state, obs)


def refit_mu(state: VariationalState, obs: ObservationSet, hyper: Hyperparameters, opts: VisitOptions) -> int:
    """``opts.mu_rounds`` community refits, refreshing the agent confusions between them.

    Returns the stalled searches over all rounds.
    """
    stalls = 0
    for round_index in range(opts.mu_rounds):
        if round_index:
            refresh_xi(state, obs)
        stalls += update_mu_all(state, hyper, opts.laplace)
    return stalls


def _agent_block(n: int, target: VariationalState, source: VariationalState, obs: ObservationSet,
                 adjacency: np.ndarray, hyper: Hyperparameters, link, write_reverse: bool) -> None:
    partners = np.delete(np.arange(obs.num_agents), n)
    update_phi_agent(n, partners, target, hyper, adjacency, source=source, link=link, write_reverse=write_reverse)
    update_psi_agent(n, target, obs, source=source)
    update_gamma(n, target, hyper, obs)
    update_xi_agent(n, target, obs, source=source)


def visit_sweep(state: VariationalState, obs: ObservationSet, graph: SocialGraph,
                hyper: Hyperparameters, opts: VisitOptions) -> None:
    """All per-agent blocks of one iteration.

    Sequentially every block sees the values written before it. In parallel
    mode each block reads the iteration-start snapshot and writes only its
    own rows (phi_{n->.}, psi of n's reports, gamma_n, xi_n).
    """
    adjacency = graph.adjacency
    link = phi_link_weights(state.lam, hyper)
    if not opts.parallel_sweep:
        for n in range(obs.num_agents):
            _agent_block(n, state, state, obs, adjacency, hyper, link, write_reverse=True)
        return
    snapshot = state.copy()
    with ThreadPoolExecutor(max_workers=opts.workers) as pool:
        list(pool.map(
            lambda n: _agent_block(n, state, snapshot, obs, adjacency, hyper, link, write_reverse=False),
            range(obs.num_agents),
        ))


def warm_up(state: VariationalState, obs: ObservationSet, graph: SocialGraph,
            hyper: Hyperparameters, opts: VisitOptions) -> None:
    """``opts.warmup_sweeps`` iterations that leave the event beliefs untouched.

    Memberships, link probabilities and confusion modes settle against the
    starting beliefs.
    """
    for sweep in range(1, opts.warmup_sweeps + 1):
        visit_sweep(state, obs, graph, hyper, opts)
        update_lambda(state, graph, hyper)
        stalls = refit_mu(state, obs, hyper, opts)
        logger.debug(f"VISIT warm-up sweep {sweep}: {stalls} stalled Laplace searches")


def run_visit(obs: ObservationSet, graph: SocialGraph, hyper: Hyperparameters,
              opts: Optional[VisitOptions] = None,
              state: Optional[VariationalState] = None) -> Tuple[VariationalState, Trace]:
    """Warm up, then iterate until max |delta nu| < tol or ``max_iters``.

    Warm-up sweeps are not iterations: they never appear in the trace.
    """
    opts = opts or VisitOptions()
    check_dimensions(obs, graph, hyper)
    if state is None:
        state = init_state(obs, graph, hyper, RngStream(opts.seed).substream(0))
    if state.phi is None:
        raise DomainError("VISIT needs pair memberships for every ordered pair")
    trace = Trace(method="visit")
    started = time.perf_counter()
    warm_up(state, obs, graph, hyper, opts)

    for iteration in range(1, opts.max_iters + 1):
        tick = time.perf_counter()
        nu_before = state.nu.copy()
        gamma_before = state.gamma.copy()

        visit_sweep(state, obs, graph, hyper, opts)
        update_lambda(state, graph, hyper)
        update_nu_all(state, obs)
        stalls = refit_mu(state, obs, hyper, opts)

        nu_change = float(np.max(np.abs(state.nu - nu_before)))
        gamma_change = float(np.max(np.abs(state.gamma - gamma_before)))
        trace.records.append(IterationRecord(
            iteration=iteration,
            nu_change=nu_change,
            gamma_change=gamma_change,
            mu_stalls=stalls,
            seconds=time.perf_counter() - tick,
        ))
        logger.debug(f"VISIT iteration {iteration}: max dnu={nu_change:.3e}, max dgamma={gamma_change:.3e}")
        if nu_change < opts.tol:
            trace.converged = True
            break

    trace.seconds = time.perf_counter() - started
    status = "converged" if trace.converged else "stopped at max_iters"
    logger.info(f"VISIT {status} after {trace.iterations} iterations ({trace.seconds:.2f}s)")
    return state, trace


def estimate_states(nu: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest state index."""
    return np.argmax(np.asarray(nu), axis=1)
