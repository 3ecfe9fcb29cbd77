"""Shared command-line argument groups and the builders that turn them into models."""
import argparse
from pathlib import Path
from typing import List, Optional

import numpy as np

from truthnet.config import get_settings
from truthnet.errors import CliUsageError
from truthnet.experiments.generator import PRESET_DIAGONALS, PRESETS, GenConfig
from truthnet.inference.mathkernels import SpdMatrix
from truthnet.models.hyperparameters import Hyperparameters
from truthnet.models.options import LaplaceOptions, StepSchedule, SvisitOptions, VisitOptions

METHODS = ("visit", "svisit", "majority")


def float_list(text: str) -> List[float]:
    """``0.1,0.2`` -> [0.1, 0.2]"""
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def float_matrix(text: str) -> List[List[float]]:
    """``a,b;c,d`` -> [[a, b], [c, d]]"""
    return [float_list(row) for row in text.split(";") if row.strip()]


def method_list(text: str) -> List[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise argparse.ArgumentTypeError(f"methods must be among {', '.join(METHODS)}, got {text!r}")
    return methods


def add_output_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, help="output directory (default: settings.output_dir)")


def add_generator_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("synthetic data")
    group.add_argument("--preset", choices=PRESETS, default=None,
                       help="'paper' fixes N=80, L=200, K=4, R=6; 'custom' uses the flags below")
    group.add_argument("--n", type=int, default=None, help="number of agents")
    group.add_argument("--l", type=int, default=None, help="number of events")
    group.add_argument("--k", type=int, default=None, help="true number of communities")
    group.add_argument("--r", type=int, default=None, help="number of states")
    group.add_argument("--diag", type=float_list, default=None, help="diagonal d_k of each community matrix")
    group.add_argument("--beta", type=float_list, default=None, help="in-community link probability (one or K values)")
    group.add_argument("--gen-epsilon", type=float, default=None, help="cross-community link probability")
    group.add_argument("--sparsity", type=float, default=None, help="proportion of unobserved agent/event cells")
    group.add_argument("--switching", action="store_true", help="draw the community of every report independently")
    group.add_argument("--perturb", action="store_true", help="draw agent matrices around the community matrices")
    group.add_argument("--concentration", type=float, default=None, help="Dirichlet concentration for --perturb")


def add_hyperparameter_arguments(parser: argparse.ArgumentParser) -> None:
    settings = get_settings()
    group = parser.add_argument_group("hyperparameters")
    group.add_argument("--alpha", type=float, default=settings.alpha)
    group.add_argument("--g0", type=float, default=settings.g0)
    group.add_argument("--h0", type=float, default=settings.h0)
    group.add_argument("--log-mean", type=float_list, default=None,
                       help=f"prior mean M of ln omega rows: one value or R values (default {settings.log_mean})")
    group.add_argument("--log-var", type=float, default=settings.log_var, help="V = log_var * I")
    group.add_argument("--log-cov", type=float_matrix, default=None, help="full V as 'a,b;c,d' (overrides --log-var)")
    group.add_argument("--epsilon", type=float, default=settings.epsilon, help="cross-community link probability")
    group.add_argument("--max-communities", type=int, default=settings.max_communities, help="K_s")


def add_solver_arguments(parser: argparse.ArgumentParser) -> None:
    settings = get_settings()
    group = parser.add_argument_group("solvers")
    group.add_argument("--max-iters", type=int, default=None,
                       help=f"default {settings.visit_max_iters} (visit), {settings.svisit_max_iters} (svisit)")
    group.add_argument("--tol", type=float, default=None)
    group.add_argument("--parallel-sweep", action="store_true", help="VISIT agent blocks on a snapshot, in threads")
    group.add_argument("--threads", type=int, default=4, help="threads for --parallel-sweep")
    group.add_argument("--warmup-sweeps", type=int, default=10, help="VISIT sweeps with the event beliefs frozen")
    group.add_argument("--mu-rounds", type=int, default=3, help="VISIT community confusion refits per iteration")
    group.add_argument("--agent-batch", type=int, default=None)
    group.add_argument("--pair-batch", type=int, default=None)
    group.add_argument("--tau", type=float, default=settings.svisit_tau)
    group.add_argument("--kappa", type=float, default=settings.svisit_kappa)
    group.add_argument("--smoothing", type=float, default=0.9)
    group.add_argument("--inner-mu-steps", type=int, default=10)
    group.add_argument("--warmup-iters", type=int, default=50, help="S-VISIT iterations with the event beliefs frozen")
    group.add_argument("--unbiased-scaling", action="store_true",
                       help="(N-1)/|S_p| and per-event observer scaling instead of N/|S|")
    group.add_argument("--laplace-steps", type=int, default=50)


def build_gen_config(args: argparse.Namespace, preset: Optional[str] = None) -> GenConfig:
    name = preset or args.preset or "custom"
    if name == "custom" and args.diag is None and args.k is not None and args.k != len(PRESET_DIAGONALS):
        raise CliUsageError(f"--k {args.k} needs --diag with {args.k} values")
    return GenConfig.preset(
        name,
        num_agents=args.n,
        num_events=args.l,
        num_communities=args.k,
        num_states=args.r,
        diag_values=args.diag,
        beta=args.beta,
        epsilon=args.gen_epsilon,
        sparsity=args.sparsity,
        switching=args.switching or None,
        perturb=args.perturb or None,
        concentration=args.concentration,
        seed=args.seed,
    )


def build_hyperparameters(args: argparse.Namespace, num_states: int) -> Hyperparameters:
    log_mean = args.log_mean
    if log_mean is None:
        mean = np.full(num_states, get_settings().log_mean)
    elif len(log_mean) == 1:
        mean = np.full(num_states, log_mean[0])
    else:
        mean = np.asarray(log_mean)
    cov = SpdMatrix(args.log_cov) if args.log_cov is not None else SpdMatrix.isotropic(num_states, args.log_var)
    return Hyperparameters(
        alpha=args.alpha,
        g0=args.g0,
        h0=args.h0,
        log_mean=mean,
        log_cov=cov,
        epsilon=args.epsilon,
        max_communities=args.max_communities,
        num_states=num_states,
    )


def build_visit_options(args: argparse.Namespace) -> VisitOptions:
    settings = get_settings()
    return VisitOptions(
        max_iters=args.max_iters or settings.visit_max_iters,
        tol=args.tol if args.tol is not None else settings.visit_tol,
        warmup_sweeps=args.warmup_sweeps,
        mu_rounds=args.mu_rounds,
        laplace=LaplaceOptions(max_steps=args.laplace_steps),
        parallel_sweep=args.parallel_sweep,
        workers=args.threads,
        seed=args.seed,
    )


def build_svisit_options(args: argparse.Namespace) -> SvisitOptions:
    settings = get_settings()
    return SvisitOptions(
        agent_batch=args.agent_batch,
        pair_batch=args.pair_batch,
        schedule=StepSchedule(tau=args.tau, kappa=args.kappa),
        max_iters=args.max_iters or settings.svisit_max_iters,
        tol=args.tol if args.tol is not None else settings.svisit_tol,
        smoothing=args.smoothing,
        inner_mu_steps=args.inner_mu_steps,
        warmup_iters=args.warmup_iters,
        unbiased_pair_scaling=args.unbiased_scaling,
        laplace=LaplaceOptions(max_steps=args.laplace_steps),
        seed=args.seed,
    )


def resolve_output_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or get_settings().output_dir)
