"""``experiment``: Monte Carlo sweeps over one generator field."""
import argparse
import logging

from truthnet.config import get_settings
from truthnet.dependencies import (
    add_generator_arguments,
    add_hyperparameter_arguments,
    add_output_arguments,
    add_solver_arguments,
    build_gen_config,
    build_hyperparameters,
    build_svisit_options,
    build_visit_options,
    method_list,
    resolve_output_dir,
)
from truthnet.errors import EXIT_OK, CliUsageError
from truthnet.experiments.evalkit import TrialSpec, sweep
from truthnet.models.options import SweepSpec
from truthnet.repositories.report_repository import SWEEP_FILE, write_sweep

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("experiment", help="Monte Carlo accuracy/MSE over a parameter sweep")
    parser.add_argument("--sweep", default=None, help="e.g. sparsity=0.7,0.75,0.8 (default: the generator value)")
    parser.add_argument("--mc", type=int, default=1, help="Monte Carlo runs per sweep value")
    parser.add_argument("--methods", type=method_list, default=["visit", "svisit", "majority"])
    parser.add_argument("--workers", type=int, default=get_settings().workers, help="worker processes")
    add_generator_arguments(parser)
    add_hyperparameter_arguments(parser)
    add_solver_arguments(parser)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--timing", action="store_true", help="record wall-clock seconds in the CSV")
    add_output_arguments(parser)
    parser.set_defaults(handler=cmd_experiment)


def cmd_experiment(args: argparse.Namespace) -> int:
    """Write sweep.csv: one row per (method, value, run) then one mean row per (method, value)."""
    if args.mc < 1:
        raise CliUsageError(f"--mc must be at least 1, got {args.mc}")
    if args.workers < 1:
        raise CliUsageError(f"--workers must be at least 1, got {args.workers}")
    generator = build_gen_config(args)
    spec = SweepSpec.parse(args.sweep) if args.sweep else SweepSpec(field="sparsity", values=[generator.sparsity])

    trial = TrialSpec(
        generator=generator,
        methods=args.methods,
        hyper=build_hyperparameters(args, generator.num_states),
        visit=build_visit_options(args),
        svisit=build_svisit_options(args),
    )
    logger.info(
        f"Sweeping {spec.field} over {spec.values} with {args.mc} run(s) of {', '.join(args.methods)}"
    )
    points = sweep(trial, spec.field, spec.values, args.mc, args.seed, args.workers)
    write_sweep(resolve_output_dir(args) / SWEEP_FILE, points, args.methods, args.timing, spec.field)
    return EXIT_OK
