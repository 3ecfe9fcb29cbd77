"""``infer``: estimate event states from a file dataset or a generated one."""
import argparse
import logging
from pathlib import Path

from pydantic import ValidationError

from truthnet.config import get_settings
from truthnet.dependencies import (
    METHODS,
    add_generator_arguments,
    add_hyperparameter_arguments,
    add_output_arguments,
    add_solver_arguments,
    build_gen_config,
    build_hyperparameters,
    build_svisit_options,
    build_visit_options,
    resolve_output_dir,
)
from truthnet.errors import EXIT_OK, CliUsageError
from truthnet.experiments.evalkit import run_method
from truthnet.experiments.generator import generate
from truthnet.inference.mathkernels import RngStream
from truthnet.models.options import RunConfig
from truthnet.repositories.dataset_repository import ID_MAP_FILE, IdMap, load_real_dataset, write_id_map
from truthnet.repositories.report_repository import ReportRepository

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("infer", help="run VISIT, S-VISIT or majority voting")
    parser.add_argument("--method", choices=METHODS, required=True)
    data = parser.add_argument_group("file dataset")
    data.add_argument("--observations", type=Path, default=None)
    data.add_argument("--network", type=Path, default=None)
    data.add_argument("--truth", type=Path, default=None, help="truth.csv, needed by --flip-fraction")
    data.add_argument("--num-states", type=int, default=None, help="R (default: largest label + 1)")
    data.add_argument("--flip-fraction", type=float, default=0.0,
                      help="per event, this fraction of N non-reporters report the opposite of the truth")
    data.add_argument("--flip-seed", type=int, default=0)
    add_generator_arguments(parser)
    add_hyperparameter_arguments(parser)
    add_solver_arguments(parser)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--timing", action="store_true", help="record wall-clock seconds in the report")
    add_output_arguments(parser)
    parser.set_defaults(handler=cmd_infer)


def run_config(args: argparse.Namespace) -> RunConfig:
    try:
        return RunConfig(
            method=args.method,
            preset=args.preset,
            observations=str(args.observations) if args.observations is not None else None,
            network=str(args.network) if args.network is not None else None,
            seed=args.seed,
            output_dir=str(resolve_output_dir(args)),
        )
    except ValidationError as exc:
        raise CliUsageError(str(exc.errors()[0]["msg"])) from exc


def cmd_infer(args: argparse.Namespace) -> int:
    """Write report.json (and id_map.json for file datasets)."""
    config = run_config(args)
    out_dir = Path(config.output_dir)
    if config.observations is not None:
        loaded = load_real_dataset(
            Path(config.observations), Path(config.network), args.truth,
            num_states=args.num_states, flip_fraction=args.flip_fraction, flip_seed=args.flip_seed,
        )
        obs, graph, id_map = loaded.obs, loaded.graph, loaded.id_map
        out_dir.mkdir(parents=True, exist_ok=True)
        write_id_map(out_dir / ID_MAP_FILE, id_map)
    else:
        gen_config = build_gen_config(args, preset=config.preset)
        obs, graph, _ = generate(gen_config, RngStream(gen_config.seed))
        id_map = IdMap.identity(obs.num_agents, obs.num_events)

    hyper = build_hyperparameters(args, obs.num_states)
    outcome = run_method(config.method, obs, graph, hyper, build_visit_options(args), build_svisit_options(args))
    repository = ReportRepository(out_dir, get_settings().schema_version, timing=args.timing)
    repository.save_report(repository.build_report(config.method, outcome, obs, id_map, hyper))
    return EXIT_OK
