"""``generate``: write a synthetic dataset."""
import argparse
import logging

from truthnet.dependencies import add_generator_arguments, add_output_arguments, build_gen_config, resolve_output_dir
from truthnet.errors import EXIT_OK
from truthnet.experiments.generator import generate
from truthnet.inference.mathkernels import RngStream
from truthnet.repositories.dataset_repository import write_dataset

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("generate", help="sample a synthetic dataset")
    add_generator_arguments(parser)
    parser.add_argument("--seed", type=int, default=0)
    add_output_arguments(parser)
    parser.set_defaults(handler=cmd_generate)


def cmd_generate(args: argparse.Namespace) -> int:
    """Write observations.csv, network.csv, truth.csv and gen_meta.json."""
    config = build_gen_config(args)
    obs, graph, truth = generate(config, RngStream(config.seed))
    paths = write_dataset(resolve_output_dir(args), obs, graph, truth, config)
    logger.info(f"Dataset written to {paths['observations'].parent}")
    return EXIT_OK
