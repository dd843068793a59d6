#!/usr/bin/env python3

import argparse
import logging
import os
import sys

from agediffusion import __version__
from agediffusion.controllers.homophily_controller import cmd_homophily
from agediffusion.controllers.metrics_controller import cmd_metrics
from agediffusion.controllers.pipeline import load_config
from agediffusion.controllers.run_controller import SWEEP_PARAMETERS, cmd_run, cmd_sweep
from agediffusion.controllers.synth_controller import cmd_synth
from agediffusion.exceptions import AgeDiffusionError, StageError
from agediffusion.models.labeling import PPS_SCOPES
from agediffusion.models.run_config import RunConfig
from agediffusion.models.synth import KERNELS, PYRAMIDS, SynthConfig
from agediffusion.tables import FORMATS

logger = logging.getLogger(__name__)

LOG_LEVEL = os.getenv('AGEDIFFUSION_LOG_LEVEL', 'INFO')
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help="key = value config file")
    parser.add_argument('-o', '--output', help="output directory")
    parser.add_argument('--rng-seed', type=int, help="global experiment seed")
    parser.add_argument('--format', choices=FORMATS, help="table format")
    parser.add_argument('-v', '--verbose', action='count', default=0, help="more logging")


def _pipeline(parser: argparse.ArgumentParser) -> None:
    _common(parser)
    parser.add_argument('--edges', help="edge list file")
    parser.add_argument('--labels', help="label file (node_id<TAB>value)")
    parser.add_argument('--label-mode', choices=('age', 'category'))
    parser.add_argument('--synth', help="synth config file used instead of --edges/--labels")
    parser.add_argument('--age-bins', help="age cut points, e.g. 25,35,50")
    parser.add_argument('--seed-fraction', type=float)
    parser.add_argument('--prune-cap', type=int)
    parser.add_argument('--lambda', dest='lam', type=float)
    parser.add_argument('--iterations', type=int)
    parser.add_argument('--masked', dest='masked', action='store_const', const=True)
    parser.add_argument('--unmasked', dest='masked', action='store_const', const=False)
    parser.add_argument('--use-weights', dest='use_weights', action='store_const', const=True)
    parser.add_argument('--pps', dest='pps', action='store_const', const=True)
    parser.add_argument('--no-pps', dest='pps', action='store_const', const=False)
    parser.add_argument('--pps-scope', choices=PPS_SCOPES)
    parser.add_argument('--tau', type=float)
    parser.add_argument('--threads', type=int)
    parser.add_argument('--population-floor', type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='agediffusion',
        description="Age group inference by reaction-diffusion on communication graphs")
    parser.add_argument('--version', action='version', version=__version__)
    sub = parser.add_subparsers(dest='command', required=True)

    synth = sub.add_parser('synth', help="generate a synthetic age-labeled graph")
    _common(synth)
    synth.add_argument('-n', '--nodes', dest='n', type=int)
    synth.add_argument('--mean-degree', type=float)
    synth.add_argument('--pyramid', choices=PYRAMIDS)
    synth.add_argument('--kernel', choices=KERNELS)
    synth.add_argument('--scale', type=float)
    synth.add_argument('--bump-weight', type=float)
    synth.add_argument('--client-fraction', type=float)
    synth.add_argument('--labeled-fraction', type=float)

    _pipeline(sub.add_parser('run', help="propagate, label and evaluate"))

    sweep = sub.add_parser('sweep', help="accuracy as a function of one parameter")
    _pipeline(sweep)
    sweep.add_argument('--param', required=True, choices=sorted(SWEEP_PARAMETERS))
    sweep.add_argument('--values', required=True, help="comma separated values")

    homophily = sub.add_parser('homophily', help="age assortativity matrices and profile")
    _pipeline(homophily)
    homophily.add_argument('--shuffle-labels', dest='shuffle_labels', action='store_const', const=True)
    homophily.add_argument('--shuffles', type=int)
    homophily.add_argument('--eps', type=float)

    _pipeline(sub.add_parser('metrics', help="node metrics without propagation"))
    return parser


def configure_logging(verbose: int) -> None:
    level = logging.DEBUG if verbose else getattr(logging, LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def _overrides(args: argparse.Namespace, klass) -> dict:
    """Flag values keyed by config key; unset flags are None and ignored"""
    values = vars(args)
    return {key: values[attr] for attr, key in klass.attribute_map.items() if attr in values}


def run_command(args: argparse.Namespace):
    if args.command == 'synth':
        return cmd_synth(load_config(SynthConfig, args.config, _overrides(args, SynthConfig)))

    overrides = _overrides(args, RunConfig)
    overrides['iterations'] = args.iterations
    cfg = load_config(RunConfig, args.config, overrides)
    if args.command == 'run':
        return cmd_run(cfg)
    if args.command == 'sweep':
        return cmd_sweep(cfg, args.param, args.values)
    if args.command == 'homophily':
        return cmd_homophily(cfg)
    return cmd_metrics(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        run_command(args)
    except StageError as e:
        logger.error("%s", e)
        return e.exit_code
    except AgeDiffusionError as e:
        logger.error("config: %s", e)
        return e.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
