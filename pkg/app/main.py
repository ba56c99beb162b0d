#!/usr/bin/env python3
"""
Supervisory heat-pump control toolkit.

Identifies a house thermal model, plans set-points with a receding-horizon
linear program, simulates the closed loop against benchmark policies and
estimates the resulting savings. Every command is driven by one YAML file.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional, Tuple

# Add src directory to Python path
src_dir = Path(__file__).parent / 'src'
sys.path.insert(0, str(src_dir))

from app import HeatingControlApp  # noqa: E402
from config import ConfigError, load_run_config  # noqa: E402
from services.analysis import AnalysisError  # noqa: E402
from services.comfort import ComfortError  # noqa: E402
from services.data_io import DataFormatError  # noqa: E402
from services.identification import IdentificationError  # noqa: E402
from services.lp_solver import LpError  # noqa: E402
from services.mpc import OcpError  # noqa: E402
from services.plant import PlantError  # noqa: E402
from services.simulator import SimulationError  # noqa: E402
from utils.date_utils import parse_instant  # noqa: E402
from utils.logging_utils import setup_logging  # noqa: E402


DOMAIN_ERRORS = (ConfigError, DataFormatError, IdentificationError, PlantError, LpError,
                 OcpError, ComfortError, SimulationError, AnalysisError)


def _trace_argument(value: str) -> Tuple[str, Path]:
    policy, sep, path = value.partition('=')
    if not sep or not policy or not path:
        raise argparse.ArgumentTypeError(f"expected POLICY=PATH, got '{value}'")
    return policy, Path(path)


def _instant(value: str):
    try:
        return parse_instant(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid ISO-8601 instant '{value}'") from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH',
                        help='configuration file (default: $CONFIGPATH)')
    common.add_argument('--seed', type=int, metavar='N',
                        help='root random seed, overrides app.seed')
    common.add_argument('--out', metavar='DIR',
                        help='output directory, overrides paths.output_dir')
    common.add_argument('--debug', action='store_true', default=None,
                        help='enable debug logging')

    parser = argparse.ArgumentParser(
        prog='heatpump-mpc',
        description='Supervisory model predictive control for heat pumps with backup heat.')
    commands = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')

    commands.add_parser('identify', parents=[common],
                        help='fit the thermal model from the training file')

    for name, text in (('plan', 'solve one planning problem and write the plan'),
                       ('tune', 'sweep discomfort prices at one instant')):
        sub = commands.add_parser(name, parents=[common], help=text)
        sub.add_argument('--start', type=_instant, metavar='ISO8601',
                         help='planning instant (default: simulation.start or first weather sample)')
        sub.add_argument('--t-in', type=float, metavar='C', dest='t_in',
                         help='measured indoor temperature (default: simulation.initial_t_in)')

    commands.add_parser('simulate', parents=[common],
                        help='closed-loop run of the configured policy')
    commands.add_parser('compare', parents=[common],
                        help='run candidate and baseline policies on identical weather and seeds')

    analyze = commands.add_parser('analyze', parents=[common],
                                  help='aggregate exported traces and estimate savings')
    analyze.add_argument('--trace', type=_trace_argument, action='append', required=True,
                         metavar='POLICY=PATH',
                         help='trace CSV written by simulate or compare; repeat per policy, '
                              'candidate first')
    analyze.add_argument('--baseline', metavar='POLICY',
                         help='policy used as the baseline (default: last --trace)')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the application."""
    args = build_parser().parse_args(argv)
    logger = setup_logging(console_logging=True, file_logging=False, debug=bool(args.debug))

    try:
        config = load_run_config(args.config, seed=args.seed, output_dir=args.out,
                                 debug=args.debug)
        app = HeatingControlApp(config)
        if args.command == 'identify':
            outputs = app.cmd_identify()
        elif args.command == 'plan':
            outputs = app.cmd_plan(args.start, args.t_in)
        elif args.command == 'tune':
            outputs = app.cmd_tune(args.start, args.t_in)
        elif args.command == 'simulate':
            outputs = app.cmd_simulate()
        elif args.command == 'compare':
            outputs = app.cmd_compare()
        else:
            outputs = app.cmd_analyze(args.trace, args.baseline)
    except DOMAIN_ERRORS as e:
        logger.error("%s failed: %s", args.command, e)
        return 1
    except KeyboardInterrupt:
        logger.info("Application interrupted by user")
        return 1

    for kind, path in sorted(outputs.items()):
        logger.info("Wrote %s: %s", kind, path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
