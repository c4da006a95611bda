#!/usr/bin/env python3
"""
ufrkit - Ultimate Forward Rate toolkit

Extracts the UFR from zero-coupon yield curves with Smith-Wilson based
methods, forecasts it and the ultra-long yields out of sample, projects
whole curves from the forecast UFR and attributes forecasts to features.

Every command writes its files to --output-dir and prints a JSON summary on
stdout. Failures print {"error", "message"} instead and exit with 1, or 2
for usage and configuration errors.
"""

import argparse
import json
import logging
import os
import sys
from typing import Callable, Dict, List, Optional

from colorama import Fore, Style

from src.app import UfrToolkit
from src.config.config import Config
from src.errors import ConfigError, UfrKitError, UsageError

logger = logging.getLogger('ufrkit')

METHOD_CHOICES = ('sdf', 'sfr', 'syc', 'zjw')
FEATURE_SET_CHOICES = ('yields_only', 'yields_plus_macro')


class CliParser(argparse.ArgumentParser):
    """Argument parser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def setup_logging(config: Config) -> None:
    """Sets up logging: a log file plus stderr, stdout stays machine-readable."""
    log_dir = os.path.dirname(config.LOG_FILE)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, str(config.LOG_LEVEL).upper(), logging.INFO),
        format=config.LOG_FORMAT,
        handlers=[
            logging.FileHandler(config.LOG_FILE),
            logging.StreamHandler(sys.stderr)
        ],
        force=True
    )


def _csv_list(value: str) -> List[str]:
    items = [item.strip() for item in value.split(',') if item.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parses command line arguments."""
    common = CliParser(add_help=False)
    common.add_argument('--seed', type=int, help='Root seed (UFRKIT_SEED overrides it)')
    common.add_argument('--config', type=str, help='INI configuration file')
    common.add_argument('--output-dir', type=str, help='Directory for output files')
    common.add_argument('--verbose', '-v', action='store_true', help='Verbose output')

    data = CliParser(add_help=False)
    data.add_argument('--yields', required=True, help='Yields CSV: date, y<years>...')
    data.add_argument('--macro', help='Macro CSV: date, variables...')
    data.add_argument('--groups', help='Groups CSV: variable,group')

    parser = CliParser(
        description="Ultimate Forward Rate extraction, forecasting and attribution",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py synth --output-dir out --seed 7
  python main.py ufr --yields out/yields.csv --method zjw --output-dir out
  python main.py forecast --yields out/yields.csv --macro out/macro.csv --groups out/groups.csv \\
      --feature-set yields_plus_macro --model ols,ridge --target ufr,y30 --output-dir out
        """
    )
    commands = parser.add_subparsers(dest='command', parser_class=CliParser)
    commands.required = True

    commands.add_parser('synth', parents=[common], help='Write a synthetic data set')

    ufr = commands.add_parser('ufr', parents=[common, data], help='Extract a UFR series')
    ufr.add_argument('--method', choices=METHOD_CHOICES + ('all',), default='zjw')
    ufr.add_argument('--calibrate', action='store_true', help='Calibrate lambda before ZJW')

    commands.add_parser('calibrate-lambda', parents=[common, data], help='Calibrate the ZJW lambda')

    stats = commands.add_parser('stats', parents=[common, data], help='Unit-root and correlation tables')
    stats.add_argument('--method', choices=METHOD_CHOICES, default='sdf')

    forecast = commands.add_parser('forecast', parents=[common, data], help='Rolling out-of-sample forecasts')
    forecast.add_argument('--model', type=_csv_list, default=['ols'], help='Comma-separated model presets')
    forecast.add_argument('--target', type=_csv_list, default=['ufr'], help='ufr and/or yield columns')
    forecast.add_argument('--method', choices=METHOD_CHOICES, default='sdf')
    forecast.add_argument('--feature-set', choices=FEATURE_SET_CHOICES, default='yields_only')
    forecast.add_argument('--window-frac', type=float, help='Training window fraction')

    curve = commands.add_parser('curve-forecast', parents=[common, data], help='UFR-driven yield forecasts')
    curve.add_argument('--model', default='ridge')
    curve.add_argument('--method', choices=METHOD_CHOICES, default='zjw')
    curve.add_argument('--feature-set', choices=FEATURE_SET_CHOICES, default='yields_only')
    curve.add_argument('--window-frac', type=float, help='Training window fraction')

    explain = commands.add_parser('explain', parents=[common, data], help='Shapley attributions')
    explain.add_argument('--model', default='ridge')
    explain.add_argument('--target', default='ufr')
    explain.add_argument('--method', choices=METHOD_CHOICES, default='sdf')
    explain.add_argument('--feature-set', choices=FEATURE_SET_CHOICES, default='yields_plus_macro')
    explain.add_argument('--instances', type=int, default=20)
    explain.add_argument('--permutations', type=int, help='Permutations per instance when sampling')

    plot = commands.add_parser('curve-data', parents=[common, data], help='Fitted and extrapolated curves')
    plot.add_argument('--method', choices=METHOD_CHOICES, default='zjw')
    plot.add_argument('--date', action='append', help='Date to plot (repeatable), default the last')
    plot.add_argument('--max-tau', type=float, default=100.0)

    return parser.parse_args(argv)


def _inputs(toolkit: UfrToolkit, args: argparse.Namespace):
    return toolkit.load_inputs(args.yields, args.macro, args.groups)


def _run_ufr(toolkit, args):
    panel, _ = _inputs(toolkit, args)
    return toolkit.extract_ufr(panel, args.method, args.calibrate)


def _run_calibrate(toolkit, args):
    panel, _ = _inputs(toolkit, args)
    return toolkit.calibrate(panel)


def _run_stats(toolkit, args):
    panel, _ = _inputs(toolkit, args)
    return toolkit.run_stats(panel, args.method)


def _run_forecast(toolkit, args):
    panel, macro = _inputs(toolkit, args)
    return toolkit.forecast(panel, macro, args.model, args.target, args.method, args.feature_set)


def _run_curve_forecast(toolkit, args):
    panel, macro = _inputs(toolkit, args)
    return toolkit.curve_forecast(panel, macro, args.model, args.method, args.feature_set)


def _run_explain(toolkit, args):
    panel, macro = _inputs(toolkit, args)
    return toolkit.explain(panel, macro, args.model, args.target, args.method, args.feature_set,
                           args.instances, args.permutations)


def _run_curve_data(toolkit, args):
    panel, _ = _inputs(toolkit, args)
    return toolkit.curve_data(panel, args.method, args.date, args.max_tau)


COMMANDS: Dict[str, Callable] = {
    'synth': lambda toolkit, args: toolkit.generate_synthetic(),
    'ufr': _run_ufr,
    'calibrate-lambda': _run_calibrate,
    'stats': _run_stats,
    'forecast': _run_forecast,
    'curve-forecast': _run_curve_forecast,
    'explain': _run_explain,
    'curve-data': _run_curve_data,
}


def _load_config(args: argparse.Namespace) -> Config:
    config = Config.load(args.config)
    if args.verbose:
        config.LOG_LEVEL = 'DEBUG'
    window_frac = getattr(args, 'window_frac', None)
    if window_frac is not None:
        config.set_value('window_frac', window_frac)
    return config


def _fail(error: Exception, code: int) -> int:
    print(json.dumps({'error': type(error).__name__, 'message': str(error)}, sort_keys=True))
    print(f"{Fore.RED}✗ {error}{Style.RESET_ALL}", file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main application function.

    Returns:
        int: Exit code (0: success, 1: runtime error, 2: usage error)
    """
    try:
        args = parse_arguments(argv)
        config = _load_config(args)
    except (UsageError, ConfigError) as e:
        return _fail(e, 2)

    setup_logging(config)
    logger.info(f"Running {args.command}...")
    try:
        toolkit = UfrToolkit(config, args.seed, args.output_dir)
        outputs = COMMANDS[args.command](toolkit, args)
    except (UsageError, ConfigError) as e:
        logger.error(f"{args.command} rejected: {e}")
        return _fail(e, 2)
    except UfrKitError as e:
        logger.error(f"{args.command} failed: {e}")
        return _fail(e, 1)
    except KeyboardInterrupt:
        print(f"\n{Fore.YELLOW}Interrupted.{Style.RESET_ALL}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}")
        return _fail(e, 1)

    print(json.dumps({'command': args.command, 'outputs': outputs}, sort_keys=True))
    for path in outputs.values():
        print(f"{Fore.GREEN}✓ {path}{Style.RESET_ALL}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
