"""
censorlab command line.

Usage:
    python src/main.py verify-censoring --config config/experiments/verify_p3.json --out results/
    python src/main.py mc --config config/experiments/mc_torus.json --size 16 --beta 0 --schedule random

Exit codes: 0 all certified, 1 violation found, 2 configuration error or
refusal, 3 budget exceeded.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

sys.path.append(str(Path(__file__).parent))
from experiments.common import EXIT_BUDGET, EXIT_CONFIG, EXIT_VIOLATION
from experiments.compare_schedules import cmd_compare_schedules
from experiments.config import ExperimentConfig
from experiments.contraction import cmd_contraction
from experiments.hanging import cmd_hanging
from experiments.mc import apply_overrides, cmd_mc
from experiments.reports import ReportWriter
from experiments.verify_censoring import cmd_verify_censoring
from utils.config import PROJECT_ROOT, setting
from utils.exceptions import BudgetExceededError, CensorLabError, OrderViolationError
from utils.logger import set_level, setup_logger

logger = setup_logger('censorlab')

COMMANDS = {
    'verify-censoring': cmd_verify_censoring,
    'compare-schedules': cmd_compare_schedules,
    'contraction': cmd_contraction,
    'hanging': cmd_hanging,
    'mc': cmd_mc,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='censorlab',
                                     description='Exact and Monte Carlo checks of censored Glauber dynamics')
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument('--config', required=True, help='experiment config (JSON)')
        cmd.add_argument('--seed', type=int, help='first seed; the seed count of the config is kept')
        cmd.add_argument('--out', help='existing output directory')
        cmd.add_argument('--log-level', help='DEBUG, INFO, WARNING or ERROR')
        if name == 'mc':
            cmd.add_argument('--size', type=int, help='torus side N, tree depth, or number of sites')
            cmd.add_argument('--beta', type=float, help='Ising inverse temperature')
            cmd.add_argument('--schedule', help='random | systematic | alternating')
            cmd.add_argument('--seeds', type=int, help='number of seeds')
            cmd.add_argument('--max-steps', type=int, help='coalescence step cap')
    return parser


def _output_dir(args: argparse.Namespace, config: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    if config.output is not None:
        return config.output
    default = PROJECT_ROOT / setting('output.directory', 'results') / args.command
    default.mkdir(parents=True, exist_ok=True)
    return default


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        config = ExperimentConfig.from_file(args.config).with_overrides(seed=args.seed)
        if config.command is not None and config.command != args.command:
            logger.error(f"config {args.config} is for {config.command}, not {args.command}")
            return EXIT_CONFIG
        if args.command == 'mc':
            apply_overrides(config, args.size, args.beta, args.schedule, args.seeds, args.max_steps)
        writer = ReportWriter(_output_dir(args, config), record_timing=config.record_timing)
        code = COMMANDS[args.command](config, writer)
    except OrderViolationError as e:
        logger.error(str(e))
        return EXIT_VIOLATION
    except BudgetExceededError as e:
        logger.error(str(e))
        return EXIT_BUDGET
    except CensorLabError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_CONFIG
    logger.info(f"{args.command} finished with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
