from src.app_manager import SUBCOMMANDS, ExitStatus, describe, run
from src.errors import DisplaySimError, ParseError, ValidationError
from src.scenario import load_scenario

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional


DEFAULT_SCENARIO = Path(__file__).parent / 'scenarios' / 'default.scenario'


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='tdmbacklight',
        description='Simulate a time-multiplexed directional-backlight autostereoscopic display.'
    )
    parser.add_argument('subcommand', choices=SUBCOMMANDS)
    parser.add_argument('--scenario', type=Path, default=DEFAULT_SCENARIO, help='scenario file (TOML)')
    parser.add_argument('--out', type=Path, default=None, help='artifact directory (default: from the scenario)')
    parser.add_argument('--seed', type=int, default=0, help='seed of the Monte-Carlo oracle')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for INFO, -vv for DEBUG')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    level = logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')

    if not 0 <= args.seed < 2 ** 64:
        print('error: --seed must be an unsigned 64-bit integer', file=sys.stderr)
        return ExitStatus.ERROR

    try:
        scenario = load_scenario(args.scenario)
        result = run(args.subcommand, scenario, args.out, args.seed)
    except (ParseError, ValidationError) as e:
        print(f'error: {args.scenario}: {e}', file=sys.stderr)
        return ExitStatus.ERROR
    except (OSError, DisplaySimError) as e:
        print(f'error: {e}', file=sys.stderr)
        return ExitStatus.ERROR

    for violation in result.violations:
        print(f'violation: {describe(violation)}', file=sys.stderr)
    for path in result.artifacts:
        print(path)

    return result.status


if __name__ == '__main__':
    sys.exit(main())
