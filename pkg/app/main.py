from typing import List, Optional
import logging
import sys

from app.cli.commands import COMMANDS
from app.cli.parser import build_parser
from app.config import settings
from app.services.exceptions import ArgumentError, EmptyGroundTruthError, ToolkitError
from app.services.manifest import load_manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_EMPTY_TRUTH = 3
EXIT_INTERNAL = 4


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else settings.LOG_LEVEL
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True,
    )


def run(argv: List[str]) -> int:
    """Parse and dispatch one command line; errors propagate"""
    args = build_parser().parse_args(argv)
    args.argv = list(argv)
    configure_logging(args.verbose, args.quiet)

    if args.command == "replay":
        recorded = load_manifest(args.manifest)
        if recorded.command == "replay" or not recorded.argv:
            raise ArgumentError(f"{args.manifest} does not record a replayable command")
        logger.info(f"Replaying: {' '.join(recorded.argv)}")
        return run(recorded.argv)

    return COMMANDS[args.command](args)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; maps exceptions to exit codes"""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except SystemExit as exc:
        # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except EmptyGroundTruthError as exc:
        logger.error(f"Empty ground truth: {exc}")
        return EXIT_EMPTY_TRUTH
    except ToolkitError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE
    except Exception as exc:
        logger.error(f"Unhandled exception: {exc}", exc_info=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
