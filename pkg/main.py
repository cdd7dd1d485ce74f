#!/usr/bin/env python3
"""
Command-line entry point for the quantum graph toolkit.
Exit codes: 0 success, 2 invalid input, 3 numerical failure, 1 anything else.
"""

import argparse
import logging
import os
import sys
import time
from typing import List, Optional

from dotenv import load_dotenv

from commands import CommandRegistry, RunConfig, add_output_options, execute, setup_commands
from errors import EXIT_OK, handle_command_error
from utils import VERSION, format_time

logger = logging.getLogger(__name__)

_registry: Optional[CommandRegistry] = None


def build_parser() -> argparse.ArgumentParser:
    global _registry
    parser = argparse.ArgumentParser(
        prog="qgraph",
        description="Circulant vertex couplings, star-graph scattering and square-lattice band structure",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    shared = argparse.ArgumentParser(add_help=False)
    add_output_options(shared)

    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    _registry = CommandRegistry(subparsers)
    _registry.parents = [shared]
    setup_commands(_registry)
    return parser


def configure_logging(level_name: Optional[str] = None):
    level_name = (level_name or os.getenv("QGRAPH_LOG_LEVEL", "INFO")).upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


def run(config: RunConfig) -> int:
    """Dispatch one command and map its outcome to an exit code"""
    if _registry is None:
        build_parser()
    handler = _registry.handlers.get(config.command)
    if handler is None:
        logger.error(f"❌ Unknown command {config.command!r}")
        return 2

    started = time.perf_counter()
    try:
        execute(config, handler)
    except Exception as e:
        return handle_command_error(e, config.command)
    logger.info(f"✅ Command '{config.command}' finished in {format_time(time.perf_counter() - started)}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse usage errors
        return int(e.code) if e.code is not None else 0
    configure_logging(args.log_level)
    return run(RunConfig.from_namespace(args))


if __name__ == '__main__':
    sys.exit(main())
