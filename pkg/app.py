"""
LEO Offload - Main Application

Command-line entry point for the privacy-aware LEO task-offloading simulator.

Key Features:
- PPO and DQN training on scenario files
- Evaluation of checkpoints and baselines (random, uniform, oracle)
- Parameter sweeps over task count, reliability and privacy thresholds
- Exhaustive oracle with an independent event-driven cross-check
"""

import sys
from typing import Optional, Sequence

from loguru import logger

from leo_offload.api.commands import run
from leo_offload.core.config import settings


def configure_logging(level: Optional[str] = None) -> None:
    """Replace loguru's default sink with one at the configured level."""
    logger.remove()
    logger.add(
        sys.stderr,
        level=(level or settings.log_level).upper(),
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - {message}",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main application entry point."""
    configure_logging()
    logger.info(f"🚀 LEO Offload (output root: {settings.output_root})")
    try:
        return run(argv)
    except KeyboardInterrupt:
        logger.info("Received shutdown signal")
        return 130


if __name__ == '__main__':
    sys.exit(main())
