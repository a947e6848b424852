"""Train the event detector, run scenarios and solve islanding problems."""

import logging
import sys
from dataclasses import dataclass
from typing import Literal, Optional, Union

from simple_parsing import ArgumentParser, ConflictResolution

from .errors import GridIsleError
from .scripts import Dispatch, Run, Solve, Train

logger = logging.getLogger(__name__)


@dataclass
class Main:
    """Routes to the subcommands."""

    command: Union[Train, Run, Solve, Dispatch]

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    """The log level to use."""

    def execute(self):
        """Run the script."""
        logging.basicConfig(level=self.log_level, format="[%(levelname)s] %(message)s")
        self.command.execute()


def main(args: Optional[list[str]] = None) -> int:
    """Entry point for the CLI; returns the process exit code."""
    parser = ArgumentParser(conflict_resolution=ConflictResolution.EXPLICIT)
    parser.add_arguments(Main, dest="prog")
    args = parser.parse_args(args=args)
    prog: Main = args.prog
    try:
        prog.execute()
    except GridIsleError as e:
        logger.error(str(e))
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
