"""Console logging for the ``sim`` runs.

Records go to stderr so that anything a command prints on stdout stays clean.
Each line carries the milliseconds elapsed since the package was imported,
which is the useful clock for long trial loops.
"""

import logging
import sys

LOGGER_NAME = "contact-fronts"
LOG_FORMAT = "%(relativeCreated)8.0fms %(levelname)-7s %(message)s"


def setup_logger(name=LOGGER_NAME, level=logging.INFO):
    """Return the named logger with one stderr handler at ``level``."""
    log = logging.getLogger(name)
    log.setLevel(level)
    log.propagate = False

    if log.handlers:
        for handler in log.handlers:
            handler.setLevel(level)
        return log

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    log.addHandler(handler)
    return log


logger = setup_logger()
