"""Setup of logging function"""

import logging

_LOGGER = None

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def logger():
    """Returns the logger instance used in this package."""
    global _LOGGER  # pylint: disable=global-statement
    _LOGGER = _LOGGER or logging.getLogger("tileheat")
    return _LOGGER


def configure(verbosity: int = 0) -> None:
    """Attach a stderr handler to the package logger.

    Only the command line front end calls this. Library users configure
    logging on their own.

    Args:
        verbosity: 0 for warnings, 1 for info, 2 or more for debug messages.
    """
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    # replaced on every call
    logger().handlers = [handler]
    logger().setLevel(level)
    logger().propagate = False
