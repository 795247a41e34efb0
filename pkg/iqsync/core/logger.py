import logging
import sys
from typing import Union

ROOT_LOGGER = "iqsync"

def setup_logger(name: str = ROOT_LOGGER, level: Union[int, str] = logging.INFO) -> logging.Logger:
    """
    Sets up a logger with standard formatting.

    Output goes to stderr so that CSV written to stdout stays clean.

    Args:
        name: Name of the logger.
        level: Logging level, numeric or a name such as "DEBUG".

    Returns:
        Configured logger instance.
    """
    logger = logging.getLogger(name)
    logger.setLevel(level.upper() if isinstance(level, str) else level)

    # Check if handlers already exist to avoid duplicates
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    return logger

def get_logger(name: str) -> logging.Logger:
    if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + "."):
        name = f"{ROOT_LOGGER}.{name}"
    return logging.getLogger(name)
