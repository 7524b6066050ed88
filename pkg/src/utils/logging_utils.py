"""Logging setup shared by the command-line entry points"""

import logging

from src.config.config import LOG_FORMAT, LOG_LEVEL


def setup_logging(level=None):
    """Configure the root logger once for the whole process

    Args:
        level (str, optional): level name; defaults to LSTC_LOG_LEVEL from the environment

    Returns:
        int: the numeric level that was applied
    """
    level_name = str(level or LOG_LEVEL).upper()
    numeric_level = getattr(logging, level_name, None)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO
    logging.basicConfig(level=numeric_level, format=LOG_FORMAT)
    logging.getLogger().setLevel(numeric_level)
    # matplotlib is chatty at DEBUG
    logging.getLogger("matplotlib").setLevel(max(numeric_level, logging.WARNING))
    return numeric_level
