"""Logging setup."""
import logging
import sys

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level_str: str = "INFO") -> None:
    """Configure stderr logging with the given level.

    Standard output carries command results only, so the handler writes to stderr.
    """
    level = getattr(logging, level_str.upper(), logging.INFO)
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # Avoid duplicate handlers on reconfiguration
    if not any(getattr(h, "_blab", False) for h in root_logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
        handler._blab = True
        root_logger.addHandler(handler)
    for handler in root_logger.handlers:
        if getattr(handler, "_blab", False):
            handler.setLevel(level)
