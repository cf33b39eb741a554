"""
Logging utilities for fsispectra.

The command-line pipeline owns one console handler and one run log file.
Both are attached to the ``fsispectra`` logger and to the ``models`` and
``utils`` package loggers, so messages from the solvers reach the same run
log as the pipeline's own messages.
"""
import logging
import os
from datetime import datetime
from typing import List, Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
PACKAGE_LOGGERS = ("models", "utils")


def _route(logger: logging.Logger, handlers: List[logging.Handler], propagate: bool = True):
    """Replace the handlers of ``logger``; the logger itself passes every level."""
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        handler.close()
    logger.setLevel(logging.DEBUG)
    for handler in handlers:
        logger.addHandler(handler)
    logger.propagate = propagate


def setup_logger(
    name: str = "fsispectra",
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    log_dir: str = "logs"
) -> logging.Logger:
    """
    Route the pipeline and package loggers to the console and a run log.

    The console shows ``log_level`` and above. The run log under
    ``log_dir`` keeps DEBUG output from the mesh, assembly, eigen and
    time-stepping modules as well. Calling this again (one pipeline per
    run directory) swaps the handlers instead of stacking them.

    Args:
        name: Pipeline logger name
        log_level: Console level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Run log name, ``fsispectra_<timestamp>.log`` when None
        log_dir: Directory of the run log, created when missing

    Returns:
        logging.Logger: The pipeline logger
    """
    os.makedirs(log_dir, exist_ok=True)
    if log_file is None:
        log_file = f"fsispectra_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
    log_path = os.path.join(log_dir, log_file)

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)
    console_handler = logging.StreamHandler()
    console_handler.setLevel(getattr(logging, log_level.upper()))
    console_handler.setFormatter(formatter)
    file_handler = logging.FileHandler(log_path, encoding="utf-8")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)

    handlers = [console_handler, file_handler]
    logger = logging.getLogger(name)
    _route(logger, handlers)
    for package in PACKAGE_LOGGERS:
        _route(logging.getLogger(package), handlers, propagate=False)

    logger.info(f"Logger initialized. Log file: {log_path}")
    return logger
