import logging
import os
from typing import Optional

LOGGER_NAME = "goi_partition"
LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def get_logger() -> logging.Logger:
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.INFO)

    # Avoid duplicate handlers on re-import (tests, notebooks, restarts)
    if not logger.handlers:
        # Console handler; stdout is reserved for CLI results
        sh = logging.StreamHandler()
        sh.setLevel(logging.INFO)
        sh.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(sh)

    return logger


def attach_file_handler(path: str, level: int = logging.INFO) -> Optional[logging.Handler]:
    """Also write log records to ``path`` (used by ``main.py --log-file``)."""
    target = os.path.abspath(path)
    for handler in logger.handlers:
        if isinstance(handler, logging.FileHandler) and handler.baseFilename == target:
            return None

    os.makedirs(os.path.dirname(target) or ".", exist_ok=True)
    fh = logging.FileHandler(target)
    fh.setLevel(level)
    fh.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(fh)
    return fh


logger = get_logger()
