import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
LOGGER_NAME = "iec_compression"


def _ensure_log_dir(log_dir: Path) -> None:
    if not log_dir.exists():
        log_dir.mkdir(parents=True, exist_ok=True)


def _file_handler(log_dir: Path, level: int) -> logging.FileHandler:
    _ensure_log_dir(log_dir)
    today_str = datetime.now().strftime("%Y%m%d")
    log_file = log_dir / f"{LOGGER_NAME}_{today_str}.log"

    fh = logging.FileHandler(log_file, encoding="utf-8")
    fh.setLevel(level)
    fh.setFormatter(logging.Formatter(LOG_FORMAT))
    return fh


def get_logger(name: str = LOGGER_NAME) -> logging.Logger:
    logger = logging.getLogger(name)
    if logger.handlers:
        # Already configured
        return logger

    logger.setLevel(logging.INFO)

    # Console handler on stderr; stdout carries JSON reports
    ch = logging.StreamHandler(sys.stderr)
    ch.setLevel(logging.INFO)
    ch.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(ch)

    logger.propagate = False
    return logger


def configure_logging(level: str = "INFO", log_dir: Optional[str] = None) -> logging.Logger:
    """
    Re-apply level and (optionally) attach the daily log file once the CLI
    has resolved config and flags.
    """
    numeric = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric, int):
        numeric = logging.INFO

    log = get_logger()
    log.setLevel(numeric)
    for handler in log.handlers:
        handler.setLevel(numeric)

    if log_dir:
        has_file = any(isinstance(h, logging.FileHandler) for h in log.handlers)
        if not has_file:
            log.addHandler(_file_handler(Path(log_dir), numeric))

    return log


logger = get_logger()
