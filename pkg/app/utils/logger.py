"""
Logging utilities for the engine
"""

import csv
import logging
import sys
from collections import deque
from typing import IO, Deque, List, Optional

import colorlog

from app.models.schemas import ProgressRecord

PROGRESS_COLUMNS = ["method", "benchmark", "trial", "generation", "best", "mean", "sigma"]

_log_level = logging.INFO


class ProgressLogger:
    """
    Collector for per-generation optimizer progress
    Keeps the most recent records in memory and optionally streams CSV rows
    """

    def __init__(self, max_records: int = 10000):
        self.records: Deque[ProgressRecord] = deque(maxlen=max_records)
        self.max_records = max_records
        self._stream: Optional[IO[str]] = None
        self._writer = None

    def attach_stream(self, stream: IO[str], write_header: bool = True):
        """Stream every subsequent record as a CSV row into `stream`"""
        self._stream = stream
        self._writer = csv.writer(stream, lineterminator="\n")
        if write_header:
            self._writer.writerow(PROGRESS_COLUMNS)

    def detach_stream(self):
        self._stream = None
        self._writer = None

    def record(self, record: ProgressRecord):
        """Store a progress record"""
        self.records.append(record)
        if self._writer is not None:
            self._writer.writerow(progress_row(record))

    def extend(self, records: List[ProgressRecord]):
        for record in records:
            self.record(record)

    def get_recent(self, limit: int = 100) -> List[ProgressRecord]:
        """Get recent records"""
        records = list(self.records)
        return records[-limit:] if limit > 0 else []

    def clear(self):
        """Clear all records"""
        self.records.clear()


def progress_row(record: ProgressRecord) -> List[str]:
    """CSV cells for one progress record; floats use repr for byte-stable output"""
    sigma = "" if record.sigma is None else repr(float(record.sigma))
    return [
        record.method,
        record.benchmark,
        str(record.trial),
        str(record.generation),
        repr(float(record.best)),
        repr(float(record.mean)),
        sigma,
    ]


# Global progress logger instance
_progress_logger = ProgressLogger()


def get_progress_logger() -> ProgressLogger:
    """Get the global progress logger instance"""
    return _progress_logger


def set_log_level(level: str):
    """Apply `level` to every logger created by setup_logger"""
    global _log_level
    _log_level = logging.getLevelName(level.upper()) if isinstance(level, str) else level
    if not isinstance(_log_level, int):
        _log_level = logging.INFO
    for name in list(logging.root.manager.loggerDict):
        if name == "app" or name.startswith("app."):
            logging.getLogger(name).setLevel(_log_level)


def setup_logger(name: str) -> logging.Logger:
    """
    Setup standard Python logger with colored formatting

    Args:
        name: Logger name (usually __name__)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    logger.setLevel(_log_level)
    logger.propagate = False

    # Diagnostics go to stderr so CLI output on stdout stays clean
    handler = logging.StreamHandler(sys.stderr)

    # Format: [TIME] LEVEL - Message
    formatter = colorlog.ColoredFormatter(
        '%(log_color)s%(asctime)s | %(levelname)-8s | %(name)s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'red,bg_white',
        },
    )
    handler.setFormatter(formatter)

    logger.addHandler(handler)

    return logger
