"""Utilities package"""
from .logger import setup_logger, get_progress_logger, set_log_level
from .errors import (
    NeepError, AlphabetError, UsageError, ConfigurationError, IngestionError,
    GeneParseError, UnknownNameError, InvariantViolation
)
