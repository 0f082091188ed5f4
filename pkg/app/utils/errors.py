"""
Exception hierarchy for the NEEP engine
"""

from typing import List, Optional


class NeepError(Exception):
    """Base class for every error raised by the engine"""


class AlphabetError(NeepError):
    """Symbol name or id is not part of the active alphabet"""


class UsageError(NeepError):
    """Caller passed arguments that violate an operation's preconditions"""


class ConfigurationError(NeepError):
    """Configuration values are inconsistent (dimensions, files, sections)"""


class IngestionError(NeepError):
    """Dataset file could not be read into a Dataset"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[int] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class GeneParseError(UsageError):
    """Gene string contains a token that cannot be placed at its index"""

    def __init__(self, message: str, index: int):
        self.index = index
        super().__init__(f"{message} at index {index}")


class UnknownNameError(UsageError):
    """Unknown method or benchmark name"""

    def __init__(self, kind: str, name: str, valid: List[str], suggestions: List[str]):
        self.kind = kind
        self.name = name
        self.valid = valid
        self.suggestions = suggestions
        message = f"Unknown {kind} '{name}'. Valid {kind}s: {', '.join(valid)}"
        if suggestions:
            message += f". Did you mean: {', '.join(suggestions)}?"
        super().__init__(message)


class InvariantViolation(NeepError):
    """Internal contract broken; indicates a bug rather than bad input"""
