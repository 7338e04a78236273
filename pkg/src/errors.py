"""Exceptions raised by the pipeline.

Each error carries structured details so the CLI can emit a machine-readable
record instead of a traceback.
"""

from typing import Any, Dict


class GoiPartitionError(ValueError):
    """Base class for every error this package raises on purpose."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"error": type(self).__name__, "message": self.message}
        record.update(self.details)
        return record


class RejectedInputError(GoiPartitionError):
    """A coordinate is out of range or not finite."""


class RecordParseError(GoiPartitionError):
    """An input line could not be parsed."""


class TrajectoryValidationError(GoiPartitionError):
    """Timestamps are duplicated or not strictly increasing."""


class GeometryError(GoiPartitionError):
    pass


class PartitionError(GoiPartitionError):
    pass


class LabelingError(GoiPartitionError):
    pass


class ScenarioError(GoiPartitionError):
    pass


class OracleSizeError(GoiPartitionError):
    pass


class StageMismatchError(GoiPartitionError):
    """An artifact was produced from a different trajectory than the one supplied."""


class ConfigError(GoiPartitionError):
    pass
