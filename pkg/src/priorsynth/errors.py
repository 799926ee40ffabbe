"""Exception hierarchy. Each class carries the CLI exit code of its failure class."""


class PriorSynthError(Exception):
    exit_code = 5


class ConfigError(PriorSynthError):
    """Invalid schema, workload or run configuration."""

    exit_code = 2


class DataError(PriorSynthError):
    exit_code = 3


class DomainError(DataError, ValueError):
    """A value is not a label of its attribute's domain."""


class CellRangeError(DataError, IndexError):
    """A flat cell index lies outside ``[0, N)``."""


class IngestError(DataError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class EmptyDataError(DataError):
    pass


class BudgetError(PriorSynthError):
    """Privacy ledger exceeds the configured budget."""

    exit_code = 4
