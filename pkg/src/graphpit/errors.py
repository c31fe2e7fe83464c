"""Exception types shared across the package.

Every error raised on a violated precondition derives from
:class:`ContractError`; the CLI maps these to exit code 3.
"""


class ContractError(ValueError):
    """An operation was called outside its contract."""


class InfeasibleError(ContractError):
    """No proper channel assignment exists for the requested channel count."""

    def __init__(self, message, concurrency=None, num_channels=None):
        super().__init__(message)
        self.concurrency = concurrency
        self.num_channels = num_channels


class UndefinedMetricError(ContractError):
    """A metric is undefined for the given input (e.g. silent reference)."""


class FormatError(ContractError):
    """A file on disk does not follow the expected layout."""
