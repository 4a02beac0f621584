"""Exception types shared across the package.

The CLI maps :class:`ConfigError` to exit code 2 and every other failure
to exit code 1.
"""


class RiskBanditError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(RiskBanditError, ValueError):
    """An operation was called with inputs outside its mathematical domain."""


class ConfigError(RiskBanditError, ValueError):
    """A configuration value violates an invariant (bad alpha, K < 2, ...)."""


class DataError(RiskBanditError, ValueError):
    """Observed data violates a declared contract (reward above bound, ...)."""


class ReplicationError(RiskBanditError, RuntimeError):
    """A replication failed; carries the replication index for diagnostics."""

    def __init__(self, replication: int, message: str):
        super().__init__(f"replication {replication}: {message}")
        self.replication = replication
        self._message = message

    def __reduce__(self):
        # default exception pickling replays args, which no longer match
        # __init__; needed so failures cross process-pool boundaries intact
        return (ReplicationError, (self.replication, self._message))
