"""Exception hierarchy shared across the package."""


class ContractError(ValueError):
    """A precondition on an operation's inputs was violated."""


class DimensionMismatch(ContractError):
    """Vectors or matrices of incompatible lengths were combined."""


class LevelRangeError(ContractError):
    """A seminorm level index outside the configured hierarchy."""


class TimeOrderError(ContractError):
    """Time arguments violate the required ordering (e.g. s <= t)."""


class ModelError(ContractError):
    """Model data is structurally invalid (non-PSD covariance, zero jump mark, ...)."""


class ModeError(ContractError):
    """Operation requires a problem mode it was not given (e.g. constant coefficient)."""


class ConfigError(Exception):
    """Configuration rejected; carries the full list of diagnostics."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class ExpressionError(ConfigError):
    """A coefficient expression failed to parse or used a disallowed symbol."""

    def __init__(self, message):
        super().__init__([message])
