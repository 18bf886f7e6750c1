"""Exception taxonomy shared across the package."""


class QPanelError(Exception):
    """Base class for all package errors."""


class ConfigError(QPanelError):
    """Invalid or inconsistent run configuration."""


class SchemaError(QPanelError):
    """Input file violates the expected schema."""


class MissingDataError(QPanelError):
    """Interior missing observation in the aligned panel."""

    def __init__(self, country, date):
        self.country = country
        self.date = date
        super().__init__(f"missing value for {country} at {date}")


class InsufficientDataError(QPanelError):
    """Too few observations for the requested horizon/lag structure."""


class DateRangeError(QPanelError):
    """Requested date lies outside (or degenerately on the edge of) the sample."""


class DomainError(QPanelError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(QPanelError):
    """Non-finite or numerically unusable intermediate quantity."""


class ContractError(QPanelError):
    """Operation invoked on a model variant that does not support it."""


class ChainError(QPanelError):
    """MCMC chain failure."""

    def __init__(self, message, sweep=None):
        self.sweep = sweep
        if sweep is not None:
            message = f"{message} (sweep {sweep})"
        super().__init__(message)
