"""Exception types shared across the lab."""


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class RegimeError(ValueError):
    """Parameters fall outside the oscillatory regime handled here."""


class ConfigurationError(ValueError):
    """A run or construction was configured inconsistently."""


class NumericalError(RuntimeError):
    """A computation lost accuracy or produced non-finite values.

    ``diagnostics`` carries whatever state was available when the failure
    was detected (last good snapshot, iteration history, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics if diagnostics is not None else {}
