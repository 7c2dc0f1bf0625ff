"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of a physical formula."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class NumericError(RuntimeError):
    """A numerical routine failed; ``diagnostics`` carries the details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class LabelingError(NumericError):
    """Adiabatic state labeling became ambiguous."""


class StepSizeError(NumericError):
    """Time step violates a stability or accuracy bound."""


class StatisticsError(RuntimeError):
    """Not enough data for a statistical estimate, or a fit failed."""
