"""Exception types shared across the package."""


class SdeBayesError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(SdeBayesError, ValueError):
    """A precondition on an argument was violated."""


class SimulationDivergedError(SdeBayesError):
    """The Euler-Maruyama state became non-finite.

    Carries the step index at which the overflow was detected.
    """

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"simulation diverged at step {step}")


class DegenerateCovariateError(SdeBayesError):
    """A covariate column has zero empirical variance and cannot be standardized."""


class DiffusionDegenerateError(SdeBayesError):
    """|sigma(x)| fell below the sigma floor where a division by sigma^2 is required."""


class NumericalUnderflowError(SdeBayesError):
    """Every Monte-Carlo log-weight was -inf; reports the maximum log-weight seen."""

    def __init__(self, max_log_weight: float):
        self.max_log_weight = max_log_weight
        super().__init__(
            f"all Monte-Carlo weights underflowed (max log-weight {max_log_weight})"
        )


class SeriesParseError(SdeBayesError, ValueError):
    """A market-data CSV failed validation; carries the offending row number."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
