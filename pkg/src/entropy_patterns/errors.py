"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI: config errors exit 1, data errors exit 2,
pipeline invariant violations exit 3.
"""


class PatternToolError(Exception):
    """Base class for all toolkit errors; subclasses set the CLI exit code."""

    exit_code = 2


class ConfigError(PatternToolError):
    """Invalid configuration value, unknown key, or unparsable config file."""

    exit_code = 1


class PipelineInvariantError(PatternToolError):
    """A guaranteed pipeline invariant failed (e.g. library verification)."""

    exit_code = 3


# --- market data -----------------------------------------------------------

class MalformedLineError(PatternToolError):
    def __init__(self, lineno: int, content: str, reason: str = ""):
        self.lineno = lineno
        self.content = content
        msg = f"line {lineno}: malformed record {content!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class NonMonotonicTimestampError(PatternToolError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class InvalidBarError(PatternToolError):
    def __init__(self, lineno: int, content: str):
        self.lineno = lineno
        self.content = content
        super().__init__(f"line {lineno}: OHLC invariant violated in {content!r}")


class IntervalMismatchError(PatternToolError):
    pass


# --- pattern extraction ----------------------------------------------------

class SeriesTooShortError(PatternToolError):
    pass


class WrongWindowLengthError(PatternToolError):
    pass


# --- scoring ---------------------------------------------------------------

class NotADistributionError(PatternToolError):
    def __init__(self, message: str, total: float | None = None):
        self.total = total
        super().__init__(message)


class DimensionMismatchError(PatternToolError):
    pass


class KTooLargeError(PatternToolError):
    pass


class EmptyInputError(PatternToolError):
    pass


# --- filtering -------------------------------------------------------------

class UnsortedInputError(PipelineInvariantError):
    pass


# --- baselines -------------------------------------------------------------

class TooFewPointsError(PatternToolError):
    pass


class SingularCovarianceError(PatternToolError):
    def __init__(self, component: int):
        self.component = component
        super().__init__(
            f"covariance of component {component} is singular after ridge regularization"
        )


# --- backtest --------------------------------------------------------------

class EmptyLibraryError(PatternToolError):
    pass


class LibraryTrainOverlapError(PatternToolError):
    pass


# --- report ----------------------------------------------------------------

class EmptySideError(PatternToolError):
    pass


class EmptySeriesError(PatternToolError):
    pass


# --- cli -------------------------------------------------------------------

class MissingArtifactError(PatternToolError):
    """A stage was invoked before the stage that produces its input."""

    def __init__(self, path, stage: str):
        self.path = str(path)
        self.stage = stage
        super().__init__(
            f"missing artifact {self.path!r}; run the {stage!r} stage first"
        )
