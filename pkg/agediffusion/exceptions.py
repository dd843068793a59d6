"""
Error hierarchy shared by the library and the command line.

Each error carries the process exit code the CLI returns for it:
2 for configuration problems, 3 for bad input data and 4 for internal
invariant violations.
"""


class AgeDiffusionError(Exception):
    """Base class of every error raised on purpose by agediffusion"""

    exit_code = 3


class ConfigError(AgeDiffusionError, ValueError):
    """Invalid parameter, unknown config key or missing input file"""

    exit_code = 2


class DataError(AgeDiffusionError, ValueError):
    """Input data that cannot be processed"""

    exit_code = 3


class EdgeListParseError(DataError):
    """Malformed edge-list line"""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class InvariantViolation(AgeDiffusionError, AssertionError):
    """An internal invariant does not hold"""

    exit_code = 4


class StageError(AgeDiffusionError):
    """
    Wraps an error raised while running a named pipeline stage.

    The exit code is inherited from the wrapped error; anything that is not
    an AgeDiffusionError counts as an internal failure.
    """

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
        if isinstance(cause, AgeDiffusionError):
            self.exit_code = cause.exit_code
        else:
            self.exit_code = InvariantViolation.exit_code
