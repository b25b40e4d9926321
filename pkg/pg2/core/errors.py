from typing import Optional


class PG2Error(Exception):
    """Base error; exit_code is what the CLI returns for it"""

    exit_code = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class UsageError(PG2Error):
    exit_code = 1


class ConfigError(UsageError, ValueError):
    """Run config violates a field invariant"""


class ShapeError(UsageError, ValueError):
    """Tensor shapes disagree with each other or with the model config"""


class CheckpointMismatchError(UsageError):
    def __init__(self, detail: str = "Checkpoint is incompatible with the current config"):
        super().__init__(detail)


class DataError(PG2Error, ValueError):
    exit_code = 2


class MetricError(PG2Error, ValueError):
    exit_code = 2


class NumericalError(PG2Error, ArithmeticError):
    exit_code = 3

    def __init__(self, detail: str, iteration: Optional[int] = None, dump_path: Optional[str] = None):
        super().__init__(detail)
        self.iteration = iteration
        self.dump_path = dump_path


class RangeError(UsageError, ValueError):
    """Value outside the range an operation accepts"""
