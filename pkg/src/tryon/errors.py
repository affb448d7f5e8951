"""Exception hierarchy shared by the library and the CLI.

Each error carries the process exit code the CLI maps it to.
"""


class TryOnError(Exception):
    exit_code = 1
    kind = "error"


class ConfigError(TryOnError):
    exit_code = 2
    kind = "config"


class StageOrderError(TryOnError):
    exit_code = 3
    kind = "stage_order"

    def __init__(self, missing_stage: str, message: str):
        super().__init__(message)
        self.missing_stage = missing_stage


class DataError(TryOnError):
    exit_code = 4
    kind = "data"


class ValidationError(DataError, ValueError):
    """An attribute or config value is outside its allowed range."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ShapeError(DataError, ValueError):
    kind = "shape"


class TrainingError(TryOnError):
    """Training hit a non-finite loss."""

    kind = "training"
