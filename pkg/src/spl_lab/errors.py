"""Exception types shared across the package."""


class SplLabError(Exception):
    """Base class for all errors raised by spl_lab."""


class SchemaError(SplLabError, ValueError):
    """A network, blueprint or reaction-network description is malformed."""


class ContractError(SplLabError, ValueError):
    """An operation was called outside its precondition."""


class PromotionError(SplLabError):
    """A meta fixed set could not be promoted from its parents."""


class ValidationError(SplLabError):
    """A scenario file failed validation."""


class DanglingReferenceError(ValidationError):
    """A scenario references an asset that does not exist."""


class ScenarioParseError(ValidationError):
    """A scenario file is not valid JSON; carries the line and column."""

    def __init__(self, path, line: int, column: int, msg: str):
        super().__init__(f"{path}: line {line}, column {column}: {msg}")
        self.path, self.line, self.column = path, line, column


class UnknownKindError(ValidationError):
    """A scenario names an experiment kind that does not exist."""


class MissingBlockError(ValidationError):
    """A scenario lacks a block its kind requires."""


class ExperimentError(SplLabError):
    """A module error raised while running one replicate."""

    def __init__(self, replicate: int, cause: Exception):
        super().__init__(f"replicate {replicate}: {type(cause).__name__}: {cause}")
        self.replicate = replicate
        self.cause = cause
