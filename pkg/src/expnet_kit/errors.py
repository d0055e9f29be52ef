"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: anything that means "your input file or
record is bad" derives from ValidationError or ParseError (exit 1); everything
else is a runtime failure (exit 2).
"""


class ToolkitError(Exception):
    """Base class for all errors raised by expnet_kit."""


class ParseError(ToolkitError):
    """A file could not be decoded into records (bad syntax, wrong keys, wrong version)."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(ToolkitError):
    """A record was decoded but violates a named invariant."""

    def __init__(self, invariant: str, message: str, *, example_id: str | None = None):
        self.invariant = invariant
        self.example_id = example_id
        prefix = f"[{invariant}]"
        if example_id is not None:
            prefix += f" example {example_id!r}"
        super().__init__(f"{prefix}: {message}")


class DimensionError(ValidationError):
    """Shapes inside a record disagree with the record's own declared sizes."""

    def __init__(self, message: str, *, example_id: str | None = None):
        super().__init__("dimension-mismatch", message, example_id=example_id)


class ExperimentSpecError(ValidationError):
    """An experiment description is internally inconsistent or unresolvable."""

    def __init__(self, message: str):
        super().__init__("experiment-spec", message)


class UndefinedMetricError(ToolkitError):
    """A metric has no defined value on this input (e.g. AUROC with one class)."""


class TrainingDivergedError(ToolkitError):
    """Training hit a non-finite loss."""

    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
