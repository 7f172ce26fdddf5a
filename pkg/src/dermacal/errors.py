"""Exception hierarchy.

Two broad families matter for the CLI exit codes: input/validation problems
(exit code 1) and analyses that are well-formed but infeasible on the given
data (exit code 2). I/O failures surface as ``OSError`` (exit code 3).
"""


class DermacalError(Exception):
    """Base class for all package errors."""


class ValidationError(DermacalError):
    """Input fails a documented precondition or schema rule."""


class DomainError(ValidationError):
    """A numeric value is outside the mathematical domain of an operation."""


class IngestError(ValidationError):
    """A data file violates the input schema; carries row/column context."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class AnalysisInfeasibleError(DermacalError):
    """The requested analysis cannot be carried out on this data."""


class InsufficientDataError(AnalysisInfeasibleError):
    """Too few observations for the requested computation."""


class SingularFitError(AnalysisInfeasibleError):
    """The least-squares design is rank deficient."""

    def __init__(self, message, rank=None):
        self.rank = rank
        super().__init__(message)


class InfeasibleSplitError(AnalysisInfeasibleError):
    """A cross-validation split cannot be formed (e.g. more folds than groups)."""


class UndefinedStatisticError(AnalysisInfeasibleError):
    """The statistic is undefined on this data (e.g. zero total variance)."""
