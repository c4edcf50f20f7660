"""Exception hierarchy shared by all modules."""


class EvidenceError(Exception):
    """Base class for errors raised by evidencekit."""


class DomainError(EvidenceError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class InfeasibleError(DomainError):
    """Requested marginals and correlation admit no joint distribution."""


class DegenerateVarianceError(DomainError):
    """A failure-indicator column is constant, so its correlation is undefined."""


class InsufficientDataError(DomainError):
    """A contingency table has a zero expected count; collect more samples."""


class FormatError(EvidenceError, ValueError):
    """Malformed input file. Carries the 1-based line and column when known."""

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class TrainingDivergedError(EvidenceError, RuntimeError):
    """Training produced a non-finite loss."""
