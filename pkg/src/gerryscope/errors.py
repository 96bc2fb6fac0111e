"""Exception types shared across the package."""

from __future__ import annotations


class GerryscopeError(Exception):
    """Base class for all package errors."""


class InfeasibleCriteriaError(GerryscopeError):
    """Sampling could not produce the requested number of valid plans."""


class DataFormatError(GerryscopeError):
    """A dataset, config, or ensemble file could not be parsed."""

    def __init__(self, path: str, message: str, line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")


class DatasetValidationError(GerryscopeError):
    """A dataset parsed cleanly but breaks graph or precinct invariants."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        lines = "; ".join(f"[{v.rule}] {v.subject}: {v.message}" for v in self.violations)
        super().__init__(f"{len(self.violations)} violation(s): {lines}")
